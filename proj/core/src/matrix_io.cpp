#include "orthant/matrix_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "orthant/error.hpp"

namespace orthant::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary matrix I/O assumes a little-endian host");

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

Eigen::MatrixXd read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string tok = trim(cell);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw Error(ErrorCode::Io, "CSV line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::Io, "CSV line " + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

Eigen::MatrixXd read_csv(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in);
  return read_csv(in);
}

void write_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j));
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path, std::ios::out | std::ios::trunc);
  write_csv(out, m);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Eigen::MatrixXd read_binary(std::istream& in) {
  char magic[8];
  std::uint32_t rows = 0, cols = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kBinaryMagic, 8) != 0)
    throw Error(ErrorCode::Io, "missing GORTHANT magic");
  if (!in.read(reinterpret_cast<char*>(&rows), 4) || !in.read(reinterpret_cast<char*>(&cols), 4))
    throw Error(ErrorCode::Io, "truncated binary header");
  Eigen::MatrixXd m(rows, cols);
  const auto bytes = static_cast<std::streamsize>(sizeof(double) * rows * cols);
  if (bytes > 0 && !in.read(reinterpret_cast<char*>(m.data()), bytes))
    throw Error(ErrorCode::Io, "truncated binary payload");
  return m;
}

Eigen::MatrixXd read_binary(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_binary(in);
}

void write_binary(std::ostream& out, const Eigen::MatrixXd& m) {
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto cols = static_cast<std::uint32_t>(m.cols());
  out.write(kBinaryMagic, 8);
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void write_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path, std::ios::out | std::ios::binary | std::ios::trunc);
  write_binary(out, m);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  char magic[8] = {};
  {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    in.read(magic, 8);
  }
  if (std::memcmp(magic, kBinaryMagic, 8) == 0) return read_binary(path);
  return read_csv(path);
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  if (path.extension() == ".bin")
    write_binary(path, m);
  else
    write_csv(path, m);
}

Eigen::VectorXd read_vector(const std::filesystem::path& path) {
  const Eigen::MatrixXd m = read_matrix(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw Error(ErrorCode::Io, path.string() + " is not a vector");
}

}  // namespace orthant::io
