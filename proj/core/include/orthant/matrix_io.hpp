#pragma once

#include <filesystem>
#include <iosfwd>

#include <Eigen/Core>

namespace orthant::io {

// Two interchange formats:
//  * CSV: headerless, one matrix row per line, comma separated, written
//    with 17 significant digits so values round-trip exactly.
//  * Binary: 8-byte magic "GORTHANT", u32 rows, u32 cols (little-endian),
//    then rows*cols little-endian f64 in column-major order.
// A vector is an n x 1 matrix; a single-row CSV is also accepted as a vector.

inline constexpr char kBinaryMagic[8] = {'G', 'O', 'R', 'T', 'H', 'A', 'N', 'T'};

Eigen::MatrixXd read_csv(std::istream& in);
Eigen::MatrixXd read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const Eigen::MatrixXd& m);
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

Eigen::MatrixXd read_binary(std::istream& in);
Eigen::MatrixXd read_binary(const std::filesystem::path& path);
void write_binary(std::ostream& out, const Eigen::MatrixXd& m);
void write_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Sniffs the magic and dispatches to the binary or CSV reader.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);
/// Binary if the extension is ".bin", CSV otherwise.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Reads a vector from either a column (n x 1) or a row (1 x n) matrix file.
Eigen::VectorXd read_vector(const std::filesystem::path& path);

}  // namespace orthant::io
