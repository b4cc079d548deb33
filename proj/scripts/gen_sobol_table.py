"""Regenerate core/src/sobol_directions.inc from the Joe-Kuo (2008)
new-joe-kuo-6.21201 direction numbers shipped with scipy."""
import os
import sys

import numpy as np
import scipy

MAX_DIM = 1111

path = os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz")
data = np.load(path)
poly, vinit = data["poly"], data["vinit"]
out = sys.argv[1] if len(sys.argv) > 1 else "core/src/sobol_directions.inc"
with open(out, "w") as f:
    f.write("// Generated by scripts/gen_sobol_table.py. Do not edit.\n")
    f.write("// Joe & Kuo (2008) direction numbers, new-joe-kuo-6.21201, dimensions 2..%d.\n" % MAX_DIM)
    f.write("// {primitive polynomial (with leading and trailing bits), m_1..m_18}\n")
    for d in range(1, MAX_DIM):
        m = ", ".join(str(int(v)) for v in vinit[d])
        f.write("{%d, {%s}},\n" % (int(poly[d]), m))
