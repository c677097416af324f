"""Writes src/sobol_table.inc from scipy's Joe-Kuo direction numbers."""
import os
import sys

import numpy as np
import scipy

DIMS = 1024

data = np.load(os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz"))
poly, vinit = data["poly"][:DIMS], data["vinit"][:DIMS]
out = sys.argv[1] if len(sys.argv) > 1 else "src/sobol_table.inc"
with open(out, "w") as f:
    f.write("// Generated by tools/scripts/gen_sobol_table.py; do not edit.\n")
    f.write(f"constexpr int kSobolDims = {DIMS};\n")
    f.write(f"constexpr int kSobolInitLen = {vinit.shape[1]};\n")
    f.write("constexpr std::uint32_t kSobolPoly[kSobolDims] = {\n")
    for i in range(0, DIMS, 12):
        f.write("  " + ", ".join(str(int(p)) for p in poly[i:i + 12]) + ",\n")
    f.write("};\n")
    f.write("constexpr std::uint32_t kSobolVinit[kSobolDims][kSobolInitLen] = {\n")
    for row in vinit:
        f.write("  {" + ", ".join(str(int(v)) for v in row) + "},\n")
    f.write("};\n")
