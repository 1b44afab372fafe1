"""Saturation constants on the reference triangle.

Run with ``python3 demos/01_reference_constants.py``; takes about a minute.
"""
# %% [markdown]
# Three model problems live on the reference triangle with vertices
# (-1,-1), (1,-1), (-1,1).  For each, a source of degree p is lifted into
# polynomial spaces of degree p+q and r, and the saturation constant is the
# worst ratio of the two squared energies.

# %%
import numpy as np

from satlab import reftri, tables
from satlab.reftri import Problem

# %% [markdown]
# With q = p the constants sit very close to 1, and they settle quickly as r
# grows.

# %%
for r in (16, 32, 64):
    rep = reftri.saturation_constant(Problem.P1, 4, 4, r)
    print(f"P1  p=4 q=4 r={r:3d}  C = {rep.constant:.10f}   table: {tables.lookup(1, 4, 4, r)}")

# %% [markdown]
# A small q is much less forgiving: q = p/7 at p = 14 adds only two degrees.

# %%
for problem in Problem:
    rep = reftri.saturation_constant(problem, 14, 2, 64)
    print(f"{problem.name}  p=14 q=2 r=64  C = {rep.constant:.10f}   table: {tables.lookup(problem.value, 14, 2, 64)}")

# %% [markdown]
# The worst source is returned as well.  For P1 it is a polynomial of degree
# p-1 in the orthonormal Dubiner basis; its energy in the small space is 1 by
# normalization.

# %%
rep = reftri.saturation_constant(Problem.P1, 6, 2, 32)
E_small = reftri.galerkin_energy(Problem.P1, 6, 8)
E_big = reftri.galerkin_energy(Problem.P1, 6, 32)
phi = rep.worst_phi
print("phi^T E_8 phi  =", phi @ E_small @ phi)
print("phi^T E_32 phi =", phi @ E_big @ phi, "=", rep.constant)

# %% [markdown]
# Monotone in r, never below 1.

# %%
vals = [reftri.saturation_constant(Problem.P3, 6, 3, r).constant for r in range(9, 40, 3)]
print(np.round(vals, 10))
assert all(b >= a for a, b in zip(vals, vals[1:]))
