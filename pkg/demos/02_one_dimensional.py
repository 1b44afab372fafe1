"""The one-dimensional star constant rho_p and the element indicator."""
# %%
import time

import numpy as np

from satlab import oned

# %% [markdown]
# rho_p^2 from the O(p) fast path, the dense saddle-point system and a closed
# form that both of them reproduce.

# %%
for p in (1, 2, 10, 100):
    fast = oned.rho_squared(p)
    dense = oned.rho_squared_dense(p)
    closed = (p * (p + 1) / ((p + 2) * (p + 3))) ** 2
    print(f"p={p:4d}  fast {fast:.12f}  dense {dense:.12f}  closed {closed:.12f}")

t0 = time.perf_counter()
big = oned.rho_squared(10_000)
print(f"p=10000 in {time.perf_counter() - t0:.3f} s: {big:.10f}")

# %% [markdown]
# An independent lower bound: random search over phi plus a local polish,
# using nothing but Legendre-series arithmetic.

# %%
for p in (3, 6):
    print(p, oned.rho_by_sampling(p, n_samples=40_000) ** 2, oned.rho_squared(p))

# %% [markdown]
# The kernel recursion can be run with a shifted beta index.  That variant
# does not annihilate T, and it gives noticeably larger numbers.

# %%
v = oned.kernel_vector(10, "printed").astype(float)
print("max |v^T T| =", np.abs(v @ oned.coefficient_map(10)).max())
for p in (10, 100, 10_000):
    print(p, round(oned.rho_squared(p, "printed"), 4), round(oned.rho_squared(p), 4))

# %% [markdown]
# Element indicator: data of degree p-1, Galerkin lift of degree p+1, and the
# ratio to the exact dual norm is 1.

# %%
rng = np.random.default_rng(0)
print([round(oned.element_saturation_ratio(p, rng.standard_normal(p)), 12) for p in range(2, 9)])
