"""Adaptive p-enrichment on the unit square with equilibrated fluxes."""
# %%
import numpy as np

from satlab.hpafem import (
    afem_loop,
    estimate,
    polynomial,
    residual_dual_norms,
    solve_hp,
    square_mesh,
)

f = polynomial("1")

# %% [markdown]
# One solve on eight triangles of degree 3.  The star estimators bound the
# localized residual norms from above.

# %%
mesh = square_mesh(2, 3)
sol = solve_hp(mesh, f)
etas = estimate(mesh, sol, f)
for a in range(mesh.n_vertices):
    r, r_breve = residual_dual_norms(mesh, sol, f, a)
    print(f"vertex {a}: eta {etas[a]:.3e}  |r_a| {r:.3e}  ratio {etas[a] / r_breve:.3f}")

# %% [markdown]
# The adaptive loop.  Errors are measured against a reference of degree
# max p + 10 on the final mesh; consecutive errors satisfy the Pythagoras
# identity because the spaces are nested.

# %%
report = afem_loop(square_mesh(2, 1), f, theta=0.5, q_rule="ceil:1/2", max_iter=6)
for s in report.steps:
    print(f"{s.iteration}: dofs {s.dofs:3d}  eta {s.estimator:.3e}  err {s.error:.3e}  "
          f"ratio {s.ratio:.3f}  marked {s.marked}")
print("max Pythagoras defect:", report.max_pythagoras_defect)
print("degrees:", np.array(report.steps[-1].degrees))
