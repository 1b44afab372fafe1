"""hp-adaptive finite elements with equilibrated-flux star estimators."""
from .estimate import (
    EquilibratedFlux,
    Incompatible,
    LocalResidual,
    QRule,
    StarPatch,
    doerfler_mark,
    enrich,
    equilibrate_star,
    estimate,
    hat_values,
    local_residual,
    oscillation,
    parse_q_rule,
    patch_saturation_ratio,
    residual_dual_norms,
    star_patch,
    weighted_mean_norm,
)
from .loop import AfemReport, AfemStep, afem_loop
from .mesh import HpMesh, MeshError, crisscross_square, read_mesh, square_mesh, write_mesh
from .source import Source, manufactured, parse_source, polynomial
from .space import HpSolution, HpSpace, energy_distance, solve_hp

__all__ = [
    "AfemReport", "AfemStep", "EquilibratedFlux", "HpMesh", "HpSolution", "HpSpace",
    "Incompatible", "LocalResidual", "MeshError", "QRule", "Source", "StarPatch",
    "afem_loop", "crisscross_square", "doerfler_mark", "energy_distance", "enrich",
    "equilibrate_star", "estimate", "hat_values", "local_residual", "manufactured",
    "oscillation", "parse_q_rule", "parse_source", "patch_saturation_ratio", "polynomial",
    "read_mesh", "residual_dual_norms", "solve_hp", "square_mesh", "star_patch",
    "weighted_mean_norm", "write_mesh",
]
