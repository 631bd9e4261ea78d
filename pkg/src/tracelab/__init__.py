"""Dyadic tilings, weighted scales, traces and extensions on a periodic window."""
from .geometry import (Box, DepthExhausted, DilationParam, DyadicCube, ResolutionError,
                       SpaceTimeBox, Window, covered_by_union, dilate, intersection_measure,
                       overlap_multiplicity)
from .weights import (ConstantWeight, PowerWeight, StepPowerWeight, UnitCellWeight, Weight,
                      WeightScales, a1loc_constant, q_parameters, verify_a1_inequalities)
from .tilings import (LevelSchedule, Tiling, TilingSystem, build_admissible_system,
                      build_lj_sequence, check_admissible, select_cover)
from .functions import (GridFunction, HalfSpaceFunction, NormReport, best_l1_poly_error,
                        cell_average, delta_modulus, trace_of, weighted_sobolev_norm)
from .norms import BesovParams, besov_variable_norm, z_functional, z_functional_min
from .extension import (MollifierSpec, build_partition_g, extend_limiting, extend_smooth,
                        mollify_E_eps)

__version__ = "0.1.0"
