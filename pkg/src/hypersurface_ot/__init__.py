"""Optimal-transport geometry of complex projective hypersurfaces."""
from .config import FORMAT_VERSION, RunConfig, Tolerances
from .errors import HypersurfaceOTError
from .projective import (BinaryHomPoly, HomPoly, Line, ProjPoint, act, bw_distance, bw_inner, bw_norm,
                         fs_distance, fs_geodesic_point, poly_from_roots, random_unitary, restrict)
from .roots import RootSet, all_roots, multiplicity_of
from .measure import AtomicMeasure, mu, mu_exact_n1, mu_sampled, pushforward_unitary
from .transport import mccann_interpolate, root_geodesic, w2_polynomial_geodesic, wq, wq_assignment, wq_lp
from .hermitian import PolyPath, QuadratureSpec, hhat, kahler_form, metric_speed_n1, path_energy
from .geodesic import GeodesicConfig, lipschitz_probe, optimize
from .condition import (alpha2, alpha4, condition_length, dist_to_delta_at, dist_to_discriminant, nu_norm,
                        p14_experiment, track_root)
from .regularity import exponent_probe, metric_speed_profile, sobolev_energy

__all__ = [name for name in dir() if not name.startswith("_")]
