"""Sub-symmetries of differential systems: invariance checks, decoupling and conservation-law deformation."""

from .expr import (Int, ParseError, SubsymError, UnknownSymbolError, UnsupportedForm, denominators,
                   diff_partial, equal, is_zero, normalize, numerator, parse, to_text)
from .jet import (EMPTY, JetContext, MultiIndex, TruncationOverflow, adjoint_apply, total_derivative,
                  total_derivative_multi)
from .fields import EvoField, FlowError, PointField, apply, canonicalize, commutator, flow_truncated
from .systems import (DiffSystem, PointMap, ReductionError, SingularJacobian, SubSystem,
                      decompose_on_ideal, eval_subsystem, make_monic, restrict, transform_system)
from .invariance import (InvarianceReport, check_subsymmetry, check_subsystem_symmetry, check_symmetry,
                         classify, determining_equations, solve_linear_params)
from .decoupling import (Ansatz, DecouplingCertificate, catalog_map, decouple_pipeline,
                         detect_decouplable, is_decoupled, verify_straightening)
from .conservation import (ConsLaw, NonFunctionFluxes, NotAConservationLaw, NotASubsymmetry,
                           RankDeficient, deform, frechet_system, gauge_field, inverse_deform,
                           is_trivial, same_law, telegraph_catalog, verify_cl)
from .fileformat import FormatError, load_path, loads

__version__ = "0.1.0"
