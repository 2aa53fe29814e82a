"""Twisted Zhu algebras, bimodules, fusion rules and trace functions, computed
exactly on truncated vertex operator algebras."""

from .exact import Cyclotomic, format_scalar, parse_scalar, root_of_unity, zeta
from .fusion import (AlgebraTables, BimoduleTables, DecompositionResult, TopLevelModule,
                     decompose_trace_functional, fundamental_stable_module, fusion_dimension, zero_mode)
from .instances import (build_fock_module, build_heisenberg, build_stable_untwisted_module,
                        build_twisted_fock, eta_quotient_oracle, solve_intertwiner)
from .linalg import SparseMatrix, nullspace, solve_linear
from .qseries import ModularMatrix, PuiseuxSeries, TwistPair, eisenstein, q_series_P, q_series_Q
from .trace import (c4_residual, check_vanishing_on_O, constant_term_identities, find_l2_relation, modular_sector_check,
                    sector_generators, trace_expansion, trace_qexpansion)
from .voa import IntertwinerData, TruncatedVOA, VertexModule, check_twisted_jacobi, load_voa
from .zhu import ZhuQuotient, verify_bimodule_axioms, zhu_quotient

__version__ = "0.1.0"
