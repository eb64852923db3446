"""Weak KAM toolkit for contact Hamiltonians on the circle.

Models, the contact flow, implicit action functions, Lax-Oleinik semigroups,
Aubry-type set estimates and turn-key experiments.
"""

from .action import (ActionTable, backward_action, backward_value, forward_action, mane_potential,
                     peierls_barrier, sup_backward)
from .errors import (BlowUpError, BracketError, ConfigurationError, ConsistencyError, ContactKamError, ModelError,
                     PreconditionError, StepSizeError)
from .estimates import SetEstimate, SetKind, projected_hausdorff
from .experiments import ExperimentReport, discount_limit, property_suite, run_e1, run_e2
from .flow import ContactState, Orbit, integrate, step
from .grid import Grid, ScalarField
from .model import (ModelKind, ModelSpec, TrigPoly, audit_assumptions, classical_quadratic, custom,
                    discounted_quadratic, e1, e2, load_model, reflected)
from .semigroup import (WeakKAMSolution, busemann_solution, conjugate_pair, is_fixed_point, lax_oleinik_backward,
                        lax_oleinik_forward, weak_kam_backward, weak_kam_forward)
from .sets import (aubry_estimate, classify_curve, graph_property_check, omega_limit, pseudograph, sigma_set,
                   strongly_static_estimate)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
