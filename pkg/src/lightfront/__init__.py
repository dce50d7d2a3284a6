"""Point-charge electrodynamics with explicit light-cone solution formulas."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    ChargeState,
    CouplingMatrix,
    EMFieldValue,
    LightFrontError,
    Mollifier,
    SingularFrontError,
    Units,
    mollifier_quadrature,
    relativistic_velocity,
)
from .kinematics import Branch, TrajectoryHistory, query, solve_lightcone_time  # noqa: F401
from .lw_fields import boosted_coulomb, larmor_power, lw_field  # noqa: F401
from .propagation import (  # noqa: F401
    FieldSample,
    InitialFieldSpec,
    SingularShell,
    evaluate_coulomb_case,
    evaluate_field,
    propagate_free_field,
    qft_toy_expectation,
    smeared_field,
)
