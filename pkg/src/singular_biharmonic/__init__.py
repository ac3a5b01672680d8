"""Positive radial solutions of a singular semilinear biharmonic equation.

The radial problem is studied through its Emden-Fowler ODE
``v'''' - A v'' + B v = g(v)``; the package builds the constant, periodic
and homoclinic solutions, classifies initial data and checks the results
against the original PDE.
"""
from .integrator import IntegratorConfig, Termination, Trajectory, integrate, locate_event
from .nonlinearity import (
    DomainError,
    NonlinearitySpec,
    SpecError,
    SuperlinearityError,
    eval_G,
    eval_g,
    eval_g_prime,
    eval_h,
    find_a0,
    find_b,
    parse_spec,
    validate,
)
from .ode_core import (
    LeftPositiveCone,
    ProblemConstants,
    State4,
    decay_limit,
    energy,
    greens_fixed_point_residual,
    greens_function,
    make_constants,
    rhs,
)
from .orbits import (
    Orbit,
    OrbitKind,
    OrbitNotFound,
    OrbitReport,
    SolutionClass,
    classify_solution,
    constant_orbit,
    find_periodic,
    homoclinic_by_continuation,
    homoclinic_by_tail_shooting,
    sweep_periods,
    verify_orbit,
)
from .pde import RadialProfile, asymptotics_report, inversion, pde_residual, to_radial

import types as _types

__all__ = [k for k, v in globals().items() if not k.startswith("_") and not isinstance(v, _types.ModuleType)]
