"""Constants, vector field, conserved energy and Green's function of
``v'''' - A v'' + B v = g(v)``."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .nonlinearity import (
    DomainError,
    NonlinearitySpec,
    SpecError,
    eval_G,
    eval_h,
    find_a0,
    find_b,
    validate,
)


class State4(NamedTuple):
    """4-jet ``(v, v', v'', v''')`` at one time."""

    v: float
    v1: float
    v2: float
    v3: float


class LeftPositiveCone(ArithmeticError):
    """Raised by :func:`rhs` when ``v <= 0`` (``g`` is undefined there)."""


class PreconditionError(ValueError):
    pass


class TailTruncationError(RuntimeError):
    pass


def _quadratic_roots(A, C):
    """Roots ``lam > mu`` of ``xi^2 - A xi + C``."""
    disc = math.sqrt(A * A - 4 * C)
    lam = 0.5 * (A + disc)
    # product form avoids cancellation in the small root
    return lam, C / lam


@dataclass(frozen=True)
class ProblemConstants:
    n: int
    A: float
    B: float
    beta: float
    a0: float
    b: float
    lambda_s: float
    mu_s: float
    lambda_d: float
    mu_d: float

    @property
    def sqrt_mu(self) -> float:
        """Slow decay rate of homoclinic tails."""
        return math.sqrt(self.mu_d)

    @property
    def sqrt_lambda(self) -> float:
        return math.sqrt(self.lambda_d)

    @property
    def half_dim(self) -> float:
        """``(n - 4)/2``, the Emden-Fowler weight exponent."""
        return (self.n - 4) / 2

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def make_constants(n: int, spec: NonlinearitySpec) -> ProblemConstants:
    if int(n) != n or n < 5:
        raise DomainError("n must be ≥ 5")
    n = int(n)
    report = validate(spec)
    if not report.ok:
        raise SpecError("invalid nonlinearity:\n" + str(report), report)
    A = (n * (n - 4) + 8) / 2
    B = n**2 * (n - 4) ** 2 / 16
    lam_s, mu_s = _quadratic_roots(A, B)
    lam_d, mu_d = _quadratic_roots(A, B - spec.beta)
    return ProblemConstants(
        n=n, A=A, B=B, beta=spec.beta,
        a0=find_a0(spec, B), b=find_b(spec, B),
        lambda_s=lam_s, mu_s=mu_s, lambda_d=lam_d, mu_d=mu_d,
    )


def make_rhs(consts: ProblemConstants, spec: NonlinearitySpec):
    """Fast closure ``f(v, v1, v2, v3) -> (v1, v2, v3, v4)`` on plain floats."""
    A, B, beta = consts.A, consts.B, spec.beta
    monos = spec.monomials

    if len(monos) == 1:
        c0, q0 = monos[0]
        if c0 == 1.0 and q0 == 3.0:
            def f(v, v1, v2, v3):
                if v <= 0:
                    raise LeftPositiveCone(v)
                return v1, v2, v3, A * v2 - (B - beta) * v + v * v * v
        else:
            def f(v, v1, v2, v3):
                if v <= 0:
                    raise LeftPositiveCone(v)
                return v1, v2, v3, A * v2 - (B - beta) * v + c0 * v**q0
    else:
        def f(v, v1, v2, v3):
            if v <= 0:
                raise LeftPositiveCone(v)
            hv = 0.0
            for c, q in monos:
                hv += c * v**q
            return v1, v2, v3, A * v2 - (B - beta) * v + hv
    return f


def rhs(consts: ProblemConstants, spec: NonlinearitySpec, s) -> State4:
    """Derivative of the state: ``(v1, v2, v3, A v2 - B v + g(v))``."""
    return State4(*make_rhs(consts, spec)(*s))


def energy(consts: ProblemConstants, spec: NonlinearitySpec, s) -> float:
    """``-v' v''' + v''^2/2 + A v'^2/2 + G(v)``; constant along solutions."""
    v, v1, v2, v3 = s
    return -v1 * v3 + 0.5 * v2 * v2 + 0.5 * consts.A * v1 * v1 + eval_G(spec, max(v, 0.0), consts.B)


def energy_array(consts, spec, states) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    v = np.clip(states[:, 0], 0.0, None)
    G = 0.5 * (spec.beta - consts.B) * v * v
    for c, q in spec.monomials:
        G = G + c * v ** (q + 1) / (q + 1)
    v1, v2, v3 = states[:, 1], states[:, 2], states[:, 3]
    return -v1 * v3 + 0.5 * v2 * v2 + 0.5 * consts.A * v1 * v1 + G


def h_array(spec: NonlinearitySpec, v) -> np.ndarray:
    v = np.clip(np.asarray(v, dtype=float), 0.0, None)
    out = np.zeros_like(v)
    for c, q in spec.monomials:
        out += c * v**q
    return out


def greens_function(consts: ProblemConstants, t, s):
    """Decaying fundamental solution of ``(d^2 - lambda_d)(d^2 - mu_d)``."""
    d = np.abs(np.asarray(t, dtype=float) - np.asarray(s, dtype=float))
    sl, sm = consts.sqrt_lambda, consts.sqrt_mu
    # e^{-sm d}/(2 sm) - e^{-sl d}/(2 sl), written to stay accurate as d -> 0
    val = (np.exp(-sm * d) / (2 * sm) - np.exp(-sl * d) / (2 * sl)) / (consts.lambda_d - consts.mu_d)
    return float(val) if np.ndim(val) == 0 else val


def _trapezoid_weights(t):
    t = np.asarray(t, dtype=float)
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def _check_decaying(v, rel=1e-8):
    v = np.asarray(v, dtype=float)
    peak = np.max(np.abs(v)) if v.size else 0.0
    if peak == 0.0:
        return 0.0
    if abs(v[0]) > rel * peak or abs(v[-1]) > rel * peak:
        raise PreconditionError(
            f"profile does not decay at the window ends: "
            f"|v(ends)|/max = {max(abs(v[0]), abs(v[-1])) / peak:.3e} > {rel:g}"
        )
    return peak


def greens_fixed_point_residual(consts, spec, t, v) -> float:
    """``sup_t |v(t) - int G(t, s) h(v(s)) ds|`` with trapezoid quadrature."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if _check_decaying(v) == 0.0:
        return 0.0
    w = _trapezoid_weights(t) * h_array(spec, v)
    K = greens_function(consts, t[:, None], t[None, :])
    return float(np.max(np.abs(v - K @ w)))


def decay_limit(consts, spec, t, v, tail_fraction: float = 0.01) -> float:
    """``lim_{t->inf} e^{sqrt(mu) t} v(t)`` from the Green's representation."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if _check_decaying(v) == 0.0:
        return 0.0
    sm = consts.sqrt_mu
    integrand = np.exp(sm * t) * h_array(spec, v)
    w = _trapezoid_weights(t)
    total = float(np.sum(w * integrand))
    # missing mass beyond the grid, assuming the local exponential rate continues
    tail = 0.0
    for i, j in ((0, 1), (-1, -2)):
        f0, f1 = integrand[i], integrand[j]
        if f0 > 0 and f1 > f0:
            rate = math.log(f1 / f0) / abs(t[j] - t[i])
            tail += f0 / rate
        elif f0 > 0:
            tail = math.inf
    if total <= 0 or tail > tail_fraction * abs(total):
        raise TailTruncationError(
            f"decay integral not converged: tail estimate {tail:.3e} vs total {total:.3e}"
        )
    return total / ((consts.lambda_d - consts.mu_d) * 2 * sm)
