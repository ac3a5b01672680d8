"""Dormand-Prince 5(4) integrator for the four-dimensional first-order system.

Plain Python floats are used throughout: for a 4-vector the interpreter
beats numpy's per-call overhead by a wide margin.
"""
from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ode_core import LeftPositiveCone, energy_array, make_rhs

# Dormand & Prince (1980) tableau, FSAL
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# Hairer's continuous extension (order 4)
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

MIN_STEP = 1e-14


class StiffnessError(RuntimeError):
    """Step size fell below the underflow limit."""


class Termination(enum.Enum):
    REACHED_END = "ReachedEnd"
    EVENT = "Event"
    BLOW_UP = "BlowUp"
    LEFT_POSITIVE_CONE = "LeftPositiveCone"


class EventKind(enum.Enum):
    V_PRIME_ZERO = 1
    V_PPP_ZERO = 3
    V_ZERO = 0


@dataclass
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    blowup_threshold: float = 1e6
    max_time: float = 1e3

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "blowup_threshold", "max_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rel_tol < 1e-14:
            raise ValueError("rel_tol must be >= 1e-14")


@dataclass
class Trajectory:
    """Accepted steps of one integration run plus their dense interpolants.

    ``times`` is increasing in the direction of integration, so a backward run
    stores decreasing times; :meth:`sol` handles both.
    """

    times: list
    states: list
    dense: list = field(default_factory=list)
    termination: Termination = Termination.REACHED_END
    termination_time: float | None = None
    event_kind: EventKind | None = None

    @property
    def direction(self) -> float:
        if len(self.times) < 2:
            return 1.0
        return 1.0 if self.times[-1] > self.times[0] else -1.0

    @property
    def t_end(self) -> float:
        return self.times[-1]

    @property
    def final(self):
        return self.states[-1]

    def _segment(self, t):
        d = self.direction
        keys = self.times if d > 0 else [-x for x in self.times]
        i = bisect.bisect_right(keys, d * t) - 1
        return min(max(i, 0), len(self.dense) - 1)

    def sol(self, t: float) -> tuple:
        """Dense-output state at time ``t`` inside the integrated span."""
        if not self.dense:
            return tuple(self.states[0])
        i = self._segment(t)
        t0, h, r1, r2, r3, r4, r5 = self.dense[i]
        s = (t - t0) / h
        s1 = 1.0 - s
        return tuple(
            r1[k] + s * (r2[k] + s1 * (r3[k] + s * (r4[k] + s1 * r5[k]))) for k in range(4)
        )

    def array(self) -> np.ndarray:
        return np.column_stack([self.times, np.asarray(self.states, dtype=float)])

    def to_csv(self, path, consts, spec):
        arr = self.array()
        E = energy_array(consts, spec, arr[:, 1:])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "v", "v1", "v2", "v3", "E"])
            for row, e in zip(arr, E):
                w.writerow([f"{x:.12g}" for x in row] + [f"{e:.12g}"])


def _step(f, t, y, k1, h):
    """One Dormand-Prince step. Returns (y_new, k7, err_vector, k-stages)."""
    y0, y1, y2, y3 = y
    k = k1
    s = [y[i] + h * A21 * k[i] for i in range(4)]
    k2 = f(*s)
    s = [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in range(4)]
    k3 = f(*s)
    s = [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(4)]
    k4 = f(*s)
    s = [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in range(4)]
    k5 = f(*s)
    s = [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
         for i in range(4)]
    k6 = f(*s)
    yn = [y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
          for i in range(4)]
    k7 = f(*yn)
    err = [h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
           for i in range(4)]
    return yn, k7, err, (k1, k3, k4, k5, k6)


def _dense_coeffs(t, h, y, yn, k1, k3, k4, k5, k6, k7):
    ydiff = [yn[i] - y[i] for i in range(4)]
    bspl = [h * k1[i] - ydiff[i] for i in range(4)]
    r4 = [ydiff[i] - h * k7[i] - bspl[i] for i in range(4)]
    r5 = [h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
          for i in range(4)]
    return (t, h, list(y), ydiff, bspl, r4, r5)


def integrate(consts, spec, s0, t_span, config: IntegratorConfig | None = None,
              stop=None, f=None) -> Trajectory:
    """Adaptive integration over ``t_span = (t0, t1)`` (``t1 < t0`` runs backward).

    Stops early on blow-up (any component above ``config.blowup_threshold``),
    on ``v <= 0``, or when the optional predicate ``stop(t_prev, y_prev, t, y)``
    returns true for an accepted step.
    """
    cfg = config or IntegratorConfig()
    f = f or make_rhs(consts, spec)
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = [float(x) for x in s0]
    if not all(math.isfinite(x) for x in y):
        raise ValueError("initial state must be finite")
    if y[0] <= 0:
        raise ValueError("initial state must have v > 0")
    traj = Trajectory([t0], [tuple(y)])
    if t1 == t0:
        return traj
    d = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    thresh = cfg.blowup_threshold
    k1 = f(*y)
    # initial step guess from the derivative scale
    scale = max(max(abs(y[i]) for i in range(4)), 1.0)
    dscale = max(max(abs(k1[i]) for i in range(4)), 1e-300)
    h = min(cfg.max_step, span, 0.01 * scale / dscale, 0.01)
    h = max(h, 1e-6)
    t = t0
    err_prev = 1e-4
    while d * (t1 - t) > 0:
        if abs(t - t0) > cfg.max_time:
            break
        h = min(h, abs(t1 - t))
        if h < MIN_STEP:
            if abs(t1 - t) < MIN_STEP * 10:
                break
            raise StiffnessError(f"step size underflow at t={t}")
        hs = d * h
        try:
            yn, k7, err, ks = _step(f, t, y, k1, hs)
        except (LeftPositiveCone, OverflowError):
            # a stage left the admissible region: shrink and retry
            if h <= MIN_STEP * 16:
                traj.termination = Termination.LEFT_POSITIVE_CONE
                traj.termination_time = t
                return traj
            h *= 0.25
            continue
        en = 0.0
        for i in range(4):
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            e = abs(err[i]) / sc
            if e > en:
                en = e
        if not math.isfinite(en):
            h *= 0.25
            continue
        if en <= 1.0:
            tn = t + hs
            traj.dense.append(_dense_coeffs(t, hs, y, yn, ks[0], ks[1], ks[2], ks[3], ks[4], k7))
            traj.times.append(tn)
            traj.states.append(tuple(yn))
            y_prev, t_prev = y, t
            t, y, k1 = tn, yn, k7
            if y[0] <= 0:
                traj.termination = Termination.LEFT_POSITIVE_CONE
                traj.termination_time = t
                return traj
            if max(abs(y[0]), abs(y[1]), abs(y[2]), abs(y[3])) > thresh:
                traj.termination = Termination.BLOW_UP
                traj.termination_time = t
                return traj
            if stop is not None and stop(t_prev, y_prev, t, y):
                traj.termination = Termination.EVENT
                traj.termination_time = t
                return traj
            # PI controller (Hairer's beta = 0.04)
            fac = 0.9 * en ** -0.17 * err_prev ** 0.04 if en > 0 else 5.0
            fac = min(5.0, max(0.2, fac))
            err_prev = max(en, 1e-4)
            h = min(h * fac, cfg.max_step)
        else:
            h *= max(0.2, 0.9 * en ** -0.2)
    traj.termination = Termination.REACHED_END
    return traj


def sign_change_stop(kind: EventKind, after: float | None = None):
    """Stop predicate for the first sign change of a state component."""
    idx = kind.value

    def stop(tp, yp, t, y):
        if after is not None and (t - after) * (t - tp) <= 0:
            return False
        return (yp[idx] > 0 >= y[idx]) or (yp[idx] < 0 <= y[idx])

    return stop


def locate_event(traj: Trajectory, kind: EventKind, after: float | None = None,
                 tol: float = 1e-12) -> float | None:
    """First time beyond ``after`` (in the direction of integration) where the
    named component changes sign, bisected on the dense interpolant."""
    idx = kind.value
    d = traj.direction
    after = traj.times[0] if after is None else after
    for i, seg in enumerate(traj.dense):
        ta, tb = traj.times[i], traj.times[i + 1]
        if d * (tb - after) <= 0:
            continue
        lo = ta if d * (ta - after) > 0 else after
        ylo = traj.sol(lo)[idx] if lo != ta else traj.states[i][idx]
        yhi = traj.states[i + 1][idx]
        if ylo == 0.0:
            if lo != after:
                return lo
            # starting exactly on a zero: take the sign just after it
            lo = lo + 1e-9 * (tb - lo)
            ylo = traj.sol(lo)[idx]
        if (ylo > 0) == (yhi > 0) and yhi != 0.0:
            # interior double crossings inside a step are possible; probe the interpolant
            mids = [lo + (tb - lo) * k / 8 for k in range(1, 8)]
            vals = [traj.sol(m)[idx] for m in mids]
            found = None
            prev_t, prev_v = lo, ylo
            for m, val in zip(mids, vals):
                if (val > 0) != (prev_v > 0):
                    found = (prev_t, m, prev_v)
                    break
                prev_t, prev_v = m, val
            if found is None:
                continue
            lo, tb, ylo = found
        a, b = lo, tb
        fa = ylo
        while abs(b - a) > tol:
            m = 0.5 * (a + b)
            if m == a or m == b:
                break
            fm = traj.sol(m)[idx]
            if (fm > 0) == (fa > 0) and fm != 0.0:
                a, fa = m, fm
            else:
                b = m
        return 0.5 * (a + b)
    return None


def dopri_step(f, y, h, k1=None):
    """Single Dormand-Prince step of size ``h`` from ``y``; returns ``(y_new, f(y_new))``."""
    k1 = k1 if k1 is not None else f(*y)
    yn, k7, _, _ = _step(f, 0.0, list(y), k1, h)
    return yn, k7


def integrate_fixed(consts, spec, s0, t0: float, h: float, n_steps: int, f=None,
                    substeps: int = 1) -> np.ndarray:
    """Fixed-step Dormand-Prince (5th order) run; returns ``(n_steps+1, 4)``
    states spaced ``h`` apart, each interval taken in ``substeps`` equal steps.

    Equal steps keep the global error a smooth function of time, which matters
    when the samples are later differentiated numerically.
    """
    f = f or make_rhs(consts, spec)
    y = [float(x) for x in s0]
    out = np.empty((n_steps + 1, 4))
    out[0] = y
    k1 = f(*y)
    hs = h / substeps
    t = t0
    for j in range(n_steps):
        for _ in range(substeps):
            y, k1, _, _ = _step(f, t, y, k1, hs)
            t += hs
        out[j + 1] = y
    return out
