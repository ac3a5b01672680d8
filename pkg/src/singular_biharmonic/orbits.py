"""Constant, periodic and homoclinic solutions; classification of initial data.

Every non-constant orbit is stored max-centred (maximum at ``t = 0``) on a
uniform time grid produced by fixed-step integration, and is evaluated
elsewhere through its trigonometric interpolant.  Periodic samples cover one
period; homoclinic samples cover a window wide enough for ``v`` to fall to
round-off, so the same interpolant applies.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .integrator import (
    EventKind,
    IntegratorConfig,
    Termination,
    dopri_step,
    integrate,
    integrate_fixed,
    locate_event,
    sign_change_stop,
)
from .nonlinearity import Check, DomainError, NonlinearitySpec, eval_G, eval_g_prime, parse_spec
from .ode_core import (
    LeftPositiveCone,
    PreconditionError,
    ProblemConstants,
    TailTruncationError,
    decay_limit,
    energy,
    energy_array,
    greens_fixed_point_residual,
    make_constants,
    make_rhs,
    rhs,
)

log = logging.getLogger(__name__)

C_FLOOR = 1e-8
RESIDUAL_TOL = 1e-9
SAMPLE_STEP = 0.02
SUBSTEPS = 2
#: periodic orbits have steep maxima for small ``a``; they get finer internal steps
PERIODIC_SUBSTEPS = 4
BLEND_TIME = 1.0


class OrbitKind(str, enum.Enum):
    CONSTANT = "Constant"
    PERIODIC = "Periodic"
    HOMOCLINIC = "Homoclinic"


class SolutionClass(str, enum.Enum):
    CONSTANT = "Constant"
    PERIODIC_LIKE = "PeriodicLike"
    DECAYS_TO_ZERO = "DecaysToZero"
    BLOW_UP = "BlowUp"
    LEAVES_CONE = "LeavesCone"
    INDETERMINATE = "Indeterminate"


class OrbitNotFound(RuntimeError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


@dataclass
class Orbit:
    kind: OrbitKind
    n: int
    g: str
    a: float
    c: float | None
    L: float | None
    v_max: float
    energy: float
    t: np.ndarray
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def v(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def step(self) -> float:
        n = len(self.t)
        return float(self.t[-1] - self.t[0]) / (n - 1) if n > 1 else 0.0

    @property
    def window(self) -> float:
        """Length of the interpolation period."""
        if self.kind is OrbitKind.PERIODIC:
            return float(self.L)
        return len(self.t) * self.step

    def evaluate(self, t, deriv: int = 0) -> np.ndarray:
        """``v^(deriv)(t)`` from the trigonometric interpolant of the samples."""
        t = np.asarray(t)
        if t.dtype != np.longdouble:
            t = t.astype(float)
        if self.kind is OrbitKind.CONSTANT:
            return np.full(t.shape, self.a if deriv == 0 else 0.0)
        if self.kind is OrbitKind.HOMOCLINIC:
            lo, hi = self.t[0], self.t[-1]
            if np.any((t < lo - 1e-12) | (t > hi + 1e-12)):
                raise DomainError(f"t outside the homoclinic window [{lo:g}, {hi:g}]")
        return _trig_eval(self.v, self.t[0], self.window, t, deriv)

    def sample_fn(self):
        return lambda t: self.evaluate(t)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n": self.n,
            "g": self.g,
            "a": self.a,
            "c": self.c,
            "L": self.L,
            "v_max": self.v_max,
            "energy": self.energy,
            "samples": [[float(t)] + [float(x) for x in s] for t, s in zip(self.t, self.states)],
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self, path=None, digits: int = 12) -> str:
        text = json.dumps(round_sig(self.to_dict(), digits), default=_fmt12)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "Orbit":
        samples = np.asarray(d["samples"], dtype=float).reshape(-1, 5)
        t = samples[:, 0].copy()
        if len(t) > 2:
            # undo the rounding of a uniform grid so the interpolation window is exact
            grid = np.linspace(t[0], t[-1], len(t))
            if np.max(np.abs(t - grid)) <= 1e-9 * (1 + np.max(np.abs(t))):
                t = grid
        return cls(
            kind=OrbitKind(d["kind"]), n=int(d["n"]), g=d["g"], a=d["a"], c=d.get("c"),
            L=d.get("L"), v_max=d["v_max"], energy=d["energy"],
            t=t, states=samples[:, 1:].copy(),
            diagnostics=d.get("diagnostics", {}),
        )

    @classmethod
    def from_json(cls, path) -> "Orbit":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def problem(self) -> tuple[ProblemConstants, NonlinearitySpec]:
        spec = parse_spec(self.g, self.n)
        return make_constants(self.n, spec), spec


def _fmt12(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, enum.Enum):
        return x.value
    raise TypeError(type(x))


#: JSON keys written at full precision: re-verifying an orbit differentiates
#: its samples four times, which 12-digit rounding would swamp
EXACT_KEYS = ("samples",)


def round_sig(obj, digits: int = 12, exact=EXACT_KEYS):
    """Round every float inside ``obj`` to ``digits`` significant digits,
    leaving values under the dict keys in ``exact`` untouched."""
    if isinstance(obj, dict):
        return {k: v if k in exact else round_sig(v, digits, exact) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits, exact) for v in obj]
    if isinstance(obj, (float, np.floating)) and math.isfinite(obj):
        return float(f"{float(obj):.{digits}g}")
    return obj


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def _trig_eval(samples, t0, period, t, deriv=0):
    """Evaluate the trigonometric interpolant of uniform ``samples`` at ``t``.

    The sum runs in the floating type of ``t`` (pass ``np.longdouble`` times
    to get values that are smooth below double round-off).
    """
    N = len(samples)
    coef = np.fft.rfft(samples) / N
    weight = np.full(len(coef), 2.0)
    weight[0] = 1.0
    if N % 2 == 0:
        weight[-1] = 1.0
    coef = coef * weight
    # modes below double round-off of the samples carry only noise
    keep = np.abs(coef) > 1e-16 * np.max(np.abs(coef))
    k = np.nonzero(keep)[0]
    t = np.asarray(t)
    dtype = np.longdouble if t.dtype == np.longdouble else float
    w = (2 * np.pi * k.astype(dtype)) / dtype(period)
    re = coef[keep].real.astype(dtype)
    im = coef[keep].imag.astype(dtype)
    # d^m/dt^m of (re + i im) e^{i w s}: multiply by (i w)^m
    for _ in range(deriv):
        re, im = -im * w, re * w
    flat = np.ravel(t).astype(dtype)
    # measure phases from the middle of the requested points: phase rounding
    # grows with |t - ref| and is not smooth from one point to the next
    ref = 0.5 * (flat.min() + flat.max()) if flat.size else dtype(t0)
    d = w * (ref - dtype(t0))
    cd, sd = np.cos(d), np.sin(d)
    re, im = re * cd - im * sd, re * sd + im * cd
    flat = flat - ref
    out = np.empty(flat.shape, dtype=dtype)
    for start in range(0, flat.size, 4096):
        ph = np.outer(flat[start:start + 4096], w)
        out[start:start + 4096] = np.cos(ph) @ re - np.sin(ph) @ im
    return out.reshape(t.shape)


def _smooth_step(x):
    """C-infinity step from 1 at ``x <= -1`` to 0 at ``x >= 1``, ``S(-x) = 1 - S(x)``."""
    x = np.clip(x, -1.0, 1.0)

    def f(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out

    a, b = f((1 - x) / 2), f((1 + x) / 2)
    return a / (a + b)


def _symmetric_half(states, m, n_blend):
    """Left half ending at the maximum (index ``m``) made exactly even about it.

    ``states`` must extend ``n_blend`` samples past ``m``.  Near ``m`` the run
    and its reflection are blended with a smooth weight, which removes the
    tiny mismatch a mirror would otherwise leave at the turning point.
    """
    half = states[: m + 1].copy()
    j = np.arange(m - n_blend, m + 1)
    refl = states[2 * m - j].copy()
    refl[:, 1] *= -1
    refl[:, 3] *= -1
    w = _smooth_step((j - m) / n_blend)[:, None]
    half[j] = w * states[j] + (1 - w) * refl
    half[m, 1] = half[m, 3] = 0.0
    return half


# ----------------------------------------------------------------------------
# constant solution


def constant_orbit(consts: ProblemConstants, spec: NonlinearitySpec) -> Orbit:
    a0 = consts.a0
    return Orbit(
        kind=OrbitKind.CONSTANT, n=consts.n, g=spec.to_string(), a=a0, c=0.0, L=0.0,
        v_max=a0, energy=eval_G(spec, a0, consts.B),
        t=np.array([0.0]), states=np.array([[a0, 0.0, 0.0, 0.0]]),
    )


# ----------------------------------------------------------------------------
# symmetric shooting


def _shoot(consts, spec, s0, config=None, f=None):
    """Integrate to the first zero of ``v'`` after the start.

    Returns ``(residual, t_star, trajectory)`` where the residual is ``v'''``
    at that zero, ``+inf`` on blow-up (no turning point, ``v'' -> +inf``) and
    ``-inf`` if positivity is lost first.
    """
    cfg = config or IntegratorConfig(max_time=200.0)
    stop = sign_change_stop(EventKind.V_PRIME_ZERO, after=0.0)
    traj = integrate(consts, spec, s0, (0.0, cfg.max_time), cfg, stop=stop, f=f)
    if traj.termination is Termination.EVENT:
        ts = locate_event(traj, EventKind.V_PRIME_ZERO, after=0.0)
        if ts is not None:
            return traj.sol(ts)[3], ts, traj
    if traj.termination is Termination.LEFT_POSITIVE_CONE:
        return -math.inf, None, traj
    if traj.termination is Termination.BLOW_UP:
        return math.inf, None, traj
    # ran out of time still monotone
    return (math.inf if traj.final[1] > 0 else -math.inf), None, traj


def _fixed_shoot(f, s0, h, max_steps, substeps=SUBSTEPS):
    """Fixed-step counterpart of :func:`_shoot`: runs on the grid ``k h`` up
    to the first zero of ``v'``, refined by a secant on the last partial step.

    Returns ``(residual, t_star, v_star)`` with the same sentinel convention
    (``t_star`` and ``v_star`` are ``None`` when there is no turning point).
    """
    y = tuple(float(x) for x in s0)
    hs = h / substeps
    try:
        k1 = f(*y)
        for k in range(max_steps):
            prev, kprev = y, k1
            for _ in range(substeps):
                y, k1 = dopri_step(f, y, hs, k1)
            if not all(math.isfinite(x) and abs(x) < 1e6 for x in y):
                return math.inf, None, None
            if prev[1] * y[1] <= 0 and (k > 0 or prev[1] != 0):
                break
        else:
            return (math.inf if y[1] > 0 else -math.inf), None, None
    except LeftPositiveCone:
        return -math.inf, None, None
    except OverflowError:
        return math.inf, None, None
    # secant for v'(dt) = 0 on [0, h] from the previous grid state
    a, fa = 0.0, prev[1]
    b, fb = h, y[1]
    yb = y
    for _ in range(60):
        if fb == fa:
            break
        dt = b - fb * (b - a) / (fb - fa)
        yd, _ = dopri_step(f, prev, dt, kprev)
        a, fa, b, fb, yb = b, fb, dt, yd[1], yd
        if abs(fb) <= 1e-15 * max(1.0, abs(yb[2])) or abs(b - a) < 1e-16:
            break
    return yb[3], k * h + b, yb[0]


def shoot_residual(consts, spec, a: float, c: float, config=None):
    """Residual ``v'''(t*)`` of the trajectory from the minimum ``(a, 0, c, 0)``."""
    if not 0 < a < consts.a0:
        raise DomainError(f"a={a} must lie in (0, a0={consts.a0})")
    r, ts, _ = _shoot(consts, spec, (a, 0.0, c, 0.0), config)
    return r, ts


def _bracketed_root(fun, lo, hi, flo, fhi, tol, max_iter=300):
    """Sign-change root of ``fun`` on ``[lo, hi]`` tolerating infinite values.

    Bisects while an endpoint value is infinite, switches to Illinois false
    position once both are finite; stops at ``|f| <= tol`` or when the bracket
    cannot shrink further.  Returns ``(x, fx, extra)`` for the best finite
    probe.
    """
    best = None
    side = 0
    for _ in range(max_iter):
        if math.isfinite(flo) and math.isfinite(fhi):
            x = (lo * fhi - hi * flo) / (fhi - flo)
            if not lo < x < hi:
                x = 0.5 * (lo + hi)
        else:
            x = 0.5 * (lo + hi)
        if x <= lo or x >= hi:
            break
        fx, extra = fun(x)
        if math.isfinite(fx) and (best is None or abs(fx) < abs(best[1])):
            best = (x, fx, extra)
        if math.isfinite(fx) and abs(fx) <= tol:
            break
        if fx < 0:
            lo, flo = x, fx
            if side == -1 and math.isfinite(fhi):
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1 and math.isfinite(flo):
                flo *= 0.5
            side = 1
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    return best


def _find_bracket(fun, lo, hi, probes=60):
    flo, _ = fun(lo)
    fhi, _ = fun(hi)
    if flo < 0 < fhi:
        return lo, hi, flo, fhi
    grid = np.geomspace(lo, hi, probes)
    prev = (lo, flo)
    for x in grid[1:]:
        fx, _ = fun(x)
        if prev[1] < 0 < fx:
            return prev[0], x, prev[1], fx
        prev = (x, fx)
    raise OrbitNotFound(f"no sign change of the shooting residual on [{lo:g}, {hi:g}]")


def _polish_fixed(consts, spec, seed, p0, tau0, n_half, f, max_iter=12):
    """Newton on ``(p, tau)`` so the fixed-step run from ``seed(p)`` over
    ``n_half`` steps of ``tau/n_half`` ends with ``v' = v''' = 0``.

    Returns ``(p, tau, states, residual_norm)``.
    """
    def F(p, tau):
        states = integrate_fixed(consts, spec, seed(p), 0.0, tau / n_half, n_half, f=f,
                                 substeps=PERIODIC_SUBSTEPS)
        return np.array([states[-1, 1], states[-1, 3]]), states

    p, tau = p0, tau0
    r, states = F(p, tau)
    scale = max(1.0, np.max(np.abs(states[:, 3])))
    best = (p, tau, states, np.max(np.abs(r)) / scale)
    for _ in range(max_iter):
        if best[3] < 1e-15:
            break
        dp = 1e-7 * abs(p)
        dt = 1e-7 * tau
        rp, _ = F(p + dp, tau)
        rt, _ = F(p, tau + dt)
        J = np.column_stack([(rp - r) / dp, (rt - r) / dt])
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        improved = False
        for _ in range(6):
            pn, tn = p + lam * delta[0], tau + lam * delta[1]
            if tn <= 0 or (p0 > 0 and pn <= 0):
                lam *= 0.5
                continue
            try:
                rn, sn = F(pn, tn)
            except ArithmeticError:
                lam *= 0.5
                continue
            if np.all(np.isfinite(rn)) and np.max(np.abs(rn)) < np.max(np.abs(r)):
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
        p, tau, r, states = pn, tn, rn, sn
        norm = np.max(np.abs(r)) / scale
        if norm < best[3]:
            best = (p, tau, states, norm)
    return best


def _mirror(states_half, h):
    """Half orbit ending at the maximum -> symmetric samples centred at 0.

    ``states_half[k]`` sits at ``t = (k - m) h`` with ``m = len - 1``.
    """
    m = len(states_half) - 1
    left = states_half
    right = states_half[-2::-1].copy()
    right[:, 1] *= -1
    right[:, 3] *= -1
    t = np.arange(-m, m + 1) * h
    return t, np.vstack([left, right])


def find_periodic(consts: ProblemConstants, spec: NonlinearitySpec, a: float,
                  bracket: tuple[float, float] | None = None,
                  config: IntegratorConfig | None = None,
                  sample_step: float = SAMPLE_STEP) -> Orbit:
    """Periodic solution with minimum ``a``, located by symmetric shooting on
    ``c = v''`` at the minimum."""
    if not 0 < a < consts.a0:
        raise DomainError(f"a={a} must lie in (0, a0={consts.a0})")
    cfg = config or IntegratorConfig(max_time=200.0)
    f = make_rhs(consts, spec)

    def fun(c):
        r, ts, _ = _shoot(consts, spec, (a, 0.0, c, 0.0), cfg, f=f)
        return r, ts

    lo, hi = bracket if bracket else (C_FLOOR, consts.b / consts.A)
    try:
        lo, hi, flo, fhi = _find_bracket(fun, lo, hi)
    except OrbitNotFound:
        if bracket is None:
            raise
        lo, hi, flo, fhi = _find_bracket(fun, C_FLOOR, consts.b / consts.A)
    best = _bracketed_root(fun, lo, hi, flo, fhi, RESIDUAL_TOL)
    if best is None:
        raise OrbitNotFound(f"no periodic orbit found for a={a}")
    c, res, t_star = best
    half = t_star
    n_half = max(32, int(math.ceil(half / sample_step)))
    seed = lambda cc: (a, 0.0, cc, 0.0)
    c_fix, half_fix, _, fix_res = _polish_fixed(consts, spec, seed, c, half, n_half, f)
    h = half_fix / n_half
    n_blend = max(4, min(n_half // 2, int(round(BLEND_TIME / h))))
    states = integrate_fixed(consts, spec, seed(c_fix), 0.0, h, n_half + n_blend, f=f,
                             substeps=PERIODIC_SUBSTEPS)
    t, full = _mirror(_symmetric_half(states, n_half, n_blend), h)
    # one period: drop the duplicated minimum at +L/2
    t, full = t[:-1], full[:-1]
    E = 0.5 * c_fix * c_fix + eval_G(spec, a, consts.B)
    return Orbit(
        kind=OrbitKind.PERIODIC, n=consts.n, g=spec.to_string(), a=a, c=c_fix,
        L=2 * half_fix, v_max=float(full[len(full) // 2, 0]), energy=E, t=t, states=full,
        diagnostics={
            "shoot_c": c, "shoot_residual": res, "shoot_L": 2 * t_star,
            "fixed_step_residual": fix_res, "bracket": [lo, hi],
        },
    )


def linearized_period(consts: ProblemConstants, spec: NonlinearitySpec) -> float:
    """Period of small oscillations about ``a0``.

    With ``d = e^{i w t}`` the linearisation ``d'''' - A d'' + (B - g'(a0)) d = 0``
    gives ``w^4 + A w^2 + (B - g'(a0)) = 0``.
    """
    C = consts.B - eval_g_prime(spec, consts.a0)
    w2 = 0.5 * (-consts.A + math.sqrt(consts.A**2 - 4 * C))
    return 2 * math.pi / math.sqrt(w2)


@dataclass
class SweepRow:
    a: float
    c: float | None = None
    L: float | None = None
    E: float | None = None
    v_max: float | None = None
    error: str | None = None


def sweep_periods(consts, spec, a_values, config=None, sample_step=SAMPLE_STEP):
    """One :func:`find_periodic` per ``a``; brackets are warm-started from the
    previous row and failures are recorded per row."""
    rows = []
    prev_c = None
    for a in a_values:
        bracket = None
        if prev_c is not None and a < rows[-1].a:
            # c scales roughly like a when a decreases
            bracket = (max(C_FLOOR, 0.25 * prev_c * a / rows[-1].a), min(consts.b / consts.A, 4 * prev_c))
        try:
            orb = find_periodic(consts, spec, float(a), bracket=bracket, config=config,
                                sample_step=sample_step)
        except (OrbitNotFound, DomainError, ArithmeticError) as exc:
            log.warning("sweep row a=%g failed: %s", a, exc)
            rows.append(SweepRow(a=float(a), error=str(exc)))
            continue
        rows.append(SweepRow(a=float(a), c=orb.c, L=orb.L, E=orb.energy, v_max=orb.v_max))
        prev_c = orb.c
    return rows


def periods_increasing(rows) -> bool:
    """Whether ``L`` grows as ``a`` decreases along the successful rows."""
    ok = [r for r in rows if r.error is None]
    ok.sort(key=lambda r: -r.a)
    return all(q.L > p.L for p, q in zip(ok, ok[1:]))


# ----------------------------------------------------------------------------
# homoclinic solutions


def fit_decay_slope(t, v, v_max, lo=1e-6, hi=1e-3, floor=0.0):
    """Least-squares slope of ``log v`` on ``t > 0`` where ``v/v_max`` lies in
    ``(lo, hi)`` (and ``v > floor``)."""
    t = np.asarray(t)
    v = np.asarray(v)
    sel = (t > 0) & (v > lo * v_max) & (v < hi * v_max) & (v > floor)
    if np.count_nonzero(sel) < 3:
        raise OrbitNotFound("too few samples in the decay-fit window")
    slope, icpt = np.polyfit(t[sel], np.log(v[sel]), 1)
    return float(slope), float(icpt), (float(t[sel][0]), float(t[sel][-1]))


def _homoclinic_diagnostics(consts, spec, t, states, v_max, fit_floor=0.0):
    v = states[:, 0]
    diag = {}
    slope, icpt, win = fit_decay_slope(t, v, v_max, floor=fit_floor)
    diag["decay_slope"] = slope
    diag["decay_fit_window"] = list(win)
    diag["expected_slope"] = -consts.sqrt_mu
    try:
        diag["decay_limit"] = decay_limit(consts, spec, t, v)
    except Exception as exc:  # diagnostics only
        diag["decay_limit_error"] = str(exc)
    return diag


def _pad_with_linear_tail(consts, t_seed, seed_state, h, t_far):
    """Samples of the two-mode linear solution matching ``seed_state`` at
    ``t_seed``, on ``t_seed - k h`` for ``k = K..1`` reaching below ``-t_far``."""
    sm, sl = consts.sqrt_mu, consts.sqrt_lambda
    v, v1 = seed_state[0], seed_state[1]
    # solve alpha + gamma = v, sm alpha + sl gamma = v1
    gamma = (v1 - sm * v) / (sl - sm)
    alpha = v - gamma
    K = max(0, int(math.ceil((t_seed + t_far) / h)))
    dt = -np.arange(K, 0, -1) * h
    es, el = np.exp(sm * dt), np.exp(sl * dt)
    return np.column_stack([
        alpha * es + gamma * el,
        sm * alpha * es + sl * gamma * el,
        sm**2 * alpha * es + sl**2 * gamma * el,
        sm**3 * alpha * es + sl**3 * gamma * el,
    ])


def homoclinic_by_tail_shooting(consts: ProblemConstants, spec: NonlinearitySpec,
                                epsilon: float = 9e-4, config=None,
                                sample_step: float = SAMPLE_STEP,
                                far_level: float = 1e-13) -> Orbit:
    """Shoot from the two-dimensional unstable manifold of 0 at amplitude
    ``epsilon`` on the mode ratio ``theta`` until the first maximum is a
    symmetry point, then mirror.

    The fast-mode share of the seed scales like
    ``epsilon^(sqrt(lambda)/sqrt(mu) - 1)`` and has to stay well above round-off,
    hence the default amplitude near the top of the admissible range.
    """
    if not 1e-8 < epsilon < 1e-3:
        raise DomainError("epsilon must lie in (1e-8, 1e-3)")
    sm, sl = consts.sqrt_mu, consts.sqrt_lambda
    slow = np.array([1.0, sm, sm**2, sm**3])
    fast = np.array([1.0, sl, sl**2, sl**3])
    seed = lambda th: tuple(epsilon * (slow + th * fast))
    cfg = config or IntegratorConfig(max_time=200.0)
    f = make_rhs(consts, spec)

    # residuals are divided by v at the turning point: runs that turn early at
    # amplitude ~epsilon have a tiny third derivative without being near the root
    def fun(th):
        r, ts, traj = _shoot(consts, spec, seed(th), cfg, f=f)
        return (r / traj.sol(ts)[0] if ts is not None else r), ts

    # below -(sqrt(mu)/sqrt(lambda))^3 some derivative of the seed is already
    # negative and the run turns at once, giving spurious roots
    lo, hi = -0.5 * (sm / sl) ** 3, 10.0
    flo, _ = fun(lo)
    fhi, _ = fun(hi)
    if not flo < 0 < fhi:
        grid = np.concatenate([lo * np.geomspace(1.0, 1e-14, 29), [0.0], np.geomspace(1e-14, hi, 31)])
        vals = [fun(x)[0] for x in grid]
        for (x0, f0), (x1, f1) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
            if f0 < 0 < f1:
                lo, hi, flo, fhi = x0, x1, f0, f1
                break
        else:
            raise OrbitNotFound("no bracket for theta in [-10, 10]; try a smaller epsilon")
    best = _bracketed_root(fun, lo, hi, flo, fhi, 0.0)
    if best is None:
        raise OrbitNotFound("tail shooting failed")
    theta, res, tau = best
    # redo the shooting on the sampling grid itself so the turning point of
    # the sampled run falls exactly on a grid node
    n_half = max(32, int(math.ceil(tau / sample_step)))
    h = tau / n_half
    for attempt in range(6):
        def gfun(th):
            r, ts, vs = _fixed_shoot(f, seed(th), h, 2 * n_half)
            return (r / vs if ts is not None else r), ts
        glo, glo_t = gfun(lo)
        ghi, ghi_t = gfun(hi)
        if not glo < 0 < ghi:
            raise OrbitNotFound("fixed-step shooting lost the theta bracket")
        best = _bracketed_root(gfun, lo, hi, glo, ghi, 0.0)
        if best is None:
            raise OrbitNotFound("fixed-step tail shooting failed")
        theta, res, tau = best
        log.debug("grid shooting: theta=%r res=%r tau=%r grid=%r", theta, res, tau, n_half * h)
        if abs(tau - n_half * h) <= 1e-13 * tau or attempt == 5:
            break
        h = tau / n_half
    n_blend = max(4, min(n_half // 2, int(round(BLEND_TIME / h))))
    raw = integrate_fixed(consts, spec, seed(theta), 0.0, h, n_half + n_blend, f=f,
                          substeps=SUBSTEPS)
    states = _symmetric_half(raw, n_half, n_blend)
    tau_f, theta_f = n_half * h, theta
    fix_res = float(np.max(np.abs(raw[n_half, [1, 3]])))
    v_max = float(states[-1, 0])
    # linear tail down to round-off level
    t_far = tau_f + math.log(epsilon / (far_level * v_max)) / sm
    pad = _pad_with_linear_tail(consts, -tau_f, states[0], h, t_far)
    half = np.vstack([pad, states])
    t, full = _mirror(half, h)
    diag = {"theta": theta_f, "shoot_residual": res, "turning_point_mismatch": fix_res,
            "epsilon": epsilon, "seed_time": -tau_f}
    diag.update(_homoclinic_diagnostics(consts, spec, t, full, v_max))
    return Orbit(
        kind=OrbitKind.HOMOCLINIC, n=consts.n, g=spec.to_string(), a=0.0, c=None, L=None,
        v_max=v_max, energy=float(np.median(energy_array(consts, spec, full[np.abs(t) < tau_f]))),
        t=t, states=full, diagnostics=diag,
    )


def default_continuation_sequence(a0: float, a_min_rel: float = 1e-6, per_decade: int = 2):
    k = int(round(-math.log10(a_min_rel) * per_decade))
    return [a0 * 10 ** (-(i / per_decade)) for i in range(1, k + 1)]


def homoclinic_by_continuation(consts: ProblemConstants, spec: NonlinearitySpec,
                               a_seq=None, window: float = 6.0, tol: float = 1e-6,
                               config=None, sample_step: float = SAMPLE_STEP,
                               far_level: float = 1e-13) -> Orbit:
    """Homoclinic as the limit of max-centred periodic orbits with ``a -> 0``.

    Convergence is declared when two successive orbits differ by less than
    ``tol`` in sup norm on ``[-W, W]``, ``W = min(window, half periods)``.
    The distance to the limit shrinks only linearly in ``a``, and shooting
    from the minimum loses accuracy below ``a ~ 1e-6 a0`` (there ``v''(0)``
    sits within round-off of ``mu a``), so gaps much below ``1e-6`` are not
    reachable in double precision.
    Beyond the region where the last orbit is still homoclinic-like
    (``v > 100 a``) it is blended into an exponential with the fitted rate.
    """
    a_seq = list(a_seq) if a_seq is not None else default_continuation_sequence(consts.a0)
    if any(not 0 < a < consts.a0 for a in a_seq) or any(y >= x for x, y in zip(a_seq, a_seq[1:])):
        raise DomainError("a_seq must be decreasing inside (0, a0)")
    prev = None
    gap = math.inf
    history = []
    bracket = None
    prev_a = None
    for a in a_seq:
        if bracket is not None:
            scale = a / prev_a
            bracket = (max(C_FLOOR, bracket[0] * scale), bracket[1] * scale * 1.5)
        orb = find_periodic(consts, spec, a, bracket=bracket, config=config, sample_step=sample_step)
        # c/a varies slowly along the family
        bracket = (max(C_FLOOR, 0.5 * orb.c), orb.c)
        prev_a = a
        if prev is not None:
            W = min(window, prev.L / 2, orb.L / 2)
            grid = np.linspace(-W, W, 1201)
            gap = float(np.max(np.abs(orb.evaluate(grid) - prev.evaluate(grid))))
            history.append({"a": a, "L": orb.L, "gap": gap})
            if gap < tol:
                break
        else:
            history.append({"a": a, "L": orb.L, "gap": None})
        prev = orb
    else:
        raise OrbitNotFound(f"continuation did not converge; last sup-norm gap {gap:.3e}", gap=gap)
    if orb.v_max < consts.a0:
        raise OrbitNotFound(f"limit profile has v_max = {orb.v_max:.6g} below a0 = {consts.a0:.6g}", gap=gap)
    # keep the homoclinic-like core of the last orbit, t >= 0 side
    h = orb.step
    t, st = orb.t, orb.states
    right = t >= 0
    tr, sr = t[right], st[right]
    level = max(100 * orb.a, 1e-300)
    core = sr[:, 0] > level
    k_end = int(np.argmin(core)) if not np.all(core) else len(core)
    tr, sr = tr[:k_end], sr[:k_end]
    slope, icpt, win = fit_decay_slope(tr, sr[:, 0], orb.v_max, floor=level)
    rate = -slope
    t_far = math.log(sr[-1, 0] / (far_level * orb.v_max)) / rate
    K = int(math.ceil(t_far / h))
    t_all = np.concatenate([tr, tr[-1] + h * np.arange(1, K + 1)])
    ev = np.exp(icpt + slope * t_all)
    fitted = np.column_stack([ev, slope * ev, slope**2 * ev, slope**3 * ev])
    right_states = fitted.copy()
    right_states[:k_end] = sr
    # hand over to the fitted exponential smoothly: a hard splice would ring
    # through the whole trigonometric interpolant
    n_b = max(4, min(k_end // 2, int(round(2 * BLEND_TIME / h))))
    j = np.arange(k_end - n_b, k_end)
    w = _smooth_step(2 * (j - (k_end - n_b)) / n_b - 1.0)[:, None]
    right_states[j] = w * sr[j] + (1 - w) * fitted[j]
    # mirror into a symmetric profile
    left = right_states[:0:-1].copy()
    left[:, 1] *= -1
    left[:, 3] *= -1
    full = np.vstack([left, right_states])
    m = len(right_states) - 1
    tt = np.arange(-m, m + 1) * h
    diag = {"history": history, "converged_gap": gap, "last_a": orb.a, "last_L": orb.L,
            "splice_time": float(tr[-1]), "window": min(window, orb.L / 2)}
    diag.update(_homoclinic_diagnostics(consts, spec, tt, full, orb.v_max, fit_floor=level))
    return Orbit(
        kind=OrbitKind.HOMOCLINIC, n=consts.n, g=spec.to_string(), a=0.0, c=None, L=None,
        v_max=orb.v_max, energy=orb.energy, t=tt, states=full, diagnostics=diag,
    )


# ----------------------------------------------------------------------------
# classification


def classify_solution(consts: ProblemConstants, spec: NonlinearitySpec, s0, horizon: float = 50.0,
                      config: IntegratorConfig | None = None) -> SolutionClass:
    """Tag the solution through ``s0`` by integrating both time directions."""
    s0 = tuple(float(x) for x in s0)
    if s0[0] <= 0:
        raise DomainError("classification needs v > 0")
    f = make_rhs(consts, spec)
    scale = max(consts.a0, 1.0)
    eq = max(abs(s0[0] - consts.a0), abs(s0[1]), abs(s0[2]), abs(s0[3]))
    if eq <= 1e-12 * scale and max(abs(x) for x in f(*s0)) <= 1e-9 * consts.B * consts.a0:
        return SolutionClass.CONSTANT
    cfg = config or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_time=horizon)
    runs = [integrate(consts, spec, s0, (0.0, d * horizon), cfg, f=f) for d in (1.0, -1.0)]
    if any(_recurs(tr, s0, scale) for tr in runs) or _two_symmetry_points(runs, scale):
        return SolutionClass.PERIODIC_LIKE
    for tr in runs:
        if tr.termination is Termination.BLOW_UP:
            return SolutionClass.BLOW_UP
    for tr in runs:
        if tr.termination is Termination.LEFT_POSITIVE_CONE:
            return SolutionClass.LEAVES_CONE
    fwd = runs[0]
    vf = np.asarray(fwd.states)
    if vf[-1, 0] < 1e-6 * consts.a0 and np.all(np.abs(vf[-1, 1:]) < 1e-4 * scale):
        return SolutionClass.DECAYS_TO_ZERO
    return SolutionClass.INDETERMINATE


def _recurs(traj, s0, scale, tol=1e-6):
    """Whether ``(v, v')`` returns within ``tol`` (relative) of its start."""
    states = np.asarray(traj.states)
    if len(states) < 3:
        return False
    times = np.asarray(traj.times)
    dv = states[:, 0] - s0[0]
    # skip the initial departure: look for returns after v first moved away
    moved = np.nonzero(np.abs(dv) > 1e-3 * scale)[0]
    if not len(moved):
        return False
    for i in range(moved[0], len(dv) - 1):
        if dv[i] == 0 or dv[i] * dv[i + 1] < 0:
            lo, hi = times[i], times[i + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if (traj.sol(mid)[0] - s0[0]) * dv[i] > 0:
                    lo = mid
                else:
                    hi = mid
            st = traj.sol(0.5 * (lo + hi))
            if abs(st[1] - s0[1]) <= tol * scale and abs(st[0] - s0[0]) <= tol * scale:
                return True
    return False


def _two_symmetry_points(runs, scale, tol=1e-6):
    """Whether the first turning points on both sides are symmetry points.

    A solution that is even about two distinct times is periodic (with
    period twice their distance) by reversibility, and finding them needs
    only half a period in each direction, where recurrence after a full
    period would be swamped by the instability of the orbit.
    """
    found = []
    for tr in runs:
        te = locate_event(tr, EventKind.V_PRIME_ZERO, after=0.0)
        if te is None:
            return False
        found.append(tr.sol(te)[3])
    return all(abs(x) <= tol * scale for x in found)


# ----------------------------------------------------------------------------
# verification

#: thresholds relative to ``v_max`` unless noted
SYMMETRY_TOL = 1e-7
RIGIDITY_TOL = 1e-7
PERIODICITY_TOL = 1e-6
ENERGY_TOL = 1e-8
MIN_TOL = 1e-7
DECAY_SLOPE_RTOL = 0.01
GREEN_TOL = 1e-5
VERIFY_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_step=0.05, max_time=1e3)


@dataclass
class OrbitReport:
    kind: str
    checks: list[Check]
    metrics: dict

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "kind": self.kind,
            "checks": [vars(c) for c in self.checks],
            "metrics": _jsonable(self.metrics),
        }

    def __str__(self):
        head = f"{self.kind}: {'PASS' if self.ok else 'FAIL'}"
        return "\n".join([head] + [f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}"
                                   for c in self.checks])


def _check(checks, metrics, name, value, passed, detail):
    metrics[name] = value
    checks.append(Check(name, bool(passed), detail))


def radial_margin(consts: ProblemConstants, states) -> float:
    """``min ((n-4)/2 v - v')`` over the samples; positive iff ``u`` is radially decreasing."""
    states = np.asarray(states, dtype=float)
    return float(np.min(consts.half_dim * states[:, 0] - states[:, 1]))


def _sign_changes(x, cyclic=False) -> int:
    """Sign changes of ``x`` ignoring exact zeros."""
    s = np.sign(x)
    s = s[s != 0]
    n = int(np.count_nonzero(s[1:] != s[:-1]))
    if cyclic and len(s) > 1 and s[0] != s[-1]:
        n += 1
    return n


def verify_orbit(consts: ProblemConstants, spec: NonlinearitySpec, orbit: Orbit,
                 config: IntegratorConfig | None = None) -> OrbitReport:
    """Check an orbit against the structural facts it must satisfy.

    Nothing is raised for a bad orbit; failures are listed in the report.
    """
    cfg = config or VERIFY_CONFIG
    checks: list[Check] = []
    m: dict = {}
    kind = orbit.kind
    if kind is OrbitKind.CONSTANT:
        s = orbit.states[0]
        res = max(abs(x) for x in rhs(consts, spec, tuple(s)))
        _check(checks, m, "equilibrium_residual", res, res <= 1e-9 * consts.B * consts.a0,
               f"|rhs(a0,0,0,0)| = {res:.3e}")
        dev = abs(orbit.a - consts.a0)
        _check(checks, m, "value_is_a0", dev, dev <= 1e-10 * consts.a0, f"|a - a0| = {dev:.3e}")
        margin = radial_margin(consts, orbit.states)
        _check(checks, m, "radial_margin", margin, margin > 0, f"min((n-4)/2 v - v') = {margin:.6g}")
        return OrbitReport(kind.value, checks, m)

    vmax = float(orbit.v_max)
    v = orbit.v
    margin = radial_margin(consts, orbit.states)
    _check(checks, m, "radial_margin", margin, margin > 0, f"min((n-4)/2 v - v') = {margin:.6g}")
    i0 = int(np.argmin(np.abs(orbit.t)))
    gauge = abs(float(np.max(v)) - vmax) + abs(float(orbit.states[i0, 1]))
    _check(checks, m, "max_at_origin", gauge, gauge <= 1e-9 * vmax,
           f"|max v - v_max| + |v'(0)| = {gauge:.3e}")
    _check(checks, m, "v_max_above_a0", vmax - consts.a0, vmax >= consts.a0,
           f"v_max = {vmax:.12g}, a0 = {consts.a0:.12g}")

    if kind is OrbitKind.PERIODIC:
        _verify_periodic(consts, spec, orbit, cfg, checks, m)
    else:
        _verify_homoclinic(consts, spec, orbit, checks, m)
    return OrbitReport(kind.value, checks, m)


def _verify_periodic(consts, spec, orbit, cfg, checks, m):
    L, vmax, a = float(orbit.L), float(orbit.v_max), float(orbit.a)
    v = orbit.v
    vmin = float(np.min(v))
    _check(checks, m, "min_matches_a", abs(vmin - a), abs(vmin - a) <= MIN_TOL * consts.a0,
           f"min v = {vmin:.12g}, a = {a:.12g}")
    _check(checks, m, "min_below_a0", consts.a0 - vmin, vmin < consts.a0,
           f"inf v = {vmin:.12g} < a0 = {consts.a0:.12g}")
    extrema = _sign_changes(orbit.states[:, 1], cyclic=True)
    _check(checks, m, "extrema_per_period", extrema, extrema == 2,
           f"{extrema} sign changes of v' per period (one max, one min)")

    # Errors grow like exp(sqrt(lambda) t) along these orbits, so every
    # re-integration below spans at most half a period.
    f = make_rhs(consts, spec)
    i_max = int(np.argmin(np.abs(orbit.t)))
    s_max = (float(orbit.states[i_max, 0]), 0.0, float(orbit.states[i_max, 2]), 0.0)
    fwd = integrate(consts, spec, s_max, (0.0, 0.5 * L), cfg, f=f)
    bwd = integrate(consts, spec, s_max, (0.0, -0.5 * L), cfg, f=f)
    if fwd.termination is not Termination.REACHED_END or bwd.termination is not Termination.REACHED_END:
        _check(checks, m, "reintegration", None, False,
               f"re-integration from the maximum stopped early ({fwd.termination.value}, "
               f"{bwd.termination.value})")
        return
    # periodicity: the states at -L/2 and +L/2 must coincide
    gap = np.abs(np.asarray(fwd.final) - np.asarray(bwd.final))
    per = float(np.max(gap))
    _check(checks, m, "periodicity", per, per <= PERIODICITY_TOL * vmax,
           f"|S(L/2) - S(-L/2)| = {per:.3e}")
    # rigidity: the re-integrated solution is the stored one
    s = np.linspace(0.0, 0.5 * L, 401)
    ts = np.concatenate([-s[::-1], s[1:]])
    vi = np.concatenate([[bwd.sol(-x)[0] for x in s[::-1]], [fwd.sol(x)[0] for x in s[1:]]])
    rig = float(np.max(np.abs(vi - orbit.evaluate(ts))))
    _check(checks, m, "rigidity", rig, rig <= RIGIDITY_TOL * vmax,
           f"sup|v_reint - v_orbit| over one period = {rig:.3e}")
    # symmetry: start a quarter period away from an extremum, run across it
    for name, t_start, sign in (("symmetry_about_max", -0.25 * L, 1.0),
                                ("symmetry_about_min", -0.25 * L, -1.0)):
        k = int(np.argmin(np.abs(orbit.t - t_start)))
        s0 = tuple(float(x) for x in orbit.states[k])
        run = integrate(consts, spec, s0, (0.0, sign * 0.5 * L), cfg, f=f)
        if run.termination is not Termination.REACHED_END:
            _check(checks, m, name, None, False, f"run stopped early ({run.termination.value})")
            continue
        te = locate_event(run, EventKind.V_PRIME_ZERO, after=0.0)
        if te is None:
            _check(checks, m, name, None, False, "extremum not reached")
            continue
        w = min(abs(te), abs(sign * 0.5 * L - te))
        ss = np.linspace(0.0, w, 201)
        left = np.array([run.sol(te - sign * x)[0] for x in ss])
        right = np.array([run.sol(te + sign * x)[0] for x in ss])
        sym = float(np.max(np.abs(left - right)))
        m[name + "_window"] = w
        _check(checks, m, name, sym, sym <= SYMMETRY_TOL * vmax,
               f"sup|v(t*+s) - v(t*-s)| = {sym:.3e} for |s| <= {w:.4g}")
    E = energy_array(consts, spec, np.vstack([fwd.states, bwd.states]))
    E0 = orbit.energy
    drift = float(np.max(np.abs(E - E0)) / (1 + abs(E0)))
    _check(checks, m, "energy_drift", drift, drift <= ENERGY_TOL,
           f"max|E - E0|/(1+|E0|) = {drift:.3e}")
    e_max = 0.5 * s_max[2] ** 2 + eval_G(spec, s_max[0], consts.B)
    e_min = 0.5 * float(orbit.c) ** 2 + eval_G(spec, float(orbit.a), consts.B)
    _check(checks, m, "energy_at_extrema", abs(e_max - e_min), abs(e_max - e_min) <= 1e-7 * (1 + abs(e_min)),
           f"c^2/2 + G(a) = {e_min:.12g}, v''(0)^2/2 + G(v_max) = {e_max:.12g}")


def _verify_homoclinic(consts, spec, orbit, checks, m):
    vmax = float(orbit.v_max)
    t, v = orbit.t, orbit.v
    right = t >= 0
    mono = bool(np.all(np.diff(v[right]) <= 0) and np.all(np.diff(v[~right]) >= 0))
    _check(checks, m, "symmetric_decreasing", mono, mono, "v increases up to t = 0 and decreases after")
    refl = np.interp(-t, t, v)
    sym = float(np.max(np.abs(v - refl)))
    _check(checks, m, "symmetry_about_max", sym, sym <= SYMMETRY_TOL * vmax,
           f"sup|v(t) - v(-t)| = {sym:.3e}")
    try:
        slope, _, win = fit_decay_slope(t, v, vmax)
        want = -consts.sqrt_mu
        ok = abs(slope - want) <= DECAY_SLOPE_RTOL * abs(want)
        m["decay_fit_window"] = list(win)
        _check(checks, m, "decay_slope", slope, ok, f"fitted {slope:.6g}, expected {want:.6g}")
    except OrbitNotFound as exc:
        _check(checks, m, "decay_slope", None, False, str(exc))
    try:
        gres = greens_fixed_point_residual(consts, spec, t, v)
        _check(checks, m, "greens_residual", gres / vmax, gres <= GREEN_TOL * vmax,
               f"sup|v - G*h(v)| / v_max = {gres / vmax:.3e}")
    except PreconditionError as exc:
        _check(checks, m, "greens_residual", None, False, str(exc))
    try:
        lim = decay_limit(consts, spec, t, v)
        _check(checks, m, "decay_limit", lim, lim > 0, f"lim e^(sqrt(mu) t) v(t) = {lim:.12g}")
    except (PreconditionError, TailTruncationError) as exc:
        _check(checks, m, "decay_limit", None, False, str(exc))
    E = float(np.median(energy_array(consts, spec, orbit.states[np.abs(t) < 6])))
    _check(checks, m, "energy_zero", E, abs(E) <= 1e-6 * (1 + vmax**2),
           f"energy on the core = {E:.3e}")

