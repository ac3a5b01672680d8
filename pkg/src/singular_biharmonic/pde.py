"""Radial PDE images ``u(r) = r^{-(n-4)/2} v(ln r)`` and their independent check.

The residual of ``Delta^2 u = r^{-(n+4)/2} g(r^{(n-4)/2} u)`` is computed from
sampled values of ``u`` only, by finite differences in ``t = ln r``, so it
does not reuse the algebra that produced the ODE.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .nonlinearity import DomainError, NonlinearitySpec
from .orbits import Orbit, OrbitKind

MIN_POINTS = 9


@dataclass
class RadialProfile:
    """Radial image of an orbit.

    ``r`` and ``u`` are kept in extended precision: the fourth-order finite
    differences in :func:`pde_residual` amplify sample round-off by
    ``h^-4``, which at a few thousand points would swamp a double-precision
    profile.
    """

    n: int
    r: np.ndarray
    u: np.ndarray
    source: Orbit
    shift: float = 0.0
    residual: np.ndarray | None = None

    @property
    def t(self) -> np.ndarray:
        return np.log(self.r)

    def weighted(self) -> np.ndarray:
        """``r^{(n-4)/2} u``, i.e. ``v`` read back from the profile."""
        return self.r ** ((self.n - 4) / 2) * self.u

    def to_csv(self, path):
        res = self.residual if self.residual is not None else np.full(self.r.shape, np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "u", "residual"])
            for r, u, e in zip(self.r, self.u, res):
                w.writerow([f"{r:.12g}", f"{u:.12g}", "" if np.isnan(e) else f"{e:.12g}"])


def to_radial(orbit: Orbit, r_min: float, r_max: float, points: int, shift: float = 0.0) -> RadialProfile:
    """Sample ``u(r) = r^{-(n-4)/2} v(ln r + shift)`` on a log-uniform grid."""
    if not 0 < r_min < r_max:
        raise DomainError("need 0 < r_min < r_max")
    if points < 2:
        raise DomainError("need at least 2 points")
    ld = np.longdouble
    lo, hi = np.log(ld(r_min)), np.log(ld(r_max))
    s = lo + (hi - lo) * np.arange(points, dtype=ld) / ld(points - 1)
    t = s + ld(shift)
    if orbit.kind is OrbitKind.HOMOCLINIC and (t[0] < orbit.t[0] or t[-1] > orbit.t[-1]):
        raise DomainError(
            f"orbit samples cover [{orbit.t[0]:.3g}, {orbit.t[-1]:.3g}] but ln r spans "
            f"[{float(t[0]):.3g}, {float(t[-1]):.3g}]"
        )
    r = np.exp(s)
    v = orbit.evaluate(t)
    u = r ** (-ld(orbit.n - 4) / 2) * v
    return RadialProfile(n=orbit.n, r=r, u=u, source=orbit, shift=shift)


def _d1(f, h):
    return (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)


def _d2(f, h):
    return (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h * h)


def _laplacian(f, r, h, n):
    """Radial Laplacian ``(f_tt + (n-2) f_t)/r^2``; drops two points per side."""
    return (_d2(f, h) + (n - 2) * _d1(f, h)) / r[2:-2] ** 2


def _rhs(spec: NonlinearitySpec, r, u, n):
    s = r ** ((n - 4) / 2) * u
    g = spec.beta * s
    for c, q in spec.monomials:
        g = g + c * np.abs(s) ** q * np.sign(s)
    return r ** (-(n + 4) / 2) * g


def pde_residual(profile: RadialProfile, spec: NonlinearitySpec) -> float:
    """Relative sup-norm residual of the biharmonic equation on interior points.

    Also stores the pointwise residual (relative to ``max |RHS|``) on
    ``profile.residual`` with NaN on the four boundary points per side.
    """
    r, u, n = np.asarray(profile.r), np.asarray(profile.u), profile.n
    if len(r) < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} grid points")
    t = np.log(r)
    h = (t[-1] - t[0]) / (len(t) - 1)
    if np.max(np.abs(np.diff(t) - h)) > 1e-9 * max(1.0, abs(float(h))):
        raise DomainError("grid must be uniform in ln r")
    lap = _laplacian(u, r, h, n)
    bilap = _laplacian(lap, r[2:-2], h, n)
    rhs = _rhs(spec, r[4:-4], u[4:-4], n)
    scale = np.max(np.abs(rhs))
    if scale == 0:
        scale = 1.0
    pointwise = np.full(r.shape, np.nan)
    pointwise[4:-4] = np.abs(bilap - rhs) / scale
    profile.residual = pointwise
    return float(np.nanmax(pointwise))


def residual_convergence(orbit: Orbit, spec: NonlinearitySpec, r_min: float, r_max: float,
                         points: int, shift: float = 0.0) -> tuple[float, float, float]:
    """Residuals at ``points`` and at doubled density; returns ``(coarse, fine, factor)``.

    A factor below 8 means the stencil is not in its fourth-order regime
    (grid too coarse, or already at the round-off floor) and is warned about.
    """
    coarse = pde_residual(to_radial(orbit, r_min, r_max, points, shift), spec)
    fine = pde_residual(to_radial(orbit, r_min, r_max, 2 * points - 1, shift), spec)
    factor = coarse / fine if fine > 0 else math.inf
    if factor < 8:
        warnings.warn(
            f"pde residual did not converge at fourth order under grid halving "
            f"({coarse:.3e} -> {fine:.3e}, factor {factor:.2f})",
            RuntimeWarning, stacklevel=2,
        )
    return coarse, fine, factor


def inversion(orbit: Orbit) -> Orbit:
    """Reflection ``t -> -t``, the Emden-Fowler image of ``u*(x) = |x|^{4-n} u(x/|x|^2)``."""
    st = orbit.states.copy()
    st[:, 1] *= -1
    st[:, 3] *= -1
    t = orbit.t
    if orbit.kind is OrbitKind.PERIODIC and len(t) > 1:
        # grid -L/2 + k h, k < N: the reflection of index k is index (N - k) mod N
        idx = (-np.arange(len(t))) % len(t)
        new_t = t.copy()
        new_st = st[idx]
    else:
        if not np.allclose(t, -t[::-1], atol=1e-12 * max(1.0, np.max(np.abs(t)))):
            new_t = -t[::-1]
        else:
            new_t = t.copy()
        new_st = st[::-1]
    return Orbit(
        kind=orbit.kind, n=orbit.n, g=orbit.g, a=orbit.a, c=orbit.c, L=orbit.L,
        v_max=orbit.v_max, energy=orbit.energy, t=new_t, states=new_st,
        diagnostics=dict(orbit.diagnostics, inverted=not orbit.diagnostics.get("inverted", False)),
    )


def _refined_extrema(w, kind):
    """Discrete extrema refined by a parabola through the three nearest samples."""
    i = int(np.argmin(w) if kind == "min" else np.argmax(w))
    if 0 < i < len(w) - 1:
        y0, y1, y2 = w[i - 1], w[i], w[i + 1]
        den = y0 - 2 * y1 + y2
        if den != 0:
            return float(y1 - (y0 - y2) ** 2 / (8 * den))
    return float(w[i])


def asymptotics_report(profile: RadialProfile, consts) -> dict:
    """Behaviour of ``u`` at ``r -> 0`` and ``r -> inf``.

    Periodic images: oscillation band of ``r^{(n-4)/2} u`` over the first and
    last decade-and-a-half.  Homoclinic images: power-law exponents fitted on
    the outermost decade and the limits of ``r^{(n-4)/2 -+ sqrt(mu)} u``.
    """
    r, u = profile.r.astype(float), profile.u.astype(float)
    if r[0] > 1e-3 * (1 + 1e-9) or r[-1] < 1e3 * (1 - 1e-9):
        raise DomainError("profile must span at least three decades on each side of r = 1")
    half = consts.half_dim
    sm = consts.sqrt_mu
    t = np.log(r)
    kind = profile.source.kind
    w = profile.weighted().astype(float)
    if kind is OrbitKind.HOMOCLINIC:
        dec = math.log(10)
        near0 = t <= t[0] + dec
        nearinf = t >= t[-1] - dec
        exp0 = float(np.polyfit(t[near0], np.log(u[near0]), 1)[0])
        expinf = float(np.polyfit(t[nearinf], np.log(u[nearinf]), 1)[0])
        lim0 = float(r[0] ** (half - sm) * u[0])
        liminf = float(r[-1] ** (half + sm) * u[-1])
        return {
            "kind": kind.value,
            "exp_at_0": exp0, "exp_at_inf": expinf,
            "expected_exp_at_0": -half + sm, "expected_exp_at_inf": -half - sm,
            "limit_at_0": lim0, "limit_at_inf": liminf,
            "limits_rel_diff": abs(lim0 - liminf) / max(abs(lim0), abs(liminf)),
        }
    # periodic or constant: u ~ r^{-(n-4)/2} times a bounded band
    span = 1.5 * math.log(10)
    if kind is OrbitKind.PERIODIC:
        span = max(span, 1.05 * profile.source.L)
    near0 = t <= t[0] + span
    nearinf = t >= t[-1] - span
    band0 = (_refined_extrema(w[near0], "min"), _refined_extrema(w[near0], "max"))
    bandinf = (_refined_extrema(w[nearinf], "min"), _refined_extrema(w[nearinf], "max"))
    rel = max(abs(band0[0] - bandinf[0]) / abs(band0[0]), abs(band0[1] - bandinf[1]) / abs(band0[1]))
    return {
        "kind": kind.value,
        "exp_at_0": -half, "exp_at_inf": -half,
        "limit_at_0": list(band0), "limit_at_inf": list(bandinf),
        "band_rel_diff": rel,
    }
