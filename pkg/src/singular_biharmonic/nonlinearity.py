"""Admissible nonlinearities ``g(t) = beta*t + sum_i c_i t**q_i``.

The family is closed under every structural condition the classification
theory needs, so each condition can be checked analytically instead of by
sampling a black-box callable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

#: bracket width for a0 / b bisection (relative)
BRACKET_RTOL = 1e-12
#: residual tolerance for ``g(a0) = B a0`` (relative to ``B a0``)
RESIDUAL_RTOL = 1e-9
MAX_DOUBLINGS = 200


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class SpecError(ValueError):
    """A nonlinearity string could not be parsed or failed validation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SuperlinearityError(RuntimeError):
    pass


def critical_exponent(n: int) -> float:
    return (n + 4) / (n - 4)


def hardy_rellich_bound(n: int) -> float:
    return n**2 * (n - 4) ** 2 / 16


@dataclass(frozen=True)
class NonlinearitySpec:
    """``g(t) = beta t + sum(c t**q for c, q in monomials)`` in dimension ``n``."""

    beta: float
    monomials: tuple[tuple[float, float], ...]
    n: int
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "monomials", tuple((float(c), float(q)) for c, q in self.monomials)
        )
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def r(self) -> float:
        """Smallest exponent, i.e. the order of ``h(t) = g(t) - beta t`` at 0."""
        return min(q for _, q in self.monomials)

    def to_string(self) -> str:
        if self.label:
            return self.label
        parts = [f"beta={self.beta:.17g}"]
        parts += [f"mono={c:.17g},{q:.17g}" for c, q in self.monomials]
        return ";".join(parts)


def parse_spec(text: str, n: int) -> NonlinearitySpec:
    """Parse the CLI grammar.

    ``critical``, ``power:q``, ``hardy:<beta>+power:<q>`` or the general form
    ``beta=<v>;mono=<c>,<q>;mono=...``.
    """
    s = text.strip()
    try:
        if s == "critical":
            if n <= 4:
                raise SpecError("n must be ≥ 5")
            return NonlinearitySpec(0.0, ((1.0, critical_exponent(n)),), n, label=s)
        if s.startswith("power:"):
            return NonlinearitySpec(0.0, ((1.0, float(s[6:])),), n, label=s)
        if s.startswith("hardy:"):
            lin, _, power = s[6:].partition("+")
            if not power.startswith("power:"):
                raise SpecError(f"expected 'hardy:<beta>+power:<q>', got {text!r}")
            beta = float(lin.removeprefix("beta="))
            return NonlinearitySpec(beta, ((1.0, float(power[6:])),), n, label=s)
        beta = 0.0
        monos = []
        for item in filter(None, (p.strip() for p in s.split(";"))):
            key, _, val = item.partition("=")
            key = key.strip()
            if key == "beta":
                beta = float(val)
            elif key == "mono":
                c, q = val.split(",")
                monos.append((float(c), float(q)))
            else:
                raise SpecError(f"unknown key {key!r} in {text!r}")
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"cannot parse nonlinearity {text!r}: {exc}") from exc
    return NonlinearitySpec(beta, tuple(monos), n, label=s)


def _check_positive(t):
    if not t > 0:
        raise DomainError(f"argument must be positive, got {t!r}")


def eval_g(spec: NonlinearitySpec, t: float) -> float:
    _check_positive(t)
    return spec.beta * t + sum(c * t**q for c, q in spec.monomials)


def eval_g_prime(spec: NonlinearitySpec, t: float) -> float:
    _check_positive(t)
    return spec.beta + sum(c * q * t ** (q - 1) for c, q in spec.monomials)


def eval_h(spec: NonlinearitySpec, t: float) -> float:
    """Superlinear part ``g(t) - beta t``; defined (as 0) at ``t = 0``."""
    if t < 0:
        raise DomainError(f"argument must be nonnegative, got {t!r}")
    if t == 0:
        return 0.0
    return sum(c * t**q for c, q in spec.monomials)


def eval_G(spec: NonlinearitySpec, v: float, B: float) -> float:
    """Potential ``int_0^v g - B v^2/2`` in closed form."""
    if v < 0:
        raise DomainError(f"argument must be nonnegative, got {v!r}")
    if v == 0:
        return 0.0
    prim = 0.5 * spec.beta * v * v + sum(c * v ** (q + 1) / (q + 1) for c, q in spec.monomials)
    return prim - 0.5 * B * v * v


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check]
    upper_bound_strict: bool = True

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "upper_bound_strict": self.upper_bound_strict,
            "checks": [vars(c) for c in self.checks],
        }

    def __str__(self):
        lines = [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        return "\n".join(lines)


def validate(spec: NonlinearitySpec) -> ValidationReport:
    n = spec.n
    checks = [Check("dimension", n >= 5, f"n={n}, need n >= 5")]
    if n < 5:
        return ValidationReport(checks, upper_bound_strict=False)
    qc = critical_exponent(n)
    hr = hardy_rellich_bound(n)
    checks.append(Check("has_monomial", len(spec.monomials) > 0,
                        "superlinearity needs at least one monomial with q > 1"))
    checks.append(Check("positive_coefficients", all(c > 0 for c, _ in spec.monomials),
                        f"coefficients {[c for c, _ in spec.monomials]}"))
    checks.append(Check("beta_nonnegative", spec.beta >= 0, f"beta={spec.beta}"))
    bad = [q for _, q in spec.monomials if not 1 < q <= qc * (1 + 1e-15)]
    checks.append(Check("exponent_range", not bad,
                        f"need 1 < q <= (n+4)/(n-4) = {qc:.12g}; offending {bad}"))
    checks.append(Check("hardy_rellich", spec.beta < hr,
                        f"beta={spec.beta:.12g} must be < n^2(n-4)^2/16 = {hr:.12g}"))
    # g(t)/t < g'(t) <=> sum c (q-1) t^(q-1) > 0: automatic once a q > 1 exists.
    checks.append(Check("strict_superlinearity", bool(spec.monomials) and not bad,
                        "g(t)/t < g'(t) holds since some q > 1"))
    # g' = (n+4)/(n-4) g/t for all t iff beta = 0 and every q is critical
    strict = spec.beta > 0 or any(q < qc * (1 - 1e-15) for _, q in spec.monomials)
    return ValidationReport(checks, upper_bound_strict=strict)


def _bisect_increasing(f, lo, hi, rtol=BRACKET_RTOL):
    """Root of an increasing function with ``f(lo) < 0 < f(hi)``."""
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton_polish(f, fprime, x, steps=4):
    """A few Newton steps from a bracketed root, kept only while ``|f|`` drops."""
    fx = f(x)
    for _ in range(steps):
        d = fprime(x)
        if fx == 0 or d == 0:
            break
        y = x - fx / d
        fy = f(y)
        if not abs(fy) < abs(fx):
            break
        x, fx = y, fy
    return x


def _g_second(spec: NonlinearitySpec, t: float) -> float:
    return sum(c * q * (q - 1) * t ** (q - 2) for c, q in spec.monomials)


def _bracket_up(f, start=1.0):
    hi = start
    for _ in range(MAX_DOUBLINGS):
        if f(hi) > 0:
            return hi
        hi *= 2
    raise SuperlinearityError("superlinearity violated: no bracket found")


def find_a0(spec: NonlinearitySpec, B: float, rtol: float = BRACKET_RTOL) -> float:
    """Unique positive root of ``g(a) = B a``."""
    # g(a)/a - B is strictly increasing and tends to beta - B < 0 at 0
    f = lambda a: eval_g(spec, a) / a - B
    hi = _bracket_up(f)
    lo = hi / 2
    while f(lo) >= 0:
        lo /= 2
        if lo < 1e-300:
            raise SuperlinearityError("g(a)/a >= B near 0: beta >= B?")
    a0 = _newton_polish(lambda a: eval_g(spec, a) - B * a,
                        lambda a: eval_g_prime(spec, a) - B, _bisect_increasing(f, lo, hi, rtol))
    if abs(eval_g(spec, a0) - B * a0) > RESIDUAL_RTOL * B * a0:
        raise SuperlinearityError(f"residual too large at a0={a0}")
    return a0


def find_b(spec: NonlinearitySpec, B: float, rtol: float = BRACKET_RTOL) -> float:
    """``max_{v>=0} (B v - g(v))`` via the stationary point ``g'(v*) = B``."""
    f = lambda v: eval_g_prime(spec, v) - B
    hi = _bracket_up(f)
    lo = hi / 2
    while f(lo) >= 0:
        lo /= 2
        if lo < 1e-300:
            raise SuperlinearityError("g'(v) >= B near 0")
    vstar = _newton_polish(f, lambda v: _g_second(spec, v), _bisect_increasing(f, lo, hi, rtol))
    return B * vstar - eval_g(spec, vstar)
