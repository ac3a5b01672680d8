import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singular_biharmonic.nonlinearity import (
    DomainError,
    NonlinearitySpec,
    SpecError,
    critical_exponent,
    eval_G,
    eval_g,
    eval_g_prime,
    eval_h,
    find_a0,
    find_b,
    hardy_rellich_bound,
    parse_spec,
    validate,
)


def test_parse_grammar_forms():
    assert parse_spec("critical", 8).monomials == ((1.0, 3.0),)
    assert parse_spec("power:2", 8).monomials == ((1.0, 2.0),)
    s = parse_spec("hardy:32+power:3", 8)
    assert (s.beta, s.monomials) == (32.0, ((1.0, 3.0),))
    s = parse_spec("beta=1.5;mono=2,1.5;mono=1,3", 8)
    assert s.beta == 1.5 and s.monomials == ((2.0, 1.5), (1.0, 3.0))


@pytest.mark.parametrize("text", ["mono=1", "beta=x;mono=1,3", "foo=1", "hardy:3"])
def test_parse_rejects_garbage(text):
    with pytest.raises(SpecError):
        parse_spec(text, 8)


def test_critical_needs_dimension_five():
    with pytest.raises(SpecError, match="n must be ≥ 5"):
        parse_spec("critical", 4)


def test_validation_flags_each_condition():
    assert validate(parse_spec("critical", 8)).ok
    rep = validate(parse_spec("beta=64;mono=1,3", 8))
    assert [c.name for c in rep.failures()] == ["hardy_rellich"]
    rep = validate(parse_spec("mono=1,3.5", 8))
    assert [c.name for c in rep.failures()] == ["exponent_range", "strict_superlinearity"]
    rep = validate(parse_spec("mono=-1,2", 8))
    assert "positive_coefficients" in [c.name for c in rep.failures()]
    assert not validate(NonlinearitySpec(0.0, (), 8)).ok


def test_upper_bound_strictness():
    assert not validate(parse_spec("critical", 8)).upper_bound_strict
    assert validate(parse_spec("power:2", 8)).upper_bound_strict
    assert validate(parse_spec("beta=1;mono=1,3", 8)).upper_bound_strict


def test_bounds_closed_form():
    assert critical_exponent(8) == 3.0
    assert hardy_rellich_bound(8) == 64.0
    assert critical_exponent(12) == 2.0


def test_negative_argument_is_domain_error():
    spec = parse_spec("critical", 8)
    for fn in (eval_g, eval_g_prime, eval_h):
        with pytest.raises(DomainError):
            fn(spec, -1.0)
    with pytest.raises(DomainError):
        eval_G(spec, -1.0, 64.0)


def test_a0_and_b_closed_form():
    spec = parse_spec("critical", 8)
    # g(a) = a^3 = 64 a  =>  a = 8;  g'(v) = 3 v^2 = 64 at v = 8/sqrt(3)
    assert find_a0(spec, 64.0) == pytest.approx(8.0, rel=1e-12)
    vstar = 8 / math.sqrt(3)
    assert find_b(spec, 64.0) == pytest.approx(64 * vstar - vstar**3, rel=1e-12)
    assert find_b(spec, 64.0) == pytest.approx(1024 / (3 * math.sqrt(3)), rel=1e-12)


@given(q=st.floats(1.05, 3.0), beta=st.floats(0.0, 60.0))
@settings(max_examples=60, deadline=None)
def test_a0_solves_fixed_point_and_b_is_maximum(q, beta):
    spec = NonlinearitySpec(beta, ((1.0, q),), 8)
    a0 = find_a0(spec, 64.0)
    assert eval_g(spec, a0) == pytest.approx(64.0 * a0, rel=1e-10)
    b = find_b(spec, 64.0)
    assert b > 0
    for v in (0.3 * a0, 0.7 * a0, a0, 1.3 * a0):
        assert 64.0 * v - eval_g(spec, v) <= b * (1 + 1e-12)


@given(v=st.floats(0.01, 20.0), beta=st.floats(0.0, 60.0), q=st.floats(1.1, 3.0))
@settings(max_examples=80, deadline=None)
def test_potential_derivative_is_g_minus_Bv(v, beta, q):
    spec = NonlinearitySpec(beta, ((2.0, q), (0.5, 1.5)), 8)
    h = 1e-5 * v
    num = (eval_G(spec, v + h, 64.0) - eval_G(spec, v - h, 64.0)) / (2 * h)
    assert num == pytest.approx(eval_g(spec, v) - 64.0 * v, rel=1e-6, abs=1e-6)


@given(t=st.floats(0.01, 10.0), q=st.floats(1.1, 3.0))
@settings(max_examples=60, deadline=None)
def test_strict_superlinearity_holds(t, q):
    spec = NonlinearitySpec(3.0, ((1.0, q),), 8)
    assert eval_g(spec, t) / t < eval_g_prime(spec, t)
    assert eval_h(spec, t) == pytest.approx(eval_g(spec, t) - 3.0 * t)


def test_to_string_roundtrip():
    spec = NonlinearitySpec(1.25, ((2.0, 1.5), (1.0, 3.0)), 8)
    assert parse_spec(spec.to_string(), 8) == spec
