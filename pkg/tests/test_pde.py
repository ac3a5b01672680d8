import csv
import math

import numpy as np
import pytest

from singular_biharmonic.nonlinearity import DomainError
from singular_biharmonic.orbits import constant_orbit
from singular_biharmonic.pde import (
    RadialProfile,
    asymptotics_report,
    inversion,
    pde_residual,
    residual_convergence,
    to_radial,
)

BUBBLE = 4 * math.sqrt(120)


def _bubble_profile(orbit, points, r_min=0.1, r_max=10.0):
    """Closed-form bubble ``4 sqrt(120) / (1 + r^2)^2`` on a log grid, no orbit involved."""
    ld = np.longdouble
    s = np.log(ld(r_min)) + (np.log(ld(r_max)) - np.log(ld(r_min))) * np.arange(points, dtype=ld) / (points - 1)
    r = np.exp(s)
    return RadialProfile(n=8, r=r, u=ld(BUBBLE) / (1 + r * r) ** 2, source=orbit)


def test_closed_form_bubble_solves_pde(critical, tail_homoclinic):
    _, spec = critical
    coarse = pde_residual(_bubble_profile(tail_homoclinic, 200), spec)
    fine = pde_residual(_bubble_profile(tail_homoclinic, 399), spec)
    assert fine <= 1e-6
    assert coarse / fine >= 8


def test_perturbed_bubble_is_rejected(critical, tail_homoclinic):
    _, spec = critical
    p = _bubble_profile(tail_homoclinic, 400)
    p.u = p.u * (1 + 1e-3 * np.sin(p.r))
    assert pde_residual(p, spec) > 1e-4


def test_orbit_image_matches_bubble(tail_homoclinic):
    p = to_radial(tail_homoclinic, 0.05, 20.0, 300)
    ref = BUBBLE / (1 + p.r.astype(float) ** 2) ** 2
    np.testing.assert_allclose(p.u.astype(float), ref, rtol=1e-7)


def test_constant_image_is_power_law(critical):
    consts, spec = critical
    o = constant_orbit(consts, spec)
    p = to_radial(o, 0.1, 10.0, 500)
    np.testing.assert_allclose(p.u.astype(float), consts.a0 * p.r.astype(float) ** -2, rtol=1e-14)
    np.testing.assert_allclose(p.weighted().astype(float), consts.a0, rtol=1e-14)
    assert pde_residual(p, spec) <= 1e-6


def test_convergence_helper(critical, periodic4):
    _, spec = critical
    coarse, fine, factor = residual_convergence(periodic4, spec, 0.1, 10.0, 125)
    assert factor >= 8 and fine < coarse


def test_convergence_helper_warns_at_floor(critical, tail_homoclinic):
    _, spec = critical
    with pytest.warns(RuntimeWarning):
        residual_convergence(tail_homoclinic, spec, 0.1, 10.0, 2000)


def test_grid_checks(critical, periodic4):
    _, spec = critical
    with pytest.raises(DomainError):
        to_radial(periodic4, 1.0, 0.5, 10)
    with pytest.raises(DomainError):
        to_radial(periodic4, 0.1, 1.0, 1)
    p = to_radial(periodic4, 0.1, 10.0, 50)
    p.r = p.r.copy()
    p.r[10] *= 1.01
    with pytest.raises(DomainError):
        pde_residual(p, spec)
    with pytest.raises(DomainError):
        pde_residual(to_radial(periodic4, 0.1, 10.0, 5), spec)


def test_homoclinic_window_guard(tail_homoclinic):
    with pytest.raises(DomainError):
        to_radial(tail_homoclinic, 1e-9, 1e9, 100)


def test_periodic_band_matches(critical, periodic4):
    consts, _ = critical
    rep = asymptotics_report(to_radial(periodic4, 1e-3, 1e3, 2000, shift=0.37), consts)
    assert rep["exp_at_0"] == rep["exp_at_inf"] == -consts.half_dim
    assert rep["band_rel_diff"] <= 1e-4
    lo, hi = rep["limit_at_0"]
    assert lo == pytest.approx(4.0, rel=1e-4)
    assert hi == pytest.approx(periodic4.v_max, rel=1e-4)


def test_homoclinic_exponents(critical, tail_homoclinic):
    consts, _ = critical
    rep = asymptotics_report(to_radial(tail_homoclinic, 1e-3, 1e3, 2000), consts)
    assert rep["exp_at_0"] == pytest.approx(0.0, abs=1e-3)
    assert rep["exp_at_inf"] == pytest.approx(-4.0, rel=1e-3)
    assert rep["limit_at_0"] == pytest.approx(BUBBLE, rel=1e-4)
    assert rep["limit_at_inf"] == pytest.approx(BUBBLE, rel=1e-4)


def test_asymptotics_needs_wide_profile(critical, periodic4):
    consts, _ = critical
    with pytest.raises(DomainError):
        asymptotics_report(to_radial(periodic4, 0.1, 10, 100), consts)


def test_inversion_fixes_symmetric_homoclinic(tail_homoclinic):
    inv = inversion(tail_homoclinic)
    np.testing.assert_allclose(inv.t, tail_homoclinic.t)
    np.testing.assert_allclose(inv.v, tail_homoclinic.v, rtol=1e-9, atol=1e-20)


def test_inversion_maps_shifted_image(critical, periodic4):
    # u*(r) = r^{4-n} u(1/r) is the image of the reflected orbit
    p = to_radial(periodic4, 0.2, 5.0, 101, shift=0.7)
    q = to_radial(inversion(periodic4), 0.2, 5.0, 101, shift=-0.7)
    r = p.r.astype(float)
    np.testing.assert_allclose(q.u.astype(float), r ** (4 - 8) * p.u.astype(float)[::-1], rtol=1e-9)


def test_profile_csv(tmp_path, critical, periodic4):
    _, spec = critical
    p = to_radial(periodic4, 0.1, 10.0, 50)
    pde_residual(p, spec)
    path = tmp_path / "radial.csv"
    p.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["r", "u", "residual"]
    assert rows[1][2] == "" and rows[10][2] != ""
    assert len(rows) == 51
