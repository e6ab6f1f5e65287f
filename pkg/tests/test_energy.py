import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import R0, dphi_exact, e_xy_exact, p_exact
from hsystem import (DegenerateInputError, FieldPair, GridSpec, build_grid, energy_value,
                     equivariance_defect, euler_lagrange_strong, evaluate, first_variation, h1_inner,
                     random_equivariant, sobolev_gradient)
from hsystem.energy import first_variation_ibp

G = build_grid(GridSpec(R0, 16, 60))


def _pert(seed, m=1, eps=0.2):
    return FieldPair.xy(G) + random_equivariant(G, m, seed).scaled(eps)


def test_energy_of_xy_matches_closed_form():
    g = build_grid(GridSpec(R0, 32, 16))
    e = evaluate(FieldPair.xy(g))
    area = np.pi * (1 - R0**2)
    assert abs(e.grad_a_sq - area) < 1e-12 and abs(e.grad_b_sq - area) < 1e-12
    assert abs(e.grad_phi_norm**2 - p_exact()) < 1e-12
    assert abs(e.value - e_xy_exact()) < 1e-11
    assert abs(e.lam + np.sqrt(area / p_exact())) < 1e-11
    assert e.lam < 0


@given(st.floats(0.01, 100.0), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 10**6))
def test_scale_and_shift_invariance(c, s, t, seed):
    p = _pert(seed)
    q = FieldPair.from_arrays(G, c * p.a.values + s, c * p.b.values + t)
    assert abs(energy_value(q) - energy_value(p)) <= 1e-10 * energy_value(p)


@given(st.floats(-np.pi, np.pi), st.integers(0, 10**6))
def test_target_rotation_invariance(alpha, seed):
    p = _pert(seed)
    c, s = np.cos(alpha), np.sin(alpha)
    q = FieldPair.from_arrays(G, c * p.a.values - s * p.b.values, s * p.a.values + c * p.b.values)
    assert abs(energy_value(q) - energy_value(p)) <= 1e-10 * energy_value(p)


def test_degenerate_inputs_raise():
    with pytest.raises(DegenerateInputError):
        evaluate(FieldPair.from_arrays(G, G.x, G.x))
    with pytest.raises(DegenerateInputError):
        evaluate(FieldPair.from_arrays(G, np.ones(G.shape), 2 * np.ones(G.shape)))
    with pytest.raises(DegenerateInputError):
        evaluate(FieldPair.from_arrays(G, G.R + 0 * G.x, G.R**2 + 0 * G.x))  # both radial: {a,b} = 0


@pytest.mark.parametrize("seed", range(20))
def test_first_variation_matches_finite_differences(seed):
    p = _pert(1000 + seed)
    d = random_equivariant(G, 1, seed)
    h = 1e-5
    fd = (energy_value(p + d.scaled(h)) - energy_value(p + d.scaled(-h))) / (2 * h)
    an = first_variation(p, d)
    assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_first_variation_along_the_pair_vanishes():
    for seed in range(5):
        p = _pert(seed)
        assert abs(first_variation(p, p)) <= 1e-10 * energy_value(p)


def test_integrated_form_agrees():
    g = build_grid(GridSpec(R0, 24, 96))
    p = FieldPair.xy(g) + random_equivariant(g, 1, 4).scaled(0.2)
    d = random_equivariant(g, 1, 5)
    a, b = first_variation(p, d), first_variation_ibp(p, d)
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


def test_euler_lagrange_of_xy_against_hand_oracle():
    # -lap x = 0 and {y, phi} = -phi'(r) cos(theta), so the residual is lam^2 phi' (cos, sin)
    g = build_grid(GridSpec(R0, 32, 16))
    p = FieldPair.xy(g)
    res = euler_lagrange_strong(p)
    lam2 = np.pi * (1 - R0**2) / p_exact()
    want_a = lam2 * dphi_exact(g.R) * g.cos_t
    want_b = lam2 * dphi_exact(g.R) * g.sin_t
    inner = slice(1, -1)
    assert np.abs(res.a.values[inner] - want_a[inner]).max() < 1e-9
    assert np.abs(res.b.values[inner] - want_b[inner]).max() < 1e-9
    assert np.abs(res.a.values).max() > 0.1


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_sobolev_gradient_is_riesz_representative(m):
    p = FieldPair.xy(G) + random_equivariant(G, m, 7).scaled(0.2)
    gr = sobolev_gradient(p, m)
    assert equivariance_defect(gr, m) <= 1e-10
    for seed in range(3):
        d = random_equivariant(G, m, 100 + seed)
        lhs, rhs = h1_inner(gr, d), first_variation(p, d)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_negative_gradient_is_descent():
    p = FieldPair.xy(G) + random_equivariant(G, 3, 9).scaled(0.3)
    gr = sobolev_gradient(p, 3)
    e0 = energy_value(p)
    assert energy_value(p + gr.scaled(-1e-3)) < e0
    assert first_variation(p, gr) > 0


def test_sobolev_gradient_requires_divisor():
    with pytest.raises(ValueError):
        sobolev_gradient(FieldPair.xy(G), 7)


@pytest.mark.parametrize("seed", range(4))
def test_energy_increment(seed):
    from hsystem.energy import _Workspace

    p = _pert(seed)
    d = random_equivariant(G, 1, 50 + seed)
    ws = _Workspace(G, p.a.values, p.b.values)
    # moderate step: the direct difference is accurate enough to compare
    big = ws.energy_change(0.1 * d.a.values, 0.1 * d.b.values)
    assert abs(big - (energy_value(p + d.scaled(0.1)) - ws.E)) <= 1e-12 * ws.E
    # tiny step: the increment still resolves the first-order term, the direct difference cannot
    h = 1e-12
    small = ws.energy_change(h * d.a.values, h * d.b.values)
    lin = h * first_variation(p, d)
    assert abs(small - lin) <= 1e-6 * abs(lin)
