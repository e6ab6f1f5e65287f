import numpy as np
import pytest
from hypothesis import given, strategies as st

from hsystem import (FieldPair, GridSpec, ScalarField, build_grid, energy_value, equivariance_defect,
                     integrate, project_fm, random_equivariant)
from hsystem.equivariance import allowed_modes, rotate_pair_arrays
from hsystem.grid import mode_numbers

G = build_grid(GridSpec(0.5, 12, 60))


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6, 10, 12, 15, 30, 60])
def test_xy_is_fixed(m):
    p = FieldPair.xy(G)
    q = project_fm(p, m)
    assert np.abs(q.a.values - p.a.values).max() < 1e-12
    assert np.abs(q.b.values - p.b.values).max() < 1e-12
    assert equivariance_defect(p, m) <= 1e-10


def test_conjugate_pair():
    p = FieldPair.from_arrays(G, G.x, -G.y)
    q3 = project_fm(p, 3)
    assert np.abs(q3.a.values).max() < 1e-12 and np.abs(q3.b.values).max() < 1e-12
    q2 = project_fm(p, 2)
    assert np.abs(q2.a.values - G.x).max() < 1e-12 and np.abs(q2.b.values + G.y).max() < 1e-12


@pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
def test_minus_one_residue_matches_defect(m):
    # brute force: -1 = 1 (mod m) iff m | 2, and the direct defect agrees
    p = FieldPair.from_arrays(G, G.x, -G.y)
    in_class = (-1 - 1) % m == 0
    assert in_class == (2 % m == 0)
    assert (equivariance_defect(p, m) <= 1e-10) == in_class


@pytest.mark.parametrize("m", [2, 3, 5, 6])
def test_mode_characterization_against_defect(m):
    # every single angular mode: kept by the projector iff the rotation defect vanishes
    g = build_grid(GridSpec(0.5, 8, 60))
    for k in mode_numbers(g):
        if abs(k) > g.max_mode:
            continue
        w = (1 + g.R) * np.exp(1j * k * g.theta_nodes[None, :])
        p = FieldPair.from_arrays(g, w.real, w.imag)
        zero_defect = equivariance_defect(p, m) <= 1e-10
        kept = allowed_modes(g, m)[list(mode_numbers(g)).index(k)]
        assert zero_defect == bool(kept), (m, k)


def test_x_squared_not_equivariant():
    p = FieldPair.from_arrays(G, G.x**2, np.zeros(G.shape))
    assert equivariance_defect(p, 3) > 0.1


def test_divisibility_enforced():
    p = FieldPair.xy(G)
    with pytest.raises(ValueError):
        project_fm(p, 7)
    with pytest.raises(ValueError):
        equivariance_defect(p, 7)
    with pytest.raises(ValueError):
        random_equivariant(G, 7, 0)
    with pytest.raises(ValueError):
        random_equivariant(G, 3, 0, decay=0.0)


@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2, 3, 5, 6]))
def test_projection_idempotent_and_orthogonal(seed, m):
    rng = np.random.default_rng(seed)
    p = FieldPair.from_arrays(G, rng.standard_normal(G.shape), rng.standard_normal(G.shape))
    q = FieldPair.from_arrays(G, rng.standard_normal(G.shape), rng.standard_normal(G.shape))
    pp = project_fm(p, m)
    ppp = project_fm(pp, m)
    assert np.abs(ppp.a.values - pp.a.values).max() <= 1e-12
    assert np.abs(ppp.b.values - pp.b.values).max() <= 1e-12
    assert equivariance_defect(pp, m) <= 1e-10
    pq = project_fm(q, m)
    # L2 (nodal) orthogonality of the residual against the class
    inner = np.sum((p.a.values - pp.a.values) * pq.a.values + (p.b.values - pp.b.values) * pq.b.values)
    assert abs(inner) <= 1e-10 * G.spec.n_r * G.spec.n_theta


@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3, 4, 5, 6, 10]))
def test_random_equivariant_properties(seed, m):
    p = random_equivariant(G, m, seed)
    assert equivariance_defect(p, m) <= 1e-10
    scale = 1 + np.abs(p.a.values).max() + np.abs(p.b.values).max()
    assert abs(integrate(p.a)) + abs(integrate(p.b)) <= 1e-10 * scale
    q = random_equivariant(G, m, seed)
    assert np.array_equal(p.a.values, q.a.values) and np.array_equal(p.b.values, q.b.values)


@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3, 5]))
def test_projected_pairs_have_zero_mean(seed, m):
    rng = np.random.default_rng(seed)
    p = project_fm(FieldPair.from_arrays(G, rng.standard_normal(G.shape) + 3.0,
                                         rng.standard_normal(G.shape) - 1.0), m)
    na = np.sqrt(np.sum(G.quad_weights * p.a.values**2))
    nb = np.sqrt(np.sum(G.quad_weights * p.b.values**2))
    assert abs(integrate(p.a)) + abs(integrate(p.b)) <= 1e-10 * (1 + na + nb)


@pytest.mark.parametrize("m", [2, 3, 5])
def test_energy_invariant_under_rotation(m):
    p = FieldPair.xy(G) + random_equivariant(G, 1, 3).scaled(0.2)
    a2, b2 = rotate_pair_arrays(G, m, p.a.values, p.b.values)
    e1 = energy_value(p)
    e2 = energy_value(FieldPair.from_arrays(G, a2, b2))
    assert abs(e1 - e2) <= 1e-10 * e1


def test_projected_pair_is_fixed_by_rotation():
    p = random_equivariant(G, 5, 2)
    a2, b2 = rotate_pair_arrays(G, 5, p.a.values, p.b.values)
    assert np.abs(a2 - p.a.values).max() < 1e-12 and np.abs(b2 - p.b.values).max() < 1e-12


def test_fieldpair_rejects_mismatched_grids():
    other = build_grid(GridSpec(0.5, 10, 60))
    with pytest.raises(ValueError):
        FieldPair(ScalarField(G, G.x), ScalarField(other, other.y))
