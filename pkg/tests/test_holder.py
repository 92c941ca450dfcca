import math

import numpy as np
import pytest

from pompeiu.grid import build_grid, sample
from pompeiu.holder import (HolderError, JetField, jet_norm, level_norm, norms,
                            origin_jet, origin_value, taylor_subtract)
from pompeiu.solver import JetPolynomial
from pompeiu.verify import check_norm_lemmas, random_polynomial_jet


def test_constant_norm():
    grid = build_grid(1.0, 16, 32)
    f = sample(grid, lambda z: np.ones_like(z))
    rep = norms(f, 0.5)
    assert rep.sup == 1.0
    assert rep.holder == 0.0
    assert rep.composite == 1.0


def test_alpha_range_enforced():
    grid = build_grid(1.0, 16, 32)
    f = sample(grid, lambda z: z)
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(HolderError):
            norms(f, bad)


def test_norm_of_identity_is_3R():
    # H_alpha[z] = (2R)^{1-alpha} at antipodal points, so |z| + (2R)^a H = 3R
    for R in (1.0, 0.5):
        grid = build_grid(R, 64, 128)
        f = sample(grid, lambda z: z)
        for alpha in (0.3, 0.5, 0.7):
            rep = norms(f, alpha)
            assert 2.94 * R <= rep.composite <= 3.0 * R + 1e-12
            assert abs(rep.holder - (2 * R) ** (1 - alpha)) <= 0.02 * (2 * R) ** (1 - alpha)


def test_holder_estimate_is_lower_bound():
    grid = build_grid(1.0, 32, 64)
    f = sample(grid, lambda z: np.conj(z) ** 2)
    rep = norms(f, 0.5)
    # sup |z^2 - w^2| / |z - w|^{1/2} = sup |z + w| |z - w|^{1/2} = 4 / 3^{3/4},
    # attained on the boundary at angular separation 2 arcsin(1/sqrt(3))
    true = 4.0 / 3.0 ** 0.75
    assert 0.95 * true <= rep.holder <= true + 1e-12


def test_level_norm_of_square():
    grid = build_grid(1.0, 32, 64)
    poly = JetPolynomial({(2, 0): np.array([2.0 + 0j])}, 1)  # f = z^2
    jet = poly.jet_field(grid, 2)
    rep = level_norm(jet, 2, 0.5)
    assert abs(rep.composite - 2.0) < 1e-12
    rep1 = level_norm(jet, 1, 0.5)  # df = 2z has norm 6R = 6
    assert 5.8 <= rep1.composite <= 6.0 + 1e-9


def test_level_norm_rejects_deep_level():
    grid = build_grid(1.0, 16, 32)
    jet = JetField.zero(grid, 1, 1)
    with pytest.raises(HolderError):
        level_norm(jet, 2, 0.5)


def test_mixed_quadratic_levels():
    grid = build_grid(1.0, 32, 64)
    poly = JetPolynomial({(1, 1): np.array([1.0 + 0j])}, 1)  # f = z zbar
    jet = poly.jet_field(grid, 2)
    assert abs(level_norm(jet, 2, 0.5).composite - 1.0) < 1e-12


def test_origin_value_quadratic_exact():
    grid = build_grid(1.0, 64, 128)
    f = sample(grid, lambda z: 3.0 - z + 2j * np.conj(z) ** 2)
    assert abs(origin_value(grid, f.interior[None])[0] - 3.0) < 1e-10


def test_taylor_subtract_fixed_point():
    grid = build_grid(1.0, 48, 96)
    jet = random_polynomial_jet(grid, 2, seed=7, vanishing=True)
    # zero the (mu, nu) = (1, 1) origin coefficient so the jet is already clean
    orig = origin_jet(jet)
    out = taylor_subtract(jet, 1, 1)
    out2 = taylor_subtract(out, 1, 1)
    for key in jet.entries:
        a = out.entry(*key)[0]
        b = out2.entry(*key)[0]
        assert np.abs(a - b).max() < 1e-9 * max(1.0, np.abs(a).max())


def test_taylor_subtract_vanishing_origin():
    grid = build_grid(1.0, 48, 96)
    jet = random_polynomial_jet(grid, 3, seed=9, vanishing=False)
    out = taylor_subtract(jet, 2, 1)
    orig = origin_jet(out)
    for (i, j), val in orig.items():
        if (i, j) == (2, 1):
            continue
        assert np.abs(val).max() < 1e-8, (i, j)


def test_taylor_subtract_keeps_top_entry():
    grid = build_grid(1.0, 48, 96)
    jet = random_polynomial_jet(grid, 2, seed=12, vanishing=False)
    before = jet.entry(1, 1)[0].copy()
    out = taylor_subtract(jet, 1, 1)
    assert np.abs(out.entry(1, 1)[0] - before).max() < 1e-12


def test_taylor_subtract_keeps_monomial_image():
    # the jet of c zbar is a fixed point: subtraction removes nothing and the
    # add-back restores the (0, 1) Taylor term exactly
    grid = build_grid(1.0, 32, 64)
    c = 1.5 - 0.5j
    poly = JetPolynomial({(0, 1): np.array([c])}, 1)  # value dbar u(0) = c
    jet = poly.jet_field(grid, 1)
    out = taylor_subtract(jet, 0, 1)
    want = c * np.conj(grid.nodes)
    assert np.abs(out.entry(0, 0)[0][0] - want).max() < 1e-10
    assert np.abs(out.entry(0, 1)[0][0] - c).max() < 1e-12
    assert np.abs(out.entry(1, 0)[0][0]).max() < 1e-12


def test_real_projection_invariant():
    grid = build_grid(1.0, 32, 64)
    jet = random_polynomial_jet(grid, 2, seed=21, vanishing=False)
    proj = jet.real_projected()
    for (i, j), (vi, vb) in proj.entries.items():
        wi, wb = proj.entry(j, i)
        assert np.abs(vi - np.conj(wi)).max() < 1e-12
    assert np.abs(proj.entry(0, 0)[0].imag).max() < 1e-12


def test_norm_lemma_battery():
    results = check_norm_lemmas(trials=50, m_max=4)
    for r in results:
        assert r.passed, r.line()
