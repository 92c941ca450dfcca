import numpy as np
import pytest

from pompeiu.grid import (DiscGrid, GridError, SampleError, ScalarField,
                          build_grid, integrate, sample)


def test_weight_sum_is_disk_area():
    grid = build_grid(1.0, 64, 128)
    assert grid.n_interior == 8192
    assert abs(grid.weights.sum() - np.pi) <= 1e-12 * np.pi


def test_weight_sum_scales_with_radius():
    grid = build_grid(0.5, 4, 8)
    assert abs(grid.weights.sum() - np.pi / 4) <= 1e-12


@pytest.mark.parametrize("args", [(1.0, 2, 8), (1.0, 64, 6), (1.0, 64, 129),
                                  (0.0, 64, 128), (-1.0, 64, 128)])
def test_bad_grid_arguments_rejected(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_node_locations():
    grid = build_grid(2.0, 8, 16)
    assert np.all(np.abs(grid.nodes) < 2.0)
    assert np.allclose(np.abs(grid.boundary_nodes), 2.0, rtol=0, atol=1e-12 * 2.0)


def test_sample_constant_and_boundary_modulus():
    grid = build_grid(1.0, 8, 16)
    ones = sample(grid, lambda z: np.ones_like(z))
    assert np.all(ones.interior == 1.0)
    ident = sample(grid, lambda z: z)
    assert np.allclose(np.abs(ident.boundary), 1.0)


def test_sample_reports_singular_node():
    grid = build_grid(1.0, 8, 16)
    # align a boundary node with the pole by rotating the pole onto a node
    pole = grid.boundary_nodes[3]
    with pytest.raises(SampleError) as err:
        sample(grid, lambda z: 1.0 / (1.0 - z / pole))
    assert err.value.node == pytest.approx(pole)


def test_integrate_constant_odd_and_quadratic():
    grid = build_grid(1.0, 64, 128)
    one = sample(grid, lambda z: np.ones_like(z))
    assert abs(integrate(one) - np.pi) <= 1e-12 * np.pi
    ident = sample(grid, lambda z: z)
    assert abs(integrate(ident)) <= 1e-10
    quad = sample(grid, lambda z: np.abs(z) ** 2)
    assert abs(integrate(quad) - np.pi / 2) <= 1e-3


def test_integrate_linear_exact():
    grid = build_grid(1.0, 16, 32)
    f = sample(grid, lambda z: z**2 + 0.5 * np.conj(z))
    g = sample(grid, lambda z: np.exp(z.real))
    a, b = 2.0 - 1.0j, 0.25
    combo = ScalarField(grid, a * f.interior + b * g.interior,
                        a * f.boundary + b * g.boundary)
    lhs = integrate(combo)
    rhs = a * integrate(f) + b * integrate(g)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@pytest.mark.parametrize("fn,exact", [
    (lambda z: np.abs(z) ** 2, np.pi / 2),
    (lambda z: z.real ** 2, np.pi / 4),
    (lambda z: np.abs(z) ** 4, np.pi / 3),
])
def test_refinement_improves_integration(fn, exact):
    coarse = abs(integrate(sample(build_grid(1.0, 32, 64), fn)) - exact)
    fine = abs(integrate(sample(build_grid(1.0, 64, 128), fn)) - exact)
    assert fine <= coarse / 2


def test_csv_round_trip(tmp_path):
    grid = build_grid(1.0, 4, 8)
    f = sample(grid, lambda z: z + 1j)
    path = tmp_path / "field.csv"
    f.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "re_z,im_z,re_v,im_v"
    assert len(rows) == 1 + grid.n_interior + grid.n_t
    re_z, im_z, re_v, im_v = (float(t) for t in rows[1].split(","))
    assert re_z + 1j * im_z == grid.nodes[0, 0]
    assert re_v + 1j * im_v == f.interior[0, 0]
