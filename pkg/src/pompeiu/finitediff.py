"""Finite differences on the polar grid.

Gradients here serve two roles: the local first-order jet that the singular
quadrature in :mod:`pompeiu.operators` subtracts at each evaluation node, and
the independent derivative stacks that the test-suite compares symbolic jets
against.  Composite-operator derivatives inside the solver never use finite
differences; those come from the operator-word engine.

Stencils are 5-point Lagrange, 4th order.  Radial lines are extended through
the origin (f(-r, theta) = f(r, theta + pi), which is exact on the angular
lattice because n_t is even); at the outer end one-sided stencils are used,
and the boundary ring gets uneven-spacing weights for its half-cell gap.
"""

from __future__ import annotations

import numpy as np

from .grid import DiscGrid, ScalarField


def lagrange_deriv_weights(positions: np.ndarray, x0: float) -> np.ndarray:
    """Weights w with sum_k w_k f(x_k) = f'(x0) exact for polynomials."""
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    w = np.zeros(n)
    for k in range(n):
        others = np.delete(positions, k)
        denom = np.prod(positions[k] - others)
        num = 0.0
        for j in range(len(others)):
            num += np.prod(x0 - np.delete(others, j))
        w[k] = num / denom
    return w


def _radial_matrix(grid: DiscGrid):
    """Radial-derivative weight matrices, both (n_r+1) x (n_r+1).

    Row i gives d/dr at radius r_i from values on the same ray (W0) and on
    the antipodal ray (W1, the through-origin extension r_{-1-k} = -r_k).
    Columns 0..n_r-1 are interior radii, column n_r is the boundary value.
    """
    n_r = grid.n_r
    dr = grid.dr
    radii = np.concatenate([grid.radii, [grid.R]])
    W0 = np.zeros((n_r + 1, n_r + 1))
    W1 = np.zeros((n_r + 1, n_r + 1))
    for i in range(n_r + 1):
        r0 = radii[i]
        if i <= n_r - 3:
            idx = np.arange(i - 2, i + 3)
        elif i <= n_r - 1:
            idx = np.arange(n_r - 5, n_r)
        else:
            idx = np.array([n_r, n_r - 1, n_r - 2, n_r - 3, n_r - 4])
        pos = np.where(idx >= n_r, grid.R, (np.where(idx >= 0, idx, -1 - idx) + 0.5) * dr)
        pos = np.where(idx >= 0, pos, -pos)
        cols = np.where(idx >= 0, idx, -1 - idx)
        w = lagrange_deriv_weights(pos, r0)
        for c, neg, wk in zip(cols, idx < 0, w):
            if neg:
                W1[i, c] += wk
            else:
                W0[i, c] += wk
    return W0, W1


def _get_radial_matrices(grid: DiscGrid):
    return grid.cache("fd_radial", lambda: _radial_matrix(grid))


def _dtheta(values_ext: np.ndarray, dtheta: float) -> np.ndarray:
    """4th-order periodic d/dtheta along the last axis."""
    v = values_ext
    return (np.roll(v, 2, axis=-1) - 8 * np.roll(v, 1, axis=-1)
            + 8 * np.roll(v, -1, axis=-1) - np.roll(v, -2, axis=-1)) / (12 * dtheta)


def wirtinger_fd(field: ScalarField) -> tuple[ScalarField, ScalarField]:
    """(df/dz, df/dzbar) on interior and boundary nodes by polar FD."""
    g = field.grid
    W0, W1 = _get_radial_matrices(g)
    stacked = np.vstack([field.interior, field.boundary[None, :]])  # (n_r+1, n_t)
    flipped = np.roll(stacked, g.n_t // 2, axis=1)
    d_r = W0 @ stacked + W1 @ flipped
    d_t = _dtheta(stacked, g.dtheta)
    r = np.concatenate([g.radii, [g.R]])[:, None]
    th = g.angles[None, :]
    fx = np.cos(th) * d_r - np.sin(th) / r * d_t
    fy = np.sin(th) * d_r + np.cos(th) / r * d_t
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    return (ScalarField(g, fz[:-1], fz[-1]), ScalarField(g, fzb[:-1], fzb[-1]))


def wirtinger_fd_arrays(grid: DiscGrid, interior: np.ndarray, boundary: np.ndarray):
    """Batched variant: interior (..., n_r, n_t), boundary (..., n_t).

    Returns (fz_int, fz_bnd, fzb_int, fzb_bnd) with matching leading axes.
    """
    W0, W1 = _get_radial_matrices(grid)
    stacked = np.concatenate([interior, boundary[..., None, :]], axis=-2)
    flipped = np.roll(stacked, grid.n_t // 2, axis=-1)
    d_r = np.einsum("ik,...kt->...it", W0, stacked) + np.einsum(
        "ik,...kt->...it", W1, flipped)
    d_t = _dtheta(stacked, grid.dtheta)
    r = np.concatenate([grid.radii, [grid.R]])[:, None]
    th = grid.angles[None, :]
    fx = np.cos(th) * d_r - np.sin(th) / r * d_t
    fy = np.sin(th) * d_r + np.cos(th) / r * d_t
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    return fz[..., :-1, :], fz[..., -1, :], fzb[..., :-1, :], fzb[..., -1, :]


def fd_jet(field: ScalarField, depth: int) -> dict:
    """All derivative samples d^i dbar^j f for i + j <= depth, by iterated FD.

    Test/diagnostic utility.  Accuracy degrades by roughly two orders per
    level; comparisons should stay on an interior annulus.
    """
    jets = {(0, 0): field}
    for level in range(depth):
        for i in range(level + 1):
            j = level - i
            fz, fzb = wirtinger_fd(jets[(i, j)])
            jets.setdefault((i + 1, j), fz)
            jets.setdefault((i, j + 1), fzb)
    return jets
