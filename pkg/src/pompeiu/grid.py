"""Polar tensor discretization of the closed disk and sampled complex fields.

The disk |z| <= R is cut into n_r x n_t midpoint cells (radial-major order).
Interior nodes are the cell centers; a separate ring of n_t equally spaced
nodes sits exactly on |z| = R and carries trapezoidal arc weights.  All
reductions run in the fixed radial-major node order so results are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridError(ValueError):
    pass


class SampleError(RuntimeError):
    """Evaluation of a user function failed at a specific node."""

    def __init__(self, message, node):
        super().__init__(f"{message} at node z = {node}")
        self.node = node


@dataclass(frozen=True)
class DiscGrid:
    """Midpoint-cell polar grid on the closed disk of radius R.

    Interior nodes are cell centers ((i + 1/2) dr, (j + 1/2) dtheta) in
    radial-major order; boundary nodes share the angular lattice.  The
    instance memoizes kernel tensors and stencil matrices (see
    :mod:`pompeiu.operators`) keyed by operator, so build one grid per
    (R, n_r, n_t) and reuse it.
    """

    R: float
    n_r: int
    n_t: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.R > 0):
            raise GridError(f"radius must be positive, got {self.R}")
        if self.n_r < 4:
            raise GridError(f"n_r must be at least 4, got {self.n_r}")
        if self.n_t < 8:
            raise GridError(f"n_t must be at least 8, got {self.n_t}")
        if self.n_t % 2:
            raise GridError(f"n_t must be even, got {self.n_t}")

    # -- geometry -----------------------------------------------------------

    @property
    def dr(self) -> float:
        return self.R / self.n_r

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_t

    @property
    def radii(self) -> np.ndarray:
        """Cell-center radii, shape (n_r,)."""
        return (np.arange(self.n_r) + 0.5) * self.dr

    @property
    def angles(self) -> np.ndarray:
        """Cell-center angles, shape (n_t,)."""
        return (np.arange(self.n_t) + 0.5) * self.dtheta

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes as complex (n_r, n_t)."""
        key = "nodes"
        if key not in self._cache:
            self._cache[key] = self.radii[:, None] * np.exp(1j * self.angles[None, :])
        return self._cache[key]

    @property
    def boundary_nodes(self) -> np.ndarray:
        """Boundary nodes |z| = R as complex (n_t,)."""
        key = "bnodes"
        if key not in self._cache:
            self._cache[key] = self.R * np.exp(1j * self.angles)
        return self._cache[key]

    @property
    def weights(self) -> np.ndarray:
        """Cell areas r dr dtheta, shape (n_r, n_t)."""
        key = "weights"
        if key not in self._cache:
            w = (self.radii * self.dr * self.dtheta)[:, None]
            self._cache[key] = np.broadcast_to(w, (self.n_r, self.n_t)).copy()
        return self._cache[key]

    @property
    def boundary_weights(self) -> np.ndarray:
        """Arc lengths R dtheta, shape (n_t,)."""
        return np.full(self.n_t, self.R * self.dtheta)

    @property
    def n_interior(self) -> int:
        return self.n_r * self.n_t

    def cache(self, key, builder: Callable):
        """Memoize an expensive grid-bound object (kernel tensors etc.)."""
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]


def build_grid(R: float, n_r: int, n_t: int) -> DiscGrid:
    """Build a polar midpoint grid on the closed disk of radius R."""
    return DiscGrid(float(R), int(n_r), int(n_t))


@dataclass
class ScalarField:
    """A complex field sampled on a grid: interior (n_r, n_t) plus boundary (n_t,)."""

    grid: DiscGrid
    interior: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        self.interior = np.asarray(self.interior, dtype=complex)
        self.boundary = np.asarray(self.boundary, dtype=complex)
        g = self.grid
        if self.interior.shape != (g.n_r, g.n_t):
            raise GridError(
                f"interior values shape {self.interior.shape} != grid {(g.n_r, g.n_t)}")
        if self.boundary.shape != (g.n_t,):
            raise GridError(
                f"boundary values shape {self.boundary.shape} != grid ({g.n_t},)")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.interior.copy(), self.boundary.copy())

    def conj(self) -> "ScalarField":
        return ScalarField(self.grid, np.conj(self.interior), np.conj(self.boundary))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.interior + other.interior,
                               self.boundary + other.boundary)
        return ScalarField(self.grid, self.interior + other, self.boundary + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.interior - other.interior,
                               self.boundary - other.boundary)
        return ScalarField(self.grid, self.interior - other, self.boundary - other)

    def __mul__(self, c):
        return ScalarField(self.grid, self.interior * c, self.boundary * c)

    __rmul__ = __mul__

    def sup(self) -> float:
        """Max modulus over interior and boundary nodes."""
        return max(float(np.abs(self.interior).max()), float(np.abs(self.boundary).max()))

    def to_csv(self, path) -> None:
        """Write `re_z,im_z,re_v,im_v`, interior nodes first (radial-major), then boundary."""
        from .reports import write_atomic

        g = self.grid
        z = np.concatenate([g.nodes.ravel(), g.boundary_nodes])
        v = np.concatenate([self.interior.ravel(), self.boundary])
        lines = ["re_z,im_z,re_v,im_v"]
        for zi, vi in zip(z, v):
            lines.append(f"{float(zi.real)!r},{float(zi.imag)!r},"
                         f"{float(vi.real)!r},{float(vi.imag)!r}")
        write_atomic(path, "\n".join(lines) + "\n")


def sample(grid: DiscGrid, f: Callable[[np.ndarray], np.ndarray]) -> ScalarField:
    """Sample a function of the complex coordinate on interior and boundary nodes.

    The evaluator must accept a complex ndarray.  Non-finite output is reported
    with the first offending node attached.
    """
    out = []
    for z in (grid.nodes, grid.boundary_nodes):
        try:
            with np.errstate(all="ignore"):
                vals = np.asarray(f(z), dtype=complex)
        except Exception as exc:
            raise SampleError(f"evaluator raised {exc!r}", _first_node(z, None)) from exc
        vals = np.broadcast_to(vals, z.shape).copy()
        if not np.all(np.isfinite(vals)):
            raise SampleError("evaluator returned a non-finite value",
                              _first_node(z, np.isfinite(vals)))
        out.append(vals)
    return ScalarField(grid, out[0], out[1])


def _first_node(z, finite_mask):
    if finite_mask is None:
        return complex(np.ravel(z)[0])
    bad = np.argwhere(~finite_mask)
    idx = tuple(bad[0])
    return complex(z[idx])


def integrate(fieldv: ScalarField) -> complex:
    """Midpoint-rule area integral over the disk, fixed radial-major order."""
    g = fieldv.grid
    acc = np.sum(fieldv.interior * g.weights)  # contiguous radial-major reduction
    return complex(acc)
