"""Discrete Holder norms, jet fields, and the vanishing-order Taylor subtraction.

The Holder seminorm H_alpha is estimated as the maximum difference quotient
over structured node pairs (radial and angular neighbours, antipodal boundary
pairs) plus a fixed-seed batch of random pairs, so it is always a lower bound
of the true seminorm.  The composite norm is sup + (2R)^alpha * H_alpha, and
the level-k norm of a jet is the maximum composite norm over its level-k
derivative entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import DiscGrid, GridError

PAIR_SAMPLE_COUNT = 100_000
PAIR_SEED = 20240811


class HolderError(ValueError):
    pass


# ---------------------------------------------------------------------------
# pair sampling


def _pair_indices(grid: DiscGrid):
    """(idx_a, idx_b, |z_a - z_b|) over flattened interior-then-boundary nodes."""

    def build():
        n_r, n_t = grid.n_r, grid.n_t
        n_int = n_r * n_t
        z = np.concatenate([grid.nodes.ravel(), grid.boundary_nodes])

        def flat(i, j):
            return i * n_t + j

        ii, jj = np.meshgrid(np.arange(n_r - 1), np.arange(n_t), indexing="ij")
        rad_a = flat(ii, jj).ravel()
        rad_b = flat(ii + 1, jj).ravel()
        ii, jj = np.meshgrid(np.arange(n_r), np.arange(n_t), indexing="ij")
        ang_a = flat(ii, jj).ravel()
        ang_b = flat(ii, (jj + 1) % n_t).ravel()
        bnd = n_int + np.arange(n_t)
        bnd_next = n_int + (np.arange(n_t) + 1) % n_t
        bnd_anti = n_int + (np.arange(n_t) + n_t // 2) % n_t
        outer = flat(n_r - 1, np.arange(n_t))
        rng = np.random.default_rng(PAIR_SEED)
        n_all = n_int + n_t
        rnd_a = rng.integers(0, n_all, PAIR_SAMPLE_COUNT)
        rnd_b = rng.integers(0, n_all, PAIR_SAMPLE_COUNT)
        a = np.concatenate([rad_a, ang_a, bnd, bnd, outer, rnd_a])
        b = np.concatenate([rad_b, ang_b, bnd_next, bnd_anti, bnd, rnd_b])
        keep = a != b
        a, b = a[keep], b[keep]
        dist = np.abs(z[a] - z[b])
        keep = dist > 0
        return a[keep], b[keep], dist[keep]

    return grid.cache("holder_pairs", build)


def holder_seminorm(grid: DiscGrid, interior: np.ndarray, boundary: np.ndarray,
                    alpha: float) -> float:
    """Sampled lower bound of H_alpha over interior and boundary nodes."""
    a, b, dist = _pair_indices(grid)
    vals = np.concatenate([interior.reshape(-1), boundary.reshape(-1)])
    quot = np.abs(vals[a] - vals[b]) / dist**alpha
    return float(quot.max())


def lipschitz_estimate(grid: DiscGrid, interior: np.ndarray, boundary: np.ndarray) -> float:
    """Sampled max |f(z)-f(z')| / |z-z'| (alpha = 1 quotient)."""
    return holder_seminorm(grid, interior, boundary, 1.0)


# ---------------------------------------------------------------------------
# norm reports


@dataclass
class NormReport:
    """sup / Holder / composite numbers for one field (or one jet level)."""

    alpha: float
    sup: float
    holder: float
    label: str = "norm"

    @property
    def composite(self) -> float:
        return self.sup + self.two_r_alpha * self.holder

    two_r_alpha: float = 0.0

    def as_dict(self):
        return {"alpha": self.alpha, "sup": self.sup, "holder": self.holder,
                "composite": self.composite, "label": self.label}

    def text_block(self, name="field"):
        d = self.as_dict()
        return "\n".join(f"{name}.{k} = {v}" for k, v in d.items())


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise HolderError(f"alpha must lie in (0, 1), got {alpha}")


def norms_arrays(grid: DiscGrid, interior: np.ndarray, boundary: np.ndarray,
                 alpha: float) -> NormReport:
    _check_alpha(alpha)
    sup = max(float(np.abs(interior).max()), float(np.abs(boundary).max()))
    hol = holder_seminorm(grid, interior, boundary, alpha)
    return NormReport(alpha=alpha, sup=sup, holder=hol,
                      two_r_alpha=(2 * grid.R)**alpha)


def norms(fieldv, alpha: float) -> NormReport:
    """Level-0 norm report of a ScalarField."""
    return norms_arrays(fieldv.grid, fieldv.interior, fieldv.boundary, alpha)


# ---------------------------------------------------------------------------
# jet fields


@dataclass
class JetField:
    """All derivative samples d^i dbar^j u, i+j <= m, of an n-component field.

    entries[(i, j)] is a pair (interior, boundary) with shapes
    (n, n_r, n_t) and (n, n_t).  The jet is the solver's full state; the
    operator-word engine fills every entry symbolically, so no numerical
    differentiation happens between levels.
    """

    grid: DiscGrid
    m: int
    n: int
    entries: dict
    real_valued: bool = False
    holomorphic: bool = False
    vanishing_order_m: bool = False

    def __post_init__(self):
        g = self.grid
        for (i, j), (vi, vb) in self.entries.items():
            if vi.shape != (self.n, g.n_r, g.n_t) or vb.shape != (self.n, g.n_t):
                raise GridError(f"jet entry {(i, j)} has wrong shape")

    @classmethod
    def zero(cls, grid: DiscGrid, m: int, n: int) -> "JetField":
        entries = {}
        for lvl in range(m + 1):
            for i in range(lvl + 1):
                entries[(i, lvl - i)] = (
                    np.zeros((n, grid.n_r, grid.n_t), dtype=complex),
                    np.zeros((n, grid.n_t), dtype=complex),
                )
        return cls(grid, m, n, entries)

    def entry(self, i, j):
        return self.entries[(i, j)]

    def levels(self, k):
        """Pairs ((i, j), (interior, boundary)) with i + j = k."""
        return [((i, k - i), self.entries[(i, k - i)]) for i in range(k + 1)]

    def copy(self) -> "JetField":
        entries = {k: (vi.copy(), vb.copy()) for k, (vi, vb) in self.entries.items()}
        return JetField(self.grid, self.m, self.n, entries, self.real_valued,
                        self.holomorphic, self.vanishing_order_m)

    def __add__(self, other: "JetField") -> "JetField":
        entries = {k: (vi + other.entries[k][0], vb + other.entries[k][1])
                   for k, (vi, vb) in self.entries.items()}
        return JetField(self.grid, self.m, self.n, entries)

    def __sub__(self, other: "JetField") -> "JetField":
        entries = {k: (vi - other.entries[k][0], vb - other.entries[k][1])
                   for k, (vi, vb) in self.entries.items()}
        return JetField(self.grid, self.m, self.n, entries)

    def real_projected(self) -> "JetField":
        """Re-projection: entry (i,j) <- (entry(i,j) + conj(entry(j,i))) / 2.

        For a real-valued target the jet must satisfy entry(i,j) =
        conj(entry(j,i)); this is the orthogonal projection onto that set.
        """
        entries = {}
        for (i, j), (vi, vb) in self.entries.items():
            wi, wb = self.entries[(j, i)]
            entries[(i, j)] = (0.5 * (vi + np.conj(wi)), 0.5 * (vb + np.conj(wb)))
        out = JetField(self.grid, self.m, self.n, entries)
        out.real_valued = True
        return out

    def sup_level(self, k) -> float:
        return max(max(float(np.abs(vi).max()), float(np.abs(vb).max()))
                   for _, (vi, vb) in self.levels(k))


def level_norm(jet: JetField, k: int, alpha: float) -> NormReport:
    """Max composite norm over the level-k entries and components."""
    _check_alpha(alpha)
    if k > jet.m:
        raise HolderError(f"level {k} exceeds jet depth {jet.m}")
    sup = 0.0
    hol = 0.0
    best = None
    for _, (vi, vb) in jet.levels(k):
        for c in range(jet.n):
            rep = norms_arrays(jet.grid, vi[c], vb[c], alpha)
            if best is None or rep.composite > best.composite:
                best = rep
    label = "norm" if (jet.vanishing_order_m or k == jet.m) else "seminorm"
    best.label = label
    return best


def jet_norm(jet: JetField, alpha: float) -> float:
    """The solver norm: max composite norm over level-m entries."""
    return level_norm(jet, jet.m, alpha).composite


# ---------------------------------------------------------------------------
# origin extraction and Taylor subtraction


def _origin_fit(grid: DiscGrid):
    """Pseudo-inverse row reconstructing f(0) from a local quadratic fit."""

    def build():
        nrings = 2 if grid.n_r >= 8 else 1
        z = grid.nodes[:nrings + 1].ravel()
        basis = np.stack([np.ones_like(z), z, np.conj(z), z**2, z * np.conj(z),
                          np.conj(z)**2], axis=1)
        pinv = np.linalg.pinv(basis)
        return slice(0, nrings + 1), pinv[0]

    return grid.cache("origin_fit", build)


def origin_value(grid: DiscGrid, interior: np.ndarray) -> np.ndarray:
    """Value at z = 0 from the innermost rings (degree-2 least squares).

    interior: (..., n_r, n_t); returns shape (...,).
    """
    rows, w0 = _origin_fit(grid)
    patch = interior[..., rows, :].reshape(*interior.shape[:-2], -1)
    return patch @ w0


def origin_jet(jet: JetField) -> dict:
    """Origin values of every entry, {(i, j): (n,) complex}."""
    return {key: origin_value(jet.grid, vi) for key, (vi, _) in jet.entries.items()}


def _poly_derivative_values(coeffs: dict, i: int, j: int, z: np.ndarray) -> np.ndarray:
    """d^i dbar^j of sum c_{pq} z^p zbar^q, coefficients (n,)-valued."""
    out = None
    for (p, q), c in coeffs.items():
        if p < i or q < j:
            continue
        fac = (math.factorial(p) // math.factorial(p - i)) * \
              (math.factorial(q) // math.factorial(q - j))
        term = fac * np.multiply.outer(c, z**(p - i) * np.conj(z)**(q - j))
        out = term if out is None else out + term
    if out is None:
        nshape = next(iter(coeffs.values())).shape if coeffs else (0,)
        out = np.zeros(nshape + z.shape, dtype=complex)
    return out


def taylor_subtract(jet: JetField, mu: int, nu: int) -> JetField:
    """Remove the full degree-m Taylor polynomial at the origin, then restore
    the (mu, nu) monomial term.

    The result vanishes to order m at the origin and its level-m origin jet is
    zero except at (mu, nu); the (mu, nu) entry itself is unchanged, so the
    defining identity d^mu dbar^nu (T^nu Tbar^mu h) = h survives exactly.
    """
    m = jet.m
    if mu + nu != m:
        raise HolderError(f"mu + nu = {mu + nu} must equal jet depth {m}")
    orig = origin_jet(jet)
    coeffs = {}
    for (p, q), val in orig.items():
        coeffs[(p, q)] = val / (math.factorial(p) * math.factorial(q))
    add_back = {(mu, nu): coeffs[(mu, nu)]}
    g = jet.grid
    z_int = g.nodes
    z_bnd = g.boundary_nodes
    entries = {}
    for (i, j), (vi, vb) in jet.entries.items():
        sub_i = _poly_derivative_values(coeffs, i, j, z_int)
        sub_b = _poly_derivative_values(coeffs, i, j, z_bnd)
        ab_i = _poly_derivative_values(add_back, i, j, z_int)
        ab_b = _poly_derivative_values(add_back, i, j, z_bnd)
        entries[(i, j)] = (vi - sub_i + ab_i, vb - sub_b + ab_b)
    out = JetField(g, m, jet.n, entries)
    out.vanishing_order_m = True
    return out
