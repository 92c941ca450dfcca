"""Self-check suites: operator identities and norm inequalities with measured
errors.  Shared by the test-suite and the `verify` CLI command."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .finitediff import wirtinger_fd
from .grid import ScalarField, build_grid, sample
from .holder import JetField, jet_norm, level_norm, norms
from .operators import apply_T, apply_T2, apply_Tbar
from .solver import JetPolynomial
from .words import compose_green
from .finitediff import fd_jet


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: measured {self.measured:.3e} vs {self.tolerance:.3e}"


def _interior_mask(grid, fraction):
    return grid.radii <= fraction * grid.R


def band_limited_fields(grid, count, seed=20240603, k_max=4):
    """Smooth pseudo-random fields: low-order polynomials in z, zbar."""
    rng = np.random.default_rng(seed)
    z_i, z_b = grid.nodes, grid.boundary_nodes
    fields = []
    for _ in range(count):
        f_i = np.zeros_like(z_i)
        f_b = np.zeros_like(z_b)
        for p in range(k_max):
            for q in range(k_max):
                c = (rng.standard_normal() + 1j * rng.standard_normal()) \
                    / (1.0 + p + q)**2
                f_i = f_i + c * z_i**p * np.conj(z_i)**q
                f_b = f_b + c * z_b**p * np.conj(z_b)**q
        fields.append(ScalarField(grid, f_i, f_b))
    return fields


def check_monomials(grid_shape=(128, 256), R=1.0, l_max=3, tol_scale=1e-3):
    """T(zbar^l) = zbar^{l+1}/(l+1) against the closed forms."""
    grid = build_grid(R, *grid_shape)
    out = []
    for l in range(l_max + 1):
        f = sample(grid, lambda z, l=l: np.conj(z)**l)
        got = apply_T(f)
        exact_i = np.conj(grid.nodes)**(l + 1) / (l + 1)
        exact_b = np.conj(grid.boundary_nodes)**(l + 1) / (l + 1)
        err = max(np.abs(got.interior - exact_i).max(),
                  np.abs(got.boundary - exact_b).max())
        tol = tol_scale * R**(l + 1)
        out.append(CheckResult(f"T(zbar^{l}) closed form at {grid_shape}", err <= tol,
                               float(err), tol))
    return out


def check_dbar_inverse(grid_shape=(128, 256), R=1.0, count=20, tol=1e-2):
    """dbar(T f) = f by central differences on |z| <= 0.8 R."""
    grid = build_grid(R, *grid_shape)
    fields = band_limited_fields(grid, count)
    mask = _interior_mask(grid, 0.8)
    worst = 0.0
    for f in fields:
        tf = apply_T(f)
        _, fzb = wirtinger_fd(tf)
        num = np.abs(fzb.interior[mask] - f.interior[mask]).max()
        den = max(np.abs(f.interior[mask]).max(), 1e-30)
        worst = max(worst, float(num / den))
    return [CheckResult("dbar T f = f (FD, 20 fields)", worst <= tol, worst, tol)]


def check_sup_bound(grid_shape=(64, 128), R=1.0, count=100):
    """|T f| <= 4 R |f| on fixed-seed random fields; zero violations."""
    grid = build_grid(R, *grid_shape)
    fields = band_limited_fields(grid, count, seed=20240604)
    worst = 0.0
    for f in fields:
        tf = apply_T(f)
        worst = max(worst, tf.sup() / max(f.sup(), 1e-30))
    return [CheckResult("|Tf| <= 4R|f| (100 fields)", worst <= 4.0 * R, worst, 4.0 * R)]


def check_T2_vanishing(grid_shape=(128, 256), R=1.0, tol=1e-3):
    """2T applied to zbar vanishes identically."""
    grid = build_grid(R, *grid_shape)
    f = sample(grid, np.conj)
    got = apply_T2(f)
    err = got.sup()
    return [CheckResult("2T(zbar) = 0", err <= tol, float(err), tol)]


def check_conjugation(grid_shape=(32, 64), R=1.0):
    """Tbar f = conj(T conj f), bit for bit."""
    grid = build_grid(R, *grid_shape)
    f = band_limited_fields(grid, 1, seed=5)[0]
    a = apply_Tbar(f)
    b = apply_T(f.conj()).conj()
    same = (np.array_equal(a.interior, b.interior)
            and np.array_equal(a.boundary, b.boundary))
    return [CheckResult("Tbar = conj T conj (bit-exact)", same, 0.0 if same else 1.0, 0.0)]


def check_holomorphy_preserved(grid_shape=(128, 256), R=1.0, tol=1e-2):
    """Tbar keeps z^k holomorphic: discrete dbar of Tbar(z^k) is small."""
    grid = build_grid(R, *grid_shape)
    out = []
    for k in (0, 1, 3):
        f = sample(grid, lambda z, k=k: z**k)
        tf = apply_Tbar(f)
        _, fzb = wirtinger_fd(tf)
        scale = max(tf.sup(), 1e-30)
        err = float(np.abs(fzb.interior).max() / scale)
        out.append(CheckResult(f"dbar Tbar(z^{k}) ~ 0 (relative)", err <= tol, err, tol))
    return out


def random_polynomial_jet(grid, m, n=1, seed=0, vanishing=True):
    """Analytic jet of a random polynomial, vanishing to order m if asked."""
    rng = np.random.default_rng(seed)
    values = {}
    deg_extra = 2
    for p in range(m + deg_extra + 1):
        for q in range(m + deg_extra + 1 - p):
            if vanishing and p + q < m:
                continue
            if p + q > m + deg_extra:
                continue
            values[(p, q)] = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) \
                / (1.0 + p + q)
    poly = JetPolynomial({k: v * math.factorial(k[0]) * math.factorial(k[1])
                          for k, v in values.items()}, n)
    jet = poly.jet_field(grid, m)
    jet.vanishing_order_m = vanishing
    return jet


def check_norm_lemmas(R=1.0, grid_shape=(48, 96), alpha=0.5, trials=50,
                      m_max=4, safety=1.25):
    """Vanishing-order norm inequalities on random polynomial jets.

    The sampled Holder estimate can undershoot on the larger side, so the
    right side carries the declared safety factor.
    """
    grid = build_grid(R, *grid_shape)
    results = []
    worst_23 = 0.0
    worst_25 = 0.0
    for t in range(trials):
        m = 1 + t % m_max
        jet = random_polynomial_jet(grid, m, seed=100 + t)
        norm_m = level_norm(jet, m, alpha).composite
        norm_0 = level_norm(jet, 0, alpha).composite
        bound = (6.0**m / math.factorial(m)) * R**m * norm_m * safety
        worst_23 = max(worst_23, norm_0 / bound if bound > 0 else 0.0)
        for l in range(m + 1):
            norm_l = level_norm(jet, l, alpha).composite
            b = (6.0**(m - l) / math.factorial(m - l)) * R**(m - l) * norm_m * safety
            worst_25 = max(worst_25, norm_l / b if b > 0 else 0.0)
    results.append(CheckResult("order-m bound |f| <= 6^m/m! R^m |f|_(m)",
                               worst_23 <= 1.0, worst_23, 1.0))
    results.append(CheckResult("level nesting |f|_(l) <= 6^{m-l}/(m-l)! R^{m-l} |f|_(m)",
                               worst_25 <= 1.0, worst_25, 1.0))
    # Banach algebra on the estimator
    worst_alg = 0.0
    for f, g in zip(band_limited_fields(grid, 10, seed=31),
                    band_limited_fields(grid, 10, seed=32)):
        fg = ScalarField(grid, f.interior * g.interior, f.boundary * g.boundary)
        lhs = norms(fg, alpha).composite
        rhs = norms(f, alpha).composite * norms(g, alpha).composite
        worst_alg = max(worst_alg, lhs / rhs if rhs > 0 else 0.0)
    results.append(CheckResult("Banach algebra |fg| <= |f||g|", worst_alg <= 1.0,
                               worst_alg, 1.0))
    # |z| norm estimate: 3R within 2% from below
    fz = sample(grid, lambda z: z)
    rep = norms(fz, alpha)
    est = rep.composite
    ok = 2.94 * R <= est <= 3.0 * R + 1e-12
    results.append(CheckResult("composite norm of z in [2.94R, 3R]", ok, est, 3.0 * R))
    return results


def check_word_engine(R=1.0, grid_shape=(64, 128), tol=1e-2, m_max=3):
    """Every jet entry of the composite Green operator against FD of its
    (0,0) entry, polynomial inputs, m <= 3."""
    results = []
    grid = build_grid(R, *grid_shape)
    mask = (grid.radii >= 0.15 * R) & (grid.radii <= 0.8 * R)
    for m in range(1, m_max + 1):
        for nu in range(m + 1):
            mu = m - nu
            rng = np.random.default_rng(400 + m * 10 + nu)
            z_i, z_b = grid.nodes, grid.boundary_nodes
            h_i = np.zeros_like(z_i)
            h_b = np.zeros_like(z_b)
            for p in range(2):
                for q in range(2):
                    c = rng.standard_normal() + 1j * rng.standard_normal()
                    h_i += c * z_i**p * np.conj(z_i)**q
                    h_b += c * z_b**p * np.conj(z_b)**q
            jet = compose_green(nu, mu, h_i[None], h_b[None], grid)
            (vi, vb) = jet.entry(mu, nu)
            exact = np.array_equal(vi[0], h_i) and np.array_equal(vb[0], h_b)
            results.append(CheckResult(
                f"identity entry (mu,nu)=({mu},{nu}) equals input exactly",
                exact, 0.0 if exact else 1.0, 0.0))
            base = ScalarField(grid, jet.entry(0, 0)[0][0], jet.entry(0, 0)[1][0])
            fd = fd_jet(base, m)
            worst = 0.0
            for (i, j), fld in fd.items():
                if i + j > m or (i, j) == (0, 0):
                    continue
                got = jet.entry(i, j)[0][0]
                scale = max(np.abs(got[mask]).max(), np.abs(h_i).max(), 1e-12)
                worst = max(worst, float(
                    np.abs(fld.interior[mask] - got[mask]).max() / scale))
            results.append(CheckResult(
                f"jet entries match FD of (0,0), m={m} nu={nu}", worst <= tol,
                worst, tol))
    return results


def run_all():
    """The full identity/inequality battery with one line per check."""
    suites = [
        check_monomials((64, 128), tol_scale=4e-3),
        check_dbar_inverse((64, 128)),
        check_sup_bound(),
        check_T2_vanishing((64, 128)),
        check_conjugation(),
        check_holomorphy_preserved((64, 128)),
        check_norm_lemmas(),
        check_word_engine(grid_shape=(48, 96)),
    ]
    return [r for suite in suites for r in suite]
