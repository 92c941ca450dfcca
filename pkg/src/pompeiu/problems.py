"""Builders for the named systems, Riemannian charts, the harmonic-map
equation, the Kobayashi upper-bound sweep, and the real/complex operator
coefficient identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from typing import Callable, Optional

import numpy as np

from .constants import feasibility_search
from .grid import build_grid
from .solver import (JetPolynomial, JetSpec, RhsSystem, SolveOptions, solve)


class ProblemError(ValueError):
    pass


# ---------------------------------------------------------------------------
# metric charts and Christoffel symbols


@dataclass
class MetricChart:
    """A single coordinate chart of a Riemannian manifold.

    g_eval maps points (..., dim) to metric tensors (..., dim, dim); it must
    accept batched input.  An analytic Christoffel evaluator may be supplied;
    otherwise central differences of g with the given step are used.
    """

    dim: int
    g_eval: Callable
    christoffel_eval: Optional[Callable] = None
    box_radius: float = 1.0
    fd_step: float = 1e-5
    name: str = "chart"

    def metric(self, w):
        w = np.asarray(w, dtype=complex)
        g = np.asarray(self.g_eval(w))
        want = w.shape[:-1] + (self.dim, self.dim)
        if g.shape != want:
            raise ProblemError(f"metric evaluator returned shape {g.shape}, want {want}")
        return g

    def spot_check(self, samples: int = 100, seed: int = 11) -> None:
        rng = np.random.default_rng(seed)
        radius = self.box_radius if np.isfinite(self.box_radius) else 1.0
        w = radius * rng.uniform(-0.9, 0.9, (samples, self.dim))
        g = self.metric(w).real
        if not np.allclose(g, np.swapaxes(g, -1, -2), atol=1e-10):
            raise ProblemError("metric is not symmetric on the sample set")
        eigs = np.linalg.eigvalsh(g)
        if eigs.min() <= 0:
            raise ProblemError("metric is not positive definite on the sample set")


def christoffel(chart: MetricChart, w) -> np.ndarray:
    """Levi-Civita symbols Gamma^i_{jk} at point(s) w, shape (..., i, j, k)."""
    if chart.christoffel_eval is not None:
        return np.asarray(chart.christoffel_eval(np.asarray(w, dtype=complex)))
    w = np.asarray(w, dtype=complex)
    single = w.ndim == 1
    if single:
        w = w[None]
    n = chart.dim
    h = chart.fd_step
    dg = np.empty(w.shape[:-1] + (n, n, n), dtype=complex)  # dg[..., l, i, j]
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dg[..., l, :, :] = (chart.metric(w + e) - chart.metric(w - e)) / (2 * h)
    g = chart.metric(w)
    conds = np.linalg.cond(g.real if np.all(g.imag == 0) else g)
    if np.any(conds > 1e12):
        raise ProblemError("metric is numerically singular (condition > 1e12)")
    ginv = np.linalg.inv(g)
    # Gamma^i_{jk} = 1/2 g^{il} (d_j g_{lk} + d_k g_{jl} - d_l g_{jk})
    term = (np.einsum("...jlk->...ljk", dg)
            + np.einsum("...kjl->...ljk", dg)
            - np.einsum("...ljk->...ljk", dg))
    gamma = 0.5 * np.einsum("...il,...ljk->...ijk", ginv, term)
    return gamma[0] if single else gamma


def conformal_christoffel(log_lambda_grad: Callable, dim: int) -> Callable:
    """Gamma for g = lambda^2 I from the gradient of log lambda."""

    def ev(w):
        w = np.asarray(w, dtype=complex)
        single = w.ndim == 1
        if single:
            w = w[None]
        grad = log_lambda_grad(w)  # (..., dim)
        n = dim
        eye = np.eye(n)
        gamma = (np.einsum("ik,...j->...kij", eye, grad)
                 + np.einsum("jk,...i->...kij", eye, grad)
                 - np.einsum("ij,...k->...kij", eye, grad))
        return gamma[0] if single else gamma

    return ev


def flat_chart(dim: int = 2) -> MetricChart:
    def g(w):
        w = np.asarray(w)
        eye = np.eye(dim)
        return np.broadcast_to(eye, w.shape[:-1] + (dim, dim)).copy()

    return MetricChart(dim=dim, g_eval=g, christoffel_eval=lambda w: np.zeros(
        np.asarray(w).shape[:-1] + (dim, dim, dim)), box_radius=np.inf, name="flat")


def sphere_chart(dim: int = 2, analytic: bool = True) -> MetricChart:
    """Round-sphere stereographic chart: lambda = 2 / (1 + sum w_i^2).

    The squared-sum form (not |w|^2) keeps the evaluator analytic, so
    envelope sampling may probe complex arguments.
    """

    def s_of(w):
        return np.sum(np.asarray(w, dtype=complex)**2, axis=-1)

    def g(w):
        w = np.asarray(w, dtype=complex)
        lam = 2.0 / (1.0 + s_of(w))
        eye = np.eye(dim)
        return lam[..., None, None]**2 * eye

    chart = MetricChart(dim=dim, g_eval=g, box_radius=1.0, name="sphere")
    if analytic:
        def grad_log_lambda(w):
            w = np.asarray(w, dtype=complex)
            return -2.0 * w / (1.0 + s_of(w))[..., None]

        chart.christoffel_eval = conformal_christoffel(grad_log_lambda, dim)
    return chart


def chart_from_csv(path, dim: int) -> MetricChart:
    """Metric from a CSV table (columns w_1..w_dim, g_11..g_nn) on a regular
    lattice, multilinearly interpolated."""
    raw = np.genfromtxt(path, delimiter=",", names=True)
    w_cols = [f"w_{i + 1}" for i in range(dim)]
    g_cols = [f"g_{i + 1}{j + 1}" for i in range(dim) for j in range(dim)]
    axes = []
    for c in w_cols:
        axes.append(np.unique(raw[c]))
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != raw.shape[0]:
        raise ProblemError("CSV table is not a full regular lattice")
    order = np.lexsort(tuple(raw[c] for c in reversed(w_cols)))
    table = np.stack([raw[c][order].reshape(shape) for c in g_cols], axis=-1)
    table = table.reshape(shape + (dim, dim))
    box = float(min(a.max() for a in axes))

    def g(w):
        w = np.asarray(w)
        pts = np.real(w).reshape(-1, dim)
        out = np.empty((pts.shape[0], dim, dim))
        idx = []
        frac = []
        for d in range(dim):
            a = axes[d]
            i = np.clip(np.searchsorted(a, pts[:, d]) - 1, 0, len(a) - 2)
            idx.append(i)
            frac.append((pts[:, d] - a[i]) / (a[i + 1] - a[i]))
        out[:] = 0.0
        for corner in range(2**dim):
            weight = np.ones(pts.shape[0])
            loc = []
            for d in range(dim):
                bit = (corner >> d) & 1
                weight = weight * (frac[d] if bit else (1 - frac[d]))
                loc.append(idx[d] + bit)
            out += weight[:, None, None] * table[tuple(loc)]
        return out.reshape(w.shape[:-1] + (dim, dim))

    return MetricChart(dim=dim, g_eval=g, box_radius=box, name="csv")


# ---------------------------------------------------------------------------
# harmonic maps and the Kobayashi upper bound


def harmonic_map_system(chart: MetricChart) -> RhsSystem:
    """The chart equation d dbar f^i = -Gamma^i_{jk}(f) df^j dbar-f^k.

    Order two with the mixed derivative on the left, independent of the
    second derivatives, autonomous; real chart data keeps iterates real.
    """
    n = chart.dim

    def evaluator(z, etas):
        eta0 = np.moveaxis(etas[0][:, 0], 0, -1)  # (..., n)
        dP = etas[1][:, 0]   # d f, shape (n, S)
        dB = etas[1][:, 1]   # dbar f
        gamma = christoffel(chart, eta0)          # (..., i, j, k)
        gamma = np.moveaxis(gamma, range(-3, 0), range(3))  # (i, j, k, ...)
        return -np.einsum("ijk...,j...,k...->i...", gamma, dP, dB)

    return RhsSystem(m=2, mu=1, nu=1, n=n, evaluator=evaluator,
                     name=f"harmonic({chart.name})", R=1.0,
                     R_prime=chart.box_radius, autonomous=True,
                     eta_m_free=True, real_valued=True)


def harmonic_map_spec(p, v, dim: int) -> JetSpec:
    """Initial jet for f(0) = p, df(0)(d/dx) = v (orders below two)."""
    p = np.asarray(p, dtype=complex).reshape(dim)
    v = np.asarray(v, dtype=complex).reshape(dim)
    return JetSpec({(0, 0): p, (1, 0): v / 2, (0, 1): v / 2}, mode="polynomial")


@dataclass
class KobayashiResult:
    R_best: Optional[float]
    bound: Optional[float]
    rows: list
    reports: dict


def kobayashi_upper_bound(chart: MetricChart, p, v, R_start: float = 0.25,
                          ladder: int = 8, alpha: float = 0.5,
                          grid_shape: tuple = (32, 64),
                          sample_count: int = 512) -> KobayashiResult:
    """Certified upper bound 1/R_best on the harmonic Kobayashi metric.

    Doubles R until the first failure (ledger infeasible, envelope escape, or
    non-convergence) and returns the largest converged radius.  The true
    metric is an infimum over all harmonic disks, so only upper bounds are
    certified; extending the ladder can only improve (never worsen) R_best.
    """
    system = harmonic_map_system(chart)
    spec = harmonic_map_spec(p, v, chart.dim)
    rows = []
    reports = {}
    R_best = None
    for i in range(ladder):
        R = R_start * 2.0**i
        shift = JetPolynomial(spec.low_entries(system.m), system.n)
        if system.R_prime - shift.sup_bound(R) <= 0:
            rows.append((R, "infeasible", "polynomial jet exceeds the chart box"))
            break
        sys_shift = system.shifted_by(shift, R=R)
        fs = feasibility_search(sys_shift, alpha, strategy="global", R_init=R,
                                sample_count=sample_count)
        if not fs.feasible:
            rows.append((R, "infeasible", fs.binding))
            break
        grid = build_grid(R, *grid_shape)
        opts = SolveOptions(alpha=alpha, gamma=fs.gamma0)
        _, rep = solve(system, spec, grid, opts)
        reports[R] = rep
        if rep.verdict != "converged":
            rows.append((R, rep.verdict, rep.termination))
            break
        rows.append((R, "converged", f"residual {rep.residual_sup:.3e}"))
        R_best = R
    bound = (1.0 / R_best) if R_best else None
    return KobayashiResult(R_best=R_best, bound=bound, rows=rows, reports=reports)


# ---------------------------------------------------------------------------
# real <-> complex operator coefficients


@dataclass
class OperatorCoefficients:
    """dx^mu dy^nu = i^nu sum_j A_j d^j dbar^{m-j}; A_j are exact integers."""

    m: int
    A: list
    prefactor_power: int  # i^prefactor_power

    @property
    def prefactor(self) -> complex:
        return 1j**(self.prefactor_power % 4)

    def conj_symmetric(self) -> bool:
        sign = (-1)**self.prefactor_power
        return all(self.A[j] == sign * self.A[self.m - j] for j in range(self.m + 1))


def real_to_complex(mu: int, nu: int) -> OperatorCoefficients:
    """Expand dx^mu dy^nu in the Wirtinger basis (exact integers)."""
    if mu < 0 or nu < 0:
        raise ProblemError("orders must be nonnegative")
    m = mu + nu
    A = []
    for j in range(m + 1):
        s = 0
        for l in range(max(0, j - mu), min(nu, j) + 1):
            s += math.comb(mu, j - l) * math.comb(nu, l) * (-1)**(nu - l)
        A.append(s)
    coeffs = OperatorCoefficients(m=m, A=A, prefactor_power=nu)
    assert coeffs.conj_symmetric()
    return coeffs


def cp_coefficients(a_kl: dict, m: int):
    """C_p from real-operator coefficients sum a_{kl} dx^k dy^l (k + l = m).

    Returns (C, p0) where C[p] is the coefficient of d^p dbar^{m-p} and p0 is
    the unique index with C nonzero elsewhere zero, or None when the one-term
    hypothesis fails.
    """
    width = None
    for (k, l) in a_kl:
        if k + l != m:
            raise ProblemError(f"coefficient ({k},{l}) must satisfy k + l = {m}")
    C = [None] * (m + 1)
    for p in range(m + 1):
        total = 0
        for (k, l), a in a_kl.items():
            s = 0
            for q in range(max(0, p - k), min(l, p) + 1):
                s += math.comb(k, p - q) * math.comb(l, q) * (-1)**(l - q)
            total = total + np.asarray(a) * (1j**l) * s
        C[p] = total
    nz = [p for p in range(m + 1) if np.any(np.abs(np.atleast_1d(C[p])) > 1e-12)]
    p0 = None
    if len(nz) == 1 and np.all(np.abs(np.atleast_1d(C[nz[0]])) > 1e-12):
        p0 = nz[0]
    return C, p0


# ---------------------------------------------------------------------------
# built-in systems


def _mizohata(F: Optional[Callable] = None, R: float = 0.5) -> RhsSystem:
    if R >= 1.0:
        raise ProblemError("the 1/(1 + Re z) factor requires R < 1")

    def evaluator(z, etas):
        x = np.real(z)
        du = etas[1][:, 0]
        rhs = -((1.0 - x) / (1.0 + x)) * du
        if F is not None:
            rhs = rhs + np.asarray(F(z)) / (1.0 + x)
        return rhs

    return RhsSystem(m=1, mu=0, nu=1, n=1, evaluator=evaluator, name="mizohata",
                     R=R, R_prime=np.inf, autonomous=False, eta_m_free=False,
                     real_valued=False)


def _liouville(R_prime: float = 1.5) -> RhsSystem:
    def evaluator(z, etas):
        return np.exp(2.0 * etas[0][:, 0]) / 4.0

    return RhsSystem(m=2, mu=1, nu=1, n=1, evaluator=evaluator, name="liouville",
                     R=1.0, R_prime=R_prime, autonomous=True, eta_m_free=True,
                     real_valued=True)


def _director() -> RhsSystem:
    def evaluator(z, etas):
        eta0 = etas[0][:, 0]
        grad_term = np.sum(etas[1][:, 0] * etas[1][:, 1], axis=0)
        return -eta0 * grad_term[None]

    return RhsSystem(m=2, mu=1, nu=1, n=3, evaluator=evaluator, name="director",
                     R=1.0, R_prime=1.0, autonomous=True, eta_m_free=True,
                     real_valued=True)


def _j_holomorphic(a_fn: Optional[Callable] = None, R_prime: float = 1.0) -> RhsSystem:
    if a_fn is None:
        a_fn = lambda u: u  # canonical structure map with a(0) = 0

    def evaluator(z, etas):
        return np.asarray(a_fn(etas[0][:, 0])) * np.conj(etas[1][:, 0])

    return RhsSystem(m=1, mu=0, nu=1, n=1, evaluator=evaluator,
                     name="j_holomorphic", R=1.0, R_prime=R_prime,
                     autonomous=True, eta_m_free=False, real_valued=False)


def _m_laplace(A_fn: Callable, m_prime: int, n: int = 1,
               eta_m_free: bool = True, autonomous: bool = False,
               R_prime: float = np.inf) -> RhsSystem:
    """Delta^m' u = A(x, y; u, grad u, ...) expressed as the mixed-derivative
    system of order 2 m'; real gradients are rebuilt from complex jets through
    the exact Wirtinger expansion coefficients."""
    m = 2 * m_prime
    top = m - 1 if eta_m_free else m
    combos = {}
    for lvl in range(top + 1):
        for i in range(lvl + 1):
            combos[(i, lvl - i)] = real_to_complex(i, lvl - i)

    def evaluator(z, etas):
        xis = []
        for lvl in range(min(top, len(etas) - 1) + 1):
            rows = []
            for t in range(lvl + 1):
                i, j = lvl - t, t  # dx^i dy^j
                co = combos[(i, j)]
                acc = 0.0
                for q, Aq in enumerate(co.A):
                    acc = acc + Aq * etas[lvl][:, lvl - q]
                rows.append(co.prefactor * acc)
            xis.append(np.stack(rows, axis=1))
        return np.asarray(A_fn(np.real(z), np.imag(z), xis)) / 4.0**m_prime

    return RhsSystem(m=m, mu=m_prime, nu=m_prime, n=n, evaluator=evaluator,
                     name=f"m_laplace({m_prime})", R=1.0, R_prime=R_prime,
                     autonomous=autonomous, eta_m_free=eta_m_free,
                     real_valued=True)


BUILTIN_NAMES = ("mizohata", "liouville", "director", "j_holomorphic", "m_laplace")


def builtin(name: str, **params) -> RhsSystem:
    """Construct one of the bundled systems by name."""
    if name == "mizohata":
        return _mizohata(**params)
    if name == "liouville":
        return _liouville(**params)
    if name == "director":
        return _director()
    if name == "j_holomorphic":
        return _j_holomorphic(**params)
    if name == "m_laplace":
        return _m_laplace(**params)
    raise ProblemError(f"unknown builtin {name!r}; know {BUILTIN_NAMES}")
