"""The explicit contraction-constants ledger and the (R, gamma) feasibility search.

Everything here is a computable number: the base Holder-operator constants,
the m-fold composite gain M, envelope bounds of the right side over the box
E(R, gamma), and the delta/eta chain certifying that the step map contracts
on the ball of radius gamma.  Envelopes are sampled lower bounds times a
safety factor; the delta/eta chain keeps the proof-bookkeeping remainder
terms un-split (the full R-dependent gain is used wherever the derivation
splits it into a leading constant plus O(R^alpha)), which upper-bounds the
split form for every R.  Each report records that convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from typing import Optional

import numpy as np

from .solver import RhsSystem


class LedgerError(ValueError):
    pass


# ---------------------------------------------------------------------------
# base constants


def base_constants(alpha: float) -> tuple[float, float, float]:
    """(C0, C1, C2) = (12/(a(1-a)), 2^{a+1}/a, 4/(a(1-a)))."""
    if not (0.0 < alpha < 1.0):
        raise LedgerError(f"alpha must lie in (0, 1), got {alpha}")
    c0 = 12.0 / (alpha * (1.0 - alpha))
    c1 = 2.0**(alpha + 1.0) / alpha
    c2 = 4.0 / (alpha * (1.0 - alpha))
    return c0, c1, c2


def gain_row(m: int, alpha: float, R: float) -> float:
    """Single-level gain C1 m + C0 + (m-1) C2 R^alpha."""
    c0, c1, c2 = base_constants(alpha)
    return c1 * m + c0 + (m - 1) * c2 * R**alpha


def operator_gain(m: int, alpha: float, R: float) -> float:
    """M = 2^{m(m-1)/2} (C1 m + C0 + (m-1) C2 R^alpha)^m."""
    if m < 1:
        raise LedgerError(f"order m must be >= 1, got {m}")
    return 2.0**(m * (m - 1) / 2.0) * gain_row(m, alpha, R)**m


# ---------------------------------------------------------------------------
# envelope sampling


@dataclass
class EnvelopeSet:
    """Fixed-seed samples of the box E(R, gamma) = D x prod_k {|eta_k| <= r_k}.

    r_k = 6^m R^{m-k} gamma for k < m and r_m = gamma.  Half the samples are
    pushed to a coordinate face, where suprema of smooth functions live.
    Real-valued systems are sampled on the real slice.
    """

    R: float
    gamma: float
    m: int
    n: int
    z: np.ndarray
    etas: list
    radii: list

    @classmethod
    def build(cls, system: RhsSystem, R: float, gamma: float,
              count: int = 4096, seed: int = 20240601) -> "EnvelopeSet":
        m, n = system.m, system.n
        radii = [6.0**m * R**(m - k) * gamma for k in range(m)] + [gamma]
        if 6.0**m * R**m * gamma > system.R_prime:
            raise LedgerError(
                f"box violates 6^m R^m gamma <= R': {6.0**m * R**m * gamma:.3g} "
                f"> {system.R_prime:.3g}")
        rng = np.random.default_rng(seed)
        real = system.real_valued

        def sample_disc(radius, shape):
            if real:
                return radius * rng.uniform(-1.0, 1.0, shape) + 0j
            rr = radius * np.sqrt(rng.uniform(0.0, 1.0, shape))
            ph = rng.uniform(0.0, 2 * np.pi, shape)
            return rr * np.exp(1j * ph)

        z = sample_disc(R, (count,))
        top = m - 1 if system.eta_m_free else m
        etas = [sample_disc(radii[k], (count, n, k + 1)) for k in range(top + 1)]
        # push half the samples to one random coordinate's face
        half = count // 2
        pick_lvl = rng.integers(0, top + 1, half)
        for s in range(half):
            k = int(pick_lvl[s])
            c = int(rng.integers(0, n))
            e = int(rng.integers(0, k + 1))
            if real:
                etas[k][s, c, e] = radii[k] * (1.0 if rng.uniform() < 0.5 else -1.0)
            else:
                etas[k][s, c, e] = radii[k] * np.exp(1j * rng.uniform(0, 2 * np.pi))
        etas = [np.ascontiguousarray(e.transpose(1, 2, 0)) for e in etas]  # (n, k+1, S)
        return cls(R=R, gamma=gamma, m=m, n=n, z=z, etas=etas, radii=radii)


def _wirtinger_partials(system: RhsSystem, env: EnvelopeSet, step_rel: float = 1e-5):
    """FD Wirtinger partials of the evaluator at every sample.

    Returns dict level -> array (2, n_out, n, k+1, S): slot 0 is d/d eta,
    slot 1 is d/d etabar; plus 'z' -> (2, n_out, S) unless autonomous.
    """
    out = {}
    S = env.z.shape[0]
    top = len(env.etas) - 1
    real = system.real_valued
    for k in range(top + 1):
        radius = max(env.radii[k], 1e-12)
        h = step_rel * radius
        shape = env.etas[k].shape  # (n, k+1, S)
        d_eta = np.zeros((2, system.n) + shape, dtype=complex)
        for c in range(shape[0]):
            for e in range(shape[1]):
                for part, delta in ((0, h), (1, 1j * h)):
                    if real and part == 1:
                        continue
                    plus = [a.copy() for a in env.etas]
                    minus = [a.copy() for a in env.etas]
                    plus[k][c, e] += delta
                    minus[k][c, e] -= delta
                    diff = (system.eval_raw(env.z, plus)
                            - system.eval_raw(env.z, minus)) / (2 * h)
                    if part == 0:
                        d_re = diff
                    else:
                        d_im = diff
                if real:
                    d_im = np.zeros_like(d_re)
                d_eta[0, :, c, e] = 0.5 * (d_re - 1j * d_im)
                d_eta[1, :, c, e] = 0.5 * (d_re + 1j * d_im)
        out[k] = d_eta
    if not system.autonomous:
        h = step_rel * max(env.R, 1e-12)
        dz = np.zeros((2, system.n, S), dtype=complex)
        for part, delta in ((0, h), (1, 1j * h)):
            diff = (system.eval_raw(env.z + delta, env.etas)
                    - system.eval_raw(env.z - delta, env.etas)) / (2 * h)
            if part == 0:
                d_re = diff
            else:
                d_im = diff
        dz[0] = 0.5 * (d_re - 1j * d_im)
        dz[1] = 0.5 * (d_re + 1j * d_im)
        out["z"] = dz
    return out


def _pair_quotients(values: np.ndarray, coords: np.ndarray, alpha: float,
                    n_pairs: int, seed: int):
    """Max |v(s1)-v(s2)| / dist^alpha and / dist over random sample pairs.

    values: (..., S); coords: (S, d) real coordinates in max norm.
    """
    S = coords.shape[0]
    rng = np.random.default_rng(seed)
    a = rng.integers(0, S, n_pairs)
    b = rng.integers(0, S, n_pairs)
    dist = np.max(np.abs(coords[a] - coords[b]), axis=1)
    keep = dist > 1e-14
    a, b, dist = a[keep], b[keep], dist[keep]
    flat = values.reshape(-1, S)
    dv = np.abs(flat[:, a] - flat[:, b])
    h_alpha = float((dv / dist**alpha).max()) if dv.size else 0.0
    h_one = float((dv / dist).max()) if dv.size else 0.0
    return h_alpha, h_one


def envelope_bounds(system: RhsSystem, env: EnvelopeSet, alpha: float,
                    safety: float = 1.25, pair_count: int = 4096,
                    seed: int = 20240602) -> dict:
    """A/B/C sup envelopes and their Holder/Lipschitz envelopes over E(R, gamma).

    All values are sampled lower bounds multiplied by the safety factor.  For
    real-valued systems the partials are real-direction derivatives halved,
    which reproduces the real-slice Lipschitz bound when the ledger later
    doubles every envelope.
    """
    parts = _wirtinger_partials(system, env)
    top = len(env.etas) - 1
    coords_list = [np.stack([env.z.real, env.z.imag], axis=1)]
    for k in range(top + 1):
        e = env.etas[k].reshape(-1, env.z.shape[0]).T
        coords_list.append(e.real)
        coords_list.append(e.imag)
    coords = np.concatenate(coords_list, axis=1)

    def sup_of(levels):
        worst = 0.0
        for k in levels:
            worst = max(worst, float(np.abs(parts[k]).max()) if k in parts else 0.0)
        return worst

    def pairs_of(levels):
        ha = h1 = 0.0
        for k in levels:
            if k not in parts:
                continue
            a_, o_ = _pair_quotients(parts[k], coords, alpha, pair_count, seed)
            ha, h1 = max(ha, a_), max(h1, o_)
        return ha, h1

    lower = list(range(0, system.m))
    haA, h1A = pairs_of(lower)
    out = {"A": sup_of(lower), "Ha_A": haA, "H1_A": h1A}
    if system.eta_m_free:
        out.update({"B": 0.0, "Ha_B": 0.0, "H1_B": 0.0})
    else:
        haB, h1B = pairs_of([system.m])
        out.update({"B": sup_of([system.m]), "Ha_B": haB, "H1_B": h1B})
    if system.autonomous:
        out.update({"C": 0.0, "Ha_C": 0.0, "H1_C": 0.0})
    else:
        haC, h1C = pairs_of(["z"])
        out.update({"C": sup_of(["z"]), "Ha_C": haC, "H1_C": h1C})
    return {k: safety * v for k, v in out.items()}


# ---------------------------------------------------------------------------
# the delta / eta chain


def delta_eta_ledger(m: int, alpha: float, R: float, gamma: float,
                     env: dict, a0_abs: float) -> dict:
    """The full contraction chain delta_1..delta_5, delta, eta.

    Un-split convention: delta = (M + 2^m M_row) delta_1 and
    eta = (M + 2^m M_row)(|a(0)| + delta_5) with the full R-dependent gains,
    which dominates the split leading-constant-plus-remainder form.
    """
    c0, c1, c2 = base_constants(alpha)
    M = operator_gain(m, alpha, R)
    M_row = gain_row(m, alpha, R)
    M0 = 2.0**(m * (m - 1) / 2.0) * (c1 * m + c0)**m

    def hold_factor(two: bool) -> float:
        s = sum(2.0**l * (12.0**m * R**(m - l - 1) * gamma)**alpha for l in range(m))
        return 1.0 + (2.0 if two else 1.0) * s

    K2 = hold_factor(two=True)
    K5 = hold_factor(two=False)
    A, B, C = env["A"], env["B"], env["C"]
    HaA, H1A = env["Ha_A"], env["H1_A"]
    HaB, H1B = env["Ha_B"], env["H1_B"]
    HaC, H1C = env["Ha_C"], env["H1_C"]
    two_r_a = (2.0 * R)**alpha

    delta2 = sum(
        (6.0**(m - p) * 2.0**(p + 1) / math.factorial(m - p)) * R**(m - p)
        * (A + gamma * 2.0**(m + 1) * H1A + two_r_a * HaA * K2)
        for p in range(m)) + two_r_a * HaB * K2
    b_block = B + gamma * 2.0**(m + 1) * H1B
    delta1 = b_block + delta2
    delta3 = M * delta2 + (M - M0) * b_block
    delta4 = 2.0**m * M_row * delta2 + 2.0**m * (M_row - c1 * m) * b_block
    delta5 = 6.0 * R * (C + two_r_a * HaC * K5 + gamma * 2.0**m * H1C) \
        + gamma * delta1
    total = M + 2.0**m * M_row
    delta = total * delta1
    eta = total * (a0_abs + delta5)
    return {
        "C0": c0, "C1": c1, "C2": c2, "M": M, "M_row": M_row,
        "delta1": delta1, "delta2": delta2, "delta3": delta3,
        "delta4": delta4, "delta5": delta5, "delta": delta, "eta": eta,
    }


# ---------------------------------------------------------------------------
# hypothesis checks at the origin


@dataclass
class ConditionReport:
    a0_abs: float
    d_eta_m: float
    dbar_eta_m: float
    tau: float
    kappa: float
    grad_abs: float
    cond1_vanishing: bool
    cond2_second_order: bool
    cond4_tau_small: Optional[bool]
    cond6_autonomous: Optional[bool]
    eta_m_free: bool
    notes: list = dfield(default_factory=list)

    def as_dict(self):
        return {
            "a0_abs": self.a0_abs, "d_eta_m_abs": self.d_eta_m,
            "dbar_eta_m_abs": self.dbar_eta_m, "tau": self.tau,
            "kappa": self.kappa, "grad_abs": self.grad_abs,
            "cond1_vanishing": self.cond1_vanishing,
            "cond2_second_order": self.cond2_second_order,
            "cond4_tau_small": self.cond4_tau_small,
            "cond6_autonomous": self.cond6_autonomous,
            "eta_m_free_regime": self.eta_m_free,
        }


def _origin_args(system: RhsSystem):
    z = np.zeros(1, dtype=complex)
    top = system.top_level
    etas = [np.zeros((system.n, k + 1, 1), dtype=complex) for k in range(top + 1)]
    return z, etas


def _point_wirtinger(system: RhsSystem, z, etas, k, c, e, h=1e-6):
    def bump(delta):
        new = [a.copy() for a in etas]
        new[k][c, e] += delta
        return system.eval_raw(z, new)

    d_re = (bump(h) - bump(-h)) / (2 * h)
    d_im = (bump(1j * h) - bump(-1j * h)) / (2 * h)
    return 0.5 * (d_re - 1j * d_im), 0.5 * (d_re + 1j * d_im)


def check_theorem_conditions(system: RhsSystem, tol: float = 1e-10,
                             tau_threshold: Optional[float] = None,
                             eps_threshold: Optional[float] = None) -> ConditionReport:
    """Measure the origin quantities behind the solvability hypotheses.

    Reports |a(0)|, the top-level first partials (condition of the vanishing
    hypothesis), the second-derivative bundle kappa, and the full first
    gradient.  The thresholds the local theory leaves implicit are
    user-configurable; the measured numbers are always reported.
    """
    z, etas = _origin_args(system)
    a0 = system.eval_raw(z, etas)
    a0_abs = float(np.abs(a0).max())
    top = system.top_level
    d_top = 0.0
    dbar_top = 0.0
    grad = 0.0
    for k in range(top + 1):
        for c in range(system.n):
            for e in range(k + 1):
                d, db = _point_wirtinger(system, z, etas, k, c, e)
                mag_d, mag_db = float(np.abs(d).max()), float(np.abs(db).max())
                grad = max(grad, mag_d, mag_db)
                if k == system.m and not system.eta_m_free:
                    d_top = max(d_top, mag_d)
                    dbar_top = max(dbar_top, mag_db)
    # second-derivative bundle in the top variables
    kappa = 0.0
    if not system.eta_m_free:
        h = 1e-4
        for c in range(system.n):
            for e in range(system.m + 1):
                for d1 in (h, 1j * h):
                    plus = [a.copy() for a in etas]
                    minus = [a.copy() for a in etas]
                    plus[system.m][c, e] += d1
                    minus[system.m][c, e] -= d1
                    dp, dpb = _point_wirtinger(system, z, plus, system.m, c, e)
                    dm, dmb = _point_wirtinger(system, z, minus, system.m, c, e)
                    re_part = d1.real != 0
                    dd = (dp - dm) / (2 * h)
                    ddb = (dpb - dmb) / (2 * h)
                    if re_part:
                        dd_re, ddb_re = dd, ddb
                    else:
                        second_dd = 0.5 * (dd_re - 1j * dd)
                        second_ddb = 0.5 * (ddb_re - 1j * ddb)
                        second_dbdb = 0.5 * (ddb_re + 1j * ddb)
                        kappa = max(kappa, float(np.abs(second_dd).max())
                                    + float(np.abs(second_ddb).max())
                                    + float(np.abs(second_dbdb).max()))
    tau = d_top + dbar_top
    report = ConditionReport(
        a0_abs=a0_abs, d_eta_m=d_top, dbar_eta_m=dbar_top, tau=tau, kappa=kappa,
        grad_abs=grad,
        cond1_vanishing=(a0_abs <= tol and tau <= tol),
        cond2_second_order=(kappa <= tol),
        cond4_tau_small=None if tau_threshold is None else bool(tau < tau_threshold),
        cond6_autonomous=None if (eps_threshold is None or not system.autonomous)
        else bool(a0_abs < eps_threshold and grad < tau_threshold
                  if tau_threshold is not None else a0_abs < eps_threshold),
        eta_m_free=system.eta_m_free,
        notes=["thresholds for the local smallness constants are "
               "user-configurable (paper constants implicit)"])
    if system.eta_m_free:
        report.notes.append("right side independent of the top derivatives; "
                            "free-jet regime applies")
    return report


# ---------------------------------------------------------------------------
# the full report and the feasibility sweep


@dataclass
class ConstantsReport:
    alpha: float
    m: int
    R: float
    gamma: float
    envelopes: dict
    chain: dict
    a0_abs: float
    box_ok: bool
    feasible: bool
    binding: str
    seed_cap: float
    conditions: Optional[dict] = None
    convention: str = ("un-split chain: delta = (M + 2^m M_row) delta_1, "
                       "eta = (M + 2^m M_row)(|a(0)| + delta_5)")

    def as_dict(self):
        out = {"alpha": self.alpha, "m": self.m, "R": self.R, "gamma": self.gamma,
               "a0_abs": self.a0_abs}
        out.update({f"env_{k}": v for k, v in self.envelopes.items()})
        out.update(self.chain)
        out.update({"box_ok": self.box_ok, "feasible": self.feasible,
                    "binding": self.binding, "seed_cap": self.seed_cap,
                    "convention": self.convention})
        if self.conditions:
            out.update({f"cond_{k}": v for k, v in self.conditions.items()})
        return out

    def to_text(self):
        return "\n".join(f"{k} = {v!r}" for k, v in self.as_dict().items()) + "\n"


def evaluate_point(system: RhsSystem, alpha: float, R: float, gamma: float,
                   sample_count: int = 4096, safety: float = 1.25,
                   seed: int = 20240601) -> ConstantsReport:
    """Ledger at one (R, gamma): envelopes, the delta/eta chain, verdict."""
    z, etas = _origin_args(system)
    a0_abs = float(np.abs(system.eval_raw(z, etas)).max())
    box_req = 6.0**system.m * R**system.m * gamma
    if box_req > system.R_prime:
        chain = {k: float("nan") for k in
                 ("C0", "C1", "C2", "M", "M_row", "delta1", "delta2", "delta3",
                  "delta4", "delta5", "delta", "eta")}
        c0, c1, c2 = base_constants(alpha)
        chain.update({"C0": c0, "C1": c1, "C2": c2})
        env = {k: float("nan") for k in ("A", "Ha_A", "H1_A", "B", "Ha_B",
                                         "H1_B", "C", "Ha_C", "H1_C")}
        return ConstantsReport(alpha, system.m, R, gamma, env, chain, a0_abs,
                               box_ok=False, feasible=False,
                               binding="box: 6^m R^m gamma > R'",
                               seed_cap=gamma / 2)
    env_set = EnvelopeSet.build(system, R, gamma, count=sample_count, seed=seed)
    env = envelope_bounds(system, env_set, alpha, safety=safety)
    chain = delta_eta_ledger(system.m, alpha, R, gamma, env, a0_abs)
    ok_delta = chain["delta"] <= 0.75
    ok_eta = chain["eta"] <= gamma / 2
    feasible = ok_delta and ok_eta
    # the contraction constraint is the essential obstruction; name it first
    if feasible:
        binding = "none"
    elif not ok_delta:
        binding = f"delta = {chain['delta']:.4g} > 3/4"
    else:
        binding = f"eta = {chain['eta']:.4g} > gamma/2 = {gamma / 2:.4g}"
    return ConstantsReport(alpha, system.m, R, gamma, env, chain, a0_abs,
                           box_ok=True, feasible=feasible, binding=binding,
                           seed_cap=gamma / 2)


@dataclass
class FeasibilityResult:
    feasible: bool
    R0: Optional[float]
    gamma0: Optional[float]
    report: Optional[ConstantsReport]
    rows: list
    binding: str


# sweep ladders: R halving, gamma decades wide enough for the large-gamma
# regimes the explicit constants force (eta >= (M + 2^m M_row)|a(0)|)
R_SWEEP_STEPS = 41
GAMMA_DECADES = range(-6, 7)


def feasibility_search(system: RhsSystem, alpha: float, strategy: str = "local",
                       R_init: Optional[float] = None, sample_count: int = 1024,
                       safety: float = 1.25) -> FeasibilityResult:
    """First feasible (R, gamma) on the ladder, in a fixed deterministic order.

    "local" walks gamma upward and halves R inside each decade (the shrinking
    disk regime); "global" keeps R = R_init and walks gamma downward (the
    autonomous regime).  Rows are recorded for the region report.
    """
    if strategy not in ("local", "global"):
        raise LedgerError(f"unknown strategy {strategy!r}")
    R_init = float(R_init if R_init is not None else min(system.R, 1.0))
    rows = []
    best = None
    best_score = np.inf

    def consider(R, gamma):
        nonlocal best, best_score
        rep = evaluate_point(system, alpha, R, gamma, sample_count=sample_count,
                             safety=safety)
        rows.append((R, gamma, rep.chain.get("delta"), rep.chain.get("eta"),
                     rep.feasible))
        if rep.box_ok:
            score = max(rep.chain["delta"] / 0.75, rep.chain["eta"] / (gamma / 2))
            if score < best_score:
                best, best_score = rep, score
        elif best is None:
            best = rep
        return rep

    # cheap lower bound on eta lets whole decades be skipped
    z, etas = _origin_args(system)
    a0_abs = float(np.abs(system.eval_raw(z, etas)).max())

    if strategy == "local":
        for j in GAMMA_DECADES:
            gamma = 10.0**j
            eta_floor = (operator_gain(system.m, alpha, 0.0)
                         + 2.0**system.m * gain_row(system.m, alpha, 0.0)) * a0_abs
            if eta_floor > gamma / 2:
                continue
            for i in range(R_SWEEP_STEPS):
                R = R_init * 2.0**(-i)
                rep = consider(R, gamma)
                if rep.feasible:
                    return FeasibilityResult(True, R, gamma, rep, rows, "none")
    else:
        for j in reversed(GAMMA_DECADES):
            gamma = 10.0**j
            rep = consider(R_init, gamma)
            if rep.feasible:
                return FeasibilityResult(True, R_init, gamma, rep, rows, "none")
    binding = best.binding if best is not None else "no admissible box on the ladder"
    return FeasibilityResult(False, None, None, best, rows, binding)
