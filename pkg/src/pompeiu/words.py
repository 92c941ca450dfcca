"""Symbolic operator words: derivatives of iterated transforms without
numerical differentiation.

A word is a chain of atoms applied to an inner field h:

    ('T', j)  the j-th order transform ^jT  (('T', 1) is T itself)
    ('B', j)  its conjugate ^jTbar

plus a pending pure derivative (p, q) acting on h before the chain.  The
rewrite rules

    d (^jT w)    -> ^{j+1}T w          dbar (^jT w)  -> d^{j-1} w
    dbar (^jB w) -> ^{j+1}B w          d (^jB w)     -> dbar^{j-1} w

push any mixed derivative d^k dbar^l through T^nu Tbar^mu.  For k + l <=
mu + nu the normal form never leaves a pending derivative on h, so every jet
entry of the composite Green operator is a chain of well-defined integral
operators applied to h.  Words reduce confluently: applying the d's and
dbar's in any order yields the same normal form (exercised in the tests).

Evaluation walks the chain inside-out with memoization, expanding ^jT for
j >= 3 through the 2T / d^i S_b reduction, which needs inner derivative
stacks that are themselves reduced words.
"""

from __future__ import annotations

import numpy as np

from .grid import DiscGrid, ScalarField
from .holder import JetField
from . import operators as ops


class WordError(ValueError):
    pass


# a word is (atoms, p, q): atoms a tuple of ('T'|'B', j), p/q pending d/dbar on h
IDENTITY = ((), 0, 0)


def word_T_power(nu: int, mu: int):
    """The word for T^nu Tbar^mu."""
    return (tuple([("T", 1)] * nu + [("B", 1)] * mu), 0, 0)


def apply_d(word):
    """Left-apply d to a word."""
    atoms, p, q = word
    if not atoms:
        return ((), p + 1, q)
    kind, j = atoms[0]
    rest = (atoms[1:], p, q)
    if kind == "T":
        return ((("T", j + 1),) + atoms[1:], p, q)
    out = rest
    for _ in range(j - 1):
        out = apply_dbar(out)
    return out


def apply_dbar(word):
    atoms, p, q = word
    if not atoms:
        return ((), p, q + 1)
    kind, j = atoms[0]
    rest = (atoms[1:], p, q)
    if kind == "B":
        return ((("B", j + 1),) + atoms[1:], p, q)
    out = rest
    for _ in range(j - 1):
        out = apply_d(out)
    return out


def reduce_word(k: int, l: int, nu: int, mu: int, dbar_first: bool = True):
    """Normal form of d^k dbar^l (T^nu Tbar^mu).

    Requires k + l <= mu + nu; beyond that the reduction would demand
    derivatives of the inner field that jet propagation does not supply.
    """
    if min(k, l, nu, mu) < 0:
        raise WordError("orders must be nonnegative")
    if k + l > mu + nu:
        raise WordError(
            f"d^{k} dbar^{l} exceeds operator depth mu + nu = {mu + nu}")
    w = word_T_power(nu, mu)
    first, second = (apply_dbar, apply_d) if dbar_first else (apply_d, apply_dbar)
    n_first = l if dbar_first else k
    n_second = k if dbar_first else l
    for _ in range(n_first):
        w = first(w)
    for _ in range(n_second):
        w = second(w)
    return w


def word_str(word) -> str:
    atoms, p, q = word
    parts = []
    for kind, j in atoms:
        base = "T" if kind == "T" else "Tbar"
        parts.append(base if j == 1 else f"^{j}{base}")
    if p or q:
        parts.append(f"d^{p}dbar^{q}")
    return " ".join(parts) if parts else "id"


def word_uses_boundary_ops(word) -> bool:
    """True when evaluation expands a ^jT or ^jB with j >= 3 (S_b terms)."""
    atoms, _, _ = word
    return any(j >= 3 for _, j in atoms)


class WordEvaluator:
    """Evaluates reduced words against a fixed inner field h (batched over components).

    Fields are (interior, boundary) array pairs with a leading component axis.
    Intermediate results are memoized per word, so the jet entries of one
    compose_green call share every common sub-chain.
    """

    def __init__(self, grid: DiscGrid, h_interior: np.ndarray, h_boundary: np.ndarray):
        self.grid = grid
        h_interior = np.asarray(h_interior, dtype=complex)
        h_boundary = np.asarray(h_boundary, dtype=complex)
        if h_interior.ndim == 2:
            h_interior = h_interior[None]
            h_boundary = h_boundary[None]
        self.h = (h_interior, h_boundary)
        self.n = h_interior.shape[0]
        self._memo = {}

    def evaluate(self, word):
        if word in self._memo:
            return self._memo[word]
        atoms, p, q = word
        if not atoms:
            if p or q:
                raise WordError(
                    f"word leaves a pending derivative d^{p}dbar^{q} on the inner field")
            return self.h
        head, tail = atoms[0], (atoms[1:], p, q)
        kind, j = head
        if j == 1:
            inner = self.evaluate(tail)
            if kind == "T":
                out = ops.t_apply_arrays(self.grid, *inner)
            else:
                ci, cb = ops.t_apply_arrays(self.grid, np.conj(inner[0]), np.conj(inner[1]))
                out = (np.conj(ci), np.conj(cb))
        elif j == 2:
            inner = self.evaluate(tail)
            if kind == "T":
                out = ops.t2_apply_arrays(self.grid, *inner)
            else:
                ci, cb = ops.t2_apply_arrays(self.grid, np.conj(inner[0]), np.conj(inner[1]))
                out = (np.conj(ci), np.conj(cb))
        else:
            out = self._evaluate_highT(kind, j, tail)
        self._memo[word] = out
        return out

    def _evaluate_highT(self, kind, j, tail):
        """^jT w = 2T(d^{j-2} w) - sum_{i=1}^{j-2} d^i S_b(d^{j-2-i} w)."""
        k = j - 2
        push = apply_d if kind == "T" else apply_dbar
        stack = []  # stack[i] = d^i w (or dbar^i w for the conjugate chain)
        w = tail
        for _ in range(k + 1):
            stack.append(self.evaluate(w))
            w = push(w)
        top = stack[k]
        if kind == "T":
            oi, ob = ops.t2_apply_arrays(self.grid, *top)
        else:
            ci, cb = ops.t2_apply_arrays(self.grid, np.conj(top[0]), np.conj(top[1]))
            oi, ob = np.conj(ci), np.conj(cb)
        for i in range(1, k + 1):
            trace = stack[k - i][1]
            for c in range(trace.shape[0]):
                if kind == "T":
                    sb = ops.apply_dk_Sb(i, trace[c], self.grid)
                else:
                    sb = ops.apply_dk_Sbar_b(i, trace[c], self.grid)
                oi[c] -= sb.interior
                ob[c] -= sb.boundary
        return (oi, ob)


def compose_green(nu: int, mu: int, h_interior: np.ndarray, h_boundary: np.ndarray,
                  grid: DiscGrid) -> JetField:
    """omega = T^nu Tbar^mu h together with all jet entries d^k dbar^l omega,
    k + l <= mu + nu, each evaluated through its reduced word.

    The (mu, nu) entry is the input h itself (identity word), by construction.
    """
    m = mu + nu
    ev = WordEvaluator(grid, h_interior, h_boundary)
    entries = {}
    for lvl in range(m + 1):
        for k in range(lvl + 1):
            l = lvl - k
            word = reduce_word(k, l, nu, mu)
            vi, vb = ev.evaluate(word)
            entries[(k, l)] = (vi.copy(), vb.copy())
    return JetField(grid, m, ev.n, entries)
