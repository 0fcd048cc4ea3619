"""Cost functions for measurement-bias tuning and their fixed-point solver.

Three costs are supported: the diagonal cost (convex, state-independent),
the full single-reference cost over influential pairs, and the
multi-reference generalization.  Minimization iterates a damped
Lagrange fixed point: beta <- (1 - step) * beta + step * closed(beta),
where closed(beta) is the ratio of inverse-weighted pair sums that must
hold at optimality.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import ObservableSum
from .pauli import I, Z, PauliString
from .shadows import (BetaDistribution, ZERO_PROBABILITY, _TermData,
                      _compatible_row, make_rng, uniform_beta)
from .states import MultiReference, SingleReference


class DivergenceWarning(UserWarning):
    """A beta entry vanished at a position some term needs; the reported
    cost is finite by convention but the true variance is infinite."""


@dataclass(frozen=True)
class OptimizerConfig:
    step: float = 0.5
    tolerance: float = 1e-10
    max_iterations: int = 10_000
    floor: float = 1e-9
    init: str = "uniform"       # "uniform" or "random"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.step < 1.0:
            raise ValueError("step must lie in (0, 1)")
        if self.floor < 0 or self.tolerance <= 0:
            raise ValueError("floor must be >= 0 and tolerance > 0")
        if self.init not in ("uniform", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class OptimizeResult:
    beta: BetaDistribution
    cost: float
    iterations: int
    converged: bool
    kkt_residual: float
    floored_updates: int
    untouched_qubits: tuple

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.to_dict(),
            "cost": self.cost,
            "iterations": self.iterations,
            "converged": self.converged,
            "kkt_residual": self.kkt_residual,
            "floored_updates": self.floored_updates,
            "untouched_qubits": list(self.untouched_qubits),
        }


# -- influential pairs ----------------------------------------------------

def _xy_buckets(data: _TermData) -> dict:
    """Group term indices by their label pattern restricted to X/Y
    positions; all ordered pairs within a bucket are influential."""
    buckets: dict[bytes, list] = {}
    xy = np.where((data.labels == 1) | (data.labels == 2), data.labels, 0)
    for t in range(data.count):
        buckets.setdefault(xy[t].tobytes(), []).append(t)
    return {k: np.array(v) for k, v in buckets.items()}


def influential_pairs(h: ObservableSum) -> list:
    """All ordered traceless pairs (Q, R) with, per qubit, equal labels
    or an {I, Z} swap.  Includes the diagonal Q = R."""
    data = _TermData(h)
    pairs = []
    for idxs in _xy_buckets(data).values():
        for a in idxs:
            for b in idxs:
                pairs.append((data.strings[a], data.strings[b]))
    return pairs


# -- cost evaluation ------------------------------------------------------

def _cost_inverse(beta: BetaDistribution):
    """Reciprocal rows with the vanishing-entry-to-zero convention."""
    rows = beta.rows
    inv = np.zeros_like(rows)
    ok = rows > ZERO_PROBABILITY
    inv[ok] = 1.0 / rows[ok]
    return inv


def _warn_if_divergent(data: _TermData, beta: BetaDistribution):
    needed = np.zeros((data.n, 3), dtype=bool)
    for t in range(data.count):
        for i in range(data.n):
            if data.labels[t, i] > 0:
                needed[i, data.labels[t, i] - 1] = True
    if np.any(needed & (beta.rows <= ZERO_PROBABILITY)):
        warnings.warn(
            "beta vanishes at a position used by a Hamiltonian term; the "
            "reported cost under-reports an infinite variance",
            DivergenceWarning, stacklevel=3)


def cost_diag(h: ObservableSum, beta: BetaDistribution) -> float:
    """Convex diagonal cost: sum_Q alpha_Q^2 prod_supp 1/beta."""
    data = _TermData(h)
    _warn_if_divergent(data, beta)
    inv = _cost_inverse(beta)
    invf = _term_products(data, inv)
    return float((data.coeffs ** 2) @ invf)


def _term_products(data: _TermData, inv: np.ndarray) -> np.ndarray:
    gathered = inv[np.arange(data.n)[None, :],
                   np.maximum(data.labels - 1, 0)]
    return np.where(data.labels > 0, gathered, 1.0).prod(axis=1)


def cost_full(h: ObservableSum, ref: SingleReference,
              beta: BetaDistribution) -> float:
    """Influential-pair cost with reference signs on the I/Z swaps."""
    if ref.n != h.n:
        raise ValueError("reference state size mismatch")
    data = _TermData(h)
    _warn_if_divergent(data, beta)
    inv = _cost_inverse(beta)
    m = np.array(ref.signs, dtype=float)
    total = 0.0
    for idxs in _xy_buckets(data).values():
        lb = data.labels[idxs]
        c = data.coeffs[idxs]
        for a in range(len(idxs)):
            eq = lb == lb[a][None, :]
            binv = inv[np.arange(data.n), np.maximum(lb[a] - 1, 0)]
            fprod = np.where(eq & (lb[a][None, :] > 0), binv[None, :],
                             1.0).prod(axis=1)
            msign = np.where(~eq, m[None, :], 1.0).prod(axis=1)
            total += c[a] * float(c @ (fprod * msign))
    return total


def _g_factor(a: int, b: int, inv_entry: float, m: int):
    if a == b:
        return 1.0 if a == I else inv_entry
    if {a, b} == {I, Z}:
        return float(m)
    return 0.0


def _h_factor(a: int, b: int, m: int):
    if a == b or (a != I and b != I):
        return 0.0
    w = a + b  # the non-identity side
    if w == 1:       # X
        return 1.0
    if w == 2:       # Y
        return m * 1j
    return 0.0


def _multiref_pair_value(qa: PauliString, qb: PauliString,
                         ref: MultiReference, inv: np.ndarray) -> complex:
    bits = [tuple(int(c) for c in b) for b in ref.bitstrings]
    total = 0.0 + 0.0j
    for k, lam_k in enumerate(ref.amplitudes):
        for l, lam_l in enumerate(ref.amplitudes):
            factor = lam_k * np.conj(lam_l)
            for i in range(ref.n):
                a, b = qa.label(i), qb.label(i)
                mk = 1 - 2 * bits[k][i]
                if bits[k][i] == bits[l][i]:
                    entry = inv[i, a - 1] if a > 0 else 0.0
                    factor *= _g_factor(a, b, entry, mk)
                else:
                    factor *= _h_factor(a, b, mk)
                if factor == 0:
                    break
            total += factor
    return total


def cost_multiref(h: ObservableSum, ref: MultiReference,
                  beta: BetaDistribution) -> float:
    """Multi-component generalization of the influential-pair cost."""
    if ref.n != h.n:
        raise ValueError("reference state size mismatch")
    data = _TermData(h)
    _warn_if_divergent(data, beta)
    inv = _cost_inverse(beta)
    total = 0.0 + 0.0j
    for a in range(data.count):
        js, _ = _compatible_row(data, _finite_inverse(beta), a)
        for j in js:
            val = _multiref_pair_value(data.strings[a], data.strings[j],
                                       ref, inv)
            contrib = data.coeffs[a] * data.coeffs[j] * val
            total += contrib if j == a else 2.0 * contrib
    if abs(total.imag) > 1e-9:
        raise ValueError(
            f"multi-reference cost has imaginary residue {total.imag!r}")
    return float(total.real)


def _finite_inverse(beta: BetaDistribution) -> np.ndarray:
    # compatible-pair pruning only needs finite placeholders
    return np.where(beta.rows > ZERO_PROBABILITY, 1.0 / np.maximum(
        beta.rows, ZERO_PROBABILITY), 0.0)


# -- closed-form Lagrange rows -------------------------------------------

def _closed_rows_diag(data: _TermData, beta: BetaDistribution):
    inv = _cost_inverse(beta)
    weights = (data.coeffs ** 2) * _term_products(data, inv)
    num = np.zeros((data.n, 3))
    for w in (1, 2, 3):
        num[:, w - 1] = (data.labels == w).T @ weights
    return num


def _closed_rows_full(data: _TermData, ref: SingleReference,
                      beta: BetaDistribution):
    inv = _cost_inverse(beta)
    m = np.array(ref.signs, dtype=float)
    num = np.zeros((data.n, 3))
    for idxs in _xy_buckets(data).values():
        lb = data.labels[idxs]
        c = data.coeffs[idxs]
        for a in range(len(idxs)):
            eq = lb == lb[a][None, :]
            active = eq & (lb[a][None, :] > 0)
            binv = inv[np.arange(data.n), np.maximum(lb[a] - 1, 0)]
            fprod = np.where(active, binv[None, :], 1.0).prod(axis=1)
            msign = np.where(~eq, m[None, :], 1.0).prod(axis=1)
            pairweight = c[a] * c * fprod * msign
            colsum = pairweight @ active          # per-qubit mass
            pos = lb[a] > 0
            num[pos, lb[a][pos] - 1] += colsum[pos]
    return num


def _closed_rows_multiref(data: _TermData, ref: MultiReference,
                          beta: BetaDistribution):
    # same ratio structure as the single-reference form, with the pair
    # weight taken from the multi-component factorization; heuristic,
    # carries no optimality guarantee
    inv = _cost_inverse(beta)
    bits = [tuple(int(c) for c in b) for b in ref.bitstrings]
    num = np.zeros((data.n, 3))
    finite = _finite_inverse(beta)
    for a in range(data.count):
        js, _ = _compatible_row(data, finite, a)
        for j in js:
            qa, qb = data.strings[a], data.strings[j]
            weight = data.coeffs[a] * data.coeffs[j]
            mult = 1.0 if j == a else 2.0
            for k, lam_k in enumerate(ref.amplitudes):
                for l, lam_l in enumerate(ref.amplitudes):
                    factor = lam_k * np.conj(lam_l)
                    matched = []
                    for i in range(data.n):
                        la, lr = qa.label(i), qb.label(i)
                        mk = 1 - 2 * bits[k][i]
                        if bits[k][i] == bits[l][i]:
                            entry = inv[i, la - 1] if la > 0 else 0.0
                            factor *= _g_factor(la, lr, entry, mk)
                            if la == lr and la != I:
                                matched.append((i, la))
                        else:
                            factor *= _h_factor(la, lr, mk)
                        if factor == 0:
                            break
                    if factor == 0:
                        continue
                    contrib = mult * weight * factor.real
                    for i, w in matched:
                        num[i, w - 1] += contrib
    return num


# -- public single-step updates ------------------------------------------

def _rows_from_num(num: np.ndarray, current: np.ndarray, floor: float):
    den = num.sum(axis=1)
    rows = current.copy()
    floored = 0
    for i in range(num.shape[0]):
        if den[i] == 0.0:
            continue
        row = num[i] / den[i]
        low = row < floor
        if floor > 0 and np.any(low):
            floored += int(np.count_nonzero(row < 0))
            row = np.maximum(row, floor)
            row = row / row.sum()
        elif np.any(row < 0):
            floored += int(np.count_nonzero(row < 0))
            row = np.maximum(row, 0.0)
            row = row / row.sum()
        rows[i] = row
    return rows, den, floored


def lagrange_update_diag(h: ObservableSum, beta: BetaDistribution,
                         floor: float = 0.0) -> BetaDistribution:
    """One closed-form step for the diagonal cost; untouched qubits keep
    their current row."""
    data = _TermData(h)
    num = _closed_rows_diag(data, beta)
    rows, _, _ = _rows_from_num(num, beta.rows, floor)
    return BetaDistribution(h.n, rows)


def lagrange_update_full(h: ObservableSum, ref: SingleReference,
                         beta: BetaDistribution,
                         floor: float = 0.0) -> BetaDistribution:
    """One closed-form step for the influential-pair cost.  Negative
    numerators (sign-flipped cross terms) are floored before the row is
    renormalized."""
    data = _TermData(h)
    num = _closed_rows_full(data, ref, beta)
    rows, _, _ = _rows_from_num(num, beta.rows, floor)
    return BetaDistribution(h.n, rows)


# -- damped fixed-point iteration ----------------------------------------

def optimize(h: ObservableSum, cost_kind: str,
             config: OptimizerConfig = OptimizerConfig(),
             reference=None) -> OptimizeResult:
    """Minimize the selected cost by damped fixed-point iteration.

    cost_kind is "diag", "full" (needs a SingleReference) or "multiref"
    (needs a MultiReference).  Convergence is measured as the infinity
    norm of the beta change.  Non-convergence returns the best iterate
    with converged=False rather than raising.
    """
    data = _TermData(h)
    if cost_kind == "diag":
        closed = lambda b: _closed_rows_diag(data, b)
        evaluate = lambda b: cost_diag(h, b)
    elif cost_kind == "full":
        if not isinstance(reference, SingleReference):
            raise ValueError("full cost requires a SingleReference")
        closed = lambda b: _closed_rows_full(data, reference, b)
        evaluate = lambda b: cost_full(h, reference, b)
    elif cost_kind == "multiref":
        if not isinstance(reference, MultiReference):
            raise ValueError("multiref cost requires a MultiReference")
        closed = lambda b: _closed_rows_multiref(data, reference, b)
        evaluate = lambda b: cost_multiref(h, reference, b)
    else:
        raise ValueError(f"unknown cost kind {cost_kind!r}")

    if config.init == "uniform":
        beta = uniform_beta(h.n)
    else:
        rng = make_rng(config.seed)
        rows = rng.random((h.n, 3)) + config.floor
        beta = BetaDistribution(h.n, rows / rows.sum(axis=1, keepdims=True))

    floored_total = 0
    converged = False
    iterations = 0
    untouched = ()
    for iterations in range(1, config.max_iterations + 1):
        num = closed(beta)
        target, den, floored = _rows_from_num(num, beta.rows,
                                              max(config.floor, 0.0))
        floored_total += floored
        untouched = tuple(int(i) for i in np.nonzero(den == 0.0)[0])
        new_rows = (1.0 - config.step) * beta.rows + config.step * target
        new_rows = new_rows / new_rows.sum(axis=1, keepdims=True)
        change = float(np.max(np.abs(new_rows - beta.rows)))
        beta = BetaDistribution(h.n, new_rows)
        if change < config.tolerance:
            converged = True
            break

    # final cleanup: zero entries indistinguishable from the floor
    rows = beta.rows.copy()
    rows[rows < 10.0 * config.floor] = 0.0
    sums = rows.sum(axis=1, keepdims=True)
    rows = np.where(sums > 0, rows / np.where(sums == 0, 1.0, sums),
                    beta.rows)
    beta = BetaDistribution(h.n, rows)

    num = closed(beta)
    target, den, _ = _rows_from_num(num, beta.rows, 0.0)
    supported = den > 0
    if np.any(supported):
        kkt = float(np.max(np.abs(target[supported] - beta.rows[supported])))
    else:
        kkt = 0.0

    return OptimizeResult(
        beta=beta,
        cost=float(evaluate(beta)),
        iterations=iterations,
        converged=converged,
        kkt_residual=kkt,
        floored_updates=floored_total,
        untouched_qubits=untouched,
    )
