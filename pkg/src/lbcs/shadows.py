"""Randomized Pauli-measurement estimators and their exact variance.

The uniform protocol is the special case beta_i = (1/3, 1/3, 1/3) of the
locally-biased one; both share the inverse-probability estimator

    nu = sum_Q alpha_Q f(P, Q, beta) mu(P, supp(Q)).

Monte Carlo sampling uses a counter-based Philox generator keyed by the
run seed, consumed in a fixed order (all basis draws, then all outcome
draws), so results are reproducible bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .hamiltonian import ObservableSum
from .pauli import I, X, Y, Z, LABEL_CHARS, PauliError, PauliString, f_factor
from .states import (MultiReference, SingleReference, StateVector,
                     born_probabilities, multireference_density_expectation,
                     observable_expectation, reference_expectation)

ZERO_PROBABILITY = 1e-12  # beta entries below this count as exact zeros


class DivergenceError(ValueError):
    """A needed beta entry vanishes, so the single-shot variance diverges."""

    def __init__(self, qubit: int, label: int):
        super().__init__(
            f"beta({LABEL_CHARS[label]}) vanishes on qubit {qubit + 1} but a "
            f"Hamiltonian term is supported there; the variance diverges")
        self.qubit = qubit
        self.label = label


@dataclass(frozen=True)
class BetaDistribution:
    """Per-qubit probability triples over (X, Y, Z)."""

    n: int
    rows: np.ndarray  # (n, 3), row sums 1

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.shape != (self.n, 3):
            raise ValueError(f"expected shape ({self.n}, 3), got {rows.shape}")
        if np.any(rows < 0):
            raise ValueError("beta entries must be nonnegative")
        bad = np.abs(rows.sum(axis=1) - 1.0) > 1e-12
        if np.any(bad):
            raise ValueError(
                f"beta rows must sum to 1; qubit {int(np.argmax(bad)) + 1} "
                f"sums to {rows[np.argmax(bad)].sum()!r}")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def probability(self, qubit: int, label: int) -> float:
        return float(self.rows[qubit, label - 1])

    def to_dict(self) -> dict:
        return {"n": self.n, "rows": self.rows.tolist()}

    @classmethod
    def from_dict(cls, data) -> "BetaDistribution":
        return cls(int(data["n"]), np.asarray(data["rows"], dtype=float))

    @classmethod
    def load(cls, path) -> "BetaDistribution":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def uniform_beta(n: int) -> BetaDistribution:
    return BetaDistribution(n, np.full((n, 3), 1.0 / 3.0))


@dataclass(frozen=True)
class MeasurementRecord:
    basis: PauliString          # full-weight
    outcomes: tuple             # n values of +-1

    def __post_init__(self):
        if not self.basis.is_full_weight():
            raise PauliError("measurement basis must be full-weight")
        if len(self.outcomes) != self.basis.n:
            raise ValueError("one outcome per qubit required")


@dataclass(frozen=True)
class EstimateReport:
    mean: float
    variance: float             # single-shot sample variance
    shots: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


# -- sampling ------------------------------------------------------------

def sample_basis_labels(beta: BetaDistribution, shots: int,
                        rng: np.random.Generator) -> np.ndarray:
    """(shots, n) label codes in {X, Y, Z}, drawn independently per qubit."""
    u = rng.random((shots, beta.n))
    labels = np.empty((shots, beta.n), dtype=np.int64)
    for i in range(beta.n):
        cum = np.cumsum(beta.rows[i])
        cum[-1] = 1.0
        labels[:, i] = np.searchsorted(cum, u[:, i], side="right") + 1
    return labels


def sample_basis(beta: BetaDistribution,
                 rng: np.random.Generator) -> PauliString:
    return PauliString.from_labels(sample_basis_labels(beta, 1, rng)[0])


def sample_outcomes(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    return np.searchsorted(cum, u, side="right")


def measure_state(v: StateVector, basis: PauliString,
                  rng: np.random.Generator) -> MeasurementRecord:
    """One projective measurement of every qubit in the given bases."""
    if v.n != basis.n:
        raise PauliError(f"qubit count mismatch: {v.n} vs {basis.n}")
    probs = born_probabilities(v, basis)
    idx = int(sample_outcomes(probs, rng.random(1))[0])
    outcomes = tuple(
        1 - 2 * ((idx >> (v.n - 1 - i)) & 1) for i in range(v.n))
    return MeasurementRecord(basis, outcomes)


def single_shot_estimate(h: ObservableSum, record: MeasurementRecord,
                         beta: BetaDistribution) -> float:
    if h.n != record.basis.n:
        raise PauliError("qubit count mismatch between H and record")
    total = h.identity_coefficient
    for q, a in h.terms.items():
        f = f_factor(record.basis, q, beta)
        if f == 0.0:
            continue
        mu = 1
        for i in q.support():
            mu *= record.outcomes[i]
        total += a * f * mu
    return total


# -- bulk term data ------------------------------------------------------

def _parity(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values) & 1


class _TermData:
    """Precomputed per-term arrays shared by the bulk routines."""

    def __init__(self, h: ObservableSum):
        items = h.sorted_terms()
        self.n = h.n
        self.strings = [q for q, _ in items]
        self.coeffs = np.array([a for _, a in items], dtype=float)
        self.count = len(items)
        self.labels = np.zeros((self.count, h.n), dtype=np.int64)
        for t, q in enumerate(self.strings):
            self.labels[t] = q.labels()
        self.x_masks = np.array([q.x_mask for q in self.strings],
                                dtype=np.uint64)
        self.z_masks = np.array([q.z_mask for q in self.strings],
                                dtype=np.uint64)
        self.supp_masks = self.x_masks | self.z_masks


def check_divergence(h: ObservableSum, beta: BetaDistribution):
    """Raise unless beta is positive wherever a traceless term needs it."""
    for q in h.terms:
        for i in q.support():
            label = q.label(i)
            if beta.probability(i, label) <= ZERO_PROBABILITY:
                raise DivergenceError(i, label)


def _inverse_rows(beta: BetaDistribution) -> np.ndarray:
    rows = beta.rows
    out = np.full_like(rows, np.inf)
    ok = rows > ZERO_PROBABILITY
    out[ok] = 1.0 / rows[ok]
    return out


def _term_inverse_factors(data: _TermData, inv: np.ndarray) -> np.ndarray:
    """f(P, Q, beta) for any basis P that Q agrees with: prod over supp."""
    gathered = inv[np.arange(data.n)[None, :],
                   np.maximum(data.labels - 1, 0)]
    factors = np.where(data.labels > 0, gathered, 1.0)
    return factors.prod(axis=1)


# -- Monte Carlo protocol ------------------------------------------------

def run_protocol(h: ObservableSum, v: StateVector, beta: BetaDistribution,
                 shots: int, seed: int) -> EstimateReport:
    """Algorithm: S rounds of biased basis draws and single-qubit readout.

    With uniform beta this is plain classical shadows.  Shots sharing a
    basis are processed together; the estimate stream is identical to a
    strictly sequential implementation.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if h.n != v.n or beta.n != h.n:
        raise PauliError("qubit count mismatch")
    rng = make_rng(seed)
    labels = sample_basis_labels(beta, shots, rng)
    u = rng.random(shots)

    data = _TermData(h)
    inv = _inverse_rows(beta)
    invf = _term_inverse_factors(data, inv)
    # terms touching a zero-probability label never agree with any
    # sampled basis; zero them so the inf placeholder cannot leak
    invf = np.where(np.isfinite(invf), invf, 0.0)

    powers = 3 ** np.arange(h.n, dtype=np.int64)
    basis_ids = (labels - 1) @ powers
    estimates = np.empty(shots, dtype=float)

    for bid in np.unique(basis_ids):
        sel = np.nonzero(basis_ids == bid)[0]
        row = labels[sel[0]]
        basis = PauliString.from_labels(row)
        probs = born_probabilities(v, basis)
        outcomes = sample_outcomes(probs, u[sel]).astype(np.uint64)
        agree = np.all((data.labels == 0) | (data.labels == row[None, :]),
                       axis=1)
        if not np.any(agree):
            estimates[sel] = h.identity_coefficient
            continue
        weights = data.coeffs[agree] * invf[agree]
        signs = 1.0 - 2.0 * _parity(
            outcomes[:, None] & data.supp_masks[agree][None, :])
        estimates[sel] = h.identity_coefficient + signs @ weights

    mean = float(estimates.mean())
    var = float(estimates.var(ddof=1)) if shots > 1 else 0.0
    return EstimateReport(mean, var, shots, seed)


# -- exact single-shot variance ------------------------------------------

def exact_variance(h: ObservableSum, state, beta: BetaDistribution) -> float:
    """Single-shot variance of the biased-shadow estimator on ``state``.

    Implements the second moment sum_{Q,R} f(Q,R,beta) a_Q a_R tr(rho QR)
    minus the squared mean.  The identity coefficient cancels between the
    two moments and is dropped from both.  Pairs with f = 0 (any qubit
    carrying different non-identity labels) are pruned before evaluation.
    """
    if beta.n != h.n:
        raise PauliError("qubit count mismatch")
    check_divergence(h, beta)
    data = _TermData(h)
    if data.count == 0:
        return 0.0
    inv = _inverse_rows(beta)

    if isinstance(state, StateVector):
        second = _second_moment_statevector(data, inv, state)
        mean0 = observable_expectation(h, state) - h.identity_coefficient
    elif isinstance(state, SingleReference):
        second = _second_moment_single_reference(data, inv, state)
        ident = PauliString.identity(h.n)
        mean0 = sum(a * reference_expectation(state, q, ident)
                    for q, a in h.terms.items())
    elif isinstance(state, MultiReference):
        second = _second_moment_multi_reference(data, inv, state, h)
        ident = PauliString.identity(h.n)
        mean0 = sum(
            a * multireference_density_expectation(state, q, ident).real
            for q, a in h.terms.items())
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    return float(second - mean0 ** 2)


def _compatible_row(data: _TermData, inv: np.ndarray, a: int):
    """Indices j >= a with f(Q_a, Q_j) != 0 and the f values."""
    la = data.labels[a]
    lj = data.labels[a:]
    eq = lj == la[None, :]
    ok = eq | (lj == 0) | (la[None, :] == 0)
    compat = np.nonzero(ok.all(axis=1))[0]
    if compat.size == 0:
        return compat + a, np.empty(0)
    matched = eq[compat] & (la[None, :] > 0)
    gathered = inv[np.arange(data.n)[None, :], np.maximum(la - 1, 0)[None, :]]
    fvals = np.where(matched, gathered, 1.0).prod(axis=1)
    return compat + a, fvals


def _second_moment_statevector(data, inv, v: StateVector) -> float:
    amps = v.amplitudes
    dim = amps.shape[0]
    idx = np.arange(dim, dtype=np.uint64)
    cache: dict[tuple, float] = {}

    def pauli_exp(xm: int, zm: int) -> float:
        key = (xm, zm)
        if key in cache:
            return cache[key]
        # phase exponent of the product is 0 for compatible pairs,
        # and i^{|x&z|} X^x Z^z is the product string itself
        phase = 1j ** ((xm & zm).bit_count() % 4)
        src = idx ^ np.uint64(xm)
        signs = 1.0 - 2.0 * (np.bitwise_count(src & np.uint64(zm)) & 1)
        val = (phase * np.vdot(amps, signs * amps[src])).real
        cache[key] = float(val)
        return cache[key]

    total = 0.0
    for a in range(data.count):
        js, fvals = _compatible_row(data, inv, a)
        for j, f in zip(js, fvals):
            xm = int(data.x_masks[a] ^ data.x_masks[j])
            zm = int(data.z_masks[a] ^ data.z_masks[j])
            contrib = f * data.coeffs[a] * data.coeffs[j] * pauli_exp(xm, zm)
            total += contrib if j == a else 2.0 * contrib
    return total


def _second_moment_single_reference(data, inv, ref: SingleReference) -> float:
    m = np.array(ref.signs, dtype=float)
    total = 0.0
    for a in range(data.count):
        js, fvals = _compatible_row(data, inv, a)
        if js.size == 0:
            continue
        la = data.labels[a]
        lj = data.labels[js]
        diff = lj != la[None, :]
        other = np.maximum(lj, la[None, :])  # the non-identity side
        dead = np.any(diff & ((other == X) | (other == Y)), axis=1)
        sign = np.where(diff & (other == Z), m[None, :], 1.0).prod(axis=1)
        tr = np.where(dead, 0.0, sign)
        contrib = fvals * data.coeffs[a] * data.coeffs[js] * tr
        weights = np.where(js == a, 1.0, 2.0)
        total += float((weights * contrib).sum())
    return total


def _second_moment_multi_reference(data, inv, ref: MultiReference,
                                   h: ObservableSum) -> float:
    # the k <-> l symmetry makes each density expectation real up to
    # rounding; anything larger signals a phase bug upstream
    total = 0.0
    for a in range(data.count):
        js, fvals = _compatible_row(data, inv, a)
        for j, f in zip(js, fvals):
            tr = multireference_density_expectation(
                ref, data.strings[a], data.strings[j])
            if abs(tr.imag) > 1e-9:
                raise ValueError(
                    f"density expectation has imaginary residue {tr.imag!r}")
            contrib = f * data.coeffs[a] * data.coeffs[j] * tr.real
            total += contrib if j == a else 2.0 * contrib
    return total
