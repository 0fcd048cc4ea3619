"""Dense statevector engine and reference-state expectations.

Basis index convention: the bitstring b1 b2 ... bn is read as a
big-endian integer, so qubit 1 (leftmost in the Pauli text form) is the
most significant bit.  Pauli application is a bit-indexed amplitude
permutation with sign/phase factors; no 2^n x 2^n matrix is formed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .hamiltonian import ObservableSum
from .pauli import I, X, Y, Z, PauliError, PauliString, product

_NORM_TOL = 1e-10


class StateError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the requested residual."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class StateVector:
    n: int
    amplitudes: np.ndarray  # 2^n complex

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n,):
            raise StateError(
                f"expected {1 << self.n} amplitudes, got {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > _NORM_TOL:
            raise StateError(f"state not normalized: |v| = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        n = len(bits)
        amps = np.zeros(1 << n, dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(n, amps)


@dataclass(frozen=True)
class SingleReference:
    """Product state (1/2^n) tensor_i (I + m_i Z), m_i = +-1."""

    signs: tuple

    def __post_init__(self):
        if not self.signs or any(m not in (1, -1) for m in self.signs):
            raise StateError("signs must be a nonempty tuple of +-1")

    @property
    def n(self) -> int:
        return len(self.signs)

    @classmethod
    def from_bits(cls, bits: str) -> "SingleReference":
        return cls(tuple(1 - 2 * int(b) for b in bits))

    def to_statevector(self) -> StateVector:
        bits = "".join("0" if m == 1 else "1" for m in self.signs)
        return StateVector.from_bits(bits)


@dataclass(frozen=True)
class MultiReference:
    """Superposition sum_k lambda_k |b^(k)> over distinct bitstrings."""

    bitstrings: tuple  # of str
    amplitudes: tuple  # of complex

    def __post_init__(self):
        if len(self.bitstrings) != len(self.amplitudes) or not self.bitstrings:
            raise StateError("need matching, nonempty bitstrings/amplitudes")
        n = len(self.bitstrings[0])
        if any(len(b) != n for b in self.bitstrings):
            raise StateError("bitstrings must share one length")
        if len(set(self.bitstrings)) != len(self.bitstrings):
            raise StateError("bitstrings must be pairwise distinct")
        total = sum(abs(a) ** 2 for a in self.amplitudes)
        if abs(total - 1.0) > _NORM_TOL:
            raise StateError(f"amplitudes not normalized: sum |l|^2 = {total!r}")

    @property
    def n(self) -> int:
        return len(self.bitstrings[0])

    @property
    def k_components(self) -> int:
        return len(self.bitstrings)

    def to_statevector(self) -> StateVector:
        amps = np.zeros(1 << self.n, dtype=complex)
        for bits, lam in zip(self.bitstrings, self.amplitudes):
            amps[int(bits, 2)] = lam
        return StateVector(self.n, amps)


def load_reference(path):
    """Reference-state JSON: single basis state or multi-reference list."""
    with open(path) as fh:
        data = json.load(fh)
    return reference_from_dict(data)


def reference_from_dict(data):
    kind = data.get("type")
    if kind == "single":
        return SingleReference.from_bits(data["bits"])
    if kind == "multi":
        bits = tuple(c["bits"] for c in data["components"])
        amps = tuple(complex(c["amplitude"][0], c["amplitude"][1])
                     for c in data["components"])
        return MultiReference(bits, amps)
    raise StateError(f"unknown reference type {kind!r}")


# -- Pauli application --------------------------------------------------

def _popcount(arr):
    return np.bitwise_count(arr)


def apply_pauli(p: PauliString, v: StateVector) -> StateVector | np.ndarray:
    if p.n != v.n:
        raise PauliError(f"qubit count mismatch: {p.n} vs {v.n}")
    return StateVector(v.n, apply_pauli_raw(p, v.amplitudes))


def apply_pauli_raw(p: PauliString, amps: np.ndarray) -> np.ndarray:
    """P|v> on a raw amplitude array (not necessarily normalized)."""
    dim = amps.shape[0]
    idx = np.arange(dim, dtype=np.uint64)
    src = idx ^ np.uint64(p.x_mask)
    # P = i^{|x&z|} X^x Z^z and X^x Z^z |j> = (-1)^{z.j} |j ^ x>
    phase = 1j ** ((p.x_mask & p.z_mask).bit_count() % 4)
    signs = 1.0 - 2.0 * (_popcount(src & np.uint64(p.z_mask)) & 1)
    return phase * signs * amps[src]


def apply_observable(h: ObservableSum, v: StateVector) -> np.ndarray:
    """H|v> as a raw (generally unnormalized) amplitude array."""
    if h.n != v.n:
        raise PauliError(f"qubit count mismatch: {h.n} vs {v.n}")
    return apply_observable_raw(h, v.amplitudes)


def apply_observable_raw(h: ObservableSum, amps: np.ndarray) -> np.ndarray:
    out = h.identity_coefficient * amps
    for q, a in h.terms.items():
        out += a * apply_pauli_raw(q, amps)
    return out


# -- expectations --------------------------------------------------------

_IMAG_TOL = 1e-10


def expectation(v: StateVector, q: PauliString) -> float:
    """<v|Q|v>; a residual imaginary part above 1e-10 is a phase bug."""
    val = np.vdot(v.amplitudes, apply_pauli_raw(q, v.amplitudes))
    if abs(val.imag) > _IMAG_TOL:
        raise StateError(f"expectation has imaginary residue {val.imag!r}")
    return float(val.real)


def pair_expectation(v: StateVector, q: PauliString, r: PauliString) -> float:
    """Re(i^k <v|S|v>) with (k, S) = product(Q, R)."""
    phased = product(q, r)
    val = phased.phase() * np.vdot(
        v.amplitudes, apply_pauli_raw(phased.string, v.amplitudes))
    return float(val.real)


def observable_expectation(h: ObservableSum, v: StateVector) -> float:
    return h.identity_coefficient + sum(
        a * expectation(v, q) for q, a in h.terms.items())


def reference_expectation(ref: SingleReference, q: PauliString,
                          r: PauliString) -> float:
    """tr(rho_HF Q R) in closed form, valid on qubit-wise agreeing pairs.

    Per qubit: 1 if the labels are equal (including I/I), m_i if they
    are {I, Z}, 0 otherwise.
    """
    if q.n != ref.n or r.n != ref.n:
        raise PauliError("qubit count mismatch with reference state")
    out = 1.0
    for i, m in enumerate(ref.signs):
        a, b = q.label(i), r.label(i)
        if a == b:
            continue
        if {a, b} == {I, Z}:
            out *= m
        else:
            return 0.0
    return out


def _g_factor_free(a: int, b: int, m: int):
    # beta-free part of the matched-bit per-qubit factor.
    if a == b:
        return 1.0
    if {a, b} == {I, Z}:
        return float(m)
    return 0.0


def _h_factor(a: int, b: int, m: int):
    # per-qubit factor when the two component bits disagree.
    if {a, b} == {I, X} and a != b:
        return 1.0
    if {a, b} == {I, Y} and a != b:
        return m * 1j
    return 0.0


def multireference_density_expectation(ref: MultiReference, q: PauliString,
                                       r: PauliString) -> complex:
    """sum_{k,l} lambda_k conj(lambda_l) tr(rho^(k,l) Q R).

    Uses the per-qubit case analysis valid for qubit-wise agreeing
    (Q, R) pairs, the only ones reachable through the f-weighting.
    """
    if q.n != ref.n or r.n != ref.n:
        raise PauliError("qubit count mismatch with reference state")
    total = 0.0 + 0.0j
    bits = [tuple(int(c) for c in b) for b in ref.bitstrings]
    for k, lam_k in enumerate(ref.amplitudes):
        for l, lam_l in enumerate(ref.amplitudes):
            factor = lam_k * np.conj(lam_l)
            for i in range(ref.n):
                a, b = q.label(i), r.label(i)
                mk = 1 - 2 * bits[k][i]
                if bits[k][i] == bits[l][i]:
                    factor *= _g_factor_free(a, b, mk)
                else:
                    factor *= _h_factor(a, b, mk)
                if factor == 0:
                    break
            total += factor
    return complex(total)


# -- ground states -------------------------------------------------------

LANCZOS_QUBIT_LIMIT = 20  # tested up to 16


def lanczos_ground(h: ObservableSum, tolerance: float = 1e-10,
                   max_iterations: int = 200, seed: int = 0):
    """Minimal eigenpair of H by matrix-free Lanczos iteration.

    Returns (energy, StateVector) with residual ||Hv - Ev|| <= tolerance.
    The start vector is drawn deterministically from the seed; for tiny
    dimensions a dense solve replaces the iteration.
    """
    if h.n > LANCZOS_QUBIT_LIMIT:
        raise StateError(f"qubit count {h.n} above limit {LANCZOS_QUBIT_LIMIT}")
    dim = 1 << h.n
    rng = np.random.Generator(np.random.Philox(key=seed))

    if dim <= 32:
        dense = np.zeros((dim, dim), dtype=complex)
        basis = np.eye(dim, dtype=complex)
        for j in range(dim):
            dense[:, j] = apply_observable_raw(h, basis[:, j])
        evals, evecs = np.linalg.eigh(dense)
        energy = float(evals[0])
        vec = evecs[:, 0]
        # seeded gauge: align with the random probe for reproducibility
        probe = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        overlap = np.vdot(vec, probe)
        if abs(overlap) > 1e-12:
            vec = vec * (overlap / abs(overlap))
        state = StateVector(h.n, vec / np.linalg.norm(vec))
        return energy, state

    op = LinearOperator(
        (dim, dim),
        matvec=lambda x: apply_observable_raw(h, np.asarray(x, dtype=complex)),
        dtype=complex,
    )
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    ncv = min(dim - 1, max(20, min(200, max_iterations)))
    try:
        evals, evecs = eigsh(op, k=1, which="SA", v0=v0, tol=tolerance / 10,
                             maxiter=max(max_iterations * 10, 1000), ncv=ncv)
    except Exception as exc:  # ArpackNoConvergence and friends
        raise ConvergenceError(f"Lanczos failed to converge: {exc}") from exc
    energy = float(evals[0])
    vec = evecs[:, 0]
    vec = vec / np.linalg.norm(vec)
    residual = np.linalg.norm(apply_observable_raw(h, vec) - energy * vec)
    if residual > max(tolerance, 1e-12):
        raise ConvergenceError(
            f"residual {residual:.3e} above tolerance {tolerance:.3e}",
            best_residual=float(residual))
    return energy, StateVector(h.n, vec)


# -- measurement-basis rotations ----------------------------------------

_SQ2 = 1.0 / np.sqrt(2.0)
# Map the X / Y eigenbases onto the computational basis.
BASIS_ROTATIONS = {
    X: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    Y: np.array([[_SQ2, -1j * _SQ2], [_SQ2, 1j * _SQ2]], dtype=complex),
    Z: np.eye(2, dtype=complex),
}


def rotate_to_basis(amps: np.ndarray, basis: PauliString) -> np.ndarray:
    """Amplitudes in the frame where measuring basis P is a Z measurement."""
    n = basis.n
    a = amps.reshape((2,) * n)
    for i in range(n):
        code = basis.label(i)
        if code in (I, Z):
            continue
        u = BASIS_ROTATIONS[code]
        a = np.moveaxis(np.tensordot(u, a, axes=([1], [i])), 0, i)
    return a.reshape(-1)


def born_probabilities(v: StateVector, basis: PauliString) -> np.ndarray:
    probs = np.abs(rotate_to_basis(v.amplitudes, basis)) ** 2
    return probs / probs.sum()
