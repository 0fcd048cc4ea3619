"""Baseline estimators: l1 term sampling and LDF commuting-group sampling.

Both draw a measurement basis per shot, read out single qubits, and
rescale by the inverse sampling weight.  Grouping uses a greedy
largest-degree-first coloring of the anticommutation graph; colors become
qubit-wise-commuting collections measured in one shared basis each.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .hamiltonian import ObservableSum, l1_norm, gamma_distribution
from .pauli import I, Z, PauliError, PauliString, agrees_with_basis
from .shadows import (EstimateReport, _TermData, _parity, make_rng,
                      sample_outcomes)
from .states import (StateVector, born_probabilities, expectation,
                     observable_expectation, pair_expectation)


class GroupingError(ValueError):
    pass


@dataclass(frozen=True)
class TermGraph:
    """Vertices are traceless terms; edges join non-qubit-wise-commuting pairs."""

    vertices: tuple           # of PauliString
    adjacency: tuple          # of frozenset of vertex indices

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2


def build_term_graph(h: ObservableSum) -> TermGraph:
    data = _TermData(h)
    verts = tuple(data.strings)
    adj = [set() for _ in range(data.count)]
    for a in range(data.count):
        la = data.labels[a]
        lj = data.labels[a + 1:]
        eq = lj == la[None, :]
        ok = eq | (lj == 0) | (la[None, :] == 0)
        clash = np.nonzero(~ok.all(axis=1))[0] + a + 1
        for j in clash:
            adj[a].add(int(j))
            adj[int(j)].add(a)
    return TermGraph(verts, tuple(frozenset(s) for s in adj))


def ldf_coloring(graph: TermGraph) -> list:
    """Greedy coloring in decreasing-degree order; ties broken by the
    Pauli total order.  Guarantees at most 1 + max degree colors."""
    order = sorted(range(len(graph.vertices)),
                   key=lambda i: (-graph.degree(i), graph.vertices[i]))
    color = [-1] * len(graph.vertices)
    for i in order:
        used = {color[j] for j in graph.adjacency[i] if color[j] >= 0}
        c = 0
        while c in used:
            c += 1
        color[i] = c
    k = max(color, default=-1) + 1
    collections = [[] for _ in range(k)]
    for i, c in enumerate(color):
        collections[c].append(graph.vertices[i])
    for coll in collections:
        coll.sort()
    return collections


def representative_basis(collection, n: int) -> PauliString:
    """The full-weight basis every member agrees with; free qubits get Z."""
    labels = [0] * n
    for q in collection:
        for i in range(n):
            c = q.label(i)
            if c == I:
                continue
            if labels[i] == 0:
                labels[i] = c
            elif labels[i] != c:
                raise GroupingError(
                    f"conflicting labels on qubit {i + 1}: collection is "
                    f"not qubit-wise commuting")
    return PauliString.from_labels([c if c != 0 else Z for c in labels])


def kappa_weights(h: ObservableSum, collections) -> np.ndarray:
    """kappa(C) = l1 mass of the collection over the total l1 norm."""
    norm = l1_norm(h)
    if norm <= 0:
        raise GroupingError("no traceless mass to distribute")
    covered = 0
    kappa = np.empty(len(collections), dtype=float)
    for k, coll in enumerate(collections):
        kappa[k] = sum(abs(h.terms[q]) for q in coll) / norm
        covered += len(coll)
    if covered != len(h.terms):
        raise GroupingError("collections do not partition the traceless terms")
    return kappa / kappa.sum()


@dataclass(frozen=True)
class GroupingScheme:
    n: int
    collections: tuple        # of tuple of PauliString
    bases: tuple              # of full-weight PauliString
    kappa: np.ndarray

    def __post_init__(self):
        if not (len(self.collections) == len(self.bases) == len(self.kappa)):
            raise GroupingError("collections, bases and kappa must align")
        kappa = np.asarray(self.kappa, dtype=float)
        if np.any(kappa < 0) or abs(kappa.sum() - 1.0) > 1e-12:
            raise GroupingError("kappa must be a probability vector")
        for coll, basis in zip(self.collections, self.bases):
            for q in coll:
                if not agrees_with_basis(q, basis):
                    raise GroupingError(
                        f"{q} does not agree with its basis {basis}")
        object.__setattr__(self, "kappa", kappa)

    @property
    def k_groups(self) -> int:
        return len(self.collections)

    def to_dict(self) -> dict:
        return {
            "collections": [[q.to_text() for q in coll]
                            for coll in self.collections],
            "bases": [b.to_text() for b in self.bases],
            "kappa": self.kappa.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "GroupingScheme":
        collections = tuple(
            tuple(PauliString.from_text(t) for t in coll)
            for coll in data["collections"])
        bases = tuple(PauliString.from_text(t) for t in data["bases"])
        n = bases[0].n
        return cls(n, collections, bases,
                   np.asarray(data["kappa"], dtype=float))

    @classmethod
    def load(cls, path) -> "GroupingScheme":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def build_grouping(h: ObservableSum) -> GroupingScheme:
    """LDF coloring plus representatives and l1 sampling weights."""
    graph = build_term_graph(h)
    collections = ldf_coloring(graph)
    bases = tuple(representative_basis(coll, h.n) for coll in collections)
    kappa = kappa_weights(h, collections)
    return GroupingScheme(h.n, tuple(tuple(c) for c in collections),
                          bases, kappa)


# -- l1 sampling ----------------------------------------------------------

def l1_exact_variance(h: ObservableSum, v: StateVector) -> float:
    """Closed form: l1 norm squared minus the squared traceless mean."""
    mean0 = observable_expectation(h, v) - h.identity_coefficient
    return l1_norm(h) ** 2 - mean0 ** 2


def l1_protocol(h: ObservableSum, v: StateVector, shots: int,
                seed: int) -> EstimateReport:
    """Draw a term from gamma per shot, measure only its support, and
    rescale by the l1 norm and coefficient sign.

    The estimator depends on the measured bits only through the product
    mu(P, supp(P)), whose exact two-point law has mean tr(rho P); the
    product is sampled directly from that law.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    gamma = gamma_distribution(h)
    terms = sorted(gamma)           # deterministic order
    probs = np.array([gamma[q] for q in terms])
    signs = np.array([np.sign(h.terms[q]) for q in terms])
    means = np.array([expectation(v, q) for q in terms])
    norm = l1_norm(h)

    rng = make_rng(seed)
    which = sample_outcomes(probs, rng.random(shots))
    u = rng.random(shots)
    p_plus = 0.5 * (1.0 + means[which])
    mu = np.where(u < p_plus, 1.0, -1.0)
    estimates = h.identity_coefficient + norm * signs[which] * mu
    mean = float(estimates.mean())
    var = float(estimates.var(ddof=1)) if shots > 1 else 0.0
    return EstimateReport(mean, var, shots, seed)


# -- grouping estimator ---------------------------------------------------

def grouping_protocol(h: ObservableSum, scheme: GroupingScheme,
                      v: StateVector, shots: int, seed: int) -> EstimateReport:
    """Per shot: pick a collection from kappa, measure all qubits in its
    representative basis, average the inverse-kappa-weighted group sum."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if h.n != v.n or scheme.n != h.n:
        raise PauliError("qubit count mismatch")
    for k, coll in enumerate(scheme.collections):
        if coll and scheme.kappa[k] <= 0:
            raise GroupingError(
                f"collection {k} is nonempty but has zero sampling weight")

    rng = make_rng(seed)
    which = sample_outcomes(scheme.kappa.copy(), rng.random(shots))
    u = rng.random(shots)
    estimates = np.empty(shots, dtype=float)

    for k in np.unique(which):
        sel = np.nonzero(which == k)[0]
        coll = scheme.collections[k]
        if not coll:
            estimates[sel] = h.identity_coefficient
            continue
        probs = born_probabilities(v, scheme.bases[k])
        outcomes = sample_outcomes(probs, u[sel]).astype(np.uint64)
        weights = np.array([h.terms[q] for q in coll]) / scheme.kappa[k]
        masks = np.array([q.support_mask for q in coll], dtype=np.uint64)
        signs = 1.0 - 2.0 * _parity(outcomes[:, None] & masks[None, :])
        estimates[sel] = h.identity_coefficient + signs @ weights

    mean = float(estimates.mean())
    var = float(estimates.var(ddof=1)) if shots > 1 else 0.0
    return EstimateReport(mean, var, shots, seed)


def grouping_exact_variance_both(h: ObservableSum, scheme: GroupingScheme,
                                 v: StateVector):
    """Both closed-form variance expressions for the grouping estimator.

    The first is the exact variance of the kappa-sampled estimator.  The
    second is the covariance form, which equals the variance under
    deterministic per-group shot allocation; the two differ by the
    variance of the per-group conditional means (see notes in tests).
    """
    mean0 = observable_expectation(h, v) - h.identity_coefficient
    first = 0.0
    second = 0.0
    for k, coll in enumerate(scheme.collections):
        if not coll:
            continue
        kappa = scheme.kappa[k]
        coeffs = np.array([h.terms[q] for q in coll])
        singles = np.array([expectation(v, q) for q in coll])
        pair_sum = 0.0
        for a, qa in enumerate(coll):
            for b, qb in enumerate(coll):
                pair_sum += coeffs[a] * coeffs[b] * pair_expectation(v, qa, qb)
        group_mean_sq = float(coeffs @ singles) ** 2
        first += pair_sum / kappa
        second += (pair_sum - group_mean_sq) / kappa
    return first - mean0 ** 2, second


def grouping_exact_variance(h: ObservableSum, scheme: GroupingScheme,
                            v: StateVector) -> float:
    return grouping_exact_variance_both(h, scheme, v)[0]
