import numpy as np
import pytest

from lbcs import (BetaDistribution, MultiReference, PauliString,
                  SingleReference, parse_observable, uniform_beta,
                  influential_pairs, cost_diag, cost_full, cost_multiref,
                  lagrange_update_diag, lagrange_update_full, optimize,
                  exact_variance, OptimizerConfig)
from lbcs.optimizer import DivergenceWarning
from lbcs.states import observable_expectation

import oracles


def P(text):
    return PauliString.from_text(text)


H34 = parse_observable("3.0 X\n4.0 Z\n")
HZZ = parse_observable("1.0 ZI\n1.0 ZZ\n")


class TestInfluentialPairs:
    def test_iz_swap_pairs(self):
        pairs = influential_pairs(HZZ)
        assert len(pairs) == 4
        assert (P("ZI"), P("ZZ")) in pairs
        assert (P("ZZ"), P("ZI")) in pairs

    def test_xy_mismatch_excluded(self):
        pairs = influential_pairs(parse_observable("1.0 X\n1.0 Z\n"))
        assert len(pairs) == 2  # only the diagonal pairs

    def test_single_term(self):
        assert len(influential_pairs(parse_observable("1.0 Y\n"))) == 1

    def test_character_oracle(self, rng):
        def influential(sa, sb):
            return all(a == b or {a, b} == {"I", "Z"}
                       for a, b in zip(sa, sb))

        for _ in range(30):
            n = int(rng.integers(1, 4))
            h = oracles.random_hamiltonian(rng, n, max_terms=6)
            pairs = set(influential_pairs(h))
            terms = list(h.terms)
            want = {(a, b) for a in terms for b in terms
                    if influential(a.to_text(), b.to_text())}
            assert pairs == want


class TestCosts:
    def test_cost_diag_value(self):
        assert cost_diag(H34, uniform_beta(1)) == pytest.approx(75.0)
        beta = BetaDistribution(1, np.array([[3 / 7, 0.0, 4 / 7]]))
        assert cost_diag(H34, beta) == pytest.approx(49.0)

    def test_cost_full_reference_signs(self):
        assert cost_full(HZZ, SingleReference((1, 1)), uniform_beta(2)) == \
            pytest.approx(18.0)
        assert cost_full(HZZ, SingleReference((1, -1)), uniform_beta(2)) == \
            pytest.approx(6.0)

    def test_cost_full_single_term_matches_diag(self, rng):
        h = parse_observable("1.5 XY\n")
        beta = oracles.random_beta(rng, 2)
        ref = SingleReference((1, -1))
        assert cost_full(h, ref, beta) == pytest.approx(cost_diag(h, beta))

    def test_cost_full_equals_reference_second_moment(self, rng):
        # the cost is exactly the second moment of the estimator on the
        # reference state, so it differs from the variance by the
        # squared reference mean
        for _ in range(20):
            n = int(rng.integers(1, 5))
            h = oracles.random_hamiltonian(rng, n, max_terms=5)
            beta = oracles.random_beta(rng, n)
            signs = oracles.random_signs(rng, n)
            ref = SingleReference(signs)
            mean0 = observable_expectation(
                h, ref.to_statevector()) - h.identity_coefficient
            var = exact_variance(h, ref, beta)
            assert cost_full(h, ref, beta) == \
                pytest.approx(var + mean0 ** 2, abs=1e-9)

    def test_cost_multiref_bell(self):
        h = parse_observable("1.0 XX\n")
        ref = MultiReference(("00", "11"), (1 / np.sqrt(2), 1 / np.sqrt(2)))
        assert cost_multiref(h, ref, uniform_beta(2)) == pytest.approx(9.0)

    def test_cost_multiref_equals_statevector_second_moment(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 4))
            h = oracles.random_hamiltonian(rng, n, max_terms=5)
            beta = oracles.random_beta(rng, n)
            k = int(rng.integers(1, min(3, 1 << n) + 1))
            idxs = rng.choice(1 << n, size=k, replace=False)
            bits = tuple(format(int(b), f"0{n}b") for b in idxs)
            amps = rng.standard_normal(k) + 1j * rng.standard_normal(k)
            amps = tuple(amps / np.linalg.norm(amps))
            ref = MultiReference(bits, amps)
            v = ref.to_statevector()
            mean0 = observable_expectation(h, v) - h.identity_coefficient
            want = exact_variance(h, v, beta) + mean0 ** 2
            assert cost_multiref(h, ref, beta) == pytest.approx(want, abs=1e-9)

    def test_k1_multiref_reduces_to_full(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            h = oracles.random_hamiltonian(rng, n, max_terms=6)
            bits = "".join(str(int(b)) for b in rng.integers(0, 2, n))
            single = SingleReference.from_bits(bits)
            multi = MultiReference((bits,), (1.0,))
            beta = oracles.random_beta(rng, n)
            assert cost_multiref(h, multi, beta) == \
                pytest.approx(cost_full(h, single, beta), abs=1e-10)

    def test_vanishing_entry_warns(self):
        beta = BetaDistribution(1, np.array([[1.0, 0.0, 0.0]]))
        with pytest.warns(DivergenceWarning):
            cost_diag(H34, beta)

    def test_convexity_of_diag(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 4))
            h = oracles.random_hamiltonian(rng, n, max_terms=5)
            b1 = oracles.random_beta(rng, n)
            b2 = oracles.random_beta(rng, n)
            mid = BetaDistribution(n, 0.5 * (b1.rows + b2.rows))
            lhs = cost_diag(h, mid)
            rhs = 0.5 * (cost_diag(h, b1) + cost_diag(h, b2))
            assert lhs <= rhs + 1e-9


class TestLagrangeUpdates:
    def test_diag_fixed_point(self):
        beta = BetaDistribution(1, np.array([[3 / 7, 0.0, 4 / 7]]))
        out = lagrange_update_diag(H34, beta)
        assert np.allclose(out.rows, beta.rows, atol=1e-15)

    def test_diag_step_from_uniform(self):
        # weights 9*3 = 27 on X and 16*3 = 48 on Z -> (27, 0, 48)/75
        out = lagrange_update_diag(H34, uniform_beta(1))
        assert np.allclose(out.rows, [[27 / 75, 0.0, 48 / 75]])

    def test_unsupported_qubit_untouched(self):
        h = parse_observable("1.0 XI\n")
        out = lagrange_update_diag(h, uniform_beta(2))
        assert np.allclose(out.rows[1], [1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(out.rows[0], [1.0, 0.0, 0.0])

    def test_full_matches_diag_without_cross_pairs(self, rng):
        h = parse_observable("1.0 X\n1.0 Z\n")
        beta = oracles.random_beta(rng, 1)
        ref = SingleReference((1,))
        a = lagrange_update_diag(h, beta)
        b = lagrange_update_full(h, ref, beta)
        assert np.allclose(a.rows, b.rows, atol=1e-14)

    def test_full_update_value(self):
        # at uniform beta with m = (+1, +1) all pair mass sits on the Z
        # labels, so both rows collapse onto Z after one exact step
        ref = SingleReference((1, 1))
        out = lagrange_update_full(HZZ, ref, uniform_beta(2))
        assert np.allclose(out.rows[0], [0.0, 0.0, 1.0])
        assert np.allclose(out.rows[1], [0.0, 0.0, 1.0])


class TestOptimize:
    def test_single_qubit_analytic(self):
        res = optimize(H34, "diag")
        assert res.converged
        assert np.allclose(res.beta.rows, [[3 / 7, 0.0, 4 / 7]], atol=1e-6)
        assert res.cost == pytest.approx(49.0, abs=1e-8)
        assert res.kkt_residual < 1e-8

    def test_z_only_concentrates(self):
        h = parse_observable("1.0 ZZ\n")
        res = optimize(h, "diag")
        assert res.converged
        assert np.allclose(res.beta.rows, [[0, 0, 1], [0, 0, 1]], atol=1e-9)
        assert res.cost == pytest.approx(1.0)

    def test_full_cost_not_above_uniform(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 4))
            h = oracles.random_hamiltonian(rng, n, max_terms=5)
            signs = oracles.random_signs(rng, n)
            ref = SingleReference(signs)
            res = optimize(h, "full", reference=ref)
            uniform_cost = cost_full(h, ref, uniform_beta(n))
            assert res.cost <= uniform_cost + 1e-8

    def test_random_init_reaches_same_diag_optimum(self):
        res_u = optimize(H34, "diag", OptimizerConfig(init="uniform"))
        res_r = optimize(H34, "diag", OptimizerConfig(init="random", seed=4))
        assert res_r.converged
        assert res_r.cost == pytest.approx(res_u.cost, abs=1e-6)

    def test_multiref_runs(self):
        h = parse_observable("1.0 XX\n0.5 ZI\n")
        ref = MultiReference(("00", "11"), (1 / np.sqrt(2), 1 / np.sqrt(2)))
        res = optimize(h, "multiref", reference=ref)
        assert res.cost <= cost_multiref(h, ref, uniform_beta(2)) + 1e-8

    def test_reference_type_enforced(self):
        with pytest.raises(ValueError):
            optimize(H34, "full", reference=None)
        with pytest.raises(ValueError):
            optimize(H34, "nope")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(step=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(tolerance=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(init="bogus")
