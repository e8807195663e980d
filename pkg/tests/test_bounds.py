import math

import numpy as np
import pytest

from dde.bounds import (
    PopulationVector,
    copies_required,
    lemma1_bounds,
    lemma2_bound,
    mom_precision,
    mom_sample_complexity,
    renyi_entropy,
    resource_estimate,
    shot_complexity,
    spectral_gap,
    theorem1_bound,
    validity_condition,
)
from dde.engine import build_rho_bar_analytic, vd_oracle
from dde.errors import BoundInapplicableError, InvalidArgumentError


class TestEntropy:
    def test_uniform(self):
        p = np.full(4, 0.25)
        for a in (0.5, 2, 3, math.inf):
            assert renyi_entropy(p, a) == pytest.approx(math.log(4))

    def test_monotone_in_order(self):
        p = [0.6, 0.3, 0.1]
        vals = [renyi_entropy(p, a) for a in (0.5, 2, 5, math.inf)]
        assert all(x >= y - 1e-12 for x, y in zip(vals, vals[1:]))

    def test_shannon_rejected(self):
        with pytest.raises(InvalidArgumentError):
            renyi_entropy([0.5, 0.5], 1)

    def test_population_vector_validation(self):
        with pytest.raises(InvalidArgumentError):
            PopulationVector([0.5, 0.6])
        pv = PopulationVector([0.5, 0.3, 0.2])
        np.testing.assert_allclose(pv.others, [0.6, 0.4])


class TestLemma1:
    def test_bounds_hold(self, small_instance):
        inst = small_instance
        c = inst.spec.coefficients(inst.initial)
        for sigma in (0.5, 1.0, 3.0):
            rep = lemma1_bounds(c, inst.spec, sigma)
            assert rep.hs_actual <= rep.hs_bound + 1e-14
            assert rep.trace_actual <= rep.trace_bound + 1e-14

    def test_hs_actual_matches_rho_bar(self, small_instance):
        inst = small_instance
        c = inst.spec.coefficients(inst.initial)
        sigma = 1.3
        rho = build_rho_bar_analytic(inst.initial, inst.spec, sigma)
        V = inst.spec.eigenvectors
        rho_e = V.conj().T @ rho @ V
        off = rho_e - np.diag(np.diag(rho_e))
        assert lemma1_bounds(c, inst.spec, sigma).hs_actual == pytest.approx(np.linalg.norm(off))

    def test_eigenstate_trivial(self, small_instance):
        spec = small_instance.spec
        c = np.zeros(spec.dim)
        c[0] = 1
        rep = lemma1_bounds(c, spec, 1.0)
        assert rep.hs_bound == 0 and rep.trace_actual == 0
        assert spectral_gap(spec, c).single_eigenstate


class TestLemma2:
    def test_bounds_oracle(self, small_instance):
        inst = small_instance
        pops = inst.populations
        p = PopulationVector(pops, inst.target)
        # fully dephased state
        rho = inst.spec.eigenvectors @ np.diag(pops) @ inst.spec.eigenvectors.conj().T
        Onorm = np.max(np.abs(np.linalg.eigvalsh(inst.O.to_matrix())))
        for n in range(1, 5):
            err = abs(vd_oracle(rho, inst.O, n) - inst.exact_value)
            assert err <= lemma2_bound(p, n) * Onorm + 1e-12

    def test_pure_state(self):
        assert lemma2_bound([1.0, 0.0], 3) == 0.0

    def test_theorem1_adds_time_term(self):
        p = [0.7, 0.2, 0.1]
        assert theorem1_bound(p, 2, 0.5, 1.0, 1.0, 1.0) > lemma2_bound(p, 2)


class TestResources:
    def test_copies_required_meets_target(self):
        p = PopulationVector([0.7, 0.2, 0.1])
        for Q in (0.1, 0.01, 1e-4):
            n = copies_required(Q, p)
            assert lemma2_bound(p, n) <= Q / 2 + 1e-12 or n == 1

    def test_requires_dominance(self):
        with pytest.raises(BoundInapplicableError):
            copies_required(0.1, [0.5, 0.5])

    def test_resource_estimate_sigma(self):
        n, sigma = resource_estimate(0.01, [0.7, 0.2, 0.1], 0.3, 1.5, 1.0)
        assert 4 * n / 0.7 * math.exp(-0.5 * (0.3 * sigma) ** 2) * 1.5 <= 0.005 * (1 + 1e-9)

    def test_mom_sample_complexity(self):
        K, N = mom_sample_complexity(0.1, 0.05, 0.5, 0.8)
        assert K == math.ceil(8 * math.log(20))
        assert N == math.ceil(4 * 1.3**2 / 0.8**4 / 0.01)

    def test_mom_precision_decreases(self):
        a, b = mom_precision(1000, 0.3, 0.9), mom_precision(100_000, 0.3, 0.9)
        assert b < a
        assert mom_precision(1, 0.3, 0.9) == math.inf

    def test_shot_complexity_and_validity(self):
        assert shot_complexity([0.8, 0.2], 0.1, 0.1, n=2) == pytest.approx(0.8**-4 / 0.01)
        assert validity_condition(0.01, 0.8, 2)
        assert not validity_condition(1.0, 0.8, 2)
