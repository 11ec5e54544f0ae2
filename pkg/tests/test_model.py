import math

import numpy as np
import pytest

from steering.constructions import (
    DEFAULT_K,
    SIGMA_Z,
    alpha_family,
    bernoulli_signs,
    build_random_functional,
    build_schmidt_state,
    build_sign_povms,
    candidate_value,
)
from steering.errors import DegenerateDenominatorError, DimensionMismatchError, ValidationError
from steering.linalg import HermitianMatrix, kron, random_density, random_hermitian
from steering.model import (
    ABSTAIN,
    Assemblage,
    DichotomicFunctional,
    DichotomicObservable,
    LhsModel,
    LhsStrategy,
    Povm,
    SteeringFunctional,
    lv_ratio,
    pair,
    realize_assemblage,
    reconstruct_from_lhs,
)

KET0 = np.diag([1.0, 0.0])


class TestAssemblage:
    def test_complete_requires_no_signalling(self):
        with pytest.raises(ValidationError) as exc:
            Assemblage(np.array([[KET0, 0 * KET0], [0 * KET0, np.eye(2) - KET0]]))
        assert exc.value.constraint == "no-signalling"

    def test_incomplete_allows_subnormalized(self):
        sigma = Assemblage(np.array([[KET0 / 2], [np.zeros((2, 2))]]), complete=False)
        assert sigma.n_settings == 2 and sigma.n_outcomes == 1

    def test_rejects_negative_entries(self):
        with pytest.raises(ValidationError, match="assemblage-psd"):
            Assemblage(np.array([[np.diag([1.5, -0.5])]]))


class TestPair:
    def test_single_entry(self):
        F = SteeringFunctional(np.array([[SIGMA_Z]]))
        sigma = Assemblage(np.array([[KET0]]))
        assert pair(F, sigma) == 1.0

    def test_zero_functional(self, rng):
        sigma = Assemblage(np.array([[random_density(3, rng).data]]))
        assert pair(SteeringFunctional(np.zeros((1, 1, 3, 3))), sigma) == 0.0

    def test_bilinear(self, rng):
        def functional():
            entries = [[random_hermitian(3, rng).data for _ in range(3)] for _ in range(2)]
            return SteeringFunctional(np.array(entries))

        povm = build_sign_povms(2, bernoulli_signs(2, 1))
        sigma1 = realize_assemblage(povm, random_density(9, rng))
        sigma2 = realize_assemblage(povm, random_density(9, rng))
        F, G, c, t = functional(), functional(), -1.7, 0.3

        combined = pair(F + G.scaled(c), sigma1)
        assert combined == pytest.approx(pair(F, sigma1) + c * pair(G, sigma1), abs=1e-12)
        assert pair(-F, sigma1) == pytest.approx(-pair(F, sigma1), abs=1e-12)
        mixture = Assemblage(t * sigma1.sigma + (1 - t) * sigma2.sigma)
        expected = t * pair(F, sigma1) + (1 - t) * pair(F, sigma2)
        assert pair(F, mixture) == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch(self):
        F = SteeringFunctional(np.zeros((2, 1, 2, 2)))
        with pytest.raises(DimensionMismatchError):
            pair(F, Assemblage(np.array([[KET0]])))


class TestRealize:
    def test_trivial_measurement_gives_reduced_state(self, rng):
        rho_a, rho_b = random_density(2, rng), random_density(3, rng)
        rho = HermitianMatrix.hermitize(kron(rho_a, rho_b))
        sigma = realize_assemblage(Povm(np.eye(2)[None, None]), rho)
        assert np.allclose(sigma.sigma[0, 0], rho_b.data)

    def test_diagonal_measurement_on_schmidt_state(self):
        state = alpha_family(2, 0.8)
        alpha = state.alpha
        E = np.diag([1.0, 0.0, 1.0])
        povm = Povm(np.stack([E, np.eye(3) - E])[None])
        sigma = realize_assemblage(povm, build_schmidt_state(state))
        assert np.allclose(sigma.sigma[0, 0], np.diag(alpha**2 * np.diag(E)))

    def test_dichotomic_observable_is_converted(self):
        observable = DichotomicObservable(np.array([SIGMA_Z]))
        rho = build_schmidt_state(alpha_family(1, 1 / math.sqrt(2)))
        sigma = realize_assemblage(observable, rho)
        assert np.allclose(sigma.sigma[0, 0], KET0 / 2)

    @pytest.mark.parametrize("n", [2, 3, 5])
    @pytest.mark.parametrize("seed", [1, 2])
    def test_candidate_pairing(self, n, seed):
        signs = bernoulli_signs(n, seed)
        state = alpha_family(n, 1 / math.sqrt(2))
        sigma = realize_assemblage(build_sign_povms(n, signs), build_schmidt_state(state))
        value = pair(build_random_functional(n, signs), sigma)
        assert value == pytest.approx(candidate_value(state, DEFAULT_K), abs=1e-10)
        assert value == pytest.approx(math.sqrt(n) / (2 * DEFAULT_K), abs=1e-10)


class TestLhs:
    def test_deterministic_single_hidden_state(self):
        model = LhsModel([1.0], [[[1.0, 0.0], [0.0, 1.0]]], [KET0])
        sigma = reconstruct_from_lhs(model)
        assert np.allclose(sigma.sigma[0, 0], KET0)
        assert np.allclose(sigma.sigma[0, 1], 0)
        assert np.allclose(sigma.sigma[1, 1], KET0)

    def test_uniform_mixture_averages(self):
        responses = [[[1.0, 0.0]], [[0.0, 1.0]]]
        states = [KET0, np.eye(2) - KET0]
        sigma = reconstruct_from_lhs(LhsModel([0.5, 0.5], responses, states))
        assert np.allclose(sigma.sigma[0, 0], KET0 / 2)
        assert np.allclose(sigma.sigma[0, 1], (np.eye(2) - KET0) / 2)

    def test_abstaining_model_is_incomplete(self):
        strategy = LhsStrategy((0, ABSTAIN))
        model = LhsModel([1.0], [strategy.response_probabilities(2)], [KET0])
        assert not model.complete
        assert not reconstruct_from_lhs(model).complete

    def test_rejects_bad_weights(self):
        with pytest.raises(ValidationError, match="lhs-weights"):
            LhsModel([0.7, 0.7], np.zeros((2, 1, 1)), [KET0, KET0])

    def test_random_models_validate(self, rng):
        for _ in range(20):
            L, n, m, d = 3, 2, 3, 2
            weights = rng.dirichlet(np.ones(L))
            responses = rng.dirichlet(np.ones(m), size=(L, n))
            states = [random_density(d, rng).data for _ in range(L)]
            sigma = reconstruct_from_lhs(LhsModel(weights, responses, states))
            assert sigma.complete


class TestFunctionals:
    def test_dichotomic_two_outcome_form(self):
        F = DichotomicFunctional(np.array([SIGMA_Z]))
        general = F.as_steering_functional()
        assert np.array_equal(general.F[0, 1], -SIGMA_Z)
        assert not F.is_positive()
        assert DichotomicFunctional(np.array([KET0])).is_positive()

    def test_observable_range_checked(self):
        with pytest.raises(ValidationError, match="observable-range"):
            DichotomicObservable(np.array([2 * SIGMA_Z]))

    def test_observable_as_povm(self):
        povm = DichotomicObservable(np.array([SIGMA_Z])).as_povm()
        assert povm.complete
        assert np.allclose(povm.effects[0, 0], KET0)


class TestLvRatio:
    @pytest.mark.parametrize(
        "bQ, bC, expected", [(2, 1, 2), (1, 1, 1), (math.sqrt(3), 1, math.sqrt(3))]
    )
    def test_values(self, bQ, bC, expected):
        assert lv_ratio(bQ, bC) == pytest.approx(expected)

    def test_degenerate_denominator(self):
        with pytest.raises(DegenerateDenominatorError):
            lv_ratio(1.0, 0.0)
