import math

import numpy as np
import pytest

import steering.bounds as bounds
from steering.bounds import (
    BoundsReport,
    lhs_bound_bruteforce,
    lhs_bound_dichotomic,
    ppt_violation_cap,
    projective_norm_violation_cap,
    pure_state_value,
    quantum_lower_bound_sampling,
    quantum_value,
    reevaluate_witness,
    shared_support_row,
)
from steering.constructions import (
    SIGMA_Z,
    SchmidtState,
    alpha_family,
    bernoulli_signs,
    build_dichotomic_functional,
    build_random_functional,
    build_schmidt_state,
    build_sign_povms,
    candidate_value,
    maximally_entangled,
    pauli_observables,
    pauli_witness_vector,
    ppt_threshold,
    random_ppt_family_params,
)
from steering.errors import DimensionMismatchError, SearchSpaceTooLargeError, ValidationError
from steering.linalg import operator_norm, projector, random_density, random_hermitian
from steering.model import (
    DichotomicFunctional,
    LhsModel,
    SteeringFunctional,
    pair,
    reconstruct_from_lhs,
)


def random_functional(rng, n, m, d) -> SteeringFunctional:
    return SteeringFunctional(
        np.stack([[random_hermitian(d, rng).data for _ in range(m)] for _ in range(n)])
    )


class TestBruteForce:
    def test_positive_commuting_case(self):
        F = SteeringFunctional(np.tile(np.diag([1.0, 0.0]), (3, 1, 1, 1)))
        bound = lhs_bound_bruteforce(F)
        assert bound.value == pytest.approx(3.0)
        assert bound.strategy.response == (0, 0, 0)
        assert bound.strategy_count == 8

    def test_zero_functional(self):
        assert lhs_bound_bruteforce(SteeringFunctional(np.zeros((2, 2, 2, 2)))).value == 0.0

    @pytest.mark.parametrize("n, m, d", [(1, 2, 2), (2, 2, 2), (2, 3, 3), (3, 2, 2)])
    def test_random_models_never_exceed(self, rng, n, m, d):
        F = random_functional(rng, n, m, d)
        bound = lhs_bound_bruteforce(F)
        for _ in range(300):
            L = int(rng.integers(1, 4))
            responses = rng.dirichlet(np.ones(m + 1), size=(L, n))[:, :, :m]
            states = [random_density(d, rng).data for _ in range(L)]
            model = LhsModel(rng.dirichlet(np.ones(L)), responses, states)
            assert abs(pair(F, reconstruct_from_lhs(model))) <= bound.value + 1e-8

    @pytest.mark.parametrize("n, m, d", [(2, 2, 2), (3, 3, 2), (2, 2, 4)])
    def test_argmax_strategy_attains_bound(self, rng, n, m, d):
        F = random_functional(rng, n, m, d)
        bound = lhs_bound_bruteforce(F)
        p = bound.strategy.response_probabilities(m)
        model = LhsModel([1.0], [p], [projector(bound.hidden_state).data])
        assert abs(pair(F, reconstruct_from_lhs(model))) == pytest.approx(bound.value, abs=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 4, 5])
    def test_fast_path_matches_general(self, n):
        F = build_random_functional(n, bernoulli_signs(n, 3))
        assert shared_support_row(F) == 0
        fast = lhs_bound_bruteforce(F, fast_path=True)
        general = lhs_bound_bruteforce(F, fast_path=False)
        assert fast.fast_path and not general.fast_path
        assert fast.value == pytest.approx(general.value, abs=1e-12)

    def test_no_shared_row_for_generic_functional(self, rng):
        assert shared_support_row(random_functional(rng, 2, 2, 3)) is None

    def test_chunked_parallel_run_is_identical(self, rng, monkeypatch):
        F = random_functional(rng, 3, 2, 2)
        serial = lhs_bound_bruteforce(F, workers=1)
        monkeypatch.setattr(bounds, "CHUNK_ENTRIES", 16)
        parallel = lhs_bound_bruteforce(F, workers=4)
        assert parallel.value == pytest.approx(serial.value, abs=1e-14)
        assert parallel.strategy == serial.strategy

    def test_guard(self):
        F = build_random_functional(9, bernoulli_signs(9, 1))
        with pytest.raises(SearchSpaceTooLargeError) as exc:
            lhs_bound_bruteforce(F)
        assert exc.value.count == 11**9


class TestDichotomicBound:
    def test_commuting_signs(self):
        F = DichotomicFunctional(np.tile(SIGMA_Z / 4, (4, 1, 1)))
        bound = lhs_bound_dichotomic(F)
        assert bound.value == pytest.approx(1.0)
        assert bound.signs == (1, 1, 1, 1)

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_anticommuting_family(self, m):
        F = build_dichotomic_functional(m, embed_dim=2**m)
        assert lhs_bound_dichotomic(F).value == pytest.approx(1.0, abs=1e-10)

    def test_positive_family_collapses(self, rng):
        G = rng.standard_normal((3, 4, 4)) + 1j * rng.standard_normal((3, 4, 4))
        F = DichotomicFunctional(G @ np.swapaxes(G, 1, 2).conj())
        expected = operator_norm(F.F.sum(axis=0))
        assert lhs_bound_dichotomic(F).value == pytest.approx(expected, rel=1e-10)
        general = lhs_bound_bruteforce(F.as_steering_functional())
        assert general.value == pytest.approx(expected, rel=1e-10)

    def test_never_above_abstaining_bound(self, rng):
        for _ in range(10):
            F = DichotomicFunctional(np.stack([random_hermitian(3, rng).data for _ in range(3)]))
            general = lhs_bound_bruteforce(F.as_steering_functional()).value
            assert lhs_bound_dichotomic(F).value <= general + 1e-12


class TestQuantumValue:
    @pytest.mark.parametrize("n", [2, 4])
    def test_candidate_value_identity(self, n):
        signs = bernoulli_signs(n, 5)
        state = alpha_family(n, 1 / math.sqrt(2))
        value = quantum_value(
            build_random_functional(n, signs),
            build_sign_povms(n, signs),
            build_schmidt_state(state),
        )
        assert value == pytest.approx(candidate_value(state), abs=1e-10)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_dichotomic_witness(self, m):
        F = build_dichotomic_functional(m, embed_dim=2**m)
        rho = projector(pauli_witness_vector(m))
        assert quantum_value(F, pauli_observables(m), rho) == pytest.approx(math.sqrt(m), abs=1e-9)

    def test_pure_state_value_matches(self, rng):
        F = random_functional(rng, 1, 2, 2)
        povm = build_sign_povms(1, bernoulli_signs(1, 1), K=2.0)
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        assert pure_state_value(F, povm, psi) == pytest.approx(
            quantum_value(F, povm, projector(psi)), abs=1e-12
        )

    def test_zero_functional(self):
        povm = build_sign_povms(2, bernoulli_signs(2, 1))
        F = SteeringFunctional(np.zeros((2, 3, 3, 3)))
        assert quantum_value(F, povm, maximally_entangled(3)) == 0.0

    def test_shape_mismatch(self):
        povm = build_sign_povms(2, bernoulli_signs(2, 1))
        F = SteeringFunctional(np.zeros((1, 3, 3, 3)))
        with pytest.raises(DimensionMismatchError):
            quantum_value(F, povm, maximally_entangled(3))


class TestSampling:
    def test_injected_candidate_without_samples(self):
        n = 3
        signs = bernoulli_signs(n, 2)
        state = alpha_family(n, 1 / math.sqrt(2))
        result = quantum_lower_bound_sampling(
            build_random_functional(n, signs),
            build_schmidt_state(state),
            samples=0,
            seed=0,
            candidates=[build_sign_povms(n, signs)],
        )
        assert result.source == "candidate-0"
        assert result.value == pytest.approx(candidate_value(state), abs=1e-10)

    def test_zero_functional(self):
        F = SteeringFunctional(np.zeros((1, 2, 2, 2)))
        assert quantum_lower_bound_sampling(F, maximally_entangled(2), 10, 0).value == 0.0

    def test_sigma_z_on_bell_state(self):
        F = SteeringFunctional(np.array([[SIGMA_Z / 2, -SIGMA_Z / 2]]))
        result = quantum_lower_bound_sampling(F, maximally_entangled(2), samples=500, seed=1)
        assert result.value == pytest.approx(0.5, abs=0.02)
        assert result.value <= 0.5 + 1e-12

    def test_witness_reproduces_value(self, rng):
        F = random_functional(rng, 2, 2, 2)
        rho = random_density(4, rng)
        result = quantum_lower_bound_sampling(F, rho, samples=50, seed=3)
        assert abs(quantum_value(F, result.povm, rho)) == pytest.approx(result.value, abs=1e-10)

    def test_seeded_runs_are_reproducible(self, rng):
        F = random_functional(rng, 2, 2, 2)
        rho = random_density(4, rng)
        a = quantum_lower_bound_sampling(F, rho, samples=20, seed=9)
        b = quantum_lower_bound_sampling(F, rho, samples=20, seed=9)
        assert a.value == b.value


class TestPptCaps:
    def test_zero_lambda(self):
        cap = ppt_violation_cap(None, alpha_family(2, 0.8), 0.0, 2.5)
        assert cap.cap == pytest.approx(2.5)
        assert cap.is_ppt

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_uniform(self, n):
        state = SchmidtState.uniform(n)
        assert ppt_violation_cap(None, state, 1.0, 1.0).cap == pytest.approx(n)
        at_threshold = ppt_violation_cap(None, state, ppt_threshold(state), 1.0)
        assert at_threshold.cap == pytest.approx(1 + (n - 1) / (1 + n))
        assert at_threshold.cap <= 2.0
        assert at_threshold.is_ppt
        assert not ppt_violation_cap(None, state, 0.9, 1.0).is_ppt

    def test_invalid_lambda(self):
        with pytest.raises(ValidationError):
            ppt_violation_cap(None, SchmidtState.uniform(2), -0.1, 1.0)

    def test_dimension_check(self):
        F = build_random_functional(2, bernoulli_signs(2, 1))
        with pytest.raises(DimensionMismatchError):
            ppt_violation_cap(F, SchmidtState.uniform(2), 0.1, 1.0)

    def test_admits_uses_constant(self):
        cap = ppt_violation_cap(None, SchmidtState.uniform(2), 0.2, 1.0)
        assert cap.admits(cap.cap * cap.constant)
        assert not cap.admits(cap.cap * cap.constant * 1.01)

    def test_projective_norm_cap(self, rng):
        params = random_ppt_family_params(3, rng, "werner")
        assert projective_norm_violation_cap(params, 1.5) <= 3.0 + 1e-12


class TestReport:
    def test_lv_consistency(self):
        report = BoundsReport.build(
            0.5,
            0.75,
            strategy=[0, -1],
            hidden_state=None,
            witness_measurement=None,
            witness_state=None,
            state_description="test",
        )
        assert report.lv * report.bC == pytest.approx(report.bQ_lower, abs=1e-9)
        data = report.to_json()
        assert data["modes"] == {"bC": "incomplete", "bQ": "complete", "dichotomic": False}
        assert data["strategy"] == [0, -1]

    def test_degenerate_lv(self):
        report = BoundsReport.build(
            0.0,
            0.1,
            strategy=[],
            hidden_state=None,
            witness_measurement=None,
            witness_state=None,
            state_description="zero",
        )
        assert report.lv is None

    def test_witnesses_reevaluate_from_json(self):
        n = 3
        signs = bernoulli_signs(n, 2)
        F = build_random_functional(n, signs)
        povm = build_sign_povms(n, signs)
        state = alpha_family(n, 1 / math.sqrt(2))
        rho = build_schmidt_state(state)
        value = abs(quantum_value(F, povm, rho))
        common = dict(
            strategy=[0, 1, -1],
            hidden_state=np.array([1.0, 0.0, 0.0, 0.0]),
            witness_measurement=povm,
            witness_state=rho,
            state_description="schmidt",
        )
        mixed = BoundsReport.build(1.0, value, **common).to_json()
        pure = BoundsReport.build(1.0, value, witness_vector=state.vector(), **common).to_json()
        assert "witness_state" in mixed and "witness_vector" not in mixed
        assert "witness_vector" in pure and "witness_state" not in pure
        assert pure["witness_measurement"]["type"] == "povm"
        for data in (mixed, pure):
            assert reevaluate_witness(F, data) == pytest.approx(value, abs=1e-12)

    def test_dichotomic_witness_reevaluates(self):
        F = build_dichotomic_functional(2, embed_dim=4)
        report = BoundsReport.build(
            1.0,
            math.sqrt(2),
            strategy=[1, -1],
            hidden_state=None,
            witness_measurement=pauli_observables(2),
            witness_state=None,
            witness_vector=pauli_witness_vector(2),
            state_description="pauli",
            dichotomic=True,
        )
        data = report.to_json()
        assert data["witness_measurement"]["type"] == "dichotomic-observable"
        assert reevaluate_witness(F, data) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_missing_witness_is_named(self):
        data = BoundsReport.build(
            1.0,
            0.5,
            strategy=[],
            hidden_state=None,
            witness_measurement=None,
            witness_state=None,
            state_description="none",
        ).to_json()
        with pytest.raises(ValidationError, match="report-witness"):
            reevaluate_witness(SteeringFunctional(np.zeros((1, 1, 2, 2))), data)
