import numpy as np
import pytest

from vecsobol import (
    ContractError,
    DegenerateSampleError,
    IllPosedIndexError,
    InputSpace,
    PickFreezeDesign,
    PickFreezeSample,
    SubsetIndex,
    delta_variance,
    empirical_covariances,
    estimate_index,
    estimate_index_general,
    evaluate_pairs,
    generate_design,
    get_model,
    linear_model,
    read_sample_csv,
    write_sample_csv,
)

U1 = SubsetIndex((0,), 2)


def _sample(model_name="identity_2", subset=U1, n=2000, seed=8, **params):
    model = get_model(model_name, **params)
    return evaluate_pairs(model, generate_design(model.space(), subset, n, seed))


def _random_orthogonal(rng, k):
    q, r = np.linalg.qr(rng.normal(size=(k, k)))
    return q * np.sign(np.diag(r))


class TestDesign:
    def test_shapes_and_range(self):
        design = generate_design(InputSpace.uniform(2), U1, 3, 7)
        assert design.x.shape == (3, 2)
        assert design.x_prime.shape == (3, 1)
        assert np.all(design.x >= 0) and np.all(design.x < 1)
        assert np.all(design.x_prime >= 0) and np.all(design.x_prime < 1)

    def test_full_set_has_empty_redraw(self):
        full = SubsetIndex((0, 1), 2)
        design = generate_design(InputSpace.uniform(2), full, 5, 7)
        assert design.x_prime.shape == (5, 0)

    def test_determinism(self):
        a = generate_design(InputSpace.uniform(2), U1, 10, 3)
        b = generate_design(InputSpace.uniform(2), U1, 10, 3)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.x_prime, b.x_prime)

    def test_base_and_redraw_streams_differ(self):
        design = generate_design(InputSpace.uniform(2), U1, 1000, 3)
        assert abs(np.corrcoef(design.x[:, 1], design.x_prime[:, 0])[0, 1]) < 0.1

    def test_contracts(self):
        with pytest.raises(ContractError):
            generate_design(InputSpace.uniform(2), U1, 1, 3)
        with pytest.raises(ContractError):
            generate_design(InputSpace.uniform(3), U1, 10, 3)


class TestEvaluatePairs:
    def test_identity_makes_freezing_visible(self):
        model = get_model("identity_2")
        design = generate_design(model.space(), U1, 50, 4)
        sample = evaluate_pairs(model, design)
        assert np.array_equal(sample.y, design.x)
        assert np.array_equal(sample.y_u[:, 0], design.x[:, 0])
        assert np.array_equal(sample.y_u[:, 1], design.x_prime[:, 0])

    def test_u_only_pair_coincides(self):
        sample = _sample("u_only", n=100, dims=2, coords=(0,))
        assert np.array_equal(sample.y, sample.y_u)

    def test_sum_prod_single_row(self):
        design = PickFreezeDesign(
            x=np.array([[0.5, 0.2]]), x_prime=np.array([[0.9]]), subset=U1
        )
        sample = evaluate_pairs(get_model("sum_prod"), design)
        assert np.allclose(sample.y, [[0.7, 0.10]])
        assert np.allclose(sample.y_u, [[1.4, 0.45]])

    def test_dimension_contract(self):
        design = generate_design(InputSpace.uniform(2), U1, 10, 1)
        with pytest.raises(ContractError):
            evaluate_pairs(get_model("u_only", dims=3), design)


class TestEstimator:
    def test_matches_literal_formula(self):
        # transliteration of the defining sums, accumulated with plain floats
        sample = _sample(n=500, seed=12)
        y, yu, n = sample.y, sample.y_u, sample.n
        num = den = 0.0
        for l in range(y.shape[1]):
            s_prod = sum(y[i, l] * yu[i, l] for i in range(n))
            s_mean = sum((y[i, l] + yu[i, l]) / 2.0 for i in range(n))
            s_sq = sum((y[i, l] ** 2 + yu[i, l] ** 2) / 2.0 for i in range(n))
            num += s_prod - s_mean**2 / n
            den += s_sq - s_mean**2 / n
        assert estimate_index(sample) == pytest.approx(num / den, abs=1e-12)

    def test_identity_2_converges_to_half(self):
        assert estimate_index(_sample(n=100_000, seed=1)) == pytest.approx(0.5, abs=0.01)

    def test_u_only_is_exactly_one(self):
        for n in (2, 17, 1000):
            sample = _sample("u_only", n=n, seed=5, dims=2, coords=(0,))
            assert estimate_index(sample) == 1.0

    def test_full_subset_is_exactly_one(self):
        full = SubsetIndex((0, 1), 2)
        assert estimate_index(_sample(subset=full, n=1000, seed=5)) == 1.0

    def test_sum_prod_converges(self):
        sample = _sample("sum_prod", n=1_000_000, seed=2)
        assert estimate_index(sample) == pytest.approx(15 / 31, abs=0.005)

    def test_scalar_model_matches_univariate_pick_freeze(self):
        # independent scalar implementation of the same estimator
        model = linear_model(np.array([[1.0, 2.0]]))
        sample = evaluate_pairs(model, generate_design(model.space(), U1, 5000, 9))
        y, yu = sample.y[:, 0], sample.y_u[:, 0]
        n = len(y)
        m = np.sum((y + yu) / 2.0)
        num = np.sum(y * yu) - m * m / n
        den = np.sum((y * y + yu * yu) / 2.0) - m * m / n
        assert estimate_index(sample) == pytest.approx(num / den, abs=1e-12)

    def test_estimate_is_deterministic(self):
        assert estimate_index(_sample(seed=33)) == estimate_index(_sample(seed=33))

    def test_degenerate_guard(self):
        sample = _sample("constant", n=100, seed=6)
        with pytest.raises(DegenerateSampleError):
            estimate_index(sample)

    def test_small_variance_model_is_not_rejected(self):
        model = linear_model(1e-8 * np.eye(2))
        sample = evaluate_pairs(model, generate_design(model.space(), U1, 1000, 7))
        assert estimate_index(sample) == pytest.approx(0.5, abs=0.1)

    def test_finite_sample_range(self):
        for name in ("identity_2", "sum_prod"):
            for seed in range(10):
                value = estimate_index(_sample(name, n=1000, seed=seed))
                assert -0.05 <= value <= 1.05
            assert 0.0 <= estimate_index(_sample(name, n=100_000, seed=99)) <= 1.0

    def test_consistency_against_oracle(self):
        # estimate within five delta-method standard errors of the exact value
        cases = [("identity_2", 0.5), ("sum_prod", 15 / 31)]
        n = 2000
        for name, target in cases:
            model = get_model(name)
            for seed in range(50):
                sample = evaluate_pairs(model, generate_design(model.space(), U1, n, seed))
                err = abs(estimate_index(sample) - target)
                assert err <= 5.0 * np.sqrt(delta_variance(sample) / n)


class TestEmpiricalCovariances:
    def test_trace_ratio_is_bit_identical(self):
        for seed in range(5):
            sample = _sample("sum_prod", n=777, seed=seed)
            emp = empirical_covariances(sample)
            assert np.trace(emp.subset) / np.trace(emp.total) == estimate_index(sample)

    def test_coincident_pairs_give_equal_matrices(self):
        sample = _sample("u_only", n=500, seed=3, dims=2, coords=(0,))
        emp = empirical_covariances(sample)
        assert np.array_equal(emp.subset, emp.total)

    def test_matrices_are_symmetric(self):
        emp = empirical_covariances(_sample("sum_prod", n=999, seed=2))
        assert np.array_equal(emp.total, emp.total.T)
        assert np.array_equal(emp.subset, emp.subset.T)

    def test_normalized_cross_matrix_converges(self):
        emp = empirical_covariances(_sample(n=1_000_000, seed=10))
        assert np.max(np.abs(emp.subset / emp.n - np.diag([1.0, 0.0]))) < 0.01


class TestGeneralWeighting:
    def test_identity_weighting_is_exact_reduction(self):
        sample = _sample("sum_prod", n=1234, seed=4)
        assert estimate_index_general(sample, np.eye(2)) == estimate_index(sample)

    def test_diagonal_weighting_converges(self):
        sample = _sample(n=1_000_000, seed=14)
        m = np.diag([1.0, 2.0])
        assert estimate_index_general(sample, m) == pytest.approx(1 / 3, abs=0.01)
        swapped = sample.left_compose(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert estimate_index_general(swapped, m) == pytest.approx(2 / 3, abs=0.01)

    def test_near_zero_weighted_denominator(self):
        sample = _sample(n=100, seed=4)
        with pytest.raises(IllPosedIndexError):
            estimate_index_general(sample, np.zeros((2, 2)))


class TestSampleInvariances:
    def test_isometry_invariance(self):
        rng = np.random.default_rng(21)
        sample = _sample("sum_prod", n=3000, seed=16)
        base = estimate_index(sample)
        for _ in range(50):
            q = _random_orthogonal(rng, 2)
            assert abs(estimate_index(sample.left_compose(q)) - base) < 1e-10

    def test_homothety_invariance(self):
        sample = _sample("sum_prod", n=3000, seed=16)
        base = estimate_index(sample)
        for lam in np.linspace(-5.0, 5.0, 21):
            if lam == 0.0:
                continue
            scaled = PickFreezeSample(lam * sample.y, lam * sample.y_u, sample.subset)
            assert abs(estimate_index(scaled) - base) < 1e-12

    def test_weighted_transformation_rule(self):
        rng = np.random.default_rng(23)
        sample = _sample("sum_prod", n=2000, seed=18)
        for _ in range(30):
            o = rng.normal(size=(2, 2))
            m = rng.normal(size=(2, 2))
            m = m + m.T
            lhs = estimate_index_general(sample.left_compose(o), m)
            rhs = estimate_index_general(sample, o.T @ m @ o)
            assert abs(lhs - rhs) < 1e-10


class TestSampleCsv:
    def test_roundtrip_is_bit_exact(self, tmp_path):
        sample = _sample("sum_prod", n=64, seed=20)
        path = tmp_path / "sample.csv"
        write_sample_csv(sample, str(path))
        assert path.read_text().splitlines()[0] == "y_1,y_2,yu_1,yu_2"
        loaded = read_sample_csv(str(path), subset=U1)
        assert np.array_equal(loaded.y, sample.y)
        assert np.array_equal(loaded.y_u, sample.y_u)
        assert estimate_index(loaded) == estimate_index(sample)

    def test_header_validation(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u,v\n1,2\n")
        with pytest.raises(Exception):
            read_sample_csv(str(path))
