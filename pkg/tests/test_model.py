import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poprec.model import (
    ChannelModel,
    DimensionError,
    HypercubeDistribution,
    SignedWeightVector,
    WeightDistribution,
    binomial_pmf,
    build_phi,
    build_phi_lossy,
    build_phi_noisy,
    format_distribution,
    permutation_invariant_distribution,
    push_forward,
    read_distribution,
    to_rational,
    weight_distribution_of,
    write_distribution,
)

probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
dims = st.integers(min_value=0, max_value=30)


def brute_force_push(kind: str, d: int, eps: float, pi: np.ndarray) -> np.ndarray:
    """Output-weight law by enumerating every per-bit corruption pattern of one string per weight."""
    out = np.zeros(d + 1)
    for w, pw in enumerate(pi):
        x = [1] * w + [0] * (d - w)
        for pattern in itertools.product((0, 1), repeat=d):
            hits = sum(pattern)
            prob = eps**hits * (1 - eps) ** (d - hits)
            if kind == "lossy":
                y = sum(b for b, e in zip(x, pattern) if not e)
            else:
                y = sum(b ^ e for b, e in zip(x, pattern))
            out[y] += pw * prob
    return out


class TestLossyMatrix:
    def test_no_erasure_is_identity(self):
        np.testing.assert_array_equal(build_phi_lossy(2, 0.0).entries, np.eye(3))

    def test_half_erasure_columns(self):
        phi = build_phi_lossy(2, 0.5).entries
        np.testing.assert_allclose(phi[:, 0], [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(phi[:, 1], [0.5, 0.5, 0], atol=1e-15)
        np.testing.assert_allclose(phi[:, 2], [0.25, 0.5, 0.25], atol=1e-15)

    def test_total_erasure_collapses_to_zero(self):
        np.testing.assert_array_equal(build_phi_lossy(1, 1.0).entries, [[1, 1], [0, 0]])

    def test_exact_half_erasure(self):
        phi = build_phi_lossy(2, Fraction(1, 2), exact=True)
        assert phi.is_exact
        assert list(phi.entries[:, 2]) == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]

    def test_dimension_cap(self):
        with pytest.raises(DimensionError, match="dimension too large"):
            build_phi_lossy(201, 0.3)
        assert build_phi_lossy(250, 0.3, max_dim=300).d == 250

    def test_epsilon_out_of_range(self):
        with pytest.raises(ValueError):
            build_phi_lossy(3, 1.5)

    @given(d=dims, eps=probs)
    @settings(max_examples=60, deadline=None)
    def test_columns_sum_to_one(self, d, eps):
        np.testing.assert_allclose(build_phi_lossy(d, eps).column_sums(), 1.0, atol=1e-12)

    @given(d=dims, eps=probs)
    @settings(max_examples=60, deadline=None)
    def test_upper_triangular_with_diagonal(self, d, eps):
        phi = build_phi_lossy(d, eps).entries
        np.testing.assert_array_equal(np.tril(phi, -1), 0)
        np.testing.assert_allclose(np.diag(phi), (1 - eps) ** np.arange(d + 1), rtol=1e-12, atol=1e-300)

    @given(d=st.integers(0, 12), num=st.integers(0, 8))
    @settings(max_examples=30, deadline=None)
    def test_exact_columns_sum_exactly(self, d, num):
        phi = build_phi_lossy(d, Fraction(num, 8), exact=True)
        assert all(s == 1 for s in phi.column_sums())


class TestNoisyMatrix:
    def test_quarter_flip_d1(self):
        np.testing.assert_allclose(build_phi_noisy(1, 0.25).entries, [[0.75, 0.25], [0.25, 0.75]], atol=1e-15)

    def test_half_flip_forgets_input(self):
        phi = build_phi_noisy(2, 0.5).entries
        for j in range(3):
            np.testing.assert_allclose(phi[:, j], [0.25, 0.5, 0.25], atol=1e-15)
        assert ChannelModel("noisy", Fraction(1, 2)).is_degenerate_noisy

    def test_noiseless_is_identity(self):
        np.testing.assert_array_equal(build_phi_noisy(2, 0.0).entries, np.eye(3))

    @given(d=st.integers(0, 25), eps=probs)
    @settings(max_examples=60, deadline=None)
    def test_bit_negation_symmetry(self, d, eps):
        a = build_phi_noisy(d, eps).entries
        b = build_phi_noisy(d, 1 - eps).entries
        # complementing input and output leaves the channel unchanged
        np.testing.assert_allclose(a[::-1, ::-1], a, atol=1e-12)
        # complementing only the output swaps eps and 1 - eps
        np.testing.assert_allclose(a[::-1, :], b, atol=1e-12)

    @given(d=st.integers(0, 25), eps=probs)
    @settings(max_examples=40, deadline=None)
    def test_columns_sum_to_one(self, d, eps):
        np.testing.assert_allclose(build_phi_noisy(d, eps).column_sums(), 1.0, atol=1e-12)


class TestBinomial:
    def test_matches_direct_formula(self):
        n, p = 7, 0.3
        direct = [math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]
        np.testing.assert_allclose(binomial_pmf(n, p), direct, rtol=1e-13)

    def test_degenerate_endpoints(self):
        np.testing.assert_array_equal(binomial_pmf(3, 0.0), [1, 0, 0, 0])
        np.testing.assert_array_equal(binomial_pmf(3, 1.0), [0, 0, 0, 1])

    def test_exact(self):
        assert list(binomial_pmf(2, Fraction(1, 3))) == [Fraction(4, 9), Fraction(4, 9), Fraction(1, 9)]


class TestWeightDistribution:
    def test_point_mass(self):
        P = HypercubeDistribution.point_mass("000")
        np.testing.assert_array_equal(weight_distribution_of(P).probs, [1, 0, 0, 0])

    def test_antipodal(self):
        P = HypercubeDistribution.uniform(["000", "111"])
        np.testing.assert_allclose(weight_distribution_of(P).probs, [0.5, 0, 0, 0.5])

    def test_uniform_cube(self):
        P = HypercubeDistribution.uniform("".join(b) for b in itertools.product("01", repeat=3))
        np.testing.assert_allclose(weight_distribution_of(P).probs, [1 / 8, 3 / 8, 3 / 8, 1 / 8])

    def test_rejects_bad_mass(self):
        with pytest.raises(ValueError):
            WeightDistribution([0.5, 0.4])
        with pytest.raises(ValueError):
            WeightDistribution([1.5, -0.5])

    def test_lift_round_trip(self):
        pi = WeightDistribution([0.1, 0.2, 0.3, 0.4])
        P = permutation_invariant_distribution(pi)
        assert len(P) == 8
        np.testing.assert_allclose(weight_distribution_of(P).probs, pi.probs)

    def test_signed_vector_l1(self):
        assert SignedWeightVector([0.5, -0.25, 0.0]).l1() == pytest.approx(0.75)


class TestPushForward:
    def test_unit_input_gives_first_column(self):
        phi = build_phi_lossy(3, 0.4)
        out = push_forward(phi, WeightDistribution([1, 0, 0, 0]))
        np.testing.assert_allclose(out.probs, phi.entries[:, 0])

    def test_top_weight_half_erasure(self):
        out = push_forward(build_phi_lossy(2, 0.5), WeightDistribution([0, 0, 1]))
        np.testing.assert_allclose(out.probs, [0.25, 0.5, 0.25])

    def test_identity_channel(self):
        pi = WeightDistribution([0.2, 0.3, 0.5])
        np.testing.assert_allclose(push_forward(build_phi_noisy(2, 0.0), pi).probs, pi.probs)

    def test_dimension_mismatch(self):
        with pytest.raises((ValueError, DimensionError)):
            push_forward(build_phi_lossy(3, 0.4), WeightDistribution([0.5, 0.5]))

    @pytest.mark.parametrize("kind", ["lossy", "noisy"])
    @pytest.mark.parametrize("d", [1, 4, 8])
    @pytest.mark.parametrize("eps", [0.15, 0.6])
    def test_matches_brute_force(self, kind, d, eps):
        rng = np.random.default_rng(d)
        pi = rng.dirichlet(np.ones(d + 1))
        got = push_forward(build_phi(ChannelModel(kind, eps), d), WeightDistribution(pi)).probs
        np.testing.assert_allclose(got, brute_force_push(kind, d, eps, pi), atol=1e-13)

    @given(d=st.integers(1, 20), eps=probs, seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_preserves_mass_and_sign(self, d, eps, seed):
        pi = np.random.default_rng(seed).dirichlet(np.ones(d + 1))
        out = push_forward(build_phi_noisy(d, eps), WeightDistribution(pi)).probs
        assert np.all(out >= 0)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)


class TestRationalSnapping:
    def test_decimal_text(self):
        assert to_rational(0.1) == Fraction(1, 10)
        assert to_rational("3/4") == Fraction(3, 4)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            to_rational(float("nan"))


class TestDistributionFiles:
    def test_round_trip(self, tmp_path):
        P = HypercubeDistribution(4, {"0101": 0.25, "1111": 0.75})
        path = tmp_path / "p.txt"
        write_distribution(P, path, header="example")
        Q = read_distribution(path)
        assert dict(Q.items()) == dict(P.items())
        assert format_distribution(P).splitlines()[0] == "0101 0.25"

    def test_malformed_line_is_located(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0101 0.5\n01x1 0.5\n")
        with pytest.raises(ValueError, match=":2:"):
            read_distribution(path)

    def test_mixed_lengths(self):
        with pytest.raises(DimensionError):
            HypercubeDistribution(3, {"000": 0.5, "11": 0.5})
