import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptrack import tensorops as T
from promptrack.errors import ConfigError, ShapeError


class TestMatmul:
    def test_identity(self):
        b = np.array([[3.0, 4.0], [5.0, 6.0]])
        assert np.array_equal(T.matmul(np.eye(2), b), b)

    def test_zero(self):
        out = T.matmul(np.array([[1.0, 2.0]]), np.array([[0.0], [0.0]]))
        assert np.array_equal(out, [[0.0]])

    def test_hand_expansion(self):
        out = T.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))
        assert np.array_equal(out, [[17.0], [39.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestSoftmaxRows:
    def test_symmetric(self):
        assert np.allclose(T.softmax_rows(np.zeros((1, 2))), [[0.5, 0.5]])

    def test_analytic(self):
        out = T.softmax_rows(np.array([[np.log(2.0), 0.0]]))
        assert np.allclose(out, [[2 / 3, 1 / 3]])

    def test_no_overflow(self):
        out = T.softmax_rows(np.array([[1000.0, 0.0]]))
        assert np.all(np.isfinite(out))
        assert out[0, 0] == pytest.approx(1.0)
        assert out[0, 1] == pytest.approx(0.0, abs=1e-300)

    @given(
        st.lists(
            st.lists(st.floats(-50, 50), min_size=2, max_size=5),
            min_size=1,
            max_size=4,
        ).filter(lambda rows: len({len(r) for r in rows}) == 1)
    )
    def test_rows_sum_to_one(self, rows):
        out = T.softmax_rows(np.array(rows))
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(out > 0) and np.all(out < 1 + 1e-12)


class TestLayerNorm:
    def test_constant_row_guarded(self):
        out = T.layer_norm(np.full((1, 4), 3.0), np.ones(4), np.zeros(4))
        assert np.allclose(out, 0.0)

    def test_already_normalized(self):
        out = T.layer_norm(np.array([[1.0, -1.0]]), np.ones(2), np.zeros(2))
        assert np.allclose(out, [[1.0, -1.0]], atol=1e-5)

    def test_output_statistics(self):
        rng = np.random.default_rng(0)
        m = rng.normal(size=(6, 32)) * 7 + 3
        gain, bias = np.full(32, 2.0), np.full(32, 0.5)
        out = T.layer_norm(m, gain, bias)
        assert np.allclose(out.mean(axis=1), 0.5, atol=1e-4)
        assert np.allclose(out.var(axis=1), 4.0, rtol=1e-3)


class TestTripleCorrelation:
    def test_superdiagonal_hand_value(self):
        t = T.triple_correlation(
            np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]), np.array([[5.0, 6.0]])
        )
        assert t.shape == (1, 1, 1)
        assert t[0, 0, 0] == pytest.approx(63.0)  # 1*3*5 + 2*4*6

    def test_all_ones_hand_value(self):
        t = T.triple_correlation(
            np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]), np.array([[5.0, 6.0]]),
            core="all-ones",
        )
        assert t[0, 0, 0] == pytest.approx(231.0)  # (1+2)(3+4)(5+6)

    def test_all_ones_core_is_rank_one(self):
        rng = np.random.default_rng(1)
        t = T.triple_correlation(
            rng.normal(size=(3, 5)), rng.normal(size=(4, 5)), rng.normal(size=(2, 5)),
            core="all-ones",
        )
        # every 2x2 minor of every slice vanishes
        for k in range(2):
            s = t[:, :, k]
            for i in range(2):
                for j in range(3):
                    minor = s[i][j] * s[i + 1][(j + 1) % 4] - s[i][(j + 1) % 4] * s[i + 1][j]
                    assert minor == pytest.approx(0.0, abs=1e-9)

    def test_zero_row_zeroes_slice(self):
        rng = np.random.default_rng(2)
        e = rng.normal(size=(3, 4))
        e[1] = 0.0
        t = T.triple_correlation(e, rng.normal(size=(2, 4)), rng.normal(size=(2, 4)))
        assert np.all(t[1] == 0.0)

    def test_multilinear_in_rows(self):
        rng = np.random.default_rng(3)
        e, x, p = rng.normal(size=(3, 4)), rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
        t = T.triple_correlation(e, x, p)
        x2 = x.copy()
        x2[1] *= 2.5
        t2 = T.triple_correlation(e, x2, p)
        assert np.allclose(t2[:, 1, :], 2.5 * t[:, 1, :])
        assert np.array_equal(t2[:, 0, :], t[:, 0, :])

    def test_unknown_core(self):
        with pytest.raises(ConfigError):
            T.triple_correlation(np.ones((1, 2)), np.ones((1, 2)), np.ones((1, 2)), core="cp")

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            T.triple_correlation(np.ones((1, 2)), np.ones((1, 3)), np.ones((1, 2)))


class TestTensorSlice:
    def test_restack_reproduces(self):
        rng = np.random.default_rng(4)
        t = rng.normal(size=(3, 4, 5))
        stacked = np.stack([T.tensor_slice(t, "tracklet", j) for j in range(4)], axis=1)
        assert np.array_equal(stacked, t)

    def test_lateral_slice_matches_reduced_correlation(self):
        rng = np.random.default_rng(5)
        e, x, p = rng.normal(size=(3, 6)), rng.normal(size=(3, 6)), rng.normal(size=(3, 6))
        t = T.triple_correlation(e, x, p)
        for j in range(3):
            direct = T.triple_correlation(e, x[j : j + 1], p)[:, 0, :]
            assert np.allclose(T.tensor_slice(t, "tracklet", j), direct)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            T.tensor_slice(np.zeros((2, 2, 2)), "region", 2)

    def test_unknown_axis(self):
        with pytest.raises(ConfigError):
            T.tensor_slice(np.zeros((2, 2, 2)), "time", 0)


def _params(dim, heads=1, seed=0, identity=False):
    rng = np.random.default_rng(seed)

    def proj():
        return np.eye(dim) if identity else rng.normal(size=(dim, dim)) / np.sqrt(dim)

    fam = T.FamilyProjections(proj(), proj(), proj())
    return T.AttentionParams(dim=dim, heads=heads, families={"image": fam, "prompt": fam})


class _Tokens:
    def __init__(self, family, tokens):
        self.family = family
        self.tokens = np.asarray(tokens, dtype=np.float64)


class TestCrossAttention:
    def test_single_key_token(self):
        p = _params(4, seed=1)
        x = _Tokens("image", np.random.default_rng(2).normal(size=(5, 4)))
        y = _Tokens("prompt", np.random.default_rng(3).normal(size=(1, 4)))
        a = T.cross_attention(x, y, p)
        assert a.shape == (5, 1)
        assert np.allclose(a, 1.0)

    def test_orthonormal_diagonal_dominance(self):
        p = _params(3, identity=True)
        x = _Tokens("image", np.eye(3) * 2.0)
        a = T.cross_attention(x, x, p)
        assert np.allclose(a.sum(axis=1), 1.0, atol=1e-9)
        for i in range(3):
            assert a[i, i] > max(a[i, j] for j in range(3) if j != i)

    def test_permutation_equivariance(self):
        p = _params(8, heads=2, seed=4)
        rng = np.random.default_rng(5)
        x = _Tokens("image", rng.normal(size=(3, 8)))
        y_rows = rng.normal(size=(4, 8))
        perm = [2, 0, 3, 1]
        a = T.cross_attention(x, _Tokens("prompt", y_rows), p)
        a_perm = T.cross_attention(x, _Tokens("prompt", y_rows[perm]), p)
        assert np.allclose(a_perm, a[:, perm])

    @given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2, 4, 8]))
    @settings(max_examples=25, deadline=None)
    def test_row_stochastic(self, seed, heads):
        dim = 8
        p = _params(dim, heads=heads, seed=seed)
        rng = np.random.default_rng(seed)
        x = _Tokens("image", rng.normal(size=(rng.integers(1, 6), dim)) * 10)
        y = _Tokens("prompt", rng.normal(size=(rng.integers(1, 6), dim)) * 10)
        a = T.cross_attention(x, y, p)
        assert np.allclose(a.sum(axis=1), 1.0, atol=1e-9)

    def test_width_mismatch(self):
        p = _params(4)
        with pytest.raises(ShapeError):
            T.cross_attention(_Tokens("image", np.ones((2, 5))), _Tokens("prompt", np.ones((2, 4))), p)

    def test_indivisible_heads(self):
        with pytest.raises(ConfigError):
            T.attention_logits(np.ones((2, 6)), np.ones((2, 6)), np.eye(6), np.eye(6), heads=4, dim=6)
