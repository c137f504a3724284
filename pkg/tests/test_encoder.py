import numpy as np
import numpy.testing as npt
import pytest

from corrsim.encoder import (AttentionParams, GruCellParams, SentenceEncoder,
                             attend, bigru_encode, encoder_backward, gru_step)
from corrsim.errors import DataError, ShapeError
from corrsim.numkit import CHECK_DTYPE, GradientTape, SeededRng


def _zero_cell(hidden, dim, dtype=np.float64):
    z = lambda *s: np.zeros(s, dtype=dtype)
    return GruCellParams(z(hidden, dim), z(hidden, hidden), z(hidden),
                         z(hidden, dim), z(hidden, hidden), z(hidden),
                         z(hidden, dim), z(hidden, hidden), z(hidden))


def _random_encoder(hidden, dim, seed, dtype=CHECK_DTYPE):
    return SentenceEncoder.init(hidden, dim, hidden, SeededRng(seed), dtype)


class TestGruStep:
    def test_zero_fixed_point(self):
        params = _zero_cell(4, 3)
        h, _ = gru_step(params, np.zeros(4), np.zeros(3))
        npt.assert_array_equal(h, np.zeros(4))

    def test_zero_params_halve_state(self):
        # sigma(0) = 0.5 and tanh(0) = 0 make h = 0.5 * h_prev
        params = _zero_cell(4, 3)
        v = np.array([1.0, -2.0, 0.5, 3.0])
        h, _ = gru_step(params, v, np.zeros(3))
        npt.assert_allclose(h, 0.5 * v, rtol=1e-12)

    def test_convex_mixture_bound(self):
        rng = np.random.default_rng(0)
        enc = _random_encoder(5, 4, seed=1)
        for _ in range(50):
            h_prev = rng.uniform(-2, 2, 5)
            w = rng.uniform(-2, 2, 4)
            h, _ = gru_step(enc.fwd, h_prev, w)
            assert np.all(np.abs(h) < 1.0 + np.abs(h_prev).max())

    def test_shape_error(self):
        params = _zero_cell(4, 3)
        with pytest.raises(ShapeError):
            gru_step(params, np.zeros(4), np.zeros(5))


class TestBigru:
    def test_length_one(self):
        enc = _random_encoder(3, 2, seed=2)
        w = np.array([[0.3, -0.4]])
        states, _ = bigru_encode(enc.fwd, enc.bwd, w)
        hf, _ = gru_step(enc.fwd, np.zeros(3), w[0])
        hb, _ = gru_step(enc.bwd, np.zeros(3), w[0])
        npt.assert_array_equal(states[0, :3], hf)
        npt.assert_array_equal(states[0, 3:], hb)

    def test_palindrome_with_shared_params(self):
        # same cell both ways on a palindromic input makes the chains mirror
        enc = _random_encoder(4, 3, seed=3)
        rng = np.random.default_rng(5)
        a, b, c = rng.uniform(-1, 1, (3, 3))
        words = np.stack([a, b, c, b, a])
        states, _ = bigru_encode(enc.fwd, enc.fwd, words)
        n = words.shape[0]
        for i in range(n):
            npt.assert_array_equal(states[i, :4], states[n - 1 - i, 4:])

    def test_zero_params_zero_states(self):
        fwd = _zero_cell(3, 2)
        bwd = _zero_cell(3, 2)
        states, _ = bigru_encode(fwd, bwd, np.ones((4, 2)))
        npt.assert_array_equal(states, np.zeros((4, 6)))

    def test_empty_sequence(self):
        enc = _random_encoder(3, 2, seed=4)
        with pytest.raises(DataError):
            bigru_encode(enc.fwd, enc.bwd, np.zeros((0, 2)))


class TestAttend:
    def test_single_token(self):
        enc = _random_encoder(3, 2, seed=5)
        states = np.arange(6.0).reshape(1, 6)
        emb, _ = attend(enc.att, states)
        npt.assert_allclose(emb.weights, [1.0])
        npt.assert_allclose(emb.u, states[0])

    def test_identical_states_split_evenly(self):
        enc = _random_encoder(3, 2, seed=6)
        row = np.linspace(-1, 1, 6)
        emb, _ = attend(enc.att, np.stack([row, row]))
        npt.assert_allclose(emb.weights, [0.5, 0.5], atol=1e-12)
        npt.assert_allclose(emb.u, row, atol=1e-12)

    def test_zero_scorer_gives_uniform(self):
        enc = _random_encoder(3, 2, seed=7)
        enc.att.r[:] = 0.0
        states = np.random.default_rng(8).uniform(-1, 1, (5, 6))
        emb, _ = attend(enc.att, states)
        npt.assert_allclose(emb.weights, np.full(5, 0.2), atol=1e-12)
        npt.assert_allclose(emb.u, states.mean(axis=0), atol=1e-12)

    def test_weights_form_simplex(self):
        rng = np.random.default_rng(9)
        for seed in range(10):
            enc = _random_encoder(4, 3, seed=seed)
            states = rng.uniform(-3, 3, (rng.integers(1, 8), 8))
            emb, _ = attend(enc.att, states)
            assert np.all(emb.weights >= 0)
            assert abs(emb.weights.sum() - 1.0) < 1e-6
            npt.assert_allclose(emb.u, emb.weights @ states, atol=1e-6)

    def test_pooled_vector_in_coordinate_hull(self):
        rng = np.random.default_rng(10)
        enc = _random_encoder(4, 3, seed=11)
        for _ in range(20):
            states = rng.uniform(-5, 5, (6, 8))
            emb, _ = attend(enc.att, states)
            assert np.max(np.abs(emb.u)) <= np.max(np.abs(states)) + 1e-12


class TestEncodeProperties:
    def test_order_sensitivity_exists(self):
        enc = _random_encoder(6, 4, seed=12)
        rng = np.random.default_rng(13)
        words = rng.uniform(-1, 1, (5, 4))
        emb_a, _ = enc.encode(words)
        swapped = words.copy()
        swapped[[0, 4]] = swapped[[4, 0]]
        emb_b, _ = enc.encode(swapped)
        assert np.linalg.norm(emb_a.u - emb_b.u) > 1e-3


class TestEncoderBackward:
    def test_zero_cotangent_gives_zero_gradients(self):
        enc = _random_encoder(4, 3, seed=14)
        words = np.random.default_rng(15).uniform(-1, 1, (3, 3))
        _, tape = enc.encode(words)
        grads, dwords = encoder_backward(enc, tape, np.zeros(8))
        npt.assert_array_equal(dwords, np.zeros((3, 3)))
        for name in grads.names():
            npt.assert_array_equal(grads[name], np.zeros_like(grads[name]))

    def test_matches_central_finite_differences(self):
        # scalar functional L = c . u probed at H=4, D=3, 3 tokens
        enc = _random_encoder(4, 3, seed=16)
        rng = np.random.default_rng(17)
        words = rng.uniform(-1, 1, (3, 3))
        c = rng.uniform(-1, 1, 8)

        def value() -> float:
            emb, _ = enc.encode(words)
            return float(c @ emb.u)

        _, tape = enc.encode(words)
        grads, dwords = encoder_backward(enc, tape, c)

        step = 1e-5
        checked = 0
        arrays = dict(enc.named())
        arrays["words"] = words
        for name, param in arrays.items():
            analytic = dwords if name == "words" else grads[name]
            flat = param.reshape(-1)
            for i in range(flat.shape[0]):
                orig = flat[i]
                flat[i] = orig + step
                up = value()
                flat[i] = orig - step
                down = value()
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                a = analytic.reshape(-1)[i]
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-5)
                assert err < 1e-4, f"{name}[{i}]: analytic {a} vs fd {numeric}"
                checked += 1
        assert checked > 100

    def test_attended_token_dominates_word_gradient(self):
        # construct a peaked instance: weak recurrence keeps states local,
        # then a sharpened scorer pushes nearly all attention onto one token
        enc = _random_encoder(4, 3, seed=18)
        for cell in (enc.fwd, enc.bwd):
            cell.uz *= 0.05
            cell.ur *= 0.05
            cell.uh *= 0.05
        words = np.random.default_rng(19).uniform(-1, 1, (4, 3))
        emb, _ = enc.encode(words)
        peaked = int(np.argmax(emb.weights))
        enc.att.r *= 50.0
        emb, tape = enc.encode(words)
        assert emb.weights[peaked] > 0.95
        _, dwords = encoder_backward(enc, tape, np.ones(8))
        norms = np.linalg.norm(dwords, axis=1)
        assert int(np.argmax(norms)) == peaked

    def test_stale_tape_rejected(self):
        enc = _random_encoder(4, 3, seed=20)
        _, tape = enc.encode(np.random.default_rng(21).uniform(-1, 1, (3, 3)))
        with pytest.raises(ShapeError):
            encoder_backward(enc, tape, np.zeros(5))


def test_init_is_deterministic():
    a = _random_encoder(4, 3, seed=22)
    b = _random_encoder(4, 3, seed=22)
    for (na, pa), (nb, pb) in zip(a.named(), b.named()):
        assert na == nb
        assert pa.tobytes() == pb.tobytes()
