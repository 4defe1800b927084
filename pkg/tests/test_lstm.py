import numpy as np
import pytest

import oracles
from pcc import engine


def _rand_lstm(rng, max_h=4, max_d=3):
    h = int(rng.integers(1, max_h + 1))
    d = int(rng.integers(1, max_d + 1))
    p = engine.LstmParams(rng.normal(scale=0.5, size=(4 * h, d)),
                          rng.normal(scale=0.5, size=(4 * h, h)),
                          rng.normal(scale=0.5, size=4 * h))
    return p, h, d


def test_forward_matches_textbook_oracle_100():
    rng = np.random.default_rng(31)
    for _ in range(100):
        p, h, d = _rand_lstm(rng)
        length = int(rng.integers(1, 7))
        seq = rng.normal(size=(1, length, d))
        h_final, cache = engine.lstm_forward(seq, p)
        ref_states = oracles.lstm_ref(seq[0], p.w_x, p.w_h, p.bias)
        assert np.max(np.abs(h_final[0] - ref_states[-1])) < 1e-12
        hidden = cache[6]
        assert np.max(np.abs(hidden[:, 0, :] - ref_states)) < 1e-12


def test_batched_forward_equals_per_sample():
    rng = np.random.default_rng(32)
    p, h, d = _rand_lstm(rng)
    seq = rng.normal(size=(5, 6, d))
    batch_h, _ = engine.lstm_forward(seq, p)
    for bi in range(5):
        one_h, _ = engine.lstm_forward(seq[bi:bi + 1], p)
        assert np.max(np.abs(batch_h[bi] - one_h[0])) < 1e-14


def test_lengths_cut_off_later_frames():
    rng = np.random.default_rng(33)
    p, h, d = _rand_lstm(rng)
    seq = rng.normal(size=(3, 8, d))
    lengths = np.array([3, 8, 5])
    h_final, _ = engine.lstm_forward(seq, p, lengths)
    for bi, n in enumerate(lengths):
        trunc_h, _ = engine.lstm_forward(seq[bi:bi + 1, :n], p)
        assert np.max(np.abs(h_final[bi] - trunc_h[0])) < 1e-14


def test_lengths_make_padding_irrelevant():
    rng = np.random.default_rng(34)
    p, h, d = _rand_lstm(rng)
    seq = rng.normal(size=(2, 6, d))
    lengths = np.array([4, 6])
    h1, _ = engine.lstm_forward(seq, p, lengths)
    junk = seq.copy()
    junk[0, 4:] = 123.0
    h2, _ = engine.lstm_forward(junk, p, lengths)
    assert np.array_equal(h1, h2)


def test_lengths_validation():
    rng = np.random.default_rng(35)
    p, h, d = _rand_lstm(rng)
    seq = rng.normal(size=(2, 4, d))
    with pytest.raises(ValueError):
        engine.lstm_forward(seq, p, np.array([0, 4]))
    with pytest.raises(ValueError):
        engine.lstm_forward(seq, p, np.array([5, 4]))
    with pytest.raises(ValueError):
        engine.lstm_forward(seq, p, np.array([4]))


def test_step_equals_forward_single():
    rng = np.random.default_rng(36)
    p, h, d = _rand_lstm(rng)
    x = rng.normal(size=(2, d))
    h0 = np.zeros((2, h))
    c0 = np.zeros((2, h))
    h1, c1, _ = engine.lstm_step(x, h0, c0, p)
    hf, _ = engine.lstm_forward(x[:, None, :], p)
    assert np.max(np.abs(h1 - hf)) < 1e-15


def test_backward_finite_diff_length5():
    rng = np.random.default_rng(37)
    for _ in range(20):
        p, h, d = _rand_lstm(rng)
        seq = rng.normal(size=(2, 5, d))
        r = rng.normal(size=(2, h))

        def loss():
            h_final, _ = engine.lstm_forward(seq, p)
            return float(np.sum(h_final * r))

        h_final, cache = engine.lstm_forward(seq, p)
        dw_x, dw_h, dbias = engine.lstm_backward(r, cache, p)
        for tensor, grad in ((p.w_x, dw_x), (p.w_h, dw_h), (p.bias, dbias)):
            for i in range(0, tensor.size, max(1, tensor.size // 12)):
                num = oracles.central_diff(loss, tensor, i)
                denom = max(abs(grad.flat[i]), abs(num), 1e-8)
                assert abs(grad.flat[i] - num) / denom < 1e-5


def test_backward_with_lengths_finite_diff():
    rng = np.random.default_rng(38)
    for _ in range(10):
        p, h, d = _rand_lstm(rng)
        seq = rng.normal(size=(3, 6, d))
        lengths = np.array([2, 6, 4])
        r = rng.normal(size=(3, h))

        def loss():
            h_final, _ = engine.lstm_forward(seq, p, lengths)
            return float(np.sum(h_final * r))

        h_final, cache = engine.lstm_forward(seq, p, lengths)
        dw_x, dw_h, dbias = engine.lstm_backward(r, cache, p)
        for tensor, grad in ((p.w_x, dw_x), (p.w_h, dw_h), (p.bias, dbias)):
            for i in range(0, tensor.size, max(1, tensor.size // 12)):
                num = oracles.central_diff(loss, tensor, i)
                denom = max(abs(grad.flat[i]), abs(num), 1e-8)
                assert abs(grad.flat[i] - num) / denom < 1e-5


def test_forward_pure():
    rng = np.random.default_rng(39)
    p, h, d = _rand_lstm(rng)
    seq = rng.normal(size=(2, 5, d))
    h1, _ = engine.lstm_forward(seq, p)
    h2, _ = engine.lstm_forward(seq, p)
    assert np.array_equal(h1, h2)


def test_gate_order_is_documented():
    assert engine.LSTM_GATES == ("input", "forget", "cell", "output")
