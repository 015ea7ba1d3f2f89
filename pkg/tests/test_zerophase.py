import numpy as np
import pytest
import scipy.signal
from hypothesis import given, strategies as st

from sassdpr.errors import LengthMismatch, ParameterError, TooShort
from sassdpr.spectral import design_filter
from sassdpr.statespace import from_matrices, impulse_response, tf_to_ss, TransferFunction
from sassdpr.zerophase import (
    PaddingPolicy,
    ZeroPhaseOperator,
    apply_zero_phase,
    build_impulse_matrix,
    pad_length,
    pad_signal,
    unpad_signal,
    zero_phase_filter,
)


def test_impulse_matrix_examples():
    ident = tf_to_ss(TransferFunction([1.0], [1.0]))
    np.testing.assert_array_equal(build_impulse_matrix(ident, 3), np.eye(3))
    G = build_impulse_matrix(from_matrices([[0.5]], [1.0], [1.0], 0.0), 3)
    np.testing.assert_allclose(G, [[0, 0, 0], [1, 0, 0], [0.5, 1, 0]])


def test_highpass_matrix_rows_sum_to_zero():
    hp = design_filter("hp", 4, 0.2 * np.pi)
    G = build_impulse_matrix(hp.ss, 100)
    # step response of a filter with zeros at DC dies out after the transient
    assert np.max(np.abs(G.sum(axis=1)[60:])) < 1e-6
    np.testing.assert_allclose(G[:, 0], impulse_response(hp.ss, 100), atol=1e-15)


@pytest.mark.parametrize("kind,M", [("hp", 4), ("lp", 3), ("bp", 2)])
def test_zero_phase_matches_forward_backward_lfilter(kind, M, rng):
    if kind == "bp":
        f = design_filter(kind, M, passband=(0.2 * np.pi, 0.4 * np.pi))
        sos = scipy.signal.butter(M, [0.2, 0.4], "bandpass", output="sos")
    else:
        f = design_filter(kind, M, 0.2 * np.pi)
        sos = scipy.signal.butter(M, 0.2, "high" if kind == "hp" else "low", output="sos")
    u = rng.standard_normal(300)
    fwd = scipy.signal.sosfilt(sos, u)
    want = scipy.signal.sosfilt(sos, fwd[::-1])[::-1]
    op = ZeroPhaseOperator(f, 300)
    np.testing.assert_allclose(op.apply(u), want, atol=1e-10)
    np.testing.assert_allclose(op.forward(u), fwd, atol=1e-10)


@given(kind=st.sampled_from(["lp", "hp", "bp"]), M=st.integers(1, 8),
       wc=st.floats(0.05, 0.8), N=st.integers(2, 400), seed=st.integers(0, 2 ** 31 - 1))
def test_matrix_and_recursion_agree(kind, M, wc, N, seed):
    if kind == "bp":
        f = design_filter(kind, M, center=wc * np.pi, bandwidth=0.1 * np.pi)
    else:
        f = design_filter(kind, M, wc * np.pi)
    u = np.random.default_rng(seed).standard_normal(N)
    op = ZeroPhaseOperator(f, N)
    a = op.apply(u, "matrix")
    b = op.apply(u, "recursion")
    assert np.max(np.abs(a - b)) <= 1e-8 * max(1.0, np.max(np.abs(a)))


@pytest.mark.parametrize("kind", ["lp", "hp"])
def test_centered_impulse_response_is_symmetric(kind):
    N = 501
    op = ZeroPhaseOperator(design_filter(kind, 4, 0.2 * np.pi), N)
    h = np.zeros(N)
    h[N // 2] = 1.0
    r = op.apply(h)
    np.testing.assert_allclose(r, r[::-1], atol=1e-6)
    # the matrix is symmetric by construction
    Z = op.matrix()
    np.testing.assert_allclose(Z, Z.T, atol=1e-14)


def test_lowpass_passes_constants_in_interior():
    op = ZeroPhaseOperator(design_filter("lp", 3, 0.2 * np.pi), 400)
    out = op.apply(np.ones(400))
    np.testing.assert_allclose(out[100:300], 1.0, atol=1e-4)


def test_zero_input_and_shape_checks():
    op = ZeroPhaseOperator(design_filter("hp", 2, 0.3), 50)
    np.testing.assert_array_equal(apply_zero_phase(op, np.zeros(50)), np.zeros(50))
    with pytest.raises(LengthMismatch):
        op.apply(np.zeros(49))
    with pytest.raises(ParameterError):
        op.apply(np.zeros(50), path="fft")
    with pytest.raises(ParameterError):
        ZeroPhaseOperator(design_filter("hp", 2, 0.3), 0)


def test_adjoint_identity(rng):
    op = ZeroPhaseOperator(design_filter("bp", 3, passband=(0.3, 0.9)), 257)
    for _ in range(10):
        u, v = rng.standard_normal((2, 257))
        assert op.forward(u) @ v == pytest.approx(u @ op.adjoint(v), rel=1e-12, abs=1e-12)


def test_pad_length():
    assert pad_length(200) == 40
    assert pad_length(100) == 20
    assert pad_length(101) == 21
    with pytest.raises(ParameterError):
        pad_length(0)


def test_pad_examples():
    y, P = pad_signal(np.full(50, 3.0), fs=100, degree=0)
    assert P == 20 and y.size == 90
    np.testing.assert_allclose(y, 3.0)
    ramp = np.arange(100.0)
    y, P = pad_signal(ramp, fs=100, degree=1)
    np.testing.assert_allclose(y, np.arange(-20.0, 120.0), atol=1e-10)
    np.testing.assert_array_equal(unpad_signal(y, P), ramp)


@given(degree=st.integers(0, 3), coef=st.lists(st.floats(-2, 2), min_size=4, max_size=4),
       N=st.integers(30, 200))
def test_padding_extends_polynomials_exactly(degree, coef, N):
    c = np.array(coef[: degree + 1])
    n = np.arange(-10, N + 10, dtype=float) / N
    full = np.polynomial.polynomial.polyval(n, c)
    y, P = pad_signal(full[10:-10], degree=degree, P=10)
    np.testing.assert_allclose(y, full, atol=1e-8)


def test_pad_round_trip_and_lengths():
    u = np.random.default_rng(0).standard_normal(6000)
    y, P = pad_signal(u, fs=200)
    assert y.size == 6080
    np.testing.assert_array_equal(unpad_signal(y, P), u)
    out = zero_phase_filter(design_filter("hp", 2, 0.01 * np.pi), u, fs=200)
    assert out.size == 6000
    np.testing.assert_array_equal(unpad_signal(u, 0), u)


def test_padding_validation():
    with pytest.raises(ParameterError):
        PaddingPolicy(-1)
    with pytest.raises(ParameterError):
        PaddingPolicy(4, degree=5)
    with pytest.raises(TooShort):
        pad_signal(np.ones(5), fs=200)
    with pytest.raises(ParameterError):
        pad_signal(np.ones(5))
    with pytest.raises(LengthMismatch):
        unpad_signal(np.ones(5), 3)
