"""Zero-phase operators ``Gf^T Gf`` and signal padding.

``Gf`` is the lower-triangular Toeplitz matrix of a causal impulse response.
Applying ``Gf^T Gf`` is forward filtering followed by filtering the
time-reversed result with zero initial states, so the operator can be applied
either as a dense matrix product or with a state recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import toeplitz

from .errors import LengthMismatch, ParameterError, TooShort
from .statespace import StateSpaceModel, impulse_response

#: matrices are cached eagerly up to this length
MATRIX_CACHE_LIMIT = 4096
_BLOCK = 256


def build_impulse_matrix(ss: StateSpaceModel, N: int) -> np.ndarray:
    """N x N lower-triangular Toeplitz matrix of the impulse response of ``ss``."""
    if N < 1:
        raise ParameterError("N must be >= 1")
    h = impulse_response(ss, N)
    return toeplitz(h, np.zeros(N))


class _BlockRecursion:
    """Causal filtering by the state recursion, processed ``b`` samples at a time.

    Within a block the output is ``T u_blk + O x``, and the state advances as
    ``x <- A^b x + R u_blk``; all four block matrices come from the impulse
    response and powers of ``A``.
    """

    def __init__(self, ss: StateSpaceModel, block: int = _BLOCK):
        self.ss = ss
        self.b = block
        M = ss.order
        h = impulse_response(ss, block)
        self.T = toeplitz(h, np.zeros(block))
        if M:
            # O[k] = C A^k ; R[:, j] = A^(b-1-j) B
            O = np.empty((block, M))
            R = np.empty((M, block))
            row = ss.C.copy()
            col = ss.B.copy()
            for k in range(block):
                O[k] = row
                R[:, block - 1 - k] = col
                row = row @ ss.A
                col = ss.A @ col
            self.O, self.R = O, R
            self.Ab = np.linalg.matrix_power(ss.A, block)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Filter along the first axis; extra trailing axes are independent channels."""
        u = np.asarray(u, dtype=float)
        shape = u.shape
        N = shape[0]
        u = u.reshape(N, -1)
        b = self.b
        nblk = -(-N // b)
        pad = nblk * b - N
        U = np.concatenate([u, np.zeros((pad, u.shape[1]))]) if pad else u
        U = U.reshape(nblk, b, -1)
        Y = self.T @ U
        if self.ss.order:
            x = np.zeros((self.ss.order, u.shape[1]))
            for k in range(nblk):
                Y[k] += self.O @ x
                x = self.Ab @ x + self.R @ U[k]
        return Y.reshape(nblk * b, -1)[:N].reshape(shape)


@dataclass(frozen=True)
class PaddingPolicy:
    """Polynomial extrapolation of ``P`` samples at each end."""

    P: int = 0
    degree: int = 1

    def __post_init__(self):
        if self.P < 0:
            raise ParameterError("pad length P must be >= 0")
        if self.degree not in (0, 1, 2, 3):
            raise ParameterError("padding degree must be one of 0, 1, 2, 3")

    @classmethod
    def from_fs(cls, fs: float, degree: int = 1) -> "PaddingPolicy":
        return cls(pad_length(fs), degree)


def pad_length(fs: float) -> int:
    """One-fifth of the sampling rate, rounded up."""
    if not fs > 0:
        raise ParameterError(f"sampling rate must be positive, got {fs!r}")
    return int(math.ceil(fs / 5.0 - 1e-12))


def _extrapolate(seg: np.ndarray, degree: int, P: int) -> np.ndarray:
    # fit on 0..len-1, evaluate on -P..-1
    x = np.arange(seg.size, dtype=float)
    coef = np.polynomial.polynomial.polyfit(x, seg, degree)
    return np.polynomial.polynomial.polyval(np.arange(-P, 0, dtype=float), coef)


def pad_signal(u, fs: Optional[float] = None, degree: int = 1, *,
               P: Optional[int] = None) -> Tuple[np.ndarray, int]:
    """Extend ``u`` at both ends by least-squares polynomial extrapolation.

    Parameters
    ----------
    u : array_like
        Signal to extend.
    fs : float, optional
        Sampling rate; ``P = ceil(fs/5)`` unless ``P`` is given.
    degree : int
        Degree of the fit over the first/last ``P`` samples.

    Returns
    -------
    padded : ndarray
        Length ``N + 2P``.
    P : int
    """
    u = np.asarray(u, dtype=float)
    if P is None:
        if fs is None:
            raise ParameterError("pad_signal needs fs or P")
        P = pad_length(fs)
    PaddingPolicy(P, degree)
    if P == 0:
        return u.copy(), 0
    if u.size < max(degree + 1, P):
        raise TooShort(f"signal of length {u.size} is too short to pad by {P} "
                       f"with a degree-{degree} fit")
    left = _extrapolate(u[:P], degree, P)
    right = _extrapolate(u[-P:][::-1], degree, P)[::-1]
    return np.concatenate([left, u, right]), P


def unpad_signal(y, P: int) -> np.ndarray:
    y = np.asarray(y)
    if P < 0 or y.shape[0] < 2 * P + 1:
        raise LengthMismatch(f"cannot strip {P} samples from each end of length {y.shape[0]}")
    return y[P: y.shape[0] - P] if P else y


@dataclass(frozen=True, eq=False)
class ZeroPhaseOperator:
    """``Gf^T Gf`` for a fixed length ``N``.

    Built from a ``CompositeFilter`` (anything with an ``ss`` attribute) or a
    bare ``StateSpaceModel``.  The dense ``Gf`` is cached when
    ``N <= MATRIX_CACHE_LIMIT`` or when ``cache_matrix=True``.
    """

    filter: object
    N: int
    pad: PaddingPolicy = field(default_factory=PaddingPolicy)
    cache_matrix: Optional[bool] = None
    Gf: Optional[np.ndarray] = field(init=False, default=None)

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError("N must be >= 1")
        ss = self.ss
        want = self.cache_matrix if self.cache_matrix is not None else self.N <= MATRIX_CACHE_LIMIT
        if want:
            Gf = build_impulse_matrix(ss, self.N)
            Gf.setflags(write=False)
            object.__setattr__(self, "Gf", Gf)
        object.__setattr__(self, "_rec", _BlockRecursion(ss, min(_BLOCK, self.N)))

    @property
    def ss(self) -> StateSpaceModel:
        return self.filter if isinstance(self.filter, StateSpaceModel) else self.filter.ss

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.N:
            raise LengthMismatch(f"expected length {self.N}, got {u.shape[0]}")
        return u

    def forward(self, u, path: str = "auto") -> np.ndarray:
        """Causal filtering, ``Gf u``."""
        u = self._check(u)
        if path == "matrix" or (path == "auto" and self.Gf is not None and u.ndim > 1):
            return self.matrix_forward() @ u
        return self._rec(u)

    def adjoint(self, v, path: str = "auto") -> np.ndarray:
        """``Gf^T v``: the same filter run on the time-reversed signal."""
        v = self._check(v)
        if path == "matrix":
            return self.matrix_forward().T @ v
        return self.forward(v[::-1], path)[::-1]

    def apply(self, u, path: str = "auto") -> np.ndarray:
        """``Gf^T Gf u`` with zero initial states in both directions.

        ``path`` is ``"matrix"``, ``"recursion"`` or ``"auto"`` (recursion).
        """
        if path not in ("auto", "matrix", "recursion"):
            raise ParameterError(f"unknown path {path!r}")
        u = self._check(u)
        if path == "matrix":
            G = self.matrix_forward()
            return G.T @ (G @ u)
        return self.adjoint(self._rec(u), "recursion")

    __call__ = apply

    def matrix_forward(self) -> np.ndarray:
        if self.Gf is not None:
            return self.Gf
        return build_impulse_matrix(self.ss, self.N)

    def matrix(self) -> np.ndarray:
        """Dense ``Gf^T Gf``."""
        G = self.matrix_forward()
        return G.T @ G


def apply_zero_phase(op: ZeroPhaseOperator, u, path: str = "auto") -> np.ndarray:
    return op.apply(u, path)


def zero_phase_filter(filt, u, fs: Optional[float] = None, degree: int = 1) -> np.ndarray:
    """Pad, apply ``Gf^T Gf`` and strip the padding."""
    u = np.asarray(u, dtype=float)
    if fs is None:
        x, P = u, 0
    else:
        x, P = pad_signal(u, fs, degree)
    op = ZeroPhaseOperator(filt, x.size, cache_matrix=False)
    return unpad_signal(op.apply(x), P)
