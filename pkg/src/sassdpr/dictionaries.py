"""Windowed tight frames: a wavelet dictionary and a sine-window STFT.

Both operators cut the signal into windows of length ``W`` with hop ``W/4``.
The signal is zero-extended by ``3W/4`` in front and up to a whole hop at the
end, so every sample is covered by exactly four windows.  With that layout

* rectangular windows carrying an orthonormal DWT sum to ``4 I`` and a scale
  of ``1/2`` in each direction makes ``Psi Psi^T = I``;
* squared sine windows at 75% overlap sum to ``2`` and a scale of
  ``1/sqrt(2)`` in each direction makes ``Phi Phi^H = I``.

Coefficient grids are ``W x V`` with one column per window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError, WindowError

#: orthonormal 4-tap Daubechies low-pass, correlation order
DB2 = np.array([1 + math.sqrt(3), 3 + math.sqrt(3), 3 - math.sqrt(3), 1 - math.sqrt(3)]) / (4 * math.sqrt(2))

OVERLAP = 0.75


def _check_window(W) -> int:
    if not isinstance(W, (int, np.integer)) or W < 4 or (W & (W - 1)):
        raise WindowError(f"window length must be a power of 2 and at least 4, got {W!r}")
    return int(W)


def window_count(N: int, W: int) -> int:
    """Number of hop-``W/4`` windows needed so each sample is covered four times."""
    hop = W // 4
    return -(-N // hop) + 3


def _frames(y: np.ndarray, W: int, V: int) -> np.ndarray:
    hop = W // 4
    ext = np.zeros((V + 3) * hop)
    ext[3 * hop: 3 * hop + y.size] = y
    return sliding_window_view(ext, W)[::hop][:V]


def _overlap_add(frames: np.ndarray, N: int) -> np.ndarray:
    # frames r, r+4, r+8, ... tile the extended signal without overlap
    V, W = frames.shape
    hop = W // 4
    ext = np.zeros((V + 3) * hop)
    for r in range(4):
        flat = frames[r::4].ravel()
        ext[r * hop: r * hop + flat.size] += flat
    return ext[3 * hop: 3 * hop + N]


def dwt_periodic(x: np.ndarray, h: np.ndarray = DB2) -> np.ndarray:
    """Full-depth periodic orthonormal DWT along the last axis.

    Output layout is ``[a_J, d_J, d_{J-1}, ..., d_1]`` with ``J = log2(len)``.
    """
    x = np.asarray(x, dtype=float)
    L = x.shape[-1]
    g = h[::-1] * (-1.0) ** np.arange(h.size)
    out = np.empty_like(x)
    a = x
    while L > 1:
        idx = (np.arange(0, L, 2)[:, None] + np.arange(h.size)[None, :]) % L
        seg = a[..., idx]
        out[..., L // 2: L] = seg @ g
        a = seg @ h
        L //= 2
    out[..., :1] = a
    return out


def _dwt_matrix(W: int) -> np.ndarray:
    # rows are analysis atoms; orthogonal by construction
    return dwt_periodic(np.eye(W)).T


@dataclass(frozen=True, eq=False)
class WdwtDictionary:
    """Windowed DWT frame ``Psi`` for signals of length ``N``.

    ``analysis`` is ``Psi^T`` and ``synthesis`` is ``Psi``.
    """

    N: int
    W: int = 256
    wavelet: np.ndarray = field(default_factory=lambda: DB2.copy())
    _T: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        W = _check_window(self.W)
        if self.N < 1:
            raise ShapeError("signal length must be positive")
        T = _dwt_matrix(W) if np.array_equal(self.wavelet, DB2) else dwt_periodic(np.eye(W), self.wavelet).T
        object.__setattr__(self, "_T", T)

    @property
    def overlap(self) -> float:
        return OVERLAP

    @property
    def levels(self) -> int:
        return int(math.log2(self.W))

    @property
    def V(self) -> int:
        return window_count(self.N, self.W)

    @property
    def shape(self):
        return (self.W, self.V)

    def analysis(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.N,):
            raise ShapeError(f"expected a signal of length {self.N}, got shape {y.shape}")
        # (V, W) frames -> (W, V) coefficients
        return 0.5 * (self._T @ _frames(y, self.W, self.V).T)

    def synthesis(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if k.shape != self.shape:
            raise ShapeError(f"expected a {self.shape} grid, got {k.shape}")
        return 0.5 * _overlap_add((self._T.T @ k).T, self.N)


@dataclass(frozen=True, eq=False)
class StftDictionary:
    """Sine-window STFT frame ``Phi`` with a length-``W`` FFT per window.

    ``analysis`` is ``Phi^H`` (complex grid), ``synthesis`` is ``Phi`` (real
    part of the overlap-added inverse transforms).
    """

    N: int
    W: int = 256

    def __post_init__(self):
        _check_window(self.W)
        if self.N < 1:
            raise ShapeError("signal length must be positive")

    @property
    def overlap(self) -> float:
        return OVERLAP

    @property
    def window(self) -> np.ndarray:
        return np.sin(np.pi * (np.arange(self.W) + 0.5) / self.W)

    @property
    def V(self) -> int:
        return window_count(self.N, self.W)

    @property
    def shape(self):
        return (self.W, self.V)

    def analysis(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.N,):
            raise ShapeError(f"expected a signal of length {self.N}, got shape {y.shape}")
        fr = _frames(y, self.W, self.V) * self.window
        return np.fft.fft(fr, axis=1, norm="ortho").T / math.sqrt(2.0)

    def synthesis(self, c) -> np.ndarray:
        c = np.asarray(c)
        if c.shape != self.shape:
            raise ShapeError(f"expected a {self.shape} grid, got {c.shape}")
        fr = np.fft.ifft(c.T, axis=1, norm="ortho").real * self.window
        return _overlap_add(fr, self.N) / math.sqrt(2.0)


def wdwt_analysis(d: WdwtDictionary, y) -> np.ndarray:
    return d.analysis(y)


def wdwt_synthesis(d: WdwtDictionary, k) -> np.ndarray:
    return d.synthesis(k)


def stft_analysis(d: StftDictionary, y) -> np.ndarray:
    return d.analysis(y)


def stft_synthesis(d: StftDictionary, c) -> np.ndarray:
    return d.synthesis(c)


def next_pow2_window(fs: float) -> int:
    """Smallest power of two that is at least the sampling rate."""
    return 1 << max(2, math.ceil(math.log2(fs)))
