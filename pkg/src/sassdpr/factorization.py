"""Sparse-derivative operators and factorization ``Gf ~ G1 D``.

A high-pass or band-pass filter with at least ``K`` zeros at ``z = 1`` can be
written as ``G1(z) (1 - z^-1)^K``.  The matrix version of that identity is
inexact at the boundaries, so ``G1`` is fitted by accelerated projected
gradient descent on ``||Gf^T Gf - Gf^T G1 D||_F^2`` over lower-triangular
``G1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy import signal
from scipy import sparse
from scipy.linalg import toeplitz
from scipy.special import comb

from . import _kernels as _k
from .errors import NoConvergence, NotFactorable, OrderError, ParameterError, ShapeError
from .statespace import TransferFunction, balance_internally, impulse_response, tf_to_ss

log = logging.getLogger(__name__)

DECONV_TOL = 1e-6
_BLOCK_WIDTH = 128


@dataclass(frozen=True, eq=False)
class DifferenceMatrix:
    """(N-K) x N matrix of K-th order forward differences."""

    N: int
    K: int

    @property
    def stencil(self) -> np.ndarray:
        j = np.arange(self.K + 1)
        return ((-1.0) ** (self.K - j)) * comb(self.K, j, exact=False)

    @property
    def shape(self):
        return (self.N - self.K, self.N)

    def sparse(self) -> sparse.csr_matrix:
        st = self.stencil
        return sparse.diags(list(st), list(range(self.K + 1)), shape=self.shape, format="csr")

    def toarray(self) -> np.ndarray:
        return self.sparse().toarray()

    def __matmul__(self, x):
        x = np.asarray(x, dtype=float)
        return np.diff(x, n=self.K, axis=0)

    def rmatvec(self, y) -> np.ndarray:
        """``D^T y``."""
        return self.sparse().T @ np.asarray(y, dtype=float)

    def right_apply(self, X) -> np.ndarray:
        """``X @ D`` for a matrix with ``N - K`` columns."""
        return (self.sparse().T @ np.asarray(X).T).T


def difference_matrix(N: int, K: int) -> DifferenceMatrix:
    if int(K) != K or int(N) != N or not 1 <= K < N:
        raise OrderError(f"need 1 <= K < N, got K={K}, N={N}")
    return DifferenceMatrix(int(N), int(K))


@dataclass(frozen=True, eq=False)
class IntegrationMatrix:
    """N x (N-1) running-sum matrix with ``D S = I`` for first differences."""

    N: int

    def toarray(self) -> np.ndarray:
        return np.tril(np.ones((self.N, self.N - 1)), -1)

    @property
    def S(self) -> np.ndarray:
        return self.toarray()

    def __matmul__(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros((self.N,) + v.shape[1:])
        out[1:] = np.cumsum(v, axis=0)
        return out

    def rmatvec(self, y) -> np.ndarray:
        """``S^T y``: reversed cumulative sums, dropping the first sample."""
        y = np.asarray(y, dtype=float)
        return np.cumsum(y[::-1], axis=0)[::-1][1:]


def integration_matrix(N: int) -> IntegrationMatrix:
    if N < 2:
        raise ParameterError("integration matrix needs N >= 2")
    return IntegrationMatrix(int(N))


def deconvolve_factor(tfG: TransferFunction, K: int) -> TransferFunction:
    """Divide the numerator of ``tfG`` by ``(1 - z^-1)^K``."""
    if K < 1:
        raise OrderError("K must be >= 1")
    dk = np.array([1.0])
    for _ in range(K):
        dk = np.convolve(dk, [1.0, -1.0])
    num = np.asarray(tfG.num, dtype=float)
    if num.size < dk.size:
        raise NotFactorable(f"numerator degree {num.size - 1} is below K={K}")
    q, r = np.polynomial.polynomial.polydiv(num, dk)
    resid = float(np.linalg.norm(r)) / max(1.0, float(np.linalg.norm(num)))
    if resid > DECONV_TOL:
        raise NotFactorable(f"numerator has fewer than {K} zeros at z=1 (remainder {resid:.3g})")
    return TransferFunction(q, tfG.den)


class _ToeplitzOp:
    """Products with a lower-triangular Toeplitz matrix via zero-padded FFTs."""

    def __init__(self, h: np.ndarray):
        self.N = h.size
        self.nfft = sfft.next_fast_len(2 * self.N, real=True)
        self.H = sfft.rfft(h, self.nfft)

    def __matmul__(self, X):
        Xf = sfft.rfft(X, self.nfft, axis=0)
        return sfft.irfft(Xf * self.H[:, None], self.nfft, axis=0)[: self.N]

    def rmatmul_T(self, X):
        """``G^T X``."""
        return (self @ X[::-1])[::-1]


@dataclass(frozen=True, eq=False)
class FactorizedFilter:
    """Learned factor ``G1`` with ``Gf^T G1 D ~ Gf^T Gf``."""

    Gf: np.ndarray
    G1: np.ndarray
    D: DifferenceMatrix
    K: int
    final_error: float
    iterations: int = 0
    converged: bool = True

    @property
    def N(self) -> int:
        return self.Gf.shape[0]

    @property
    def S(self) -> IntegrationMatrix:
        return integration_matrix(self.N)

    def H1(self) -> np.ndarray:
        """``Gf^T G1``, the N x (N-K) operator acting on sparse derivatives."""
        return self.Gf.T @ self.G1

    def objective(self) -> float:
        E = self.Gf.T @ (self.Gf - self.D.right_apply(self.G1))
        return float(np.sum(E * E))

    def filter_norm(self) -> float:
        """``||Gf^T G1 h||`` for an impulse ``h`` at the center of the N-K samples."""
        h = np.zeros(self.N - self.K)
        h[(self.N - self.K) // 2] = 1.0
        return float(np.linalg.norm(self.Gf.T @ (self.G1 @ h)))


def _power_iteration(apply, n: int, iters: int = 30, tol: float = 1e-6, seed: int = 0) -> float:
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = apply(v)
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    # power iteration underestimates; a small margin keeps 1/L a safe step
    return lam * 1.01


def lipschitz_constant(Gf: np.ndarray, D: DifferenceMatrix) -> float:
    """``lambda_max(Gf Gf^T) * lambda_max(D D^T)``."""
    lg = _power_iteration(lambda v: Gf @ (Gf.T @ v), Gf.shape[0])
    Ds = D.sparse()
    ld = _power_iteration(lambda v: Ds @ (Ds.T @ v), D.N - D.K)
    return lg * ld


def _sos_for(ss, h: np.ndarray) -> Optional[np.ndarray]:
    """Second-order sections of ``ss`` if their impulse response reproduces ``h``."""
    if ss is None or ss.order == 0:
        return None
    z, p, k = signal.ss2zpk(ss.A, ss.Bcol, ss.Crow, float(ss.D))
    sos = signal.zpk2sos(z, p, k)
    imp = np.zeros(h.size)
    imp[0] = 1.0
    if np.max(np.abs(signal.sosfilt(sos, imp) - h)) > 1e-10 * max(1.0, np.max(np.abs(h))):
        return None
    return np.ascontiguousarray(sos)


def _numpy_sweep(Gf: np.ndarray, D: DifferenceMatrix):
    """Same contract as ``_kernels.apgd_sweep`` using FFT products."""
    G = _ToeplitzOp(Gf[:, 0].copy())
    Ds = D.sparse()
    DsT = Ds.T.tocsr()

    def sweep(Xc, Xp, Zl, a, b, invL, Zn):
        Y = Xc + a * (Zl - Xc) + b * (Xc - Xp)
        M = G @ G.rmatmul_T((DsT @ Y.T).T - Gf)
        Zn[:] = np.tril(Y - invL * (Ds @ M.T).T)
        E = G.rmatmul_T(Gf - (DsT @ Zn.T).T)
        return float(np.sum(E * E))

    return sweep


def apgd_factorize(Gf, D: DifferenceMatrix, G1_init, eps: float = 1e-6,
                   kmax: int = 20000, raise_on_failure: bool = True,
                   ss=None) -> FactorizedFilter:
    """Fit lower-triangular ``G1`` minimizing ``||Gf^T Gf - Gf^T G1 D||_F^2``.

    Parameters
    ----------
    Gf : (N, N) ndarray
        Lower-triangular Toeplitz impulse matrix of the composite filter.
    D : DifferenceMatrix
    G1_init : (N, N-K) ndarray
        Starting point, normally the Toeplitz matrix of the deconvolved factor.
    eps : float
        Stop when the objective changes by less than ``eps`` between accepted
        iterates.
    kmax : int
        Iteration cap.
    ss : StateSpaceModel, optional
        Realization whose impulse response fills ``Gf``.  When given, products
        with ``Gf`` run as compiled recursions instead of FFTs.

    Returns
    -------
    FactorizedFilter

    Notes
    -----
    Uses the monotone variant of accelerated projected gradient: a candidate
    that raises the objective is not accepted, but still feeds the momentum.
    The projection zeroes the strict upper triangle.  Step size is ``1/L``
    with ``L = lambda_max(Gf Gf^T) lambda_max(D D^T)``.
    """
    Gf = np.asarray(Gf, dtype=float)
    N = Gf.shape[0]
    K = D.K
    if Gf.shape != (N, N) or D.N != N:
        raise ShapeError("Gf must be N x N and D must have N columns")
    G1_init = np.asarray(G1_init, dtype=float)
    if G1_init.shape != (N, N - K):
        raise ShapeError(f"G1_init must be {N} x {N - K}, got {G1_init.shape}")

    h = np.ascontiguousarray(Gf[:, 0])
    sos = _sos_for(ss, h)
    if sos is not None:
        Gam, Om = _k.free_response_maps(sos, N)
        st = D.stencil

        def sweep(Xc, Xp, Zl, a, b, invL, Zn):
            return _k.apgd_sweep(Xc, Xp, Zl, a, b, invL, sos, st, h, Gam, Om, Zn,
                                 _BLOCK_WIDTH)
    else:
        sweep = _numpy_sweep(Gf, D)

    L = lipschitz_constant(Gf, D)
    invL = 1.0 / L
    # buffers for the current, previous and last candidate iterates plus a new one
    Xb = [np.zeros((N, N - K)) for _ in range(4)]
    Xb[0][:] = np.tril(G1_init)
    E0 = Gf.T @ (Gf - D.right_apply(Xb[0]))
    cX = float(np.sum(E0 * E0))
    cur = prev = last = 0
    a = b = 0.0
    t = 1.0
    converged = False
    k = 0
    for k in range(1, kmax + 1):
        new = next(i for i in range(4) if i not in (cur, prev, last))
        cZ = sweep(Xb[cur], Xb[prev], Xb[last], a, b, invL, Xb[new])
        t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        a = t / t_next
        b = (t - 1.0) / t_next
        t = t_next
        if cZ <= cX:
            change = cX - cZ
            prev, cur, last = cur, new, new
            cX = cZ
            if change < eps:
                converged = True
                break
        else:
            prev, last = cur, new
    log.debug("apgd: %d iterations, objective %.6g", k, cX)
    result = FactorizedFilter(Gf, Xb[cur].copy(), D, K, cX, k, converged)
    if not converged and raise_on_failure:
        raise NoConvergence(f"APGD did not converge in {kmax} iterations "
                            f"(objective {cX:.6g})", result=result)
    return result


def toeplitz_factor(tf1: TransferFunction, N: int, K: int) -> np.ndarray:
    """N x (N-K) lower-triangular Toeplitz impulse matrix of ``G1(z)``."""
    ss, _, _ = balance_internally(tf_to_ss(tf1))
    h = impulse_response(ss, N)
    return toeplitz(h, np.zeros(N - K))


def factorize_filter(filt, N: int, K: int, eps: float = 1e-6, kmax: int = 20000,
                     raise_on_failure: bool = True) -> FactorizedFilter:
    """Build ``Gf`` for a composite filter and run the APGD factorization."""
    from .zerophase import build_impulse_matrix

    tf1 = deconvolve_factor(filt.tf, K)
    Gf = build_impulse_matrix(filt.ss, N)
    G1 = toeplitz_factor(tf1, N, K)
    return apgd_factorize(Gf, difference_matrix(N, K), G1, eps=eps, kmax=kmax,
                          raise_on_failure=raise_on_failure, ss=filt.ss)
