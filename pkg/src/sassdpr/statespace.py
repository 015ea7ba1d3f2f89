"""Single-input single-output discrete-time state-space models.

Transfer function to controllable canonical realization, impulse responses,
Lyapunov Gramians, similarity transforms and internal balancing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegreeError,
    NotPositiveDefinite,
    SingularLyapunov,
    SingularTransform,
    UnstableFilter,
)

#: poles must satisfy ``|p| < 1 - STABILITY_MARGIN``
STABILITY_MARGIN = 1e-9
#: largest acceptable condition number of ``I - kron(A, A)``
LYAPUNOV_COND_LIMIT = 1e12


def _trim_trailing_zeros(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return c[:1]
    return c[: nz[-1] + 1]


@dataclass(frozen=True)
class TransferFunction:
    """Rational filter ``B(z)/A(z)`` with coefficients in powers of ``z^-1``.

    ``den`` is normalized so that ``den[0] == 1``.
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float)).copy()
        den = np.atleast_1d(np.asarray(self.den, dtype=float)).copy()
        if den.size == 0 or den[0] == 0.0:
            raise DegreeError("leading denominator coefficient must be nonzero")
        num /= den[0]
        den /= den[0]
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def poles(self) -> np.ndarray:
        d = _trim_trailing_zeros(self.den)
        if d.size <= 1:
            return np.zeros(0, dtype=complex)
        return np.roots(d)

    @property
    def zeros(self) -> np.ndarray:
        n = _trim_trailing_zeros(self.num)
        if n.size <= 1:
            return np.zeros(0, dtype=complex)
        return np.roots(n)

    def is_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        p = self.poles
        return bool(np.all(np.abs(p) < 1.0 - margin)) if p.size else True

    def frequency_response(self, omegas) -> np.ndarray:
        """Evaluate ``B(e^{jw}) / A(e^{jw})`` on a grid of radian frequencies."""
        w = np.atleast_1d(np.asarray(omegas, dtype=float))
        zinv = np.exp(-1j * w)
        # polyval wants the highest power first; coefficients are in z^-1
        b = np.polyval(self.num[::-1], zinv)
        a = np.polyval(self.den[::-1], zinv)
        return b / a

    def impulse_response(self, n: int) -> np.ndarray:
        """Long-division impulse response of length ``n``."""
        h = np.zeros(n)
        b, a = self.num, self.den
        for k in range(n):
            acc = b[k] if k < b.size else 0.0
            for i in range(1, min(k, a.size - 1) + 1):
                acc -= a[i] * h[k - i]
            h[k] = acc
        return h


@dataclass(frozen=True)
class GramianPair:
    Wr: np.ndarray
    Wo: np.ndarray

    def hankel_singular_values(self) -> np.ndarray:
        ev = np.linalg.eigvals(self.Wr @ self.Wo)
        return np.sqrt(np.sort(np.abs(ev.real))[::-1])


@dataclass(frozen=True)
class StateSpaceModel:
    """Realization ``(A, B, C, D)`` with ``B`` of shape (M,) and ``C`` of shape (M,).

    Column/row vectors are stored flat; :attr:`Bcol` and :attr:`Crow` give
    the 2-D views when matrix products need them.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    gramians: Optional[GramianPair] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        A = np.zeros((0, 0)) if A.size == 0 else np.atleast_2d(A).copy()
        M = A.shape[0]
        if A.shape != (M, M):
            raise ValueError(f"A must be square, got shape {A.shape}")
        B = np.asarray(self.B, dtype=float).reshape(M).copy()
        C = np.asarray(self.C, dtype=float).reshape(M).copy()
        for arr in (A, B, C):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(self.D))

    @property
    def order(self) -> int:
        return self.A.shape[0]

    M = order

    @property
    def Bcol(self) -> np.ndarray:
        return self.B.reshape(-1, 1)

    @property
    def Crow(self) -> np.ndarray:
        return self.C.reshape(1, -1)

    def spectral_radius(self) -> float:
        if self.order == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def frequency_response(self, omegas) -> np.ndarray:
        return frequency_response(self, omegas)

    def impulse_response(self, n: int) -> np.ndarray:
        return impulse_response(self, n)


def tf_to_ss(tf: TransferFunction) -> StateSpaceModel:
    """Controllable canonical realization of ``tf``.

    The order is the declared denominator degree, so trailing zero
    coefficients (poles at the origin) keep their states.  The numerator may
    be shorter than the denominator; a longer one is rejected.
    """
    num = _trim_trailing_zeros(np.asarray(tf.num))
    den = np.asarray(tf.den)
    if num.size > den.size:
        raise DegreeError(
            f"numerator degree {num.size - 1} exceeds denominator degree {den.size - 1}"
        )
    if not tf.is_stable():
        raise UnstableFilter(
            f"pole modulus {np.max(np.abs(tf.poles)):.12g} not below 1 - {STABILITY_MARGIN:g}"
        )
    M = den.size - 1
    b = np.zeros(M + 1)
    b[: num.size] = num
    D = b[0]
    if M == 0:
        return StateSpaceModel(np.zeros((0, 0)), np.zeros(0), np.zeros(0), D)
    A = np.zeros((M, M))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(M - 1)
    B = np.zeros(M)
    B[0] = 1.0
    C = b[1:] - b[0] * den[1:]
    return StateSpaceModel(A, B, C, D)


def ss_to_tf(ss: StateSpaceModel) -> TransferFunction:
    """Transfer function of a realization (characteristic polynomial route)."""
    M = ss.order
    if M == 0:
        return TransferFunction([ss.D], [1.0])
    den = np.real(np.poly(ss.A))
    # num = D*den + C adj(zI - A) B; evaluate via Markov parameters
    h = impulse_response(ss, M + 1)
    num = np.convolve(den, h)[: M + 1]
    return TransferFunction(num, den)


def impulse_response(ss: StateSpaceModel, n: int) -> np.ndarray:
    """``h(0) = D`` and ``h(k) = C A^(k-1) B`` for ``k = 1 .. n-1``."""
    h = np.zeros(n)
    if n == 0:
        return h
    h[0] = ss.D
    x = ss.B.copy()
    for k in range(1, n):
        h[k] = ss.C @ x
        x = ss.A @ x
    return h


def frequency_response(ss: StateSpaceModel, omegas) -> np.ndarray:
    """``D + C (e^{jw} I - A)^{-1} B`` at each radian frequency."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    M = ss.order
    out = np.full(w.shape, ss.D, dtype=complex)
    if M == 0:
        return out
    # batch solve through the eigen/Schur-free route: one solve per frequency
    eye = np.eye(M)
    for i, wi in enumerate(w):
        out[i] += ss.C @ np.linalg.solve(np.exp(1j * wi) * eye - ss.A, ss.B)
    return out


def _discrete_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``W = A W A^T + Q`` by the vectorized Kronecker system."""
    M = A.shape[0]
    K = np.eye(M * M) - np.kron(A, A)
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > LYAPUNOV_COND_LIMIT:
        raise SingularLyapunov(f"Lyapunov system condition number {cond:.3g} too large")
    # row-major vec: vec(A W A^T) = kron(A, A) vec(W)
    W = np.linalg.solve(K, Q.reshape(-1)).reshape(M, M)
    return 0.5 * (W + W.T)


def solve_lyapunov(ss: StateSpaceModel) -> GramianPair:
    """Reachability and observability Gramians of a stable model."""
    if ss.order and ss.spectral_radius() >= 1.0 - STABILITY_MARGIN:
        raise UnstableFilter("spectral radius of A must be below one")
    Wr = _discrete_lyapunov(ss.A, np.outer(ss.B, ss.B))
    Wo = _discrete_lyapunov(ss.A.T, np.outer(ss.C, ss.C))
    return GramianPair(Wr, Wo)


def similarity_transform(ss: StateSpaceModel, T) -> StateSpaceModel:
    """Change of state coordinates ``x = T x_hat``."""
    T = np.asarray(T, dtype=float)
    if ss.order == 0:
        return ss
    if abs(np.linalg.det(T)) <= 1e-12:
        raise SingularTransform("transformation matrix is singular")
    Ti = np.linalg.inv(T)
    return StateSpaceModel(Ti @ ss.A @ T, Ti @ ss.B, ss.C @ T, ss.D)


def _cholesky_spd(W: np.ndarray, name: str) -> np.ndarray:
    if np.min(np.linalg.eigvalsh(W)) <= 0.0:
        raise NotPositiveDefinite(f"{name} Gramian is not positive definite")
    try:
        return np.linalg.cholesky(W)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} Gramian is not positive definite") from exc


def balance_internally(ss: StateSpaceModel) -> Tuple[StateSpaceModel, np.ndarray, np.ndarray]:
    """Internally balanced realization via the contragredient construction.

    With ``Wr = Lr Lr^T``, ``Wo = Lo Lo^T`` and ``Lo^T Lr = U S V^T``, the
    transform ``T = Lr V S^{-1/2}`` makes both Gramians equal to ``diag(S)``.

    Column signs of ``T`` are fixed so that the balanced input vector is
    nonnegative; balancing an already balanced model then returns ``T = I``.

    Returns
    -------
    balanced : StateSpaceModel
        Model with its Gramian pair cached.
    T : ndarray
        The transformation (balanced = T^-1 A T, ...).
    sigma : ndarray
        Hankel singular values, descending.
    """
    M = ss.order
    if M == 0:
        return ss, np.zeros((0, 0)), np.zeros(0)
    g = ss.gramians or solve_lyapunov(ss)
    Lr = _cholesky_spd(g.Wr, "reachability")
    Lo = _cholesky_spd(g.Wo, "observability")
    U, s, Vt = np.linalg.svd(Lo.T @ Lr)
    # svd already sorts descending; stable argsort keeps index order on ties
    order = np.argsort(-s, kind="stable")
    s, U, Vt = s[order], U[:, order], Vt[order, :]
    if np.min(s) <= 0.0:
        raise NotPositiveDefinite("model is not minimal (zero Hankel singular value)")
    scale = 1.0 / np.sqrt(s)
    T = (Lr @ Vt.T) * scale
    Ti = (scale[:, None] * U.T) @ Lo.T
    Bh = Ti @ ss.B
    signs = np.where(Bh < 0.0, -1.0, 1.0)
    T = T * signs
    Ti = signs[:, None] * Ti
    A = Ti @ ss.A @ T
    B = Ti @ ss.B
    C = ss.C @ T
    S = np.diag(s)
    bal = StateSpaceModel(A, B, C, ss.D, gramians=GramianPair(S.copy(), S.copy()))
    return bal, T, s


def is_balanced(ss: StateSpaceModel, tol: float = 1e-8) -> bool:
    """True when freshly solved Gramians are equal and diagonal within ``tol``."""
    if ss.order == 0:
        return True
    g = solve_lyapunov(ss)
    off_r = g.Wr - np.diag(np.diag(g.Wr))
    off_o = g.Wo - np.diag(np.diag(g.Wo))
    return bool(
        np.linalg.norm(g.Wr - g.Wo) < tol
        and np.max(np.abs(off_r)) < tol
        and np.max(np.abs(off_o)) < tol
    )


def lyapunov_residuals(ss: StateSpaceModel, g: GramianPair) -> Tuple[float, float]:
    """Relative Frobenius residuals of both Lyapunov equations."""
    rr = g.Wr - ss.A @ g.Wr @ ss.A.T - np.outer(ss.B, ss.B)
    ro = g.Wo - ss.A.T @ g.Wo @ ss.A - np.outer(ss.C, ss.C)
    return (
        float(np.linalg.norm(rr) / np.linalg.norm(g.Wr)),
        float(np.linalg.norm(ro) / np.linalg.norm(g.Wo)),
    )


def from_matrices(A: Sequence, B: Sequence, C: Sequence, D: float) -> StateSpaceModel:
    return StateSpaceModel(np.atleast_2d(np.asarray(A, dtype=float)), B, C, D)
