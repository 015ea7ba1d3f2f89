"""Proximal building blocks and the three sparsity-assisted signal models.

* ``sasd``: low-pass signal plus a sparse-derivative signal, an l1 least
  squares problem in the derivative ``v`` solved by FISTA.
* ``sapr``: band-limited wavelet pattern with sparse coefficients and a
  sparse-derivative reconstruction, solved by ADMM.
* ``sasdpr``: low-pass + oscillatory STFT component + sparse/sparse-derivative
  component, solved by ADMM.

The high-pass zero-phase operator inside the ADMM models is ``I - L^T L`` of
the matching low-pass, see ``ComplementaryHighPass``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from . import _kernels as _k
from .dictionaries import StftDictionary, WdwtDictionary
from .errors import LengthMismatch, NoConvergence, ParameterError
from .factorization import FactorizedFilter, _power_iteration
from .zerophase import ZeroPhaseOperator, pad_signal, unpad_signal

log = logging.getLogger(__name__)

#: ADMM stopping rule defaults
ADMM_EPS = 1e-5
ADMM_KMAX = 200
#: tolerance of the optimality certificate
KKT_TOL = 1e-3


def soft_threshold(x, T):
    """Soft thresholding; complex entries shrink in magnitude and keep their phase."""
    if np.any(np.asarray(T) < 0):
        raise ParameterError("threshold must be >= 0")
    x = np.asarray(x)
    if np.iscomplexobj(x):
        mag = np.abs(x)
        scale = np.maximum(mag - T, 0.0) / np.where(mag > 0, mag, 1.0)
        return x * scale
    return np.sign(x) * np.maximum(np.abs(x) - T, 0.0)


def tvd(y, lam: float) -> np.ndarray:
    """Exact minimizer of ``0.5 ||x - y||^2 + lam ||D x||_1`` (first differences)."""
    if lam < 0:
        raise ParameterError("lam must be >= 0")
    y = np.ascontiguousarray(y, dtype=float)
    out = np.empty_like(y)
    if y.size:
        _k.tv1d(y, float(lam), out)
    return out


def fused_lasso(y, lam_tv: float, lam_l1: float) -> np.ndarray:
    """Prox of ``lam_tv ||D x||_1 + lam_l1 ||x||_1``: TV denoising then shrinkage."""
    return soft_threshold(tvd(y, lam_tv), lam_l1)


# --------------------------------------------------------------------- FISTA


@dataclass
class FistaResult:
    v: np.ndarray
    iterations: int
    costs: np.ndarray
    converged: bool
    L: float


def fista_l1(A_apply: Callable, At_apply: Callable, b, lam: float, eps: float = 1e-10,
             kmax: int = 20000, *, L: Optional[float] = None, x0=None,
             raise_on_failure: bool = True) -> FistaResult:
    """Minimize ``0.5 ||b - A v||^2 + lam ||v||_1`` by monotone FISTA.

    A candidate is accepted only if it does not raise the cost, so the cost
    trace is non-increasing.  Iteration stops once an accepted step changes
    the cost by less than ``eps`` relative.

    Parameters
    ----------
    A_apply, At_apply : callable
        Products with ``A`` and ``A^T``.
    L : float, optional
        Lipschitz constant of the gradient; estimated by power iteration on
        ``A^T A`` if omitted.

    Raises
    ------
    NoConvergence
        After ``kmax`` iterations, with the best iterate attached.
    """
    if lam < 0:
        raise ParameterError("lam must be >= 0")
    b = np.asarray(b, dtype=float)
    Atb = At_apply(b)
    n = Atb.size
    if L is None:
        L = _power_iteration(lambda v: At_apply(A_apply(v)), n, iters=100, tol=1e-8)
    if L <= 0:
        # A = 0: the minimizer is v = 0
        res = FistaResult(np.zeros(n), 0, np.array([0.5 * b @ b]), True, 0.0)
        return res

    def cost(v, r):
        return 0.5 * float(r @ r) + lam * float(np.abs(v).sum())

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    rx = b - A_apply(x)
    cx = cost(x, rx)
    z = x.copy()
    t = 1.0
    costs = [cx]
    converged = False
    k = 0
    for k in range(1, kmax + 1):
        if k == 1:
            y = x
        else:
            # MFISTA extrapolation from the accepted point and the last candidate
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
            t = t_next
        ry = b - A_apply(y)
        z = soft_threshold(y + At_apply(ry) / L, lam / L)
        rz = b - A_apply(z)
        cz = cost(z, rz)
        x_prev = x
        if cz <= cx:
            change = (cx - cz) / max(cz, np.finfo(float).tiny)
            x, cx = z, cz
            costs.append(cx)
            if change < eps and k > 1:
                converged = True
                break
        else:
            costs.append(cx)
    res = FistaResult(x, k, np.array(costs), converged, L)
    if not converged and raise_on_failure:
        raise NoConvergence(f"FISTA did not converge in {kmax} iterations (cost {cx:.6g})", result=res)
    return res


# ---------------------------------------------------------------------- SASD


def integrate(v, K: int) -> np.ndarray:
    """Inverse of the ``K``-th difference with zero initial values (``D^K x = v``)."""
    x = np.asarray(v, dtype=float)
    for _ in range(K):
        x = np.concatenate([[0.0], np.cumsum(x)])
    return x


@dataclass(frozen=True, eq=False)
class SasdProblem:
    """Data of ``0.5 ||b - A v||^2 + lam ||v||_1`` with ``A = H^T H1``, ``b = H^T H y``."""

    A: np.ndarray
    b: np.ndarray
    lam: float

    def cost(self, v) -> float:
        r = self.b - self.A @ v
        return 0.5 * float(r @ r) + self.lam * float(np.abs(v).sum())


@dataclass(frozen=True)
class OptimalityCertificate:
    max_inactive_ratio: float
    max_active_deviation: float
    inactive_violations: int
    sign_violations: int
    tol: float = KKT_TOL

    @property
    def violations(self) -> int:
        return self.inactive_violations + self.sign_violations

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass(eq=False)
class SasdResult:
    x: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    v: np.ndarray
    iterations: int
    final_cost: float
    converged: bool
    problem: SasdProblem = field(repr=False)
    certificate: Optional[OptimalityCertificate] = None


def sasd_problem(y_padded, hpf_factor: FactorizedFilter, lam: float) -> SasdProblem:
    H = hpf_factor.Gf
    A = hpf_factor.H1()
    b = H.T @ (H @ y_padded)
    return SasdProblem(A, b, float(lam))


def check_sasd_optimality(result, problem: Optional[SasdProblem] = None,
                          tol: float = KKT_TOL) -> OptimalityCertificate:
    """Evaluate the l1 optimality conditions at ``result.v``.

    With ``r = A^T (b - A v) / lam``: ``|r_j| <= 1`` where ``v_j = 0`` and
    ``r_j = sign(v_j)`` elsewhere, both up to ``tol``.
    """
    p = problem if problem is not None else result.problem
    v = result.v
    r = p.A.T @ (p.b - p.A @ v) / p.lam
    inactive = v == 0
    ri = np.abs(r[inactive])
    dev = np.abs(r[~inactive] - np.sign(v[~inactive]))
    return OptimalityCertificate(
        max_inactive_ratio=float(ri.max()) if ri.size else 0.0,
        max_active_deviation=float(dev.max()) if dev.size else 0.0,
        inactive_violations=int(np.count_nonzero(ri > 1.0 + tol)),
        sign_violations=int(np.count_nonzero(dev > tol)),
        tol=tol,
    )


def _pad_to(y: np.ndarray, op: ZeroPhaseOperator):
    """Pad ``y`` to the operator length using the operator's padding policy."""
    if y.size == op.N:
        return y, 0
    P = op.pad.P
    if y.size + 2 * P != op.N:
        raise LengthMismatch(f"signal length {y.size} does not match operator length {op.N} "
                             f"with padding {P}")
    return pad_signal(y, P=P, degree=op.pad.degree)


def sasd(y, lpf: ZeroPhaseOperator, hpf_factor: FactorizedFilter, lam: float, K: int = 1,
         eps: float = 1e-10, kmax: int = 20000, *, raise_on_failure: bool = True) -> SasdResult:
    """Sparsity-assisted denoising ``y ~ x1 + x2`` with ``D^K x2`` sparse.

    ``lpf`` and ``hpf_factor`` must come from the same prototype and cutoff.
    ``y`` is either already at the operator length or is padded here with the
    operator's padding policy; outputs are returned at the length of ``y``.
    """
    y = np.asarray(y, dtype=float)
    if hpf_factor.K != K:
        raise ParameterError(f"factor was fitted for K={hpf_factor.K}, not K={K}")
    if hpf_factor.N != lpf.N:
        raise LengthMismatch("low-pass operator and high-pass factor lengths differ")
    yp, P = _pad_to(y, lpf)
    prob = sasd_problem(yp, hpf_factor, lam)
    A = prob.A
    try:
        fr = fista_l1(lambda v: A @ v, lambda r: A.T @ r, prob.b, lam, eps, kmax,
                      raise_on_failure=raise_on_failure)
    except NoConvergence as exc:
        exc.result = _sasd_assemble(yp, P, lpf, K, prob, exc.result)
        raise
    return _sasd_assemble(yp, P, lpf, K, prob, fr)


def _sasd_assemble(yp, P, lpf, K, prob, fr: FistaResult) -> SasdResult:
    v = fr.v
    x2 = integrate(v, K)
    x1 = lpf.apply(yp - x2)
    res = SasdResult(x=unpad_signal(x1 + x2, P), x1=unpad_signal(x1, P), x2=unpad_signal(x2, P),
                     v=v, iterations=fr.iterations, final_cost=float(fr.costs[-1]),
                     converged=fr.converged, problem=prob)
    res.certificate = check_sasd_optimality(res, prob)
    return res


# ---------------------------------------------------------------------- ADMM


@dataclass(frozen=True, eq=False)
class ComplementaryHighPass:
    """Zero-phase high-pass ``I - L^T L`` built from a low-pass operator."""

    lowpass: ZeroPhaseOperator

    @property
    def N(self) -> int:
        return self.lowpass.N

    @property
    def pad(self):
        return self.lowpass.pad

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        return u - self.lowpass.apply(u)

    __call__ = apply

    def matrix(self) -> np.ndarray:
        return np.eye(self.N) - self.lowpass.apply(np.eye(self.N))


def _dense(op) -> np.ndarray:
    return op.apply(np.eye(op.N))


class AdmmSystem:
    """Cholesky factor of ``mu I + (B^T B)^2 [+ (H^T H)^2]``, reusable across epochs."""

    def __init__(self, bpf, mu: float, hpf=None):
        if not mu > 0:
            raise ParameterError(f"mu must be positive, got {mu!r}")
        self.N = bpf.N
        self.mu = float(mu)
        Bm = _dense(bpf)
        S = bpf.apply(Bm)
        if hpf is not None:
            Hm = _dense(hpf)
            S += hpf.apply(Hm)
            del Hm
        del Bm
        # the squares are symmetric up to rounding
        S = 0.5 * (S + S.T)
        S[np.diag_indices_from(S)] += self.mu
        self._cho = linalg.cho_factor(S, lower=True, overwrite_a=True, check_finite=False)

    def solve(self, g) -> np.ndarray:
        return linalg.cho_solve(self._cho, g, check_finite=False)


@dataclass(eq=False)
class SaprResult:
    k: np.ndarray
    pattern: np.ndarray
    iterations: int
    costs: np.ndarray
    converged: bool


@dataclass(eq=False)
class SasdprResult:
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    c: np.ndarray
    iterations: int
    costs: np.ndarray
    converged: bool


def sapr_cost(y_hp, bpf, d: WdwtDictionary, k, lam0: float, lam1: float) -> float:
    s = d.synthesis(k)
    r = y_hp - bpf.apply(s)
    return 0.5 * float(r @ r) + lam0 * float(np.abs(k).sum()) + lam1 * float(np.abs(np.diff(s)).sum())


def sasdpr_cost(y, hpf, bpf, d: StftDictionary, c, x3, lam0, lam1, lam2) -> float:
    r = hpf.apply(y - x3) - bpf.apply(d.synthesis(c))
    return (0.5 * float(r @ r) + lam0 * float(np.abs(c).sum())
            + lam1 * float(np.abs(np.diff(x3)).sum()) + lam2 * float(np.abs(x3).sum()))


def _check_admm(y, ops, d):
    for op in ops:
        if op.N != y.size:
            raise LengthMismatch(f"operator length {op.N} does not match signal length {y.size}")
    if d.N != y.size:
        raise LengthMismatch(f"dictionary length {d.N} does not match signal length {y.size}")


def _stalled(costs, eps) -> bool:
    a, b = costs[-2], costs[-1]
    return abs(a - b) <= eps * max(abs(b), np.finfo(float).tiny)


def _residual(pairs) -> float:
    """Relative primal residual of the splitting constraints ``u = m``."""
    num = sum(float(np.sum(np.abs(u - m) ** 2)) for u, m in pairs)
    den = max(sum(float(np.sum(np.abs(u) ** 2)) for u, _ in pairs),
              sum(float(np.sum(np.abs(m) ** 2)) for _, m in pairs))
    return np.sqrt(num / den) if den > 0 else 0.0


def _admm_done(costs, eps, pairs) -> bool:
    # a flat cost alone also occurs while the iterate sits at zero and the duals grow
    return _stalled(costs, eps) and _residual(pairs) <= np.sqrt(eps)


def sapr(y, hpf, bpf, d: WdwtDictionary, lam0: float, lam1: float, mu: float = 0.5,
         eta: float = 0.1, eps: float = ADMM_EPS, kmax: int = ADMM_KMAX, *,
         system: Optional[AdmmSystem] = None, raise_on_failure: bool = False) -> SaprResult:
    """Sparse wavelet pattern recognition by ADMM.

    Minimizes ``0.5 ||H^T H y - B^T B Psi k||^2 + lam0 ||k||_1 + lam1 ||D Psi k||_1``.
    ``mu`` and ``eta`` are penalty parameters and only change the rate of
    convergence.  ``system`` may carry a prefactored ``mu I + (B^T B)^2``.
    """
    y = np.asarray(y, dtype=float)
    if not (mu > 0 and eta > 0):
        raise ParameterError("mu and eta must be positive")
    _check_admm(y, (hpf, bpf), d)
    if system is None:
        system = AdmmSystem(bpf, mu)
    elif system.mu != mu or system.N != y.size:
        raise ParameterError("prefactored system does not match mu or N")
    Psi, PsiT, BtB = d.synthesis, d.analysis, bpf.apply

    y_hp = hpf.apply(y)
    k = PsiT(BtB(y))
    v = k.copy()
    d1 = np.zeros_like(k)
    d2 = np.zeros_like(k)
    b1 = PsiT(BtB(y_hp)) / mu
    costs = [sapr_cost(y_hp, bpf, d, k, lam0, lam1)]
    converged = False
    it = 0
    for it in range(1, kmax + 1):
        g1 = b1 + k + d1
        u1 = g1 - PsiT(BtB(system.solve(BtB(Psi(g1)))))
        p = (mu * (u1 - d1) + eta * (v - d2)) / (mu + eta)
        k = soft_threshold(p, lam0 / (mu + eta))
        m = d2 + k
        sm = Psi(m)
        v = m + PsiT(tvd(sm, lam1 / eta) - sm)
        d1 = d1 - (u1 - k)
        d2 = d2 - (v - k)
        costs.append(sapr_cost(y_hp, bpf, d, k, lam0, lam1))
        if _admm_done(costs, eps, ((u1, k), (v, k))):
            converged = True
            break
    res = SaprResult(k=k, pattern=BtB(Psi(k)), iterations=it, costs=np.array(costs),
                     converged=converged)
    if not converged and raise_on_failure:
        raise NoConvergence(f"SAPR did not converge in {kmax} iterations", result=res)
    return res


def sasdpr(y, hpf, bpf, d: StftDictionary, lam0: float, lam1: float, lam2: float,
           mu: float = 1.0, eps: float = ADMM_EPS, kmax: int = ADMM_KMAX, *,
           lpf=None, system: Optional[AdmmSystem] = None,
           raise_on_failure: bool = False) -> SasdprResult:
    """Joint denoising and oscillatory pattern recognition by ADMM.

    Minimizes ``0.5 ||H^T H (y - x3) - B^T B Phi c||^2 + lam0 ||c||_1
    + lam1 ||D x3||_1 + lam2 ||x3||_1``.  The low-pass component is
    ``x1 = LPF(y - x2 - x3)``, using ``lpf`` or ``hpf.lowpass`` when available
    and ``I - H^T H`` otherwise.
    """
    y = np.asarray(y, dtype=float)
    if not mu > 0:
        raise ParameterError("mu must be positive")
    _check_admm(y, (hpf, bpf), d)
    if system is None:
        system = AdmmSystem(bpf, mu, hpf)
    elif system.mu != mu or system.N != y.size:
        raise ParameterError("prefactored system does not match mu or N")
    Phi, PhiH, BtB, HtH = d.synthesis, d.analysis, bpf.apply, hpf.apply

    y_hp = HtH(y)
    c = PhiH(BtB(y))
    x3 = y_hp.copy()
    d1 = np.zeros_like(c)
    d2 = np.zeros_like(y)
    b1 = PhiH(BtB(y_hp)) / mu
    b2 = HtH(y_hp) / mu
    costs = [sasdpr_cost(y, hpf, bpf, d, c, x3, lam0, lam1, lam2)]
    converged = False
    it = 0
    for it in range(1, kmax + 1):
        g1 = b1 + c + d1
        g2 = b2 + x3 + d2
        Fg = system.solve(BtB(Phi(g1)) + HtH(g2))
        u1 = g1 - PhiH(BtB(Fg))
        u2 = g2 - HtH(Fg)
        c = soft_threshold(u1 - d1, lam0 / mu)
        x3 = fused_lasso(u2 - d2, lam1 / mu, lam2 / mu)
        d1 = d1 - (u1 - c)
        d2 = d2 - (u2 - x3)
        costs.append(sasdpr_cost(y, hpf, bpf, d, c, x3, lam0, lam1, lam2))
        if _admm_done(costs, eps, ((u1, c), (u2, x3))):
            converged = True
            break
    x2 = BtB(Phi(c))
    lp = lpf if lpf is not None else getattr(hpf, "lowpass", None)
    rest = y - x2 - x3
    x1 = lp.apply(rest) if lp is not None else rest - HtH(rest)
    res = SasdprResult(x1=x1, x2=x2, x3=x3, c=c, iterations=it, costs=np.array(costs),
                       converged=converged)
    if not converged and raise_on_failure:
        raise NoConvergence(f"SASDPR did not converge in {kmax} iterations", result=res)
    return res
