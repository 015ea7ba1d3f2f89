"""Prototype low-pass design and all-pass spectral transformation.

A Butterworth prototype ``H(z)`` is mapped onto a low-, high- or band-pass
composite ``G(z) = H(F(z))`` by substituting ``z^-1`` with an all-pass unit
function ``1/F(z)``.  The composite realization is assembled directly from the
balanced realizations of ``H`` and ``1/F`` with Kronecker products, so the
result is itself internally balanced.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import CompositionMismatch, FrequencyError, OrderError
from .statespace import (
    StateSpaceModel,
    TransferFunction,
    balance_internally,
    frequency_response,
    ss_to_tf,
    tf_to_ss,
)

MAX_PROTOTYPE_ORDER = 8
DEFAULT_PROTOTYPE_CUTOFF = np.pi / 2
#: relative tolerance of the built-in composition check
COMPOSITION_RTOL = 1e-7


class ResponseKind(str, enum.Enum):
    LOWPASS = "lp"
    HIGHPASS = "hp"
    BANDPASS = "bp"

    @classmethod
    def parse(cls, value) -> "ResponseKind":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        aliases = {"lowpass": "lp", "highpass": "hp", "bandpass": "bp",
                   "low": "lp", "high": "hp", "band": "bp"}
        return cls(aliases.get(v, v))


def _check_omega(omega: float, name: str) -> float:
    omega = float(omega)
    if not 0.0 < omega < np.pi:
        raise FrequencyError(f"{name}={omega!r} must lie strictly between 0 and pi")
    return omega


def _butterworth_poles(M: int, omega0: float) -> np.ndarray:
    wc = 2.0 * np.tan(omega0 / 2.0)
    k = np.arange(1, M + 1)
    s_poles = wc * np.exp(1j * np.pi * (2 * k + M - 1) / (2 * M))
    return (2.0 + s_poles) / (2.0 - s_poles)


def _check_order(M) -> int:
    if int(M) != M or not 1 <= M <= MAX_PROTOTYPE_ORDER:
        raise OrderError(f"prototype order must be in 1..{MAX_PROTOTYPE_ORDER}, got {M}")
    return int(M)


def design_prototype_lowpass(M: int, omega0: float) -> TransferFunction:
    """Classical digital Butterworth low-pass of order ``M``.

    Analog prototype poles are mapped with the bilinear transform after
    prewarping, so ``|H(e^{j omega0})|^2 = 1/2``.  All ``M`` zeros sit at
    ``z = -1`` and the DC gain is one.
    """
    M = _check_order(M)
    omega0 = _check_omega(omega0, "omega0")
    den = np.real(np.poly(_butterworth_poles(M, omega0)))
    num = np.real(np.poly(-np.ones(M)))
    num *= np.sum(den) / np.sum(num)
    return TransferFunction(num, den)


def prototype_realization(M: int, omega0: float) -> StateSpaceModel:
    """Balanced realization of the Butterworth prototype.

    The model is assembled as a cascade of first/second-order sections from
    the exact poles before balancing; a companion form of the full
    polynomial is too ill-conditioned for narrow cutoffs.
    """
    M = _check_order(M)
    omega0 = _check_omega(omega0, "omega0")
    # analog pole k and M+1-k are conjugates; the middle one (odd M) is real
    poles = _butterworth_poles(M, omega0)
    sections = []
    for p in poles[: M // 2]:
        den = np.array([1.0, -2.0 * p.real, abs(p) ** 2])
        num = np.array([1.0, 2.0, 1.0]) * den.sum() / 4.0
        sections.append(tf_to_ss(TransferFunction(num, den)))
    if M % 2:
        # (1-p)/2 (1 + z^-1)/(1 - p z^-1), realized directly so p = 0 keeps its state
        p = float(poles[M // 2].real)
        g = (1.0 - p) / 2.0
        sections.append(StateSpaceModel(np.array([[p]]), np.array([1.0]),
                                        np.array([g * (1.0 + p)]), g))
    ss = sections[0]
    for sec in sections[1:]:
        ss = _series(ss, sec)
    bal, _, _ = balance_internally(ss)
    return bal


def _series(first: StateSpaceModel, second: StateSpaceModel) -> StateSpaceModel:
    n1, n2 = first.order, second.order
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, :n1] = np.outer(second.B, first.C)
    A[n1:, n1:] = second.A
    B = np.concatenate([first.B, second.B * first.D])
    C = np.concatenate([second.D * first.C, second.C])
    return StateSpaceModel(A, B, C, second.D * first.D)


@dataclass(frozen=True)
class UnitFunction:
    """All-pass substitution ``z^-1 <- 1/F(z)`` with its balanced realization."""

    kind: ResponseKind
    xi: float
    tf: TransferFunction
    ss: StateSpaceModel
    order: int

    @property
    def L(self) -> int:
        return self.order


def make_unit_function(kind, omega0: float, omega1: float) -> UnitFunction:
    """Unit function moving a prototype cutoff ``omega0`` to ``omega1``.

    For band-pass, ``omega1`` is the center frequency and ``omega0`` the
    prototype cutoff (which becomes the bandwidth).
    """
    kind = ResponseKind.parse(kind)
    omega0 = _check_omega(omega0, "omega0")
    omega1 = _check_omega(omega1, "omega1")
    if kind is ResponseKind.LOWPASS:
        xi = np.sin((omega0 - omega1) / 2) / np.sin((omega0 + omega1) / 2)
        # (z^-1 - xi)/(1 - xi z^-1) moves the cutoff from omega0 to omega1
        tf = TransferFunction([-xi, 1.0], [1.0, -xi])
    elif kind is ResponseKind.HIGHPASS:
        xi = np.cos((omega0 + omega1) / 2) / np.cos((omega0 - omega1) / 2)
        # -(z^-1 - xi)/(1 - xi z^-1): this sign places the half-power point at omega1
        tf = TransferFunction([xi, -1.0], [1.0, -xi])
    else:
        xi = np.cos(omega1)
        tf = TransferFunction([0.0, xi, -1.0], [1.0, -xi, 0.0])
    # exact zeros keep the trivial cases exactly trivial
    if abs(xi) < 1e-15:
        xi = 0.0
        tf = TransferFunction(np.where(np.abs(tf.num) < 1e-15, 0.0, tf.num),
                              np.where(np.abs(tf.den) < 1e-15, 0.0, tf.den))
    if abs(xi) >= 1.0:
        raise FrequencyError(f"transformation parameter |xi|={abs(xi):.6g} must be < 1")
    order = 2 if kind is ResponseKind.BANDPASS else 1
    ss = _allpass_realization(tf, order)
    ss, _, _ = balance_internally(ss)
    return UnitFunction(kind, float(xi), tf, ss, order)


def _allpass_realization(tf: TransferFunction, order: int) -> StateSpaceModel:
    # keep the full state dimension even when trailing den coefficients vanish
    num = np.zeros(order + 1)
    den = np.zeros(order + 1)
    num[: tf.num.size] = tf.num
    den[: tf.den.size] = tf.den
    A = np.zeros((order, order))
    A[0, :] = -den[1:]
    if order > 1:
        A[1:, :-1] = np.eye(order - 1)
    B = np.zeros(order)
    B[0] = 1.0
    C = num[1:] - num[0] * den[1:]
    return StateSpaceModel(A, B, C, num[0])


@dataclass(frozen=True)
class CompositeFilter:
    """Balanced realization of ``G(z) = H(F(z))`` plus design metadata.

    ``cutoffs`` are half-power frequencies in radians/sample: one value for
    low/high-pass, the two band edges for band-pass.
    """

    ss: StateSpaceModel
    response_kind: ResponseKind
    m1_zeros: int
    cutoffs: Tuple[float, ...]
    prototype: TransferFunction
    unit: UnitFunction
    tf: TransferFunction

    @property
    def order(self) -> int:
        return self.ss.order

    def frequency_response(self, omegas) -> np.ndarray:
        return frequency_response(self.ss, omegas)

    @property
    def zeros_at_plus_one(self) -> int:
        return 0 if self.response_kind is ResponseKind.LOWPASS else self.m1_zeros

    @property
    def zeros_at_minus_one(self) -> int:
        return 0 if self.response_kind is ResponseKind.HIGHPASS else self.m1_zeros

    def spec(self) -> dict:
        """Plain-data description, used for cache keys and reports."""
        return {
            "kind": self.response_kind.value,
            "prototype_order": int(self.prototype.den.size - 1),
            "cutoffs": [float(c) for c in self.cutoffs],
            "xi": float(self.unit.xi),
        }


def root_multiplicity(coeffs, root: float, rtol: float = 1e-9) -> int:
    """Multiplicity of ``root`` as a zero of the polynomial in ``z^-1`` with ``coeffs``.

    Counts the leading Taylor coefficients about ``root`` that vanish, which
    is far more reliable than clustering ``np.roots`` output for repeated roots.
    """
    c = np.trim_zeros(np.atleast_1d(np.asarray(coeffs, dtype=float)), "b")
    if c.size == 0:
        return 0
    x0 = 1.0 / root  # z = root  <->  z^-1 = 1/root
    scale = float(np.max(np.abs(c)))
    poly = c[::-1].copy()  # highest power first for Horner
    m = 0
    while poly.size > 1:
        q, r = np.zeros(poly.size - 1), 0.0
        acc = 0.0
        for i, a in enumerate(poly):
            acc = acc * x0 + a
            if i < poly.size - 1:
                q[i] = acc
        r = acc
        if abs(r) > rtol * scale * 2.0 ** poly.size:
            break
        poly = q
        m += 1
    return m


def _substitute(proto: TransferFunction, unit_tf: TransferFunction, L: int) -> TransferFunction:
    """Polynomial substitution ``z^-1 <- P/Q`` in ``B(z)/A(z)``."""
    P = np.zeros(L + 1)
    Q = np.zeros(L + 1)
    P[: unit_tf.num.size] = unit_tf.num
    Q[: unit_tf.den.size] = unit_tf.den
    M = max(proto.num.size, proto.den.size) - 1
    b = np.zeros(M + 1)
    a = np.zeros(M + 1)
    b[: proto.num.size] = proto.num
    a[: proto.den.size] = proto.den
    num = np.zeros(L * M + 1)
    den = np.zeros(L * M + 1)
    for i in range(M + 1):
        term = np.array([1.0])
        for _ in range(i):
            term = np.convolve(term, P)
        for _ in range(M - i):
            term = np.convolve(term, Q)
        num[: term.size] += b[i] * term
        den[: term.size] += a[i] * term
    return TransferFunction(num, den)


def _prototype_at(proto: StateSpaceModel, zinv: np.ndarray) -> np.ndarray:
    """Evaluate ``H`` with ``z^-1`` replaced by the given complex values."""
    out = np.full(zinv.shape, proto.D, dtype=complex)
    if proto.order == 0:
        return out
    eye = np.eye(proto.order)
    for i, w in enumerate(zinv):
        out[i] += proto.C @ np.linalg.solve(eye / w - proto.A, proto.B)
    return out


def compose(proto: StateSpaceModel, uf: UnitFunction,
            proto_tf: Optional[TransferFunction] = None,
            cutoffs: Tuple[float, ...] = (),
            check: bool = True) -> CompositeFilter:
    """Realization of ``H(F(z))`` from balanced ``H`` and balanced all-pass ``1/F``.

    With ``E = (I - delta A)^-1``::

        A_c = I (x) alpha + (A E) (x) (beta gamma)
        B_c = (E B) (x) beta
        C_c = (C E) (x) gamma
        D_c = D + delta C E B

    The frequency response is checked against ``H`` evaluated at the unit
    function on 128 frequencies; a mismatch raises ``CompositionMismatch``.
    """
    alpha, beta, gamma, delta = uf.ss.A, uf.ss.B, uf.ss.C, uf.ss.D
    M = proto.order
    E = np.linalg.inv(np.eye(M) - delta * proto.A)
    A = np.kron(np.eye(M), alpha) + np.kron(proto.A @ E, np.outer(beta, gamma))
    B = np.kron(E @ proto.B, beta)
    C = np.kron(proto.C @ E, gamma)
    D = proto.D + delta * proto.C @ E @ proto.B
    ss = StateSpaceModel(A, B, C, D)

    if check:
        w = np.linspace(0.0, np.pi, 128)
        got = frequency_response(ss, w)
        want = _prototype_at(proto, uf.tf.frequency_response(w))
        scale = max(1.0, float(np.max(np.abs(want))))
        err = float(np.max(np.abs(got - want))) / scale
        if not err < COMPOSITION_RTOL:
            raise CompositionMismatch(f"composite response deviates from H(F) by {err:.3g}")

    if proto_tf is None:
        proto_tf = ss_to_tf(proto)
    kind = uf.kind
    tf = _substitute(proto_tf, uf.tf, uf.order)
    # prototype zeros at z=-1 land on z=-1 (lp), z=+1 (hp) or both (bp); the
    # prototype numerator is exact while the substituted one is not for narrow bands
    m1 = root_multiplicity(proto_tf.num, -1.0)
    return CompositeFilter(ss, kind, m1, tuple(float(c) for c in cutoffs), proto_tf, uf, tf)


def bandpass_edges(center: float, bandwidth: float) -> Tuple[float, float]:
    """Half-power band edges of a band-pass built from (center, prototype cutoff)."""
    c = np.cos(center) * np.cos(bandwidth / 2.0)
    mid = np.arccos(np.clip(c, -1.0, 1.0))
    return mid - bandwidth / 2.0, mid + bandwidth / 2.0


def passband_to_center(omega_lo: float, omega_hi: float) -> Tuple[float, float]:
    """(center, bandwidth) whose half-power points are ``omega_lo`` and ``omega_hi``."""
    omega_lo = _check_omega(omega_lo, "omega_lo")
    omega_hi = _check_omega(omega_hi, "omega_hi")
    if not omega_lo < omega_hi:
        raise FrequencyError("passband edges must satisfy omega_lo < omega_hi")
    bw = omega_hi - omega_lo
    xi = np.cos((omega_lo + omega_hi) / 2.0) / np.cos(bw / 2.0)
    return float(np.arccos(xi)), float(bw)


def design_filter(kind, order: int, cutoff: Optional[float] = None, *,
                  omega0: Optional[float] = None,
                  center: Optional[float] = None,
                  bandwidth: Optional[float] = None,
                  passband: Optional[Tuple[float, float]] = None) -> CompositeFilter:
    """Composite Butterworth filter from a user-level description.

    Parameters
    ----------
    kind : {"lp", "hp", "bp"}
    order : int
        Prototype order ``M``; the composite has order ``M`` (lp/hp) or
        ``2M`` (bp).
    cutoff : float, optional
        Half-power frequency in radians/sample for lp/hp.
    omega0 : float, optional
        Prototype cutoff.  For lp/hp the composite transfer function does not
        depend on it; the default ``pi/2`` keeps the prototype well-conditioned
        and leaves the cutoff placement to the unit function.
    center, bandwidth : float, optional
        Band-pass center (``cos(center) = xi``) and prototype cutoff.
    passband : (float, float), optional
        Band-pass half-power edges; converted to (center, bandwidth).
    """
    kind = ResponseKind.parse(kind)
    if kind is ResponseKind.BANDPASS:
        if passband is not None:
            center, bandwidth = passband_to_center(*passband)
        if center is None or bandwidth is None:
            raise FrequencyError("band-pass needs center and bandwidth, or a passband")
        center = _check_omega(center, "center")
        bandwidth = _check_omega(bandwidth, "bandwidth")
        proto_tf = design_prototype_lowpass(order, bandwidth)
        uf = make_unit_function(kind, bandwidth, center)
        cutoffs = bandpass_edges(center, bandwidth)
    else:
        if cutoff is None:
            raise FrequencyError(f"{kind.value} filter needs a cutoff")
        cutoff = _check_omega(cutoff, "cutoff")
        if omega0 is None:
            omega0 = DEFAULT_PROTOTYPE_CUTOFF
        proto_tf = design_prototype_lowpass(order, omega0)
        uf = make_unit_function(kind, omega0, cutoff)
        cutoffs = (cutoff,)
    proto = prototype_realization(order, bandwidth if kind is ResponseKind.BANDPASS else omega0)
    return compose(proto, uf, proto_tf=proto_tf, cutoffs=cutoffs)
