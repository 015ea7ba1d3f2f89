"""Preset configurations wiring filters, dictionaries and solvers together.

Frequencies in presets are in Hz so that one preset serves any sampling rate;
:func:`hz_to_rad` converts them for the filter designers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cache import FactorCache
from .dictionaries import StftDictionary, WdwtDictionary, next_pow2_window
from .errors import FrequencyError, ParameterError
from .events import (KCOMPLEX_DETECTION, SPINDLE_DETECTION, DetectionConfig, EventInterval,
                     LabeledEpoch, detect_with, tkeo)
from .factorization import FactorizedFilter, factorize_filter
from .solvers import (ADMM_EPS, ADMM_KMAX, AdmmSystem, ComplementaryHighPass, SasdResult, sapr,
                      sasd, sasdpr, tvd)
from .spectral import design_filter
from .synth import sasd_scenario, sasdpr_scenario
from .zerophase import PaddingPolicy, ZeroPhaseOperator, pad_length, pad_signal, unpad_signal


def hz_to_rad(f_hz: float, fs: float) -> float:
    """Frequency in Hz to radians/sample."""
    w = 2.0 * np.pi * f_hz / fs
    if not 0.0 < w < np.pi:
        raise FrequencyError(f"{f_hz} Hz is outside (0, fs/2) for fs={fs}")
    return w


def rmse(a, b) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------------- SASD


@dataclass(frozen=True)
class SasdConfig:
    """Low-pass/high-pass pair at a shared cutoff (radians/sample)."""

    order: int = 3
    cutoff: float = 0.044 * np.pi
    K: int = 1
    degree: int = 1
    factor_eps: float = 1e-6


def sasd_operators(cfg: SasdConfig, N: int, P: int,
                   cache: Optional[FactorCache] = None) -> Tuple[ZeroPhaseOperator, FactorizedFilter]:
    """Zero-phase low-pass and the factored high-pass for padded length ``N + 2P``."""
    Np = N + 2 * P
    lp = design_filter("lp", cfg.order, cfg.cutoff)
    hp = design_filter("hp", cfg.order, cfg.cutoff)
    fac = cache.get(hp, Np, cfg.K, cfg.factor_eps) if cache is not None else None
    if fac is None:
        fac = factorize_filter(hp, Np, cfg.K, eps=cfg.factor_eps, raise_on_failure=False)
        if cache is not None:
            cache.put(hp, fac, cfg.factor_eps)
    return ZeroPhaseOperator(lp, Np, PaddingPolicy(P, cfg.degree)), fac


def denoise(y, fs: float, lam: float, cfg: SasdConfig = SasdConfig(),
            cache: Optional[FactorCache] = None, eps: float = 1e-10,
            kmax: int = 20000) -> SasdResult:
    y = np.asarray(y, dtype=float)
    lpf, fac = sasd_operators(cfg, y.size, pad_length(fs), cache)
    return sasd(y, lpf, fac, lam, cfg.K, eps, kmax, raise_on_failure=False)


def lowpass_baseline(y, lpf: ZeroPhaseOperator) -> np.ndarray:
    yp, P = pad_signal(y, P=lpf.pad.P, degree=lpf.pad.degree)
    return unpad_signal(lpf.apply(yp), P)


def tvd_baseline(y, truth, lams: Sequence[float]) -> Tuple[float, float]:
    """Best RMSE of plain TV denoising over ``lams`` and the winning lambda."""
    scores = [(rmse(tvd(y, lam), truth), lam) for lam in lams]
    return min(scores)


# ------------------------------------------------------------ pattern presets


@dataclass(frozen=True)
class PatternPreset:
    """Filters, dictionary, solver weights and detection rules for one pattern type.

    ``band_hz`` is the band-pass passband, ``cutoff_hz`` the shared cutoff of
    the complementary low-pass/high-pass pair.
    """

    name: str
    solver: str  # "sapr" or "sasdpr"
    band_hz: Tuple[float, float]
    cutoff_hz: float
    order: int
    lams: Tuple[float, ...]
    mu: float
    eta: float = 0.1
    detection: DetectionConfig = field(default=KCOMPLEX_DETECTION)
    window: Optional[int] = None
    eps: float = ADMM_EPS
    kmax: int = ADMM_KMAX

    def with_lams(self, lams) -> "PatternPreset":
        return replace(self, lams=tuple(float(v) for v in lams))


KCOMPLEX_PRESET = PatternPreset("kcomplex", "sapr", (0.6, 2.0), 0.6, 4, (160.0, 15.0),
                                mu=0.5, eta=0.1, detection=KCOMPLEX_DETECTION)
SPINDLE_PRESET = PatternPreset("spindle", "sasdpr", (11.0, 15.0), 0.5, 4, (0.6, 4.8, 5.6),
                               mu=0.1, detection=SPINDLE_DETECTION)
#: the simulated decomposition example: 9-17 Hz band, 0.2 Hz split
SASDPR_EXAMPLE = PatternPreset("sasdpr", "sasdpr", (9.0, 17.0), 0.2, 4, (0.05, 0.5, 0.15),
                               mu=1.0, detection=SPINDLE_DETECTION)
PRESETS = {"kcomplex": KCOMPLEX_PRESET, "spindle": SPINDLE_PRESET}


@dataclass(eq=False)
class PatternOperators:
    N: int
    P: int
    lpf: ZeroPhaseOperator
    hpf: ComplementaryHighPass
    bpf: ZeroPhaseOperator
    dictionary: object
    system: AdmmSystem


def build_operators(preset: PatternPreset, fs: float, n_samples: int,
                    degree: int = 1) -> PatternOperators:
    P = pad_length(fs)
    N = n_samples + 2 * P
    lo, hi = preset.band_hz
    lpf = ZeroPhaseOperator(design_filter("lp", preset.order, hz_to_rad(preset.cutoff_hz, fs)),
                            N, PaddingPolicy(P, degree))
    hpf = ComplementaryHighPass(lpf)
    bpf = ZeroPhaseOperator(design_filter("bp", preset.order,
                                          passband=(hz_to_rad(lo, fs), hz_to_rad(hi, fs))), N)
    W = preset.window or next_pow2_window(fs)
    if preset.solver == "sapr":
        d = WdwtDictionary(N, W)
        system = AdmmSystem(bpf, preset.mu)
    elif preset.solver == "sasdpr":
        d = StftDictionary(N, W)
        system = AdmmSystem(bpf, preset.mu, hpf)
    else:
        raise ParameterError(f"unknown solver {preset.solver!r}")
    return PatternOperators(N, P, lpf, hpf, bpf, d, system)


@dataclass(eq=False)
class DetectionOutput:
    events: List[EventInterval]
    energy: np.ndarray
    components: Dict[str, np.ndarray]
    iterations: int
    converged: bool
    final_cost: float


class PatternDetector:
    """Runs one preset on signals of a fixed sampling rate.

    Operators (including the dense ADMM factor) are built once per signal
    length and reused.  Instances pickle without their operator cache.
    """

    def __init__(self, preset: PatternPreset, fs: float):
        if not fs > 0:
            raise ParameterError("fs must be positive")
        self.preset = preset
        self.fs = float(fs)
        self._ops: Dict[int, PatternOperators] = {}

    def __getstate__(self):
        return {"preset": self.preset, "fs": self.fs}

    def __setstate__(self, state):
        self.__init__(state["preset"], state["fs"])

    def operators(self, n_samples: int) -> PatternOperators:
        if n_samples not in self._ops:
            self._ops[n_samples] = build_operators(self.preset, self.fs, n_samples)
        return self._ops[n_samples]

    def run(self, y, lams: Optional[Sequence[float]] = None) -> DetectionOutput:
        y = np.asarray(y, dtype=float)
        pr = self.preset
        lams = tuple(pr.lams if lams is None else lams)
        ops = self.operators(y.size)
        yp, P = pad_signal(y, P=ops.P, degree=ops.lpf.pad.degree)
        if pr.solver == "sapr":
            r = sapr(yp, ops.hpf, ops.bpf, ops.dictionary, *lams, mu=pr.mu, eta=pr.eta,
                     eps=pr.eps, kmax=pr.kmax, system=ops.system)
            comps = {"pattern": unpad_signal(r.pattern, P),
                     "wavelet": unpad_signal(ops.dictionary.synthesis(r.k), P)}
            energy_src = comps["pattern"]
        else:
            r = sasdpr(yp, ops.hpf, ops.bpf, ops.dictionary, *lams, mu=pr.mu,
                       eps=pr.eps, kmax=pr.kmax, system=ops.system)
            comps = {"x1": unpad_signal(r.x1, P), "x2": unpad_signal(r.x2, P),
                     "x3": unpad_signal(r.x3, P)}
            energy_src = comps["x2"]
        energy = tkeo(energy_src)
        events = detect_with(energy, self.fs, pr.detection)
        return DetectionOutput(events, energy, comps, r.iterations, r.converged,
                               float(r.costs[-1]))

    def __call__(self, epoch: LabeledEpoch, params: Dict[str, float]) -> List[EventInterval]:
        """Grid-search adapter: ``params`` holds ``lam0``, ``lam1`` [, ``lam2``]."""
        if epoch.fs != self.fs:
            raise ParameterError("epoch sampling rate differs from the detector's")
        lams = [params[f"lam{i}"] for i in range(len(self.preset.lams))]
        return self.run(epoch.y, lams).events


# ------------------------------------------------------------------ benchmarks


TABLE1_FILTER = dict(kind="hp", order=2, cutoff=0.2 * np.pi)


def table1(Ns: Sequence[int] = (100, 500, 1000), Ks: Sequence[int] = (1, 2),
           eps: float = 1e-6, cache: Optional[FactorCache] = None) -> List[dict]:
    """Factorization error and centered-impulse filter norm per ``(N, K)``."""
    filt = design_filter(TABLE1_FILTER["kind"], TABLE1_FILTER["order"], TABLE1_FILTER["cutoff"])
    rows = []
    for N in Ns:
        for K in Ks:
            t0 = time.perf_counter()
            fac = cache.get(filt, N, K, eps) if cache is not None else None
            if fac is None:
                fac = factorize_filter(filt, N, K, eps=eps, raise_on_failure=False)
                if cache is not None:
                    cache.put(filt, fac, eps)
            rows.append({"N": N, "K": K, "error": fac.final_error, "norm": fac.filter_norm(),
                         "iterations": fac.iterations, "converged": fac.converged,
                         "seconds": time.perf_counter() - t0})
    return rows


TVD_LAMBDAS = tuple(np.linspace(0.1, 5.0, 30))


#: candidate ``lam / sigma`` ratios for the SASD Monte Carlo
SASD_LAM_FACTORS = (2.0, 3.0, 4.0, 5.0)


def _sasd_trials(truth, sigma, rng, trials, lpf, fac, lam) -> List[float]:
    out = []
    for _ in range(trials):
        y = truth + sigma * rng.standard_normal(truth.size)
        out.append(rmse(sasd(y, lpf, fac, lam, 1, raise_on_failure=False).x, truth))
    return out


def table3(orders: Sequence[int] = (1, 2, 3, 4), sigmas: Sequence[float] = (0.1, 0.3, 0.5),
           trials: int = 20, seed: int = 0,
           lam_factors: Sequence[float] = SASD_LAM_FACTORS, calib_trials: int = 10,
           cache: Optional[FactorCache] = None) -> List[dict]:
    """Monte-Carlo RMSE of SASD against low-pass and best-lambda TVD baselines.

    For each (order, sigma) cell, ``lam = f * sigma`` with ``f`` from
    ``lam_factors`` minimizing the mean RMSE over ``calib_trials`` noise draws
    that are disjoint from the scored trials.  The TVD baseline takes the best
    of ``TVD_LAMBDAS * sigma`` on each scored trial.
    """
    if trials < 1 or calib_trials < 1:
        raise ParameterError("trials and calib_trials must be >= 1")
    if not lam_factors:
        raise ParameterError("lam_factors must not be empty")
    fs, N = 100.0, 300
    P = pad_length(fs)
    truth = sasd_scenario(0.0, 0, fs, N).truth
    rows = []
    for M in orders:
        lpf, fac = sasd_operators(SasdConfig(order=M), N, P, cache)
        for sigma in sigmas:
            key = [seed, M, int(round(sigma * 1000))]
            calib = [(np.mean(_sasd_trials(truth, sigma, np.random.default_rng(key + [1]),
                                           calib_trials, lpf, fac, f * sigma)), f)
                     for f in lam_factors]
            factor = min(calib)[1]
            rng = np.random.default_rng(key)
            s, l, t = [], [], []
            for _ in range(trials):
                y = truth + sigma * rng.standard_normal(N)
                res = sasd(y, lpf, fac, factor * sigma, 1, raise_on_failure=False)
                s.append(rmse(res.x, truth))
                l.append(rmse(lowpass_baseline(y, lpf), truth))
                t.append(tvd_baseline(y, truth, np.asarray(TVD_LAMBDAS) * sigma)[0])
            rows.append({"M": M, "sigma": sigma, "trials": trials, "lam": factor * sigma,
                         "sasd_mean": float(np.mean(s)), "sasd_std": float(np.std(s)),
                         "lpf_mean": float(np.mean(l)), "lpf_std": float(np.std(l)),
                         "tvd_mean": float(np.mean(t)), "tvd_std": float(np.std(t))})
    return rows


def sasdpr_example(fs: float = 100.0, order: int = 4, seed: int = 0, sigma: float = 0.1,
                   mu: Optional[float] = None, eps: float = ADMM_EPS,
                   kmax: int = ADMM_KMAX) -> dict:
    """Decompose the simulated drift/burst/plateau signal and score x1 and x3."""
    pr = replace(SASDPR_EXAMPLE, order=order, eps=eps, kmax=kmax,
                 mu=SASDPR_EXAMPLE.mu if mu is None else mu)
    sc = sasdpr_scenario(fs, sigma, seed)
    t0 = time.perf_counter()
    out = PatternDetector(pr, fs).run(sc.y)
    return {"fs": fs, "M": order, "rmse_x1": rmse(out.components["x1"], sc.components["x1"]),
            "rmse_x3": rmse(out.components["x3"], sc.components["x3"]),
            "iterations": out.iterations, "final_cost": out.final_cost,
            "seconds": time.perf_counter() - t0}


def table4(rates: Sequence[float] = (50, 100, 150, 200), orders: Sequence[int] = (2, 3, 4),
           seed: int = 0) -> List[dict]:
    return [sasdpr_example(fs, M, seed) for M in orders for fs in rates]
