"""Synthetic test signals with known components.

Every generator is deterministic given ``seed`` and returns a ``Scenario``
whose ``components`` hold the noise-free parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import math

import numpy as np

from .dictionaries import DB2
from .errors import ParameterError
from .events import EventInterval, EventLabel


@dataclass
class Scenario:
    name: str
    fs: float
    y: np.ndarray
    components: Dict[str, np.ndarray]
    events: List[EventInterval] = field(default_factory=list)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.y.size) / self.fs

    @property
    def truth(self) -> np.ndarray:
        return sum(self.components.values())


def sasd_signal(N: int = 300) -> Dict[str, np.ndarray]:
    """Slow sinusoid plus a jump of +2 at sample 90 and -1 at sample 180."""
    n = np.arange(N)
    return {"x1": np.sin(2 * np.pi * 0.01 * n),
            "x2": 2.0 * (n >= 90) - 1.0 * (n >= 180)}


def sasd_scenario(sigma: float = 0.2, seed: int = 0, fs: float = 100.0, N: int = 300) -> Scenario:
    comps = sasd_signal(N)
    rng = np.random.default_rng(seed)
    y = comps["x1"] + comps["x2"] + sigma * rng.standard_normal(N)
    return Scenario("sasd", fs, y, comps)


def sasdpr_signal(fs: float = 100.0, duration: float = 10.0) -> Dict[str, np.ndarray]:
    """0.1 Hz drift, a 13 Hz burst on 4-6 s and two short plateaus around it.

    ``x3`` is +1 on [2, 2.5) s and -1 on [7.5, 8) s: sparse with a sparse derivative.

    Event times are fixed in seconds so the sample positions scale with ``fs``.
    """
    N = int(round(duration * fs))
    t = np.arange(N) / fs
    x1 = np.sin(2 * np.pi * 0.1 * t)
    env = np.where((t >= 4.0) & (t < 6.0), np.sin(np.pi * (t - 4.0) / 2.0) ** 2, 0.0)
    x2 = 0.5 * env * np.sin(2 * np.pi * 13.0 * t)
    x3 = 1.0 * ((t >= 2.0) & (t < 2.5)) - 1.0 * ((t >= 7.5) & (t < 8.0))
    return {"x1": x1, "x2": x2, "x3": x3}


def sasdpr_scenario(fs: float = 100.0, sigma: float = 0.1, seed: int = 0,
                    duration: float = 10.0) -> Scenario:
    comps = sasdpr_signal(fs, duration)
    rng = np.random.default_rng(seed)
    N = comps["x1"].size
    y = comps["x1"] + comps["x2"] + comps["x3"] + sigma * rng.standard_normal(N)
    return Scenario("sasdpr", fs, y, comps)


def pink_noise(N: int, rng: np.random.Generator, rms: float = 1.0) -> np.ndarray:
    """Gaussian noise with a 1/f power spectrum (DC removed), scaled to ``rms``."""
    X = np.fft.rfft(rng.standard_normal(N))
    f = np.arange(X.size, dtype=float)
    f[0] = np.inf
    x = np.fft.irfft(X / np.sqrt(f), N)
    return rms * x / np.sqrt(np.mean(x * x))


def _wavelet_shape(h: np.ndarray, levels: int = 8) -> np.ndarray:
    # cascade algorithm: one high-pass step then repeated low-pass refinement
    g = h[::-1] * (-1.0) ** np.arange(h.size)
    x = g * math.sqrt(2.0)
    for _ in range(levels):
        up = np.zeros(2 * x.size - 1)
        up[::2] = x
        x = np.convolve(up, h * math.sqrt(2.0))
    return x


def kcomplex_pulse(fs: float, duration: float = 0.7, amplitude: float = 1000.0) -> np.ndarray:
    """Sign-flipped db2 wavelet stretched to ``duration``: a sharp negative wave then a positive one.

    ``amplitude`` is the magnitude of the negative peak.
    """
    n = int(round(duration * fs))
    psi = -_wavelet_shape(DB2)
    out = np.interp(np.linspace(0.0, psi.size - 1, n), np.arange(psi.size), psi)
    return amplitude * out / np.abs(out).max()


def spindle_burst(fs: float, duration: float = 1.0, freq: float = 13.0,
                  amplitude: float = 2.0) -> np.ndarray:
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    return amplitude * np.sin(np.pi * np.arange(n) / n) ** 2 * np.sin(2 * np.pi * freq * t)


def _inject(kind: str, fs: float, n_events: int, seed: int, duration: float,
            noise_rms: float, **shape) -> Scenario:
    if n_events < 0:
        raise ParameterError("n_events must be >= 0")
    rng = np.random.default_rng(seed)
    N = int(round(duration * fs))
    pulse = kcomplex_pulse(fs, **shape) if kind == "kcomplex" else spindle_burst(fs, **shape)
    # evenly spaced slots with a random jitter, one event per slot
    margin = 2.0
    slot = (duration - 2 * margin) / max(n_events, 1)
    if slot * fs < 2 * pulse.size:
        raise ParameterError(f"{n_events} events of {pulse.size / fs:.3g} s do not fit in {duration} s")
    x = np.zeros(N)
    events = []
    label = EventLabel.KCOMPLEX if kind == "kcomplex" else EventLabel.SPINDLE
    for i in range(n_events):
        free = slot * fs - pulse.size
        s = int(round((margin + i * slot) * fs + rng.uniform(0.25, 0.75) * free))
        x[s:s + pulse.size] += pulse
        events.append(EventInterval(s, s + pulse.size, 0.0, label))
    bg = pink_noise(N, rng, noise_rms)
    return Scenario(kind, fs, x + bg, {"pattern": x, "background": bg}, events)


def kcomplex_scenario(fs: float = 200.0, n_events: int = 2, seed: int = 0,
                      duration: float = 30.0, noise_rms: float = 30.0,
                      amplitude: float = 1000.0) -> Scenario:
    """db2-shaped K-complex-like pulses (0.7 s) in pink background noise.

    The default scale is matched to the K-complex preset (``lam0=160``,
    TKEO threshold 0.5) rather than to physiological microvolts.
    """
    return _inject("kcomplex", fs, n_events, seed, duration, noise_rms, amplitude=amplitude)


def spindle_scenario(fs: float = 200.0, n_events: int = 2, seed: int = 0,
                     duration: float = 30.0, noise_rms: float = 1.0,
                     amplitude: float = 2.0) -> Scenario:
    """13 Hz bursts of 1 s with a raised-sine envelope in pink background noise.

    The default scale suits the spindle preset (``lam0=0.6``, TKEO threshold 0.05).
    """
    return _inject("spindle", fs, n_events, seed, duration, noise_rms, amplitude=amplitude)


SCENARIOS = {
    "sasd": sasd_scenario,
    "sasdpr": sasdpr_scenario,
    "kcomplex": kcomplex_scenario,
    "spindle": spindle_scenario,
}
