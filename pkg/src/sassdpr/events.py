"""Energy-based event detection, per-sample scoring and the lambda grid search."""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import EmptyGrid, ParameterError, TooShort


class EventLabel(str, enum.Enum):
    KCOMPLEX = "KComplex"
    SPINDLE = "Spindle"
    GENERIC = "Generic"


@dataclass(frozen=True)
class EventInterval:
    """Half-open sample interval ``[start, end)``."""

    start: int
    end: int
    peak_energy: float = 0.0
    label: EventLabel = EventLabel.GENERIC

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ParameterError(f"invalid interval [{self.start}, {self.end})")

    @property
    def duration(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "EventInterval") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class DetectionConfig:
    threshold: float
    min_dur_s: float
    max_dur_s: float
    merge_window_s: float = 0.0
    keep_first: bool = False
    label: EventLabel = EventLabel.GENERIC


KCOMPLEX_DETECTION = DetectionConfig(0.5, 0.5, 2.25, 1.5, True, EventLabel.KCOMPLEX)
SPINDLE_DETECTION = DetectionConfig(0.05, 0.5, 3.0, 0.0, False, EventLabel.SPINDLE)


def tkeo(x) -> np.ndarray:
    """Teager-Kaiser energy ``x[n]^2 - x[n-1] x[n+1]``; endpoints repeat their neighbours."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise TooShort("TKEO needs at least 3 samples")
    psi = np.empty_like(x)
    psi[1:-1] = x[1:-1] ** 2 - x[:-2] * x[2:]
    psi[0] = psi[1]
    psi[-1] = psi[-2]
    return psi


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    edges = np.diff(np.concatenate([[0], mask.view(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def detect_events(energy, threshold: float, fs: float, min_dur_s: float, max_dur_s: float,
                  merge_window_s: float = 0.0, keep_first: bool = False,
                  label: EventLabel = EventLabel.GENERIC) -> List[EventInterval]:
    """Maximal runs of ``energy > threshold`` that pass the duration rules.

    Runs shorter than ``min_dur_s`` or longer than ``max_dur_s`` are dropped.
    With ``keep_first``, an event starting less than ``merge_window_s`` after
    the last kept event is discarded.
    """
    if not threshold > 0:
        raise ParameterError("threshold must be positive")
    if not fs > 0:
        raise ParameterError("fs must be positive")
    energy = np.asarray(energy, dtype=float)
    lo, hi = min_dur_s * fs, max_dur_s * fs
    out: List[EventInterval] = []
    for s, e in _runs(energy > threshold):
        if not lo <= e - s <= hi:
            continue
        if keep_first and out and s - out[-1].start < merge_window_s * fs:
            continue
        out.append(EventInterval(s, e, float(energy[s:e].max()), EventLabel(label)))
    return out


def detect_with(energy, fs: float, cfg: DetectionConfig) -> List[EventInterval]:
    return detect_events(energy, cfg.threshold, fs, cfg.min_dur_s, cfg.max_dur_s,
                         cfg.merge_window_s, cfg.keep_first, cfg.label)


@dataclass(frozen=True)
class ScoreReport:
    f1: float
    kappa: float
    precision: float
    recall: float
    events_detected: Tuple[int, int]
    false_detections: int
    confusion: Tuple[int, int, int, int]  # tp, fp, fn, tn

    @property
    def sensitivity(self) -> float:
        return self.recall

    @property
    def specificity(self) -> float:
        _, fp, _, tn = self.confusion
        return tn / (tn + fp) if tn + fp else 1.0

    def as_dict(self) -> dict:
        tp, fp, fn, tn = self.confusion
        return {"f1": self.f1, "kappa": self.kappa, "precision": self.precision,
                "recall": self.recall, "specificity": self.specificity,
                "events_detected": list(self.events_detected),
                "false_detections": self.false_detections,
                "tp": tp, "fp": fp, "fn": fn, "tn": tn}


def labels_from_intervals(intervals: Sequence[EventInterval], N: int) -> np.ndarray:
    lab = np.zeros(N, dtype=bool)
    for iv in intervals:
        if iv.end > N:
            raise ParameterError(f"interval [{iv.start}, {iv.end}) exceeds length {N}")
        lab[iv.start:iv.end] = True
    return lab


def confusion_counts(pred: np.ndarray, ref: np.ndarray) -> Tuple[int, int, int, int]:
    tp = int(np.count_nonzero(pred & ref))
    fp = int(np.count_nonzero(pred & ~ref))
    fn = int(np.count_nonzero(~pred & ref))
    tn = int(pred.size - tp - fp - fn)
    return tp, fp, fn, tn


def _f1_kappa(tp, fp, fn, tn):
    n = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
    recall = tp / (tp + fn) if tp + fn else (1.0 if fp == 0 else 0.0)
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 1.0
    po = (tp + tn) / n
    pe = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    kappa = (po - pe) / (1.0 - pe) if pe < 1.0 else 1.0
    return f1, kappa, precision, recall


def score_events(detected: Sequence[EventInterval], reference: Sequence[EventInterval],
                 N: int) -> ScoreReport:
    """Per-sample F1 and Cohen's kappa plus event-level overlap counts.

    A reference event counts as detected when any detection overlaps it by at
    least one sample; a detection overlapping no reference event is false.
    """
    counts = confusion_counts(labels_from_intervals(detected, N),
                              labels_from_intervals(reference, N))
    f1, kappa, precision, recall = _f1_kappa(*counts)
    matched = sum(any(r.overlaps(d) for d in detected) for r in reference)
    false = sum(not any(d.overlaps(r) for r in reference) for d in detected)
    return ScoreReport(f1, kappa, precision, recall, (matched, len(reference)), false, counts)


# --------------------------------------------------------------- grid search


@dataclass
class LabeledEpoch:
    y: np.ndarray
    fs: float
    reference: List[EventInterval]


@dataclass(frozen=True)
class GridTarget:
    spec_floor: float
    sens_floor: float


KCOMPLEX_TARGET = GridTarget(0.975, 0.75)
SPINDLE_TARGET = GridTarget(0.90, 0.85)


def grid_values(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid, robust to rounding of ``(hi - lo) / step``."""
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


KCOMPLEX_GRID = {"lam0": grid_values(100, 160, 5), "lam1": grid_values(10, 70, 5)}
SPINDLE_GRID = {"lam0": grid_values(0.30, 0.80, 0.1), "lam1": grid_values(3.0, 6.0, 0.2),
                "lam2": grid_values(3.0, 6.0, 0.2)}


@dataclass
class GridSearchResult:
    names: Tuple[str, ...]
    table: List[dict]
    feasible: List[dict]


def _evaluate(args):
    detector, epochs, params = args
    tot = np.zeros(4, dtype=np.int64)
    for ep in epochs:
        det = detector(ep, params)
        tot += confusion_counts(labels_from_intervals(det, ep.y.size),
                                labels_from_intervals(ep.reference, ep.y.size))
    tp, fp, fn, tn = (int(v) for v in tot)
    f1, kappa, _, recall = _f1_kappa(tp, fp, fn, tn)
    spec = tn / (tn + fp) if tn + fp else 1.0
    return {**params, "sensitivity": recall, "specificity": spec, "f1": f1, "kappa": kappa}


def grid_search(epochs: Sequence[LabeledEpoch],
                detector: Callable[[LabeledEpoch, Dict[str, float]], List[EventInterval]],
                grids: Dict[str, Sequence[float]], target: GridTarget,
                workers: int = 1) -> GridSearchResult:
    """Pooled per-sample sensitivity/specificity for every grid point.

    ``detector(epoch, params)`` returns the detected intervals for one epoch.
    The feasible set holds the rows meeting both floors of ``target``.
    """
    if not epochs:
        raise EmptyGrid("grid search needs at least one labeled epoch")
    if not grids or any(len(v) == 0 for v in grids.values()):
        raise EmptyGrid("every grid must have at least one value")
    names = tuple(grids)
    points = [dict(zip(names, (float(x) for x in combo)))
              for combo in itertools.product(*(grids[k] for k in names))]
    jobs = [(detector, list(epochs), p) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            table = list(ex.map(_evaluate, jobs))
    else:
        table = [_evaluate(j) for j in jobs]
    feasible = [r for r in table
                if r["specificity"] >= target.spec_floor and r["sensitivity"] >= target.sens_floor]
    return GridSearchResult(names, table, feasible)
