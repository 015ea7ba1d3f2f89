"""Command-line front end.

Signals are CSV files with a header, an optional ``t`` column and a
``value`` column.  The sampling rate comes from ``--fs`` or from a JSON
sidecar (``signal.csv`` -> ``signal.json`` with an ``fs`` key).  Event
annotations are CSV files with ``start_s,end_s`` rows.

Exit codes: 0 success, 1 runtime or convergence failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .cache import FactorCache
from .errors import ConfigError, SassdprError
from .events import EventInterval, EventLabel, LabeledEpoch, grid_search, grid_values, score_events
from .events import KCOMPLEX_GRID, KCOMPLEX_TARGET, SPINDLE_GRID, SPINDLE_TARGET
from .pipelines import PRESETS, PatternDetector, SasdConfig, denoise, rmse, table1, table3, table4
from .spectral import design_filter
from .synth import SCENARIOS

log = logging.getLogger("sassdpr")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def fmt(x) -> str:
    """Six significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def _round(obj):
    # JSON payloads carry the same 6 significant digits as the CSVs
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.6g}") if math.isfinite(v) else None
    return obj


def _write_json(obj, path: Optional[str]):
    text = json.dumps(_round(obj), indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_csv(path: Optional[str], header: Sequence[str], columns: Sequence[Sequence]):
    out = sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) for v in row])
    finally:
        if out is not sys.stdout:
            out.close()


def _write_rows(path: Optional[str], rows: List[dict]):
    header = list(rows[0]) if rows else []
    _write_csv(path, header, [[r[k] for r in rows] for k in header])


# ------------------------------------------------------------------ inputs


def read_signal(path: str, fs: Optional[float] = None, column: str = "value"):
    """Return ``(values, fs, table)``; ``table`` maps every header to its column."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"input file {path} does not exist")
    with open(p, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if column not in header:
        raise ConfigError(f"{path} has no '{column}' column")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from None
    if data.size == 0:
        raise ConfigError(f"{path} has no samples")
    if not np.all(np.isfinite(data)):
        raise ConfigError(f"{path} contains non-finite samples")
    table = {h: data[:, i] for i, h in enumerate(header)}
    if fs is None:
        side = p.with_suffix(".json")
        if side.exists():
            fs = json.loads(side.read_text()).get("fs")
    if fs is None:
        raise ConfigError(f"sampling rate unknown for {path}: pass --fs or add a JSON sidecar")
    if not float(fs) > 0:
        raise ConfigError("fs must be positive")
    return table[column], float(fs), table


def read_annotations(path: str, fs: float, n: int, label=EventLabel.GENERIC) -> List[EventInterval]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"start_s", "end_s"} <= set(reader.fieldnames):
            raise ConfigError(f"{path} needs start_s,end_s columns")
        for row in reader:
            s = int(round(float(row["start_s"]) * fs))
            e = min(int(round(float(row["end_s"]) * fs)), n)
            if e > s:
                out.append(EventInterval(max(s, 0), e, 0.0, label))
    return out


def _load_config(path: Optional[str], section: str) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    sec = cfg.get(section, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section '{section}' must be an object")
    return sec


class _Opts:
    """Flag value if given, else config value, else the default."""

    def __init__(self, args, section: str):
        self.args = args
        self.cfg = _load_config(getattr(args, "config", None), section)

    def __call__(self, name: str, default=None):
        v = getattr(self.args, name, None)
        if v is not None:
            return v
        return self.cfg.get(name, default)


def _pi(x) -> Optional[float]:
    return None if x is None else float(x) * np.pi


# ---------------------------------------------------------------- commands


def cmd_design(args) -> int:
    o = _Opts(args, "design")
    kind = o("kind", "lp")
    passband = o("passband")
    filt = design_filter(kind, int(o("order", 2)), _pi(o("cutoff")), omega0=_pi(o("omega0")),
                         center=_pi(o("center")), bandwidth=_pi(o("bandwidth")),
                         passband=None if passband is None else tuple(_pi(v) for v in passband))
    nfreq = int(o("n_freq", 512))
    w = np.linspace(0.0, np.pi, nfreq)
    mag = np.abs(filt.frequency_response(w))
    from .statespace import impulse_response
    h = impulse_response(filt.ss, int(o("n_impulse", 64)))
    zeros = filt.tf.zeros
    poles = filt.tf.poles
    report = {
        "filter": filt.spec(),
        "order": filt.order,
        "cutoffs_over_pi": [c / np.pi for c in filt.cutoffs],
        "gain_at_cutoffs": [float(v) for v in np.abs(filt.frequency_response(np.array(filt.cutoffs)))],
        "dc_gain": float(mag[0]),
        "nyquist_gain": float(mag[-1]),
        "zeros_at_plus_one": filt.zeros_at_plus_one,
        "zeros_at_minus_one": filt.zeros_at_minus_one,
        "zeros": [[float(z.real), float(z.imag)] for z in zeros],
        "poles": [[float(p.real), float(p.imag)] for p in poles],
        "spectral_radius": filt.ss.spectral_radius(),
        "impulse_response": h.tolist(),
    }
    _write_json(report, o("out"))
    if o("response_csv"):
        _write_csv(o("response_csv"), ["omega_over_pi", "magnitude"], [w / np.pi, mag])
    return EXIT_OK


def cmd_denoise(args) -> int:
    o = _Opts(args, "denoise")
    y, fs, table = read_signal(o("input"), o("fs"))
    cfg = SasdConfig(order=int(o("order", 3)), cutoff=float(o("cutoff", 0.044)) * np.pi,
                     K=int(o("K", 1)), degree=int(o("degree", 1)))
    lam = float(o("lam", 1.0))
    cache = None if o("no_cache", False) else FactorCache(o("cache_dir"))
    res = denoise(y, fs, lam, cfg, cache)
    t = table.get("t", np.arange(y.size) / fs)
    _write_csv(o("out"), ["t", "y", "x1", "x2", "x"], [t, y, res.x1, res.x2, res.x])
    summary = {"lam": lam, "order": cfg.order, "cutoff_over_pi": cfg.cutoff / np.pi, "K": cfg.K,
               "iterations": res.iterations, "converged": res.converged,
               "final_cost": res.final_cost,
               "certificate": {"passed": res.certificate.passed,
                               "max_inactive_ratio": res.certificate.max_inactive_ratio,
                               "max_active_deviation": res.certificate.max_active_deviation}}
    truth_col = o("truth_column", "truth")
    if truth_col in table:
        summary["rmse"] = rmse(res.x, table[truth_col])
    _write_json(summary, o("summary"))
    return EXIT_OK if res.converged else EXIT_RUNTIME


def cmd_detect(args) -> int:
    o = _Opts(args, "detect")
    pattern = o("pattern", "kcomplex")
    if pattern not in PRESETS:
        raise ConfigError(f"unknown pattern {pattern!r}")
    y, fs, table = read_signal(o("input"), o("fs"))
    preset = PRESETS[pattern]
    if o("lams") is not None:
        preset = preset.with_lams(o("lams"))
    if o("threshold") is not None:
        preset = replace(preset, detection=replace(preset.detection, threshold=float(o("threshold"))))
    scale = float(o("scale", 1.0))
    if not (np.isfinite(scale) and scale > 0):
        raise ConfigError("scale must be a positive finite number")
    out = PatternDetector(preset, fs).run(scale * y)
    events_path = o("events")
    rows = [[ev.start / fs, ev.end / fs, ev.peak_energy] for ev in out.events]
    _write_csv(events_path, ["start_s", "end_s", "peak_energy"], list(zip(*rows)) if rows else [[], [], []])
    if o("components"):
        names = list(out.components)
        t = table.get("t", np.arange(y.size) / fs)
        _write_csv(o("components"), ["t", "y", *names, "energy"],
                   [t, y, *(out.components[k] for k in names), out.energy])
    summary = {"pattern": pattern, "scale": scale, "events": len(out.events), "iterations": out.iterations,
               "converged": out.converged, "final_cost": out.final_cost}
    if o("reference"):
        refs = o("reference")
        refs = [refs] if isinstance(refs, str) else refs
        summary["scores"] = {}
        for ref in refs:
            rep = score_events(out.events, read_annotations(ref, fs, y.size), y.size)
            summary["scores"][Path(ref).name] = rep.as_dict()
    if o("report"):
        _write_json(summary, o("report"))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    o = _Opts(args, "benchmark")
    table = int(o("table", 1))
    seed = int(o("seed", 0))
    trials = int(o("trials", 20))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    cache = None if o("no_cache", False) else FactorCache(o("cache_dir"))
    if table == 1:
        rows = table1(o("sizes", (100, 500, 1000)), cache=cache)
    elif table == 3:
        rows = table3(o("orders", (1, 2, 3, 4)), o("sigmas", (0.1, 0.3, 0.5)), trials, seed,
                      cache=cache)
    elif table == 4:
        rows = table4(o("rates", (50, 100, 150, 200)), o("orders", (2, 3, 4)), seed)
    else:
        raise ConfigError(f"unknown table {table}; choose 1, 3 or 4")
    _write_rows(o("out"), rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    o = _Opts(args, "synth")
    name = o("scenario", "sasd")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}")
    seed = int(o("seed", 0))
    fs = o("fs")
    kw = {"seed": seed}
    if fs is not None:
        kw["fs"] = float(fs)
    if name in ("kcomplex", "spindle") and o("events") is not None:
        kw["n_events"] = int(o("events"))
    if name == "sasd":
        kw["sigma"] = float(o("sigma", 0.2))
    sc = SCENARIOS[name](**kw)
    names = list(sc.components)
    _write_csv(o("out"), ["t", "value", "truth", *names], [sc.t, sc.y, sc.truth, *sc.components.values()])
    if o("annotations"):
        rows = [[ev.start / sc.fs, ev.end / sc.fs] for ev in sc.events]
        _write_csv(o("annotations"), ["start_s", "end_s"], list(zip(*rows)) if rows else [[], []])
    if o("out") not in (None, "-"):
        Path(o("out")).with_suffix(".json").write_text(json.dumps({"fs": sc.fs, "scenario": name,
                                                                   "seed": seed}) + "\n")
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    o = _Opts(args, "gridsearch")
    pattern = o("pattern", "kcomplex")
    if pattern not in PRESETS:
        raise ConfigError(f"unknown pattern {pattern!r}")
    inputs, annots = o("inputs") or [], o("annotations") or []
    if not inputs or len(inputs) != len(annots):
        raise ConfigError("give one annotation file per input signal")
    epochs = []
    fs0 = None
    for path, ann in zip(inputs, annots):
        y, fs, _ = read_signal(path, o("fs"))
        if fs0 is not None and fs != fs0:
            raise ConfigError("all epochs must share one sampling rate")
        fs0 = fs
        epochs.append(LabeledEpoch(y, fs, read_annotations(ann, fs, y.size)))
    grids = dict(KCOMPLEX_GRID if pattern == "kcomplex" else SPINDLE_GRID)
    for name, spec in (o("grids") or {}).items():
        grids[name] = grid_values(*spec)
    target = KCOMPLEX_TARGET if pattern == "kcomplex" else SPINDLE_TARGET
    res = grid_search(epochs, PatternDetector(PRESETS[pattern], fs0), grids, target,
                      workers=int(o("workers", 1)))
    _write_rows(o("out"), res.table)
    if o("feasible"):
        _write_rows(o("feasible"), res.feasible)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sassdpr", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fs=True):
        sp.add_argument("--config", help="JSON file with a section per command")
        if fs:
            sp.add_argument("--fs", type=float, help="sampling rate in Hz")

    d = sub.add_parser("design", help="design a zero-phase building block and report it")
    common(d, fs=False)
    d.add_argument("--kind", choices=["lp", "hp", "bp"])
    d.add_argument("--order", type=int, help="prototype order M")
    d.add_argument("--cutoff", type=float, help="half-power frequency in units of pi")
    d.add_argument("--omega0", type=float, help="prototype cutoff in units of pi")
    d.add_argument("--center", type=float, help="band-pass center in units of pi")
    d.add_argument("--bandwidth", type=float, help="band-pass bandwidth in units of pi")
    d.add_argument("--passband", type=float, nargs=2, help="band-pass edges in units of pi")
    d.add_argument("--n-impulse", dest="n_impulse", type=int)
    d.add_argument("--n-freq", dest="n_freq", type=int)
    d.add_argument("--out", help="JSON report path (default stdout)")
    d.add_argument("--response-csv", dest="response_csv")
    d.set_defaults(func=cmd_design)

    n = sub.add_parser("denoise", help="sparsity-assisted denoising of a CSV signal")
    common(n)
    n.add_argument("input")
    n.add_argument("--lam", type=float)
    n.add_argument("--order", type=int)
    n.add_argument("--cutoff", type=float, help="in units of pi")
    n.add_argument("--K", type=int, choices=[1, 2])
    n.add_argument("--degree", type=int)
    n.add_argument("--truth-column", dest="truth_column")
    n.add_argument("--out", help="CSV output (default stdout)")
    n.add_argument("--summary", help="JSON summary path")
    n.add_argument("--cache-dir", dest="cache_dir")
    n.add_argument("--no-cache", dest="no_cache", action="store_const", const=True)
    n.set_defaults(func=cmd_denoise)

    t = sub.add_parser("detect", help="detect K-complexes or spindles")
    common(t)
    t.add_argument("input")
    t.add_argument("--pattern", choices=sorted(PRESETS))
    t.add_argument("--lams", type=float, nargs="+")
    t.add_argument("--threshold", type=float)
    t.add_argument("--scale", type=float,
                   help="multiply the input by this factor before detection (default 1)")
    t.add_argument("--events", help="events CSV (default stdout)")
    t.add_argument("--components", help="components CSV")
    t.add_argument("--reference", nargs="+", help="annotation CSV(s) to score against")
    t.add_argument("--report", help="JSON summary with scores")
    t.set_defaults(func=cmd_detect)

    b = sub.add_parser("benchmark", help="regenerate a benchmark table")
    common(b, fs=False)
    b.add_argument("--table", type=int, choices=[1, 3, 4])
    b.add_argument("--seed", type=int)
    b.add_argument("--trials", type=int)
    b.add_argument("--sizes", type=int, nargs="+")
    b.add_argument("--orders", type=int, nargs="+")
    b.add_argument("--sigmas", type=float, nargs="+")
    b.add_argument("--rates", type=float, nargs="+")
    b.add_argument("--out")
    b.add_argument("--cache-dir", dest="cache_dir")
    b.add_argument("--no-cache", dest="no_cache", action="store_const", const=True)
    b.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("synth", help="write a synthetic scenario with truth columns")
    common(s)
    s.add_argument("--scenario", choices=sorted(SCENARIOS))
    s.add_argument("--seed", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--events", type=int, help="number of injected events")
    s.add_argument("--out")
    s.add_argument("--annotations", help="annotation CSV for event scenarios")
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("gridsearch", help="lambda grid search over labeled epochs")
    common(g)
    g.add_argument("--pattern", choices=sorted(PRESETS))
    g.add_argument("--inputs", nargs="+")
    g.add_argument("--annotations", nargs="+")
    g.add_argument("--workers", type=int)
    g.add_argument("--out")
    g.add_argument("--feasible")
    g.set_defaults(func=cmd_gridsearch)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SassdprError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
