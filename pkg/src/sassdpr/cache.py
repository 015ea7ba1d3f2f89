"""On-disk cache for learned factors.

Each entry is a pair of files named by a content hash of the filter spec,
``N``, ``K`` and the solver tolerance: a JSON manifest and the raw ``G1``
matrix as little-endian float64.  The directory defaults to
``~/.cache/sassdpr`` and can be moved with ``SASSDPR_CACHE_DIR``.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .factorization import FactorizedFilter, difference_matrix
from .spectral import CompositeFilter
from .zerophase import build_impulse_matrix

CACHE_ENV = "SASSDPR_CACHE_DIR"
_FORMAT = 1


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "sassdpr"


def _canonical(obj):
    # round floats so equal designs hash equally across platforms
    if isinstance(obj, float):
        return float(f"{obj:.15g}")
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (np.floating, np.integer)):
        return _canonical(obj.item())
    return obj


def factor_key(filter_spec: dict, N: int, K: int, eps: float) -> str:
    payload = json.dumps(_canonical({"filter": filter_spec, "N": int(N), "K": int(K),
                                     "eps": float(eps), "format": _FORMAT}),
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:32]


class FactorCache:
    """Directory of factor entries keyed by :func:`factor_key`."""

    def __init__(self, root: Optional[os.PathLike] = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def _paths(self, key: str):
        return self.root / f"{key}.json", self.root / f"{key}.f64"

    def get(self, filt: CompositeFilter, N: int, K: int, eps: float) -> Optional[FactorizedFilter]:
        key = factor_key(filt.spec(), N, K, eps)
        man_path, raw_path = self._paths(key)
        if not (man_path.exists() and raw_path.exists()):
            return None
        try:
            man = json.loads(man_path.read_text())
            G1 = np.fromfile(raw_path, dtype="<f8")
            G1 = G1.reshape(man["shape"]).astype(float, copy=False)
        except (OSError, ValueError, KeyError):
            return None
        return FactorizedFilter(build_impulse_matrix(filt.ss, N), G1, difference_matrix(N, K), K,
                                man["final_error"], man["iterations"], man["converged"])

    def put(self, filt: CompositeFilter, fac: FactorizedFilter, eps: float) -> Path:
        key = factor_key(filt.spec(), fac.N, fac.K, eps)
        man_path, raw_path = self._paths(key)
        self.root.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(fac.G1, dtype="<f8").tofile(raw_path)
        manifest = {"key": key, "filter": _canonical(filt.spec()), "N": fac.N, "K": fac.K,
                    "eps": eps, "shape": list(fac.G1.shape), "dtype": "<f8",
                    "final_error": fac.final_error, "iterations": fac.iterations,
                    "converged": fac.converged}
        man_path.write_text(json.dumps(manifest, indent=2))
        return man_path
