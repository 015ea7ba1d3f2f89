"""Zero-phase IIR filters as matrices and sparsity-assisted signal models.

Submodules
----------
statespace    transfer functions, state-space models, Gramians, balancing
spectral      Butterworth prototypes and low/high/band-pass spectral transformation
zerophase     ``Gf^T Gf`` operators and padding
factorization sparse-derivative factorization of zero-phase high-pass filters
dictionaries  windowed wavelet and STFT tight frames
solvers       TV denoising, FISTA, SASD, SAPR and SASDPR
events        TKEO detection, scoring and grid search
pipelines     presets and benchmark tables
"""

__version__ = "0.1.0"

from .errors import (ConfigError, NoConvergence, SassdprError)  # noqa: E402
from .statespace import (StateSpaceModel, TransferFunction, balance_internally,  # noqa: E402
                         solve_lyapunov, tf_to_ss, ss_to_tf)
from .spectral import CompositeFilter, design_filter, make_unit_function  # noqa: E402
from .zerophase import ZeroPhaseOperator, PaddingPolicy, pad_signal, unpad_signal  # noqa: E402
from .factorization import FactorizedFilter, factorize_filter  # noqa: E402
from .dictionaries import StftDictionary, WdwtDictionary  # noqa: E402
from .solvers import fista_l1, sapr, sasd, sasdpr, tvd  # noqa: E402
from .events import detect_events, score_events, tkeo  # noqa: E402

__all__ = [
    "ConfigError", "NoConvergence", "SassdprError",
    "StateSpaceModel", "TransferFunction", "balance_internally", "solve_lyapunov",
    "tf_to_ss", "ss_to_tf",
    "CompositeFilter", "design_filter", "make_unit_function",
    "ZeroPhaseOperator", "PaddingPolicy", "pad_signal", "unpad_signal",
    "FactorizedFilter", "factorize_filter",
    "StftDictionary", "WdwtDictionary",
    "fista_l1", "sapr", "sasd", "sasdpr", "tvd",
    "detect_events", "score_events", "tkeo",
]
