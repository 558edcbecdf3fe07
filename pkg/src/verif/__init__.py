"""Stochastic floating-point verification toolkit.

Run small numerical kernels under interchangeable arithmetic backends
(IEEE-754 reference, Monte Carlo Arithmetic in rr/pb/full modes,
synchronous three-component CESTAC), collect Monte Carlo samples in
parallel, and estimate the significant digits of every program output.
"""

from .mca import (BackendConfig, DoubleWord, two_sum, two_prod, inexact,
                  mca_binary, mca_sqrt)
from .cestac import (StochasticTriple, CestacDigits, directed_round,
                     cestac_binary, cestac_compare, cestac_digits,
                     cestac_sqrt)
from .rng import RngStream, new_stream, splitmix64, derive_seed
from .stats import (DigitsVsReference, SampleStats, sig_digits_vs_reference,
                    summarize, digits_evolution, error_scaling_fit)
from .dsl import parse, check, evaluate, CompiledProgram
from .harness import ExperimentSpec, Report, run_experiment, emit_report
from .checks import run_corpus, ManifestError

__version__ = "0.1.0"

__all__ = [
    "BackendConfig", "DoubleWord", "two_sum", "two_prod", "inexact",
    "mca_binary", "mca_sqrt",
    "StochasticTriple", "CestacDigits", "directed_round", "cestac_binary",
    "cestac_compare", "cestac_digits", "cestac_sqrt",
    "RngStream", "new_stream", "splitmix64", "derive_seed",
    "DigitsVsReference", "SampleStats", "sig_digits_vs_reference",
    "summarize", "digits_evolution", "error_scaling_fit",
    "parse", "check", "evaluate", "CompiledProgram",
    "ExperimentSpec", "Report", "run_experiment", "emit_report",
    "run_corpus", "ManifestError",
]
