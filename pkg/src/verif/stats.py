"""Significant-digit estimators and sample summaries.

Two notions of significant digits in base beta:

  - against a known reference:   s  = -log_beta |(x_hat - x) / x|
  - from a Monte Carlo sample:   s' = -log_beta (sigma_hat / |mu_hat|)

The second needs no reference value; for a large number of trials it
approximates the digits shared by the sample distribution.  Standard
deviations use the n-1 divisor.  Negative estimates floor at zero ("no
significant digits"); an exact match (or zero spread) clamps at the
carrier's representable maximum, 15.95 digits in base 10 / 53 in base 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CLAMP_BASE10 = 15.95
CLAMP_BASE2 = 53.0


def _clamp_for(beta: int) -> float:
    return CLAMP_BASE2 if beta == 2 else CLAMP_BASE10


@dataclass(frozen=True)
class DigitsVsReference:
    s: float
    unbounded: bool = False  # x_hat == x_ref exactly; s holds the clamp
    absolute: bool = False  # x_ref was 0: absolute-error digits instead


@dataclass(frozen=True)
class SampleStats:
    n: int
    mean: float
    std: float  # n-1 divisor
    s2: float  # base-2 significant digits
    s10: float  # base-10 significant digits
    nan_count: int = 0
    exact: bool = False  # zero spread; s2/s10 hold the clamps
    valid: bool = True  # False when every sample was NaN


def sig_digits_vs_reference(x_hat: float, x_ref: float,
                            beta: int = 10) -> DigitsVsReference:
    """Digits of agreement between a computed value and a reference."""
    x_hat = float(x_hat)
    x_ref = float(x_ref)
    if math.isnan(x_hat):
        return DigitsVsReference(0.0)
    if x_ref == 0.0:
        # relative error undefined; fall back to absolute-error digits
        if x_hat == 0.0:
            return DigitsVsReference(_clamp_for(beta), unbounded=True,
                                     absolute=True)
        s = -math.log(abs(x_hat), beta)
        return DigitsVsReference(max(0.0, min(s, _clamp_for(beta))),
                                 absolute=True)
    if x_hat == x_ref:
        return DigitsVsReference(_clamp_for(beta), unbounded=True)
    rel = abs((x_hat - x_ref) / x_ref)
    if math.isinf(rel) or math.isnan(rel):
        return DigitsVsReference(0.0)
    s = -math.log(rel, beta)
    return DigitsVsReference(max(0.0, min(s, _clamp_for(beta))))


def s_prime(mean: float, std: float, beta: int = 10) -> float:
    """-log_beta(std/|mean|), floored at 0; clamped when std == 0."""
    if std == 0.0:
        return _clamp_for(beta)
    if mean == 0.0 or math.isnan(mean) or math.isnan(std):
        return 0.0
    s = -math.log(std / abs(mean), beta)
    return max(0.0, s)


def summarize(values, name: str = "") -> SampleStats:
    """Per-output sample summary; NaNs are excluded but counted."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ValueError("summarize needs at least 2 samples")
    nan_mask = np.isnan(arr)
    nan_count = int(nan_mask.sum())
    good = arr[~nan_mask]
    if good.shape[0] == 0:
        return SampleStats(arr.shape[0], math.nan, math.nan, 0.0, 0.0,
                           nan_count, exact=False, valid=False)
    mu = float(good.mean())
    sd = float(good.std(ddof=1)) if good.shape[0] > 1 else 0.0
    return SampleStats(
        n=int(arr.shape[0]),
        mean=mu,
        std=sd,
        s2=s_prime(mu, sd, 2),
        s10=s_prime(mu, sd, 10),
        nan_count=nan_count,
        exact=(sd == 0.0),
    )


def digits_evolution(trace_matrix: dict) -> list:
    """Digit-evolution series from per-sample traces.

    ``trace_matrix`` maps sample id -> list of (label, iteration, value).
    Every sample must have traced the same (label, iteration) sequence.
    Returns [(label, iteration, significant_bits)] in trace order, where
    significant bits is s' in base 2 across samples at that point.
    """
    if not trace_matrix:
        return []
    samples = sorted(trace_matrix)
    keys = [(lbl, it) for lbl, it, _ in trace_matrix[samples[0]]]
    columns = {k: [] for k in keys}
    for sid in samples:
        rows = trace_matrix[sid]
        if [(lbl, it) for lbl, it, _ in rows] != keys:
            raise ValueError(f"ragged trace for sample {sid}")
        for (lbl, it, v) in rows:
            columns[(lbl, it)].append(v)
    out = []
    for (lbl, it) in keys:
        vals = np.asarray(columns[(lbl, it)], dtype=np.float64)
        good = vals[~np.isnan(vals)]
        if good.shape[0] < 2:
            bits = 0.0
        else:
            bits = s_prime(float(good.mean()), float(good.std(ddof=1)), 2)
        out.append((lbl, it, bits))
    return out


def error_scaling_fit(points) -> float:
    """Least-squares slope of log(rel sigma) against log(n).

    ``points`` is a list of (n, relative_sigma) pairs with positive values;
    at least three are required.
    """
    pts = [(float(n), float(r)) for n, r in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points for a slope fit")
    if any(n <= 0 or r <= 0 for n, r in pts):
        raise ValueError("slope fit needs positive sizes and spreads")
    x = np.log([n for n, _ in pts])
    y = np.log([r for _, r in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
