"""Synchronous stochastic arithmetic with three components (CESTAC/DSA).

Every floating point value is carried as a triple of carrier floats that
evolve through the same sequence of source-level operations.  Each
operation computes its exact result once per component (as a double-word)
and rounds it toward +inf or -inf: the first two components use
independently drawn random directions, the third uses the direction the
second did not.  Comparisons are reconciled to a single outcome for all
three components using the mean of each triple, which preserves synchrony
but can send a component down a branch its own value would not have taken.

Directed rounding is emulated from round-to-nearest plus the error-free
residual: since ``hi`` is the nearest carrier float and ``lo`` the exact
remainder, the two directed values are ``hi`` and its neighbour on the
side of ``lo``.  This is portable, thread-safe and bit-exactly testable;
no FPU mode switching is involved.

The digit estimate for a triple uses Student's distribution with N = 3
samples at 95% confidence (tau = 4.303, two degrees of freedom):

    digits = log10( sqrt(3) * |mean| / (sigma * tau) )

clamped to [0, 15.95]; a value whose estimate is zero (or whose mean is
zero, or which contains a NaN component) is numerical noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .mca import (
    BackendConfig, DoubleWord, EXC_CESTAC_ALL_NAN_COMPARE,
    EXC_CESTAC_NOISE_BRANCH, EXC_SQRT_NEGATIVE, OP_ADD, OP_DIV, OP_MUL,
    OP_SUB, _NO_EXC, _op_dw, _sqrt_dw, _OP_BY_NAME,
)
from .rng import RngStream, _next_unit_centered

N_COMPONENTS = 3
STUDENT_TAU_95 = 4.303  # two degrees of freedom
DIGITS_CLAMP_10 = 15.95

TOWARD_POS_INF = 1
TOWARD_NEG_INF = 0

_FLT32_MAX = 3.4028234663852886e38
_FLT32_TINY = 1.401298464324817e-45  # 2**-149


@dataclass(frozen=True)
class StochasticTriple:
    v: tuple[float, float, float]
    op_count: int = 0

    @staticmethod
    def of(x: float) -> "StochasticTriple":
        x = float(x)
        return StochasticTriple((x, x, x), 0)

    def mean(self) -> float:
        return (self.v[0] + self.v[1] + self.v[2]) / 3.0

    def has_nan(self) -> bool:
        return any(math.isnan(x) for x in self.v)


@dataclass(frozen=True)
class CestacDigits:
    digits: float
    is_noise: bool


@njit(cache=True)
def _next32(z, up):
    # one binary32 ulp toward +/-inf; z is a float32-valued float64
    if math.isnan(z):
        return z
    if z == 0.0:
        return _FLT32_TINY if up else -_FLT32_TINY
    if not np.isfinite(z):
        return z
    az = abs(z)
    m, e = math.frexp(az)
    step_exp = e - 24
    if step_exp < -149:
        step_exp = -149
    step = math.ldexp(1.0, step_exp)
    toward_zero = (up and z < 0.0) or ((not up) and z > 0.0)
    if toward_zero and m == 0.5 and step_exp > -149:
        step *= 0.5  # crossing down into the next binade
    nz = z + step if up else z - step
    if nz > _FLT32_MAX:
        return np.inf
    if nz < -_FLT32_MAX:
        return -np.inf
    return nz


@njit(cache=True)
def _directed_round(hi, lo, up, carrier32):
    """Round the exact double-word value toward +inf (up) or -inf."""
    if carrier32:
        v = hi + lo
        z = np.float64(np.float32(v))
        if math.isnan(z) or not np.isfinite(z):
            return z
        r = (hi - z) + lo
    else:
        z = hi
        if math.isnan(z) or not np.isfinite(z):
            return z
        r = lo
    if up:
        if r > 0.0:
            return _next32(z, True) if carrier32 else math.nextafter(z, np.inf)
        return z
    if r < 0.0:
        return _next32(z, False) if carrier32 else math.nextafter(z, -np.inf)
    return z


@njit(cache=True)
def _cestac_binary_kern(op, a0, a1, a2, b0, b1, b2, carrier32,
                        state, pos, exc):
    # direction draws: sign of one unit draw each for components 1 and 2;
    # component 3 takes the direction component 2 did not use
    up1 = _next_unit_centered(state, pos) >= 0.0
    up2 = _next_unit_centered(state, pos) >= 0.0
    h0, l0 = _op_dw(op, a0, b0, exc)
    h1, l1 = _op_dw(op, a1, b1, exc)
    h2, l2 = _op_dw(op, a2, b2, exc)
    c0 = _directed_round(h0, l0, up1, carrier32)
    c1 = _directed_round(h1, l1, up2, carrier32)
    c2 = _directed_round(h2, l2, not up2, carrier32)
    return c0, c1, c2


@njit(cache=True)
def _cestac_sqrt_comp(a, up, carrier32, exc):
    if a < 0.0:
        exc[EXC_SQRT_NEGATIVE] += 1
        return np.nan
    h, l = _sqrt_dw(a, exc)
    return _directed_round(h, l, up, carrier32)


@njit(cache=True)
def _cestac_sqrt_kern(a0, a1, a2, carrier32, state, pos, exc):
    up1 = _next_unit_centered(state, pos) >= 0.0
    up2 = _next_unit_centered(state, pos) >= 0.0
    c0 = _cestac_sqrt_comp(a0, up1, carrier32, exc)
    c1 = _cestac_sqrt_comp(a1, up2, carrier32, exc)
    c2 = _cestac_sqrt_comp(a2, not up2, carrier32, exc)
    return c0, c1, c2


def directed_round(exact: DoubleWord, mode: int,
                   carrier: str = "binary64") -> float:
    """Public directed rounding of a double-word to the carrier grid."""
    return float(_directed_round(exact.hi, exact.lo, mode == TOWARD_POS_INF,
                                 carrier == "binary32"))


def cestac_binary(op: str, a: StochasticTriple, b: StochasticTriple,
                  cfg: BackendConfig, stream: RngStream,
                  exc: np.ndarray | None = None) -> StochasticTriple:
    code = _OP_BY_NAME[op]
    if exc is None:
        exc = _NO_EXC
    c = _cestac_binary_kern(code, a.v[0], a.v[1], a.v[2],
                            b.v[0], b.v[1], b.v[2],
                            cfg.carrier32, stream.state, stream.pos, exc)
    return StochasticTriple((float(c[0]), float(c[1]), float(c[2])),
                            max(a.op_count, b.op_count) + 1)


def cestac_sqrt(a: StochasticTriple, cfg: BackendConfig, stream: RngStream,
                exc: np.ndarray | None = None) -> StochasticTriple:
    if exc is None:
        exc = _NO_EXC
    c = _cestac_sqrt_kern(a.v[0], a.v[1], a.v[2], cfg.carrier32,
                          stream.state, stream.pos, exc)
    return StochasticTriple((float(c[0]), float(c[1]), float(c[2])),
                            a.op_count + 1)


def cestac_neg(a: StochasticTriple) -> StochasticTriple:
    return StochasticTriple(tuple(-x for x in a.v), a.op_count)


def cestac_fabs(a: StochasticTriple) -> StochasticTriple:
    return StochasticTriple(tuple(abs(x) for x in a.v), a.op_count)


def cestac_digits(a: StochasticTriple) -> CestacDigits:
    """Student-based significant-digit estimate of a triple."""
    if a.has_nan():
        return CestacDigits(0.0, True)
    m = a.mean()
    var = sum((x - m) ** 2 for x in a.v) / (N_COMPONENTS - 1)
    sigma = math.sqrt(var)
    if m == 0.0:
        return CestacDigits(0.0, True)
    if sigma == 0.0:
        return CestacDigits(DIGITS_CLAMP_10, False)
    d = math.log10(math.sqrt(N_COMPONENTS) * abs(m) / (sigma * STUDENT_TAU_95))
    if d <= 0.0:
        return CestacDigits(0.0, True)
    return CestacDigits(min(d, DIGITS_CLAMP_10), False)


def _reconciled_mean(a: StochasticTriple) -> tuple[float, int]:
    finite = [x for x in a.v if not math.isnan(x)]
    if not finite:
        return 0.0, 0
    return sum(finite) / len(finite), len(finite)


def _spread(a: StochasticTriple) -> float:
    finite = [x for x in a.v if not math.isnan(x)]
    if len(finite) < 2:
        return 0.0
    return max(finite) - min(finite)


_REL_FUNCS = {
    "lt": lambda x, y: x < y,
    "le": lambda x, y: x <= y,
    "gt": lambda x, y: x > y,
    "ge": lambda x, y: x >= y,
    "eq": lambda x, y: x == y,
    "ne": lambda x, y: x != y,
    "<": lambda x, y: x < y,
    "<=": lambda x, y: x <= y,
    ">": lambda x, y: x > y,
    ">=": lambda x, y: x >= y,
    "==": lambda x, y: x == y,
    "!=": lambda x, y: x != y,
}


def cestac_compare(a: StochasticTriple, rel: str, b: StochasticTriple,
                   exc: np.ndarray | None = None) -> bool:
    """Single reconciled branch outcome: the relation on the triple means.

    NaN components fall out of the mean; if a side is entirely NaN the
    comparison is False and the all-NaN instability counter ticks.  A
    comparison whose operands carry no significant digits (noise with a
    nonzero spread) ticks the noise-branch counter.
    """
    if exc is None:
        exc = _NO_EXC
    ma, na = _reconciled_mean(a)
    mb, nb = _reconciled_mean(b)
    if na == 0 or nb == 0:
        exc[EXC_CESTAC_ALL_NAN_COMPARE] += 1
        return False
    for t in (a, b):
        if _spread(t) > 0.0 and cestac_digits(t).is_noise:
            exc[EXC_CESTAC_NOISE_BRANCH] += 1
            break
    return bool(_REL_FUNCS[rel](ma, mb))
