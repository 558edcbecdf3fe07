"""Monte Carlo Arithmetic at a configurable virtual precision.

Values move between instrumented operations in a concrete IEEE-754 carrier
format (binary32 or binary64).  Inside one operation the exact result is
held as a double-word: an unevaluated, non-overlapping sum ``hi + lo`` of
two binary64 floats, built with error-free transformations (TwoSum, Dekker
TwoProd, division and square root with exact residual correction).  The
double-word carries enough precision (~106 bits) to apply sub-ulp random
perturbations at any virtual precision ``t`` up to the carrier's native
width, without an arbitrary-precision library.

The randomization of a value ``v`` at virtual precision ``t`` is

    inexact(v) = v + 2**(e_v - t) * xi

where ``e_v`` is the magnitude exponent of v (2**(e_v-1) <= |v| < 2**e_v)
and ``xi`` is uniform in [-0.5, 0.5).  The three operating modes differ in
where the randomization is applied:

    rr   (random rounding)      x o y -> round(inexact(x o y))
    pb   (precision bounding)   x o y -> round(inexact(x) o inexact(y))
    full (inbound + outbound)   x o y -> round(inexact(inexact(x) o inexact(y)))

``round`` collapses the double-word to the nearest carrier float.  Binary32
carriers compute through binary64 internally; because 53 >= 2*24 + 2, the
intermediate rounding is innocuous and the ieee mode stays bit-identical to
native binary32 arithmetic.

Conventions (fixed, so runs are reproducible):
  - one fresh xi per inexact() call, always consumed, even when the value
    is zero or non-finite and passes through unperturbed;
  - draw order for a binary op is operand-left, operand-right, result
    (rr consumes 1 draw, pb 2, full 3; sqrt: operand then result);
  - exact zero is never perturbed (it has no exponent); NaN and infinities
    propagate untouched;
  - subnormals perturb at their effective magnitude exponent, so the noise
    shrinks with the value instead of flushing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .rng import RngStream, _next_unit_centered

# mode codes shared with the kernels and the bytecode VM
MODE_IEEE = 0
MODE_RR = 1
MODE_PB = 2
MODE_FULL = 3
MODE_CESTAC = 4

_MODE_BY_KIND = {
    "ieee": MODE_IEEE,
    "mca-rr": MODE_RR,
    "mca-pb": MODE_PB,
    "mca-full": MODE_FULL,
    "cestac": MODE_CESTAC,
}

OP_ADD = 0
OP_SUB = 1
OP_MUL = 2
OP_DIV = 3
_OP_BY_NAME = {"add": OP_ADD, "sub": OP_SUB, "mul": OP_MUL, "div": OP_DIV,
               "+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}

# exception counter slots (int64 array shared with kernels / VM / interpreter)
EXC_SQRT_NEGATIVE = 0
EXC_RESIDUAL_FLUSH = 1
EXC_CESTAC_NOISE_BRANCH = 2
EXC_CESTAC_ALL_NAN_COMPARE = 3
N_EXC = 4
EXC_NAMES = ("sqrt_negative", "residual_flush",
             "cestac_noise_branch", "cestac_all_nan_compare")

CARRIER_BITS = {"binary32": 24, "binary64": 53}


@dataclass(frozen=True)
class BackendConfig:
    """Which arithmetic to run, and at what virtual precision.

    ``zero_xi`` forces every xi draw to 0; it exists for degeneracy testing
    (any MCA mode with xi == 0 must match the ieee backend bit for bit).
    """

    kind: str = "ieee"
    t: int = 53
    beta: int = 10
    carrier: str = "binary64"
    zero_xi: bool = False

    def __post_init__(self):
        if self.kind not in _MODE_BY_KIND:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.carrier not in CARRIER_BITS:
            raise ValueError(f"unknown carrier {self.carrier!r}")
        if self.beta not in (2, 10):
            raise ValueError(f"beta must be 2 or 10, got {self.beta}")
        tmax = CARRIER_BITS[self.carrier]
        if not 1 <= self.t <= tmax:
            raise ValueError(
                f"virtual precision t={self.t} out of range [1, {tmax}] "
                f"for {self.carrier}")

    @property
    def mode(self) -> int:
        return _MODE_BY_KIND[self.kind]

    @property
    def carrier32(self) -> bool:
        return self.carrier == "binary32"


class DoubleWord(NamedTuple):
    """Unevaluated exact sum hi + lo; hi is the rounded-to-nearest value."""

    hi: float
    lo: float

    def value(self) -> float:
        return self.hi + self.lo


def exceptions_array() -> np.ndarray:
    return np.zeros(N_EXC, dtype=np.int64)


def exceptions_dict(exc: np.ndarray) -> dict:
    return {name: int(exc[i]) for i, name in enumerate(EXC_NAMES)}


# ---------------------------------------------------------------------------
# error-free transformation kernels (binary64)
# ---------------------------------------------------------------------------

_SPLITTER = 134217729.0  # 2**27 + 1
_SPLIT_GUARD = 2.0 ** 996  # Dekker split overflows beyond this magnitude


@njit(cache=True)
def _two_sum(a, b):
    # Knuth: exact for all finite a, b
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@njit(cache=True)
def _two_sum_guarded(a, b):
    s = a + b
    if not np.isfinite(s):
        return s, 0.0
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True)
def _two_prod(a, b, exc):
    p = a * b
    if p == 0.0 or not np.isfinite(p):
        if not np.isfinite(p) and np.isfinite(a) and np.isfinite(b):
            exc[EXC_RESIDUAL_FLUSH] += 1
        return p, 0.0
    if abs(a) > _SPLIT_GUARD or abs(b) > _SPLIT_GUARD or abs(p) < 3e-292:
        # split would overflow / residual not representable: drop it
        exc[EXC_RESIDUAL_FLUSH] += 1
        return p, 0.0
    ah = _SPLITTER * a
    ah = ah - (ah - a)
    al = a - ah
    bh = _SPLITTER * b
    bh = bh - (bh - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


@njit(cache=True)
def _div_dw(a, b, exc):
    """a / b as (quotient, exact-residual correction)."""
    q = a / b
    if q == 0.0 or not np.isfinite(q):
        return q, 0.0
    p, e = _two_prod(q, b, exc)
    return q, ((a - p) - e) / b


@njit(cache=True)
def _sqrt_dw(a, exc):
    """sqrt(a) for a >= 0 as (root, residual correction)."""
    r = np.sqrt(a)
    if r == 0.0 or not np.isfinite(r):
        return r, 0.0
    p, e = _two_prod(r, r, exc)
    return r, ((a - p) - e) / (2.0 * r)


@njit(cache=True)
def _op_dw(op, a, b, exc):
    """Carrier scalars -> double-word result of a o b."""
    if op == OP_ADD:
        return _two_sum_guarded(a, b)
    elif op == OP_SUB:
        return _two_sum_guarded(a, -b)
    elif op == OP_MUL:
        return _two_prod(a, b, exc)
    else:
        return _div_dw(a, b, exc)


# double-double arithmetic, used when operands are already perturbed
# double-words (pb / full modes)

@njit(cache=True)
def _dd_add(ah, al, bh, bl):
    sh, sl = _two_sum(ah, bh)
    th, tl = _two_sum(al, bl)
    sl += th
    sh, sl = _two_sum(sh, sl)
    sl += tl
    return _two_sum(sh, sl)


@njit(cache=True)
def _dd_mul(ah, al, bh, bl, exc):
    ph, pl = _two_prod(ah, bh, exc)
    if not np.isfinite(ph):
        return ph, 0.0
    pl += ah * bl + al * bh
    return _two_sum(ph, pl)


@njit(cache=True)
def _dd_div(ah, al, bh, bl, exc):
    q1 = (ah + al) / (bh + bl)
    if q1 == 0.0 or not np.isfinite(q1):
        return q1, 0.0
    th, tl = _two_prod(q1, bh, exc)
    rh = ((ah - th) - tl) + al - q1 * bl
    q2 = rh / bh
    return _two_sum(q1, q2)


@njit(cache=True)
def _dd_sqrt(ah, al, exc):
    if ah == 0.0 and al == 0.0:
        return 0.0, 0.0
    r = np.sqrt(ah)
    if r == 0.0 or not np.isfinite(r):
        return r, 0.0
    p, e = _two_prod(r, r, exc)
    d = (((ah - p) - e) + al) / (2.0 * r)
    return _two_sum(r, d)


@njit(cache=True)
def _dd_op(op, ah, al, bh, bl, exc):
    if op == OP_ADD:
        return _dd_add(ah, al, bh, bl)
    elif op == OP_SUB:
        return _dd_add(ah, al, -bh, -bl)
    elif op == OP_MUL:
        return _dd_mul(ah, al, bh, bl, exc)
    else:
        return _dd_div(ah, al, bh, bl, exc)


# ---------------------------------------------------------------------------
# randomization and rounding
# ---------------------------------------------------------------------------

@njit(cache=True)
def _inexact(hi, lo, t, state, pos, zero_xi):
    """Add 2**(e-t) * xi to the double-word; one draw is always consumed."""
    xi = _next_unit_centered(state, pos)
    if zero_xi:
        xi = 0.0
    if not np.isfinite(hi):
        return hi, 0.0
    if hi == 0.0 and lo == 0.0:
        return hi, lo
    if xi == 0.0:
        return hi, lo
    _, e = math.frexp(hi)
    delta = math.ldexp(xi, e - t)
    s, err = _two_sum(hi, delta)
    return _two_sum(s, lo + err)


@njit(cache=True)
def _dw_round(hi, lo, carrier32):
    """Collapse a double-word to the nearest carrier float (as binary64)."""
    v = hi + lo
    if carrier32:
        return np.float64(np.float32(v))
    return v


@njit(cache=True)
def _ieee_binary(op, a, b, carrier32):
    if op == OP_ADD:
        v = a + b
    elif op == OP_SUB:
        v = a - b
    elif op == OP_MUL:
        v = a * b
    else:
        v = a / b
    if carrier32:
        return np.float64(np.float32(v))
    return v


@njit(cache=True)
def _mca_binary(op, a, b, mode, t, carrier32, zero_xi, state, pos, exc):
    if mode == MODE_IEEE:
        return _ieee_binary(op, a, b, carrier32)
    if op == OP_DIV and b == 0.0:
        # IEEE special result, never perturbed
        return _ieee_binary(op, a, b, carrier32)
    if mode == MODE_RR:
        h, l = _op_dw(op, a, b, exc)
        h, l = _inexact(h, l, t, state, pos, zero_xi)
        return _dw_round(h, l, carrier32)
    ah, al = _inexact(a, 0.0, t, state, pos, zero_xi)
    bh, bl = _inexact(b, 0.0, t, state, pos, zero_xi)
    h, l = _dd_op(op, ah, al, bh, bl, exc)
    if mode == MODE_FULL:
        h, l = _inexact(h, l, t, state, pos, zero_xi)
    return _dw_round(h, l, carrier32)


@njit(cache=True)
def _mca_sqrt(a, mode, t, carrier32, zero_xi, state, pos, exc):
    if a < 0.0:
        exc[EXC_SQRT_NEGATIVE] += 1
        return np.nan
    if mode == MODE_IEEE:
        v = np.sqrt(a)
        if carrier32:
            return np.float64(np.float32(v))
        return v
    if mode == MODE_RR:
        h, l = _sqrt_dw(a, exc)
        h, l = _inexact(h, l, t, state, pos, zero_xi)
        return _dw_round(h, l, carrier32)
    ah, al = _inexact(a, 0.0, t, state, pos, zero_xi)
    h, l = _dd_sqrt(ah, al, exc)
    if mode == MODE_FULL:
        h, l = _inexact(h, l, t, state, pos, zero_xi)
    return _dw_round(h, l, carrier32)


# ---------------------------------------------------------------------------
# python-level API
# ---------------------------------------------------------------------------

_NO_EXC = np.zeros(N_EXC, dtype=np.int64)


def two_sum(a: float, b: float) -> DoubleWord:
    """Exact a + b as a double-word; hi is the rounded-to-nearest sum."""
    h, l = _two_sum_guarded(float(a), float(b))
    return DoubleWord(float(h), float(l))


def two_prod(a: float, b: float, exc: np.ndarray | None = None) -> DoubleWord:
    """Exact a * b as a double-word (Dekker split residual)."""
    h, l = _two_prod(float(a), float(b), _NO_EXC if exc is None else exc)
    return DoubleWord(float(h), float(l))


def div_dw(a: float, b: float, exc: np.ndarray | None = None) -> DoubleWord:
    h, l = _div_dw(float(a), float(b), _NO_EXC if exc is None else exc)
    return DoubleWord(float(h), float(l))


def sqrt_dw(a: float, exc: np.ndarray | None = None) -> DoubleWord:
    h, l = _sqrt_dw(float(a), _NO_EXC if exc is None else exc)
    return DoubleWord(float(h), float(l))


def inexact(v: DoubleWord, t: int, stream: RngStream,
            zero_xi: bool = False) -> DoubleWord:
    """Randomize a double-word at virtual precision t (one draw consumed)."""
    h, l = _inexact(v.hi, v.lo, t, stream.state, stream.pos, zero_xi)
    return DoubleWord(float(h), float(l))


def mca_binary(op: str, a: float, b: float, cfg: BackendConfig,
               stream: RngStream | None = None,
               exc: np.ndarray | None = None) -> float:
    """One instrumented binary operation under the configured backend."""
    code = _OP_BY_NAME[op]
    if exc is None:
        exc = _NO_EXC
    if cfg.mode == MODE_IEEE:
        return float(_ieee_binary(code, float(a), float(b), cfg.carrier32))
    if stream is None:
        raise ValueError("MCA modes need an RngStream")
    return float(_mca_binary(code, float(a), float(b), cfg.mode, cfg.t,
                             cfg.carrier32, cfg.zero_xi,
                             stream.state, stream.pos, exc))


def mca_sqrt(a: float, cfg: BackendConfig,
             stream: RngStream | None = None,
             exc: np.ndarray | None = None) -> float:
    """Instrumented square root; negative input yields NaN and a counter tick."""
    if exc is None:
        exc = _NO_EXC
    if cfg.mode == MODE_IEEE or stream is None:
        if cfg.mode != MODE_IEEE and stream is None:
            raise ValueError("MCA modes need an RngStream")
        return float(_mca_sqrt(float(a), MODE_IEEE, cfg.t, cfg.carrier32,
                               False, _NO_EXC_STATE, _NO_EXC_POS, exc))
    return float(_mca_sqrt(float(a), cfg.mode, cfg.t, cfg.carrier32,
                           cfg.zero_xi, stream.state, stream.pos, exc))


# dummy state for ieee-mode calls that never draw
_NO_EXC_STATE = np.zeros(312, dtype=np.uint64)
_NO_EXC_POS = np.zeros(1, dtype=np.int64)


def float32_of_decimal(text: str) -> float:
    """Correctly rounded binary32 value of a decimal literal, as a float.

    Parsing through binary64 first can double-round on exact ties, so the
    binary64 result is checked against its binary32 neighbours with exact
    rational arithmetic.
    """
    from fractions import Fraction

    v64 = float(text)
    if not math.isfinite(v64):
        return v64
    c = np.float32(v64)
    if not np.isfinite(c):
        return float(c)
    exact = Fraction(text)
    lo = np.nextafter(c, np.float32(-np.inf))
    hi = np.nextafter(c, np.float32(np.inf))
    best = c
    best_err = abs(exact - Fraction(float(c)))
    for cand in (lo, hi):
        err = abs(exact - Fraction(float(cand)))
        if err < best_err:
            best, best_err = cand, err
        elif err == best_err and cand != best:
            # exact tie between neighbours: pick the even significand
            if (np.frombuffer(np.float32(cand).tobytes(), dtype=np.uint32)[0]
                    & 1) == 0:
                best = cand
    return float(np.float32(best))


def parse_carrier_literal(text: str, carrier: str) -> float:
    """Decimal literal -> nearest carrier value, held exactly in binary64."""
    if carrier == "binary32":
        return float32_of_decimal(text)
    return float(text)
