"""Benchmark cases: kernel programs, input generators, and exact oracles.

Five classic accuracy studies, each as a kernel-language program plus an
oracle that never touches any arithmetic backend (exact rationals or a
closed form):

  kahan_compensated  compensated summation of binary32 uniforms
  kahan_naive        the same inputs summed without compensation, in the
                     4-accumulator shape an optimizing compiler emits for
                     this reduction under value-unsafe fast-math flags
  linear_system      an ill-conditioned 2x2 solve by partial-pivot
                     Gaussian elimination (exact solution (2, -2))
  unstable_branch    a branch on a value that is pure round-off noise
  counter_paper      10^8 alternating updates of a large counter, where
                     the small decrement is absorbed below 1 ulp
  counter_desk       a desk-sized counter with the same absorption
                     phenomenon at ~10^5 iterations
  improbability      300 evaluations of one rational function in two
                     algebraically identical forms at points x + i*2^-53

The desk counter keeps the increment below 1 ulp of the running value
throughout (so round-to-nearest absorbs it) while using a non-dyadic
large increment so every addition actually rounds; its constants were
re-derived so that the relative spread of random-rounding samples stays
above one half, which is the property the desk scale exists to show.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from numba import njit

from .mca import parse_carrier_literal
from .rng import RngStream

KAHAN_INPUT_SEED = 20240531
IMPROB_X_TEXT = "1.60631924"
IMPROB_EPS = 2.0 ** -53
IMPROB_POINTS = 300

_DESK_BIG = "1234567.89"
_DESK_SMALL = "5.0e-9"
_DESK_ITERS = 100000
_DESK_C0 = "-61728394499.99999"  # nearest double to -(iters/2) * big


@dataclass
class CaseSpec:
    name: str
    source: str
    carrier: str  # the case's natural carrier format
    inputs: dict = field(default_factory=dict)
    exact: dict | None = None  # output name -> Fraction (backend-free oracle)
    reference: Callable | None = None  # native round-to-nearest evaluation
    notes: str = ""


def uniform_unit32(seed: int, n: int) -> np.ndarray:
    """n binary32 uniforms in [0, 1], deterministic in the seed."""
    u = RngStream(seed, 0).unit_centered_array(n) + 0.5
    return u.astype(np.float32)


# ---------------------------------------------------------------------------
# case 1: compensated summation
# ---------------------------------------------------------------------------

def _kahan_compensated_source(n: int) -> str:
    return f"""
in float f[{n}];
out float sum;
var float c;
var float y;
var float t;
sum = f[0];
c = 0.0;
for i = 1 to {n} {{
  y = f[i] - c;
  t = sum + y;
  c = (t - sum) - y;
  sum = t;
}}
return sum;
"""


def _kahan_naive_source(n: int) -> str:
    # four independent accumulators combined pairwise at the end: the
    # reduction shape a vectorizing compiler produces once fast-math
    # flags delete the compensation term
    assert n % 4 == 0
    return f"""
in float f[{n}];
out float sum;
var float s0;
var float s1;
var float s2;
var float s3;
s0 = f[0];
s1 = f[1];
s2 = f[2];
s3 = f[3];
for i = 1 to {n // 4} {{
  s0 = s0 + f[4 * i];
  s1 = s1 + f[4 * i + 1];
  s2 = s2 + f[4 * i + 2];
  s3 = s3 + f[4 * i + 3];
}}
sum = (s0 + s1) + (s2 + s3);
return sum;
"""


def _kahan_reference(values32: np.ndarray, variant: str) -> dict:
    f = values32.astype(np.float32)
    if variant == "compensated":
        s = f[0]
        c = np.float32(0.0)
        for i in range(1, f.shape[0]):
            y = np.float32(f[i] - c)
            t = np.float32(s + y)
            c = np.float32(np.float32(t - s) - y)
            s = t
        return {"sum": float(s)}
    acc = [f[0], f[1], f[2], f[3]]
    for i in range(1, f.shape[0] // 4):
        for j in range(4):
            acc[j] = np.float32(acc[j] + f[4 * i + j])
    s01 = np.float32(acc[0] + acc[1])
    s23 = np.float32(acc[2] + acc[3])
    return {"sum": float(np.float32(s01 + s23))}


def kahan_sum_case(variant: str, n: int = 100000,
                   input_seed: int = KAHAN_INPUT_SEED) -> CaseSpec:
    if variant not in ("compensated", "naive"):
        raise ValueError(f"unknown kahan variant {variant!r}")
    if variant == "naive" and n % 4:
        raise ValueError("naive variant needs n divisible by 4")
    if n < 4:
        raise ValueError("need n >= 4")
    values = uniform_unit32(input_seed, n)
    src = (_kahan_compensated_source(n) if variant == "compensated"
           else _kahan_naive_source(n))
    exact = {"sum": sum(Fraction(float(v)) for v in values)}
    return CaseSpec(
        name=f"kahan_{variant}",
        source=src,
        carrier="binary32",
        inputs={"f": values},
        exact=exact,
        reference=lambda v=values, var=variant: _kahan_reference(v, var),
        notes="uniform [0,1] inputs, condition number 1",
    )


# ---------------------------------------------------------------------------
# case 2: ill-conditioned 2x2 linear system
# ---------------------------------------------------------------------------

_LINSYS_SOURCE = """
out float x1;
out float x2;
var float a11; var float a12; var float b1;
var float a21; var float a22; var float b2;
var float m; var float u22; var float y2;
a11 = 0.2161; a12 = 0.1441; b1 = 0.1440;
a21 = 1.2969; a22 = 0.8648; b2 = 0.8642;
if (fabs(a21) > fabs(a11)) {
  m = a11 / a21;
  u22 = a12 - m * a22;
  y2 = b1 - m * b2;
  x2 = y2 / u22;
  x1 = (b2 - a22 * x2) / a21;
} else {
  m = a21 / a11;
  u22 = a22 - m * a12;
  y2 = b2 - m * b1;
  x2 = y2 / u22;
  x1 = (b1 - a12 * x2) / a11;
}
"""


def _linsys_reference(carrier: str) -> dict:
    conv = (lambda t: np.float32(parse_carrier_literal(t, "binary32"))) \
        if carrier == "binary32" else (lambda t: np.float64(float(t)))
    a11, a12, b1 = conv("0.2161"), conv("0.1441"), conv("0.1440")
    a21, a22, b2 = conv("1.2969"), conv("0.8648"), conv("0.8642")
    one = type(a11)
    if abs(a21) > abs(a11):
        m = one(a11 / a21)
        u22 = one(a12 - one(m * a22))
        y2 = one(b1 - one(m * b2))
        x2 = one(y2 / u22)
        x1 = one(one(b2 - one(a22 * x2)) / a21)
    else:
        m = one(a21 / a11)
        u22 = one(a22 - one(m * a12))
        y2 = one(b2 - one(m * b1))
        x2 = one(y2 / u22)
        x1 = one(one(b1 - one(a12 * x2)) / a11)
    return {"x1": float(x1), "x2": float(x2)}


def linear_system_case(precision: str = "binary64") -> CaseSpec:
    A = [[Fraction("0.2161"), Fraction("0.1441")],
         [Fraction("1.2969"), Fraction("0.8648")]]
    b = [Fraction("0.1440"), Fraction("0.8642")]
    det = A[0][0] * A[1][1] - A[0][1] * A[1][0]
    x1 = (b[0] * A[1][1] - A[0][1] * b[1]) / det
    x2 = (A[0][0] * b[1] - b[0] * A[1][0]) / det
    return CaseSpec(
        name="linear_system",
        source=_LINSYS_SOURCE,
        carrier=precision,
        exact={"x1": x1, "x2": x2},  # (2, -2) for the stated system
        reference=lambda c=precision: _linsys_reference(c),
        notes="partial-pivot Gaussian elimination",
    )


# ---------------------------------------------------------------------------
# case 3: unstable branching
# ---------------------------------------------------------------------------

_BRANCH_SOURCE = """
out float c;
var float a;
var float b;
a = 2.0 * sqrt(3.0) / 3.0;
b = a * a - a * a;
if (b >= 0.0) {
  c = sqrt(b) + 10.0;
} else {
  c = sqrt(-b) + 10.0;
}
return c;
"""


def unstable_branch_case() -> CaseSpec:
    return CaseSpec(
        name="unstable_branch",
        source=_BRANCH_SOURCE,
        carrier="binary64",
        exact={"c": Fraction(10)},
        reference=lambda: {"c": 10.0},
        notes="branch guard on a pure round-off value",
    )


# ---------------------------------------------------------------------------
# case 4: alternating counter
# ---------------------------------------------------------------------------

_COUNTER_PAPER_SOURCE = """
out float c;
c = -5.0e13;
for i = 0 to 100000000 {
  if (i % 2 == 0) {
    c = c + 1.0e6;
  } else {
    c = c - 1.0e-6;
  }
}
return c;
"""

_COUNTER_DESK_SOURCE = f"""
out float c;
c = {_DESK_C0};
for i = 0 to {_DESK_ITERS} {{
  if (i % 2 == 0) {{
    c = c + {_DESK_BIG};
  }} else {{
    c = c - {_DESK_SMALL};
  }}
}}
return c;
"""


@njit(cache=True)
def _counter_loop(c0, iters, big, small):
    c = c0
    for i in range(iters):
        if i % 2 == 0:
            c = c + big
        else:
            c = c - small
    return c


def _counter_reference(scale: str) -> dict:
    if scale == "paper":
        return {"c": float(_counter_loop(-5.0e13, 100000000, 1.0e6, 1.0e-6))}
    return {"c": float(_counter_loop(float(_DESK_C0), _DESK_ITERS,
                                     float(_DESK_BIG), float(_DESK_SMALL)))}


def counter_case(scale: str = "desk") -> CaseSpec:
    if scale == "paper":
        exact = (Fraction(-5.0e13) + 50000000 * Fraction(1.0e6)
                 - 50000000 * Fraction(float("1e-6")))
        src = _COUNTER_PAPER_SOURCE
        notes = "10^8 iterations; exact value -50 up to the literal rounding"
    elif scale == "desk":
        half = _DESK_ITERS // 2
        exact = (Fraction(float(_DESK_C0)) + half * Fraction(float(_DESK_BIG))
                 - half * Fraction(float(_DESK_SMALL)))
        src = _COUNTER_DESK_SOURCE
        notes = "desk-sized variant preserving sub-ulp absorption"
    else:
        raise ValueError(f"unknown counter scale {scale!r}")
    return CaseSpec(
        name=f"counter_{scale}",
        source=src,
        carrier="binary64",
        exact={"c": exact},
        reference=lambda s=scale: _counter_reference(s),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# case 5: improbability series
# ---------------------------------------------------------------------------

_IMPROB_SOURCE = """
in float x;
in float dx;
out float kh;
var float xx;
var float cf;
var float rp;
xx = x + dx;
cf = 4.0 - (3.0 * (xx - 2.0) * ((xx - 5.0) * (xx - 5.0) + 4.0))
     / (xx + (xx - 2.0) * (xx - 2.0) * ((xx - 5.0) * (xx - 5.0) + 3.0));
rp = (622.0 - xx * (751.0 - xx * (324.0 - xx * (59.0 - 4.0 * xx))))
     / (112.0 - xx * (151.0 - xx * (72.0 - xx * (14.0 - xx))));
kh = cf - rp;
return kh;
"""


def improbability_inputs(i: int) -> dict:
    return {"x": float(IMPROB_X_TEXT), "dx": i * IMPROB_EPS}


def _improbability_reference(i: int) -> dict:
    x = float(IMPROB_X_TEXT) + i * IMPROB_EPS
    cf = 4.0 - (3.0 * (x - 2.0) * ((x - 5.0) * (x - 5.0) + 4.0)) \
        / (x + (x - 2.0) * (x - 2.0) * ((x - 5.0) * (x - 5.0) + 3.0))
    rp = (622.0 - x * (751.0 - x * (324.0 - x * (59.0 - 4.0 * x)))) \
        / (112.0 - x * (151.0 - x * (72.0 - x * (14.0 - x))))
    return {"kh": cf - rp}


def improbability_case() -> CaseSpec:
    # both forms are the same rational function, so the exact difference
    # at equal arguments is identically zero; everything measured here is
    # evaluation round-off
    return CaseSpec(
        name="improbability",
        source=_IMPROB_SOURCE,
        carrier="binary64",
        inputs=improbability_inputs(1),
        exact={"kh": Fraction(0)},
        reference=lambda: _improbability_reference(1),
        notes="continued-fraction vs polynomial-ratio form of one function",
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_BUILDERS = {
    "kahan_compensated": lambda p: kahan_sum_case("compensated", **p),
    "kahan_naive": lambda p: kahan_sum_case("naive", **p),
    "linear_system": lambda p: linear_system_case(**p),
    "unstable_branch": lambda p: unstable_branch_case(**p),
    "counter_paper": lambda p: counter_case("paper", **p),
    "counter_desk": lambda p: counter_case("desk", **p),
    "improbability": lambda p: improbability_case(**p),
}


def case_names() -> list:
    return sorted(_BUILDERS)


def resolve(name: str, params: dict | None = None) -> CaseSpec:
    """Build a corpus case by name; params forward to its constructor."""
    builder = _BUILDERS.get(name)
    if builder is None:
        raise KeyError(f"unknown corpus case {name!r}; "
                       f"known: {', '.join(case_names())}")
    return builder(dict(params or {}))
