"""Reference tree-walking evaluator.

Walks the checked AST directly, delegating every float operation and
comparison to the configured arithmetic backend.  This is the semantic
ground truth the compiled VM is tested against bit for bit; it is also
the only execution path for the CESTAC backend, whose three-component
values do not fit the scalar register machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import cestac as ce
from ..mca import (BackendConfig, MODE_CESTAC, _OP_BY_NAME, _mca_binary,
                   _mca_sqrt, exceptions_array, parse_carrier_literal)
from ..rng import RngStream
from . import ast
from .checker import CheckedProgram


class DslRuntimeError(Exception):
    pass


@dataclass
class TracePoint:
    label: str
    iteration: int  # innermost loop counter at emission, -1 outside loops
    value: object  # carrier float, or StochasticTriple under cestac


@dataclass
class EvalResult:
    outputs: dict  # name -> float (carrier) or StochasticTriple
    trace: list = field(default_factory=list)
    exceptions: np.ndarray = None

    def output_floats(self) -> dict:
        out = {}
        for k, v in self.outputs.items():
            out[k] = v.mean() if isinstance(v, ce.StochasticTriple) else v
        return out


class _Halt(Exception):
    pass


class _Interp:
    def __init__(self, checked: CheckedProgram, cfg: BackendConfig,
                 stream: RngStream | None, inputs: dict, trace_on: bool):
        self.checked = checked
        self.cfg = cfg
        self.stream = stream
        self.trace_on = trace_on
        self.trace: list[TracePoint] = []
        self.exc = exceptions_array()
        self.is_cestac = cfg.mode == MODE_CESTAC
        if cfg.mode != 0 and stream is None:
            raise ValueError("stochastic backends need an RngStream")
        if stream is None:
            # ieee never draws; keep the kernel signature satisfied
            self.state = np.zeros(312, dtype=np.uint64)
            self.pos = np.zeros(1, dtype=np.int64)
        else:
            self.state = stream.state
            self.pos = stream.pos
        self.env: dict[str, object] = {}
        self.loop_stack: list[str] = []
        self.literal_cache: dict[int, float] = {}
        self._bind(inputs or {})

    def _bind(self, inputs):
        carrier = self.cfg.carrier
        for name, sym in self.checked.symbols.items():
            if sym.kind == "loop":
                continue
            if sym.is_array:
                if sym.kind == "in":
                    if name not in inputs:
                        raise DslRuntimeError(f"missing input array {name!r}")
                    arr = np.asarray(inputs[name], dtype=np.float64)
                    if arr.shape != (sym.length,):
                        raise DslRuntimeError(
                            f"input {name!r} must have length {sym.length}")
                    if carrier == "binary32":
                        arr = arr.astype(np.float32).astype(np.float64)
                    self.env[name] = arr.copy()
                else:
                    self.env[name] = np.zeros(sym.length, dtype=np.float64)
            elif sym.kind == "in":
                if name not in inputs:
                    raise DslRuntimeError(f"missing input {name!r}")
                if sym.typ == "int":
                    self.env[name] = int(inputs[name])
                else:
                    v = float(inputs[name])
                    if carrier == "binary32":
                        v = float(np.float32(v))
                    self.env[name] = self._lift(v)
            else:
                self.env[name] = self._lift(0.0) if sym.typ == "float" else 0
        extra = set(inputs) - set(self.checked.in_params)
        if extra:
            raise DslRuntimeError(f"unknown inputs: {sorted(extra)}")

    def _lift(self, v: float):
        return ce.StochasticTriple.of(v) if self.is_cestac else float(v)

    def _literal(self, node: ast.FloatLit):
        v = self.literal_cache.get(id(node))
        if v is None:
            v = parse_carrier_literal(node.text, self.cfg.carrier)
            self.literal_cache[id(node)] = v
        return self._lift(v)

    # ---- execution ----

    def run(self) -> EvalResult:
        try:
            for s in self.checked.program.stmts:
                self.stmt(s)
        except _Halt:
            pass
        outputs = {name: self.env[name] for name in self.checked.outputs}
        return EvalResult(outputs, self.trace, self.exc)

    def stmt(self, s):
        if isinstance(s, ast.Assign):
            value = self.expr(s.expr)
            if s.index is not None:
                arr = self.env[s.name]
                idx = self.expr(s.index)
                if not 0 <= idx < arr.shape[0]:
                    raise DslRuntimeError(
                        f"index {idx} out of bounds for {s.name!r} "
                        f"(length {arr.shape[0]}) at line {s.line}")
                if self.is_cestac:
                    raise DslRuntimeError(
                        "array writes are not supported under cestac")
                arr[idx] = value
            else:
                self.env[s.name] = value
        elif isinstance(s, ast.For):
            start = self.expr(s.start)
            end = self.expr(s.end)
            self.loop_stack.append(s.var)
            i = start
            while i < end:
                self.env[s.var] = i
                for inner in s.body:
                    self.stmt(inner)
                i += 1
            self.loop_stack.pop()
        elif isinstance(s, ast.If):
            if self.cond(s.cond):
                for inner in s.then:
                    self.stmt(inner)
            elif s.els is not None:
                for inner in s.els:
                    self.stmt(inner)
        elif isinstance(s, ast.Trace):
            if self.trace_on:
                it = self.env[self.loop_stack[-1]] if self.loop_stack else -1
                self.trace.append(TracePoint(s.label, it, self.expr(s.expr)))
            else:
                self.expr(s.expr)  # keep draw sequences identical
        elif isinstance(s, ast.Return):
            raise _Halt()
        else:
            raise DslRuntimeError(f"unknown statement {type(s).__name__}")

    def cond(self, c: ast.Compare) -> bool:
        lhs = self.expr(c.lhs)
        rhs = self.expr(c.rhs)
        if self.is_cestac and c.lhs.typ == "float":
            return ce.cestac_compare(lhs, c.rel, rhs, self.exc)
        if c.rel == "<":
            return lhs < rhs
        if c.rel == "<=":
            return lhs <= rhs
        if c.rel == ">":
            return lhs > rhs
        if c.rel == ">=":
            return lhs >= rhs
        if c.rel == "==":
            return lhs == rhs
        return lhs != rhs

    def expr(self, e):
        if isinstance(e, ast.IntLit):
            return e.value
        if isinstance(e, ast.FloatLit):
            return self._literal(e)
        if isinstance(e, ast.Var):
            return self.env[e.name]
        if isinstance(e, ast.Index):
            arr = self.env[e.name]
            idx = self.expr(e.idx)
            if not 0 <= idx < arr.shape[0]:
                raise DslRuntimeError(
                    f"index {idx} out of bounds for {e.name!r} "
                    f"(length {arr.shape[0]}) at line {e.line}")
            return self._lift(float(arr[idx]))
        if isinstance(e, ast.BinOp):
            lhs = self.expr(e.lhs)
            rhs = self.expr(e.rhs)
            if e.typ == "int":
                if e.op == "+":
                    return lhs + rhs
                if e.op == "-":
                    return lhs - rhs
                if e.op == "*":
                    return lhs * rhs
                if e.op == "/":
                    if rhs == 0:
                        raise DslRuntimeError(
                            f"integer division by zero at line {e.line}")
                    return lhs // rhs
                if rhs == 0:
                    raise DslRuntimeError(
                        f"modulo by zero at line {e.line}")
                return lhs % rhs
            if self.is_cestac:
                return ce.cestac_binary(e.op, lhs, rhs, self.cfg,
                                        self.stream, self.exc)
            return float(_mca_binary(
                _OP_BY_NAME[e.op], lhs, rhs, self.cfg.mode, self.cfg.t,
                self.cfg.carrier32, self.cfg.zero_xi,
                self.state, self.pos, self.exc))
        if isinstance(e, ast.UnOp):
            v = self.expr(e.operand)
            if e.typ == "int":
                return -v
            if self.is_cestac:
                return ce.cestac_neg(v)
            return -v
        if isinstance(e, ast.Call):
            v = self.expr(e.arg)
            if e.fn == "fabs":
                if self.is_cestac:
                    return ce.cestac_fabs(v)
                return abs(v)
            if self.is_cestac:
                return ce.cestac_sqrt(v, self.cfg, self.stream, self.exc)
            return float(_mca_sqrt(
                v, self.cfg.mode, self.cfg.t, self.cfg.carrier32,
                self.cfg.zero_xi, self.state, self.pos, self.exc))
        raise DslRuntimeError(f"unknown expression {type(e).__name__}")


def evaluate(checked: CheckedProgram, cfg: BackendConfig,
             inputs: dict | None = None, stream: RngStream | None = None,
             trace: bool = False) -> EvalResult:
    """Run a checked program under the configured arithmetic backend."""
    return _Interp(checked, cfg, stream, inputs or {}, trace).run()
