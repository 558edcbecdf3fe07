"""Compiled execution of kernel programs.

A single numba-jitted register machine executes the opcode tables produced
by bytecode.py, with the arithmetic-backend kernels inlined at the call
sites.  One compilation (disk-cached) serves every program, so per-program
cost is just the AST-to-opcode lowering.  The tree-walking interpreter in
interp.py defines the semantics; the VM is required to match it bit for
bit, draw for draw, and the test suite enforces that on the whole corpus.

The CESTAC backend does not run here: its three-component values live in
the interpreter, which is fast enough for single synchronous runs.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import List

from ..mca import _mca_binary, _mca_sqrt
from ..rng import _stream_init
from .bytecode import (BRF_F, BRF_I, CodeObject, ERR_MESSAGES, FABS, FBIN,
                       FLOADA, FMOV, FMOVC, FNEG, FSQRT, FSTOREA, HALT, IBIN,
                       IMOV, IMOVC, INEG, JMP, TRACE, compile_program)
from .checker import CheckedProgram
from .interp import DslRuntimeError, EvalResult, TracePoint


@njit(cache=True)
def _rel_f(rel, a, b):
    if rel == 0:
        return a < b
    elif rel == 1:
        return a <= b
    elif rel == 2:
        return a > b
    elif rel == 3:
        return a >= b
    elif rel == 4:
        return a == b
    return a != b


@njit(cache=True)
def _rel_i(rel, a, b):
    if rel == 0:
        return a < b
    elif rel == 1:
        return a <= b
    elif rel == 2:
        return a > b
    elif rel == 3:
        return a >= b
    elif rel == 4:
        return a == b
    return a != b


@njit(cache=True)
def _vm_exec(code, fconst, F, I, mem, aoff, alen,
             mode, t, carrier32, zero_xi, state, pos, exc,
             trace_on, tl_label, tl_iter, tl_val, tl_sample, sample_id):
    pc = 0
    while True:
        op = code[pc, 0]
        a = code[pc, 1]
        b = code[pc, 2]
        c = code[pc, 3]
        d = code[pc, 4]
        if op == FBIN:
            F[a] = _mca_binary(d, F[b], F[c], mode, t, carrier32, zero_xi,
                               state, pos, exc)
        elif op == IBIN:
            if d == 0:
                I[a] = I[b] + I[c]
            elif d == 1:
                I[a] = I[b] - I[c]
            elif d == 2:
                I[a] = I[b] * I[c]
            elif d == 3:
                if I[c] == 0:
                    return 2, pc
                I[a] = I[b] // I[c]
            else:
                if I[c] == 0:
                    return 2, pc
                I[a] = I[b] % I[c]
        elif op == BRF_I:
            if not _rel_i(a, I[b], I[c]):
                pc = d
                continue
        elif op == BRF_F:
            if not _rel_f(a, F[b], F[c]):
                pc = d
                continue
        elif op == FLOADA:
            idx = I[c]
            if idx < 0 or idx >= alen[b]:
                return 1, pc
            F[a] = mem[aoff[b] + idx]
        elif op == FSTOREA:
            idx = I[b]
            if idx < 0 or idx >= alen[a]:
                return 1, pc
            mem[aoff[a] + idx] = F[c]
        elif op == FMOVC:
            F[a] = fconst[b]
        elif op == FMOV:
            F[a] = F[b]
        elif op == FSQRT:
            F[a] = _mca_sqrt(F[b], mode, t, carrier32, zero_xi,
                             state, pos, exc)
        elif op == FABS:
            F[a] = abs(F[b])
        elif op == FNEG:
            F[a] = -F[b]
        elif op == IMOVC:
            I[a] = b
        elif op == IMOV:
            I[a] = I[b]
        elif op == INEG:
            I[a] = -I[b]
        elif op == JMP:
            pc = a
            continue
        elif op == TRACE:
            if trace_on:
                tl_label.append(a)
                tl_iter.append(I[c] if c >= 0 else -1)
                tl_val.append(F[b])
                tl_sample.append(sample_id)
        else:  # HALT
            return 0, pc
        pc += 1


@njit(cache=True)
def _vm_batch(code, fconst, f_init, i_init, mem0, copy_mem, aoff, alen,
              out_regs, mode, t, carrier32, zero_xi, root_seed, k0, k1,
              exc, trace_on, tl_label, tl_iter, tl_val, tl_sample):
    n_out = out_regs.shape[0]
    outs = np.empty((k1 - k0, n_out), dtype=np.float64)
    state = np.empty(312, dtype=np.uint64)
    pos = np.empty(1, dtype=np.int64)
    mem = mem0
    for k in range(k0, k1):
        _stream_init(state, pos, root_seed, np.uint64(k))
        F = f_init.copy()
        I = i_init.copy()
        if copy_mem:
            mem = mem0.copy()
        err, pc = _vm_exec(code, fconst, F, I, mem, aoff, alen,
                           mode, t, carrier32, zero_xi, state, pos, exc,
                           trace_on, tl_label, tl_iter, tl_val, tl_sample, k)
        if err != 0:
            return outs, err, pc, k
        for j in range(n_out):
            outs[k - k0, j] = F[out_regs[j]]
    return outs, 0, -1, -1


def _empty_trace_lists():
    return (List.empty_list(types.int64), List.empty_list(types.int64),
            List.empty_list(types.float64), List.empty_list(types.int64))


class CompiledProgram:
    """A carrier-specific compiled kernel, runnable over sample ranges."""

    def __init__(self, checked: CheckedProgram, carrier: str):
        self.checked = checked
        self.obj: CodeObject = compile_program(checked, carrier)

    def build_mem(self, inputs: dict) -> np.ndarray:
        obj = self.obj
        mem = np.zeros(obj.mem_size, dtype=np.float64)
        for slot, (name, kind, length) in enumerate(obj.array_slots):
            if kind != "in":
                continue
            if name not in inputs:
                raise DslRuntimeError(f"missing input array {name!r}")
            arr = np.asarray(inputs[name], dtype=np.float64)
            if arr.shape != (length,):
                raise DslRuntimeError(
                    f"input {name!r} must have length {length}")
            if obj.carrier == "binary32":
                arr = arr.astype(np.float32).astype(np.float64)
            mem[obj.aoff[slot]:obj.aoff[slot] + length] = arr
        return mem

    def build_scalar_init(self, inputs: dict):
        obj = self.obj
        f_init = np.zeros(obj.nf, dtype=np.float64)
        i_init = np.zeros(obj.ni, dtype=np.int64)
        for name in obj.in_float_scalars:
            if name not in inputs:
                raise DslRuntimeError(f"missing input {name!r}")
            v = float(inputs[name])
            if obj.carrier == "binary32":
                v = float(np.float32(v))
            f_init[obj.f_names[name]] = v
        for name in obj.in_int_scalars:
            if name not in inputs:
                raise DslRuntimeError(f"missing input {name!r}")
            i_init[obj.i_names[name]] = int(inputs[name])
        return f_init, i_init

    def run_range(self, cfg, inputs: dict, root_seed: int, k0: int, k1: int,
                  trace: bool = False):
        """Run samples k0..k1-1; returns (outputs matrix, exc, trace points)."""
        obj = self.obj
        mem = self.build_mem(inputs or {})
        f_init, i_init = self.build_scalar_init(inputs or {})
        exc = np.zeros(4, dtype=np.int64)
        tl = _empty_trace_lists()
        outs, err, pc, k = _vm_batch(
            obj.code, obj.fconst, f_init, i_init, mem,
            obj.has_array_writes, obj.aoff, obj.alen, obj.out_regs,
            cfg.mode, cfg.t, cfg.carrier32, cfg.zero_xi,
            np.uint64(root_seed), k0, k1, exc,
            trace, tl[0], tl[1], tl[2], tl[3])
        if err != 0:
            line = "?"
            raise DslRuntimeError(
                f"{ERR_MESSAGES.get(err, 'runtime fault')} in "
                f"{obj.name!r} (sample {k}, instruction {pc})")
        points = None
        if trace:
            points = [(int(s), TracePoint(obj.label_of(int(l)), int(it),
                                          float(v)))
                      for l, it, v, s in zip(*tl)]
        return outs, exc, points

    def run_sample(self, cfg, inputs: dict, root_seed: int, k: int,
                   trace: bool = False) -> EvalResult:
        outs, exc, points = self.run_range(cfg, inputs, root_seed, k, k + 1,
                                           trace)
        outputs = {name: float(outs[0, j])
                   for j, name in enumerate(self.obj.out_names)}
        tps = [tp for _, tp in points] if points else []
        return EvalResult(outputs, tps, exc)


def warm_up():
    """Force the VM through one compile so forked workers inherit it."""
    from .parser import parse
    from .checker import check
    from ..mca import BackendConfig
    prog = check(parse("out float y; y = 1.0 + 2.0; return y;", "<warmup>"))
    for carrier in ("binary64",):
        cp = CompiledProgram(prog, carrier)
        cp.run_range(BackendConfig(kind="mca-rr", t=53), {}, 1, 0, 1)
