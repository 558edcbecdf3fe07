"""AST to register-machine opcodes.

The compiled form is a flat int64 instruction table executed by the numba
VM in vm.py.  One CodeObject is specific to a carrier format because float
literals are resolved to the nearest carrier value at compile time.

All literal constants are hoisted into registers by a prologue, so loop
bodies pay no per-iteration constant loads, and `for` loops compile to a
bottom-tested shape whose increment+test+backjump is a single LOOPI
instruction.

Instruction layout: [opcode, a, b, c, d]

    HALT                                   stop
    FBIN    dst, lhs, rhs, subop           float op (0 + 1 - 2 * 3 /)
    FSQRT   dst, src
    FABS    dst, src
    FNEG    dst, src
    FMOVC   dst, const_index               prologue only
    FMOV    dst, src
    FLOADA  dst, slot, idx_ireg            bounds-checked array read
    FSTOREA slot, idx_ireg, src_freg       bounds-checked array write
    IBIN    dst, lhs, rhs, subop           int op (0 + 1 - 2 * 3 // 4 %)
    IMOVC   dst, immediate                 prologue only
    IMOV    dst, src
    INEG    dst, src
    JMP     target
    BRF_F   rel, lhs, rhs, target          jump when the relation is false
    BRF_I   rel, lhs, rhs, target
    LOOPI   counter, end, top              ++counter; if counter < end goto top
    TRACE   label_id, freg, iter_ireg      iter_ireg == -1 outside loops
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mca import parse_carrier_literal
from . import ast
from .checker import CheckedProgram

HALT = 0
FBIN = 1
FSQRT = 2
FABS = 3
FNEG = 4
FMOVC = 5
FMOV = 6
FLOADA = 7
FSTOREA = 8
IBIN = 9
IMOVC = 10
IMOV = 11
INEG = 12
JMP = 13
BRF_F = 14
BRF_I = 15
LOOPI = 16
TRACE = 17

_FSUB = {"+": 0, "-": 1, "*": 2, "/": 3}
_ISUB = {"+": 0, "-": 1, "*": 2, "/": 3, "%": 4}
_REL = {"<": 0, "<=": 1, ">": 2, ">=": 3, "==": 4, "!=": 5}

ERR_NONE = 0
ERR_INDEX = 1
ERR_INT_DIV_ZERO = 2

ERR_MESSAGES = {
    ERR_INDEX: "array index out of bounds",
    ERR_INT_DIV_ZERO: "integer division or modulo by zero",
}


@dataclass
class CodeObject:
    name: str
    carrier: str
    code: np.ndarray  # int64[n, 5]
    fconst: np.ndarray  # float64[]
    nf: int
    ni: int
    f_names: dict  # scalar float name -> freg
    i_names: dict  # scalar int name -> ireg
    array_slots: list  # (name, kind, length) in slot order
    aoff: np.ndarray
    alen: np.ndarray
    mem_size: int
    out_names: list
    out_regs: np.ndarray  # int64[]
    in_float_scalars: list
    in_int_scalars: list
    trace_labels: list
    has_array_writes: bool

    def label_of(self, label_id: int) -> str:
        return self.trace_labels[label_id]


def _literal_value(e: ast.FloatLit, carrier: str) -> float:
    return parse_carrier_literal(e.text, carrier)


class _Compiler:
    def __init__(self, checked: CheckedProgram, carrier: str):
        self.checked = checked
        self.carrier = carrier
        self.rows: list[list[int]] = []
        self.fconst: list[float] = []
        self.f_names: dict[str, int] = {}
        self.i_names: dict[str, int] = {}
        self.array_slots: list[tuple[str, str, int]] = []
        self.slot_of: dict[str, int] = {}
        self.trace_labels: list[str] = []
        self.label_ids: dict[str, int] = {}
        self.loop_counters: list[int] = []
        self.loop_reg_of: dict[str, int] = {}
        self.return_jumps: list[int] = []

        for name, sym in checked.symbols.items():
            if sym.is_array:
                self.slot_of[name] = len(self.array_slots)
                self.array_slots.append((name, sym.kind, sym.length))
            elif sym.typ == "float":
                self.f_names[name] = len(self.f_names)
            elif sym.kind != "loop":
                self.i_names[name] = len(self.i_names)

        # constants live in dedicated registers loaded by the prologue
        self.fconst_reg: dict[int, int] = {}  # value bits -> freg
        self.iconst_reg: dict[int, int] = {}
        self.next_freg = len(self.f_names)
        self.next_ireg = len(self.i_names)
        self._collect_consts(checked.program.stmts)
        self.ftemp_base = self.next_freg
        self.max_ftemp = 0
        self.max_itemp = 0

    # ---- constant pre-pass ----

    def _freg_of_const(self, value: float) -> int:
        key = hash(np.float64(value).tobytes())
        reg = self.fconst_reg.get(key)
        if reg is None:
            reg = self.next_freg
            self.next_freg += 1
            self.fconst_reg[key] = reg
            self.fconst.append(float(value))
        return reg

    def _ireg_of_const(self, value: int) -> int:
        reg = self.iconst_reg.get(value)
        if reg is None:
            reg = self.next_ireg
            self.next_ireg += 1
            self.iconst_reg[value] = reg
        return reg

    def _folded_literal(self, e):
        # -literal folds to a negated constant
        if isinstance(e, ast.UnOp) and isinstance(e.operand, ast.FloatLit):
            return -_literal_value(e.operand, self.carrier)
        if isinstance(e, ast.FloatLit):
            return _literal_value(e, self.carrier)
        return None

    def _folded_int_literal(self, e):
        if isinstance(e, ast.UnOp) and isinstance(e.operand, ast.IntLit):
            return -e.operand.value
        if isinstance(e, ast.IntLit):
            return e.value
        return None

    def _collect_expr(self, e):
        fv = self._folded_literal(e)
        if fv is not None:
            self._freg_of_const(fv)
            return
        iv = self._folded_int_literal(e)
        if iv is not None:
            self._ireg_of_const(iv)
            return
        if isinstance(e, ast.BinOp):
            self._collect_expr(e.lhs)
            self._collect_expr(e.rhs)
        elif isinstance(e, ast.UnOp):
            self._collect_expr(e.operand)
        elif isinstance(e, ast.Call):
            self._collect_expr(e.arg)
        elif isinstance(e, ast.Index):
            self._collect_expr(e.idx)

    def _collect_consts(self, stmts):
        for s in stmts:
            if isinstance(s, ast.Assign):
                if s.index is not None:
                    self._collect_expr(s.index)
                self._collect_expr(s.expr)
            elif isinstance(s, ast.For):
                self._collect_expr(s.start)
                self._collect_expr(s.end)
                self._collect_consts(s.body)
            elif isinstance(s, ast.If):
                self._collect_expr(s.cond.lhs)
                self._collect_expr(s.cond.rhs)
                self._collect_consts(s.then)
                if s.els is not None:
                    self._collect_consts(s.els)
            elif isinstance(s, ast.Trace):
                self._collect_expr(s.expr)

    # ---- emission ----

    def emit(self, *row) -> int:
        padded = list(row) + [0] * (5 - len(row))
        self.rows.append(padded)
        return len(self.rows) - 1

    def note_ftemp(self, ftop):
        used = ftop + 1 - self.ftemp_base
        if used > self.max_ftemp:
            self.max_ftemp = used

    def note_itemp(self, itop):
        used = itop + 1 - self.next_ireg
        if used > self.max_itemp:
            self.max_itemp = used

    def fexpr(self, e, ftop, itop, dst=None) -> int:
        fv = self._folded_literal(e)
        if fv is not None:
            return self._freg_of_const(fv)
        if isinstance(e, ast.Var):
            return self.f_names[e.name]
        target = dst if dst is not None else ftop
        if dst is None:
            self.note_ftemp(ftop)
        if isinstance(e, ast.Index):
            idx_reg = self.iexpr(e.idx, itop)
            self.emit(FLOADA, target, self.slot_of[e.name], idx_reg)
            return target
        if isinstance(e, ast.BinOp):
            r1 = self.fexpr(e.lhs, ftop, itop)
            next_ftop = ftop + 1 if r1 == ftop else ftop
            r2 = self.fexpr(e.rhs, next_ftop, itop)
            self.emit(FBIN, target, r1, r2, _FSUB[e.op])
            return target
        if isinstance(e, ast.UnOp):
            r = self.fexpr(e.operand, ftop, itop)
            self.emit(FNEG, target, r)
            return target
        if isinstance(e, ast.Call):
            r = self.fexpr(e.arg, ftop, itop)
            self.emit(FSQRT if e.fn == "sqrt" else FABS, target, r)
            return target
        raise AssertionError(f"unexpected float expr {type(e).__name__}")

    def iexpr(self, e, itop, dst=None) -> int:
        iv = self._folded_int_literal(e)
        if iv is not None:
            return self._ireg_of_const(iv)
        if isinstance(e, ast.Var):
            if e.name in self.i_names:
                return self.i_names[e.name]
            return self.loop_reg_of[e.name]
        target = dst if dst is not None else itop
        if dst is None:
            self.note_itemp(itop)
        if isinstance(e, ast.BinOp):
            r1 = self.iexpr(e.lhs, itop)
            next_itop = itop + 1 if r1 == itop else itop
            r2 = self.iexpr(e.rhs, next_itop)
            self.emit(IBIN, target, r1, r2, _ISUB[e.op])
            return target
        if isinstance(e, ast.UnOp):
            r = self.iexpr(e.operand, itop)
            self.emit(INEG, target, r)
            return target
        raise AssertionError(f"unexpected int expr {type(e).__name__}")

    # ---- statements ----

    def alloc_fixed_ireg(self) -> int:
        r = self.next_ireg
        self.next_ireg += 1
        return r

    def stmt(self, s):
        ftop = self.ftemp_base
        itop = self.next_ireg
        if isinstance(s, ast.Assign):
            if s.index is not None:
                r = self.fexpr(s.expr, ftop, itop)
                idx = self.iexpr(s.index, itop)
                self.emit(FSTOREA, self.slot_of[s.name], idx, r)
            elif s.expr.typ == "float":
                dst = self.f_names[s.name]
                hint = dst if isinstance(s.expr,
                                         (ast.BinOp, ast.UnOp, ast.Call,
                                          ast.Index)) else None
                # a bare -literal folds to a const register, so the hint
                # only applies to genuinely computed expressions
                if self._folded_literal(s.expr) is not None:
                    hint = None
                r = self.fexpr(s.expr, ftop, itop, dst=hint)
                if r != dst:
                    self.emit(FMOV, dst, r)
            else:
                dst = self.i_names[s.name]
                hint = dst if isinstance(s.expr, (ast.BinOp, ast.UnOp)) \
                    else None
                if self._folded_int_literal(s.expr) is not None:
                    hint = None
                r = self.iexpr(s.expr, itop, dst=hint)
                if r != dst:
                    self.emit(IMOV, dst, r)
        elif isinstance(s, ast.For):
            counter = self.alloc_fixed_ireg()
            end_reg = self.alloc_fixed_ireg()
            self.loop_reg_of[s.var] = counter
            r = self.iexpr(s.start, self.next_ireg)
            if r != counter:
                self.emit(IMOV, counter, r)
            r = self.iexpr(s.end, self.next_ireg)
            if r != end_reg:
                self.emit(IMOV, end_reg, r)
            entry = self.emit(BRF_I, _REL["<"], counter, end_reg, -1)
            top = len(self.rows)
            self.loop_counters.append(counter)
            for inner in s.body:
                self.stmt(inner)
            self.loop_counters.pop()
            self.emit(LOOPI, counter, end_reg, top)
            self.rows[entry][4] = len(self.rows)
            del self.loop_reg_of[s.var]
        elif isinstance(s, ast.If):
            c = s.cond
            if c.lhs.typ == "float":
                r1 = self.fexpr(c.lhs, ftop, itop)
                nft = ftop + 1 if r1 == ftop else ftop
                r2 = self.fexpr(c.rhs, nft, itop)
                br = self.emit(BRF_F, _REL[c.rel], r1, r2, -1)
            else:
                r1 = self.iexpr(c.lhs, itop)
                nit = itop + 1 if r1 == itop else itop
                r2 = self.iexpr(c.rhs, nit)
                br = self.emit(BRF_I, _REL[c.rel], r1, r2, -1)
            for inner in s.then:
                self.stmt(inner)
            if s.els is not None:
                jend = self.emit(JMP, -1)
                self.rows[br][4] = len(self.rows)
                for inner in s.els:
                    self.stmt(inner)
                self.rows[jend][1] = len(self.rows)
            else:
                self.rows[br][4] = len(self.rows)
        elif isinstance(s, ast.Trace):
            r = self.fexpr(s.expr, ftop, itop)
            label_id = self.label_ids.setdefault(s.label,
                                                 len(self.trace_labels))
            if label_id == len(self.trace_labels):
                self.trace_labels.append(s.label)
            it_reg = self.loop_counters[-1] if self.loop_counters else -1
            self.emit(TRACE, label_id, r, it_reg)
        elif isinstance(s, ast.Return):
            self.return_jumps.append(self.emit(JMP, -1))
        else:
            raise AssertionError(f"unexpected statement {type(s).__name__}")

    def run(self) -> CodeObject:
        # prologue: materialize every constant once
        for key_bits, reg in self.fconst_reg.items():
            pass
        for idx, (key, reg) in enumerate(self.fconst_reg.items()):
            self.emit(FMOVC, reg, idx)
        for value, reg in self.iconst_reg.items():
            self.emit(IMOVC, reg, value)
        for s in self.checked.program.stmts:
            self.stmt(s)
        end = len(self.rows)
        self.emit(HALT)
        for j in self.return_jumps:
            self.rows[j][1] = end

        offs, lens = [], []
        off = 0
        for _, _, length in self.array_slots:
            offs.append(off)
            lens.append(length)
            off += length
        syms = self.checked.symbols
        out_regs = np.array([self.f_names[n] for n in self.checked.outputs],
                            dtype=np.int64)
        in_floats = [n for n in self.checked.in_params
                     if not syms[n].is_array and syms[n].typ == "float"]
        in_ints = [n for n in self.checked.in_params
                   if not syms[n].is_array and syms[n].typ == "int"]
        return CodeObject(
            name=self.checked.name,
            carrier=self.carrier,
            code=np.array(self.rows, dtype=np.int64),
            fconst=np.array(self.fconst, dtype=np.float64),
            nf=self.ftemp_base + self.max_ftemp,
            ni=self.next_ireg + self.max_itemp,
            f_names=dict(self.f_names),
            i_names=dict(self.i_names),
            array_slots=list(self.array_slots),
            aoff=np.array(offs, dtype=np.int64),
            alen=np.array(lens, dtype=np.int64),
            mem_size=off,
            out_names=list(self.checked.outputs),
            out_regs=out_regs,
            in_float_scalars=in_floats,
            in_int_scalars=in_ints,
            trace_labels=self.trace_labels,
            has_array_writes=self.checked.has_array_writes,
        )


def compile_program(checked: CheckedProgram, carrier: str) -> CodeObject:
    """Lower a checked program to VM opcodes for one carrier format."""
    return _Compiler(checked, carrier).run()
