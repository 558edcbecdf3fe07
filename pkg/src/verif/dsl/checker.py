"""Name resolution and type checking for parsed kernel programs."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast


class CheckError(Exception):
    def __init__(self, message, node=None):
        if node is not None:
            message = f"{message} at line {node.line}, column {node.col}"
        super().__init__(message)


@dataclass
class Symbol:
    kind: str  # in | out | var | loop
    typ: str  # float | int
    length: int | None = None

    @property
    def is_array(self) -> bool:
        return self.length is not None


@dataclass
class CheckedProgram:
    program: ast.Program
    symbols: dict[str, Symbol]
    outputs: list[str]  # output scalars in declaration order
    in_params: list[str]  # declared inputs in order
    trace_labels: list[str]
    has_array_writes: bool = False

    @property
    def name(self) -> str:
        return self.program.name


def _coerce_float(e: ast.Expr) -> ast.Expr:
    """Allow integer literals where a float is required; reject int exprs."""
    if isinstance(e, ast.IntLit):
        lit = ast.FloatLit(e.line, e.col, text=str(e.value),
                           value=float(e.value))
        lit.typ = "float"
        return lit
    if e.typ != "float":
        raise CheckError("expected a float expression, found int", e)
    return e


class _Checker:
    def __init__(self, prog: ast.Program):
        self.prog = prog
        self.symbols: dict[str, Symbol] = {}
        self.outputs: list[str] = []
        self.in_params: list[str] = []
        self.trace_labels: list[str] = []
        self.loop_vars: list[str] = []
        self.has_array_writes = False

    def run(self) -> CheckedProgram:
        for d in self.prog.decls:
            self.decl(d)
        for s in self.prog.stmts:
            self.stmt(s)
        return CheckedProgram(self.prog, self.symbols, self.outputs,
                              self.in_params, self.trace_labels,
                              self.has_array_writes)

    def decl(self, d: ast.Decl):
        if d.name in self.symbols:
            raise CheckError(f"redeclaration of {d.name!r}", d)
        if d.length is not None:
            if d.kind == "out":
                raise CheckError("outputs must be scalars", d)
            if d.typ != "float":
                raise CheckError("arrays must be float", d)
            if d.length <= 0:
                raise CheckError("array length must be positive", d)
        self.symbols[d.name] = Symbol(d.kind, d.typ, d.length)
        if d.kind == "out":
            if d.typ != "float":
                raise CheckError("outputs must be float scalars", d)
            self.outputs.append(d.name)
        elif d.kind == "in":
            self.in_params.append(d.name)

    def lookup(self, name, node) -> Symbol:
        sym = self.symbols.get(name)
        if sym is None:
            raise CheckError(f"undeclared identifier {name!r}", node)
        return sym

    # ---- statements ----

    def stmt(self, s):
        if isinstance(s, ast.Assign):
            self.assign(s)
        elif isinstance(s, ast.For):
            self.for_stmt(s)
        elif isinstance(s, ast.If):
            self.if_stmt(s)
        elif isinstance(s, ast.Trace):
            s.expr = _coerce_float(self.expr(s.expr))
            self.trace_labels.append(s.label)
        elif isinstance(s, ast.Return):
            sym = self.lookup(s.name, s)
            if sym.is_array:
                raise CheckError("cannot return an array", s)
            if sym.typ != "float":
                raise CheckError("returned value must be float", s)
            if s.name not in self.outputs:
                self.outputs.append(s.name)
        else:
            raise CheckError(f"unknown statement {type(s).__name__}", s)

    def assign(self, s: ast.Assign):
        sym = self.lookup(s.name, s)
        if sym.kind == "loop":
            raise CheckError(f"loop counter {s.name!r} cannot be assigned", s)
        value = self.expr(s.expr)
        if s.index is not None:
            if not sym.is_array:
                raise CheckError(f"{s.name!r} is not an array", s)
            if sym.kind == "in":
                raise CheckError(f"input array {s.name!r} is read-only", s)
            idx = self.expr(s.index)
            if idx.typ != "int":
                raise CheckError("array index must be an integer", s.index)
            s.index = idx
            s.expr = _coerce_float(value)
            self.has_array_writes = True
            return
        if sym.is_array:
            raise CheckError(f"array {s.name!r} needs an index", s)
        if sym.typ == "float":
            s.expr = _coerce_float(value)
        else:
            if value.typ != "int":
                raise CheckError(
                    f"cannot assign a float to int {s.name!r}", s)
            s.expr = value

    def for_stmt(self, s: ast.For):
        start = self.expr(s.start)
        end = self.expr(s.end)
        if start.typ != "int" or end.typ != "int":
            raise CheckError("loop bounds must be integer expressions", s)
        s.start, s.end = start, end
        if s.var in self.symbols:
            raise CheckError(
                f"loop counter {s.var!r} shadows an existing name", s)
        self.symbols[s.var] = Symbol("loop", "int")
        self.loop_vars.append(s.var)
        for inner in s.body:
            self.stmt(inner)
        self.loop_vars.pop()
        # counters go out of scope at loop exit; the name may be reused
        # by a later (non-nested) loop
        del self.symbols[s.var]

    def if_stmt(self, s: ast.If):
        lhs = self.expr(s.cond.lhs)
        rhs = self.expr(s.cond.rhs)
        if lhs.typ == "float" or rhs.typ == "float":
            lhs, rhs = _coerce_float(lhs), _coerce_float(rhs)
        s.cond.lhs, s.cond.rhs = lhs, rhs
        for inner in s.then:
            self.stmt(inner)
        if s.els is not None:
            for inner in s.els:
                self.stmt(inner)

    # ---- expressions ----

    def expr(self, e) -> ast.Expr:
        if isinstance(e, ast.IntLit):
            e.typ = "int"
        elif isinstance(e, ast.FloatLit):
            e.typ = "float"
        elif isinstance(e, ast.Var):
            sym = self.lookup(e.name, e)
            if sym.is_array:
                raise CheckError(f"array {e.name!r} needs an index", e)
            e.typ = sym.typ
        elif isinstance(e, ast.Index):
            sym = self.lookup(e.name, e)
            if not sym.is_array:
                raise CheckError(f"{e.name!r} is not an array", e)
            idx = self.expr(e.idx)
            if idx.typ != "int":
                raise CheckError("array index must be an integer", e)
            e.idx = idx
            e.typ = "float"
        elif isinstance(e, ast.BinOp):
            lhs = self.expr(e.lhs)
            rhs = self.expr(e.rhs)
            if e.op == "%":
                if lhs.typ != "int" or rhs.typ != "int":
                    raise CheckError("% needs integer operands", e)
                e.typ = "int"
            elif lhs.typ == "float" or rhs.typ == "float":
                lhs, rhs = _coerce_float(lhs), _coerce_float(rhs)
                e.typ = "float"
            else:
                e.typ = "int"
            e.lhs, e.rhs = lhs, rhs
        elif isinstance(e, ast.UnOp):
            operand = self.expr(e.operand)
            e.operand = operand
            e.typ = operand.typ
        elif isinstance(e, ast.Call):
            e.arg = _coerce_float(self.expr(e.arg))
            e.typ = "float"
        else:
            raise CheckError(f"unknown expression {type(e).__name__}", e)
        return e


def check(prog: ast.Program) -> CheckedProgram:
    """Resolve names and assign types; raises CheckError on the first fault."""
    return _Checker(prog).run()
