"""AST node types for the kernel language.

Every node carries the source line/column it came from.  Expression nodes
get a ``typ`` annotation ('float' or 'int') during checking.  Float
literals keep their decimal text so they can be resolved to the nearest
value of whichever carrier format the backend selects.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Node:
    line: int = 0
    col: int = 0


@dataclass
class Expr(Node):
    typ: str | None = None


@dataclass
class IntLit(Expr):
    value: int = 0


@dataclass
class FloatLit(Expr):
    text: str = "0.0"
    value: float = 0.0  # binary64 reading; carrier resolution happens later


@dataclass
class Var(Expr):
    name: str = ""


@dataclass
class Index(Expr):
    name: str = ""
    idx: Expr | None = None


@dataclass
class BinOp(Expr):
    op: str = "+"  # + - * / %
    lhs: Expr | None = None
    rhs: Expr | None = None


@dataclass
class UnOp(Expr):
    op: str = "-"
    operand: Expr | None = None


@dataclass
class Call(Expr):
    fn: str = "sqrt"  # sqrt | fabs
    arg: Expr | None = None


@dataclass
class Compare(Node):
    rel: str = "<"  # < <= > >= == !=
    lhs: Expr | None = None
    rhs: Expr | None = None


@dataclass
class Stmt(Node):
    pass


@dataclass
class Assign(Stmt):
    name: str = ""
    index: Expr | None = None  # array element target when not None
    expr: Expr | None = None


@dataclass
class For(Stmt):
    var: str = ""
    start: Expr | None = None
    end: Expr | None = None  # half-open: var runs over [start, end)
    body: list[Stmt] = field(default_factory=list)


@dataclass
class If(Stmt):
    cond: Compare | None = None
    then: list[Stmt] = field(default_factory=list)
    els: list[Stmt] | None = None


@dataclass
class Trace(Stmt):
    label: str = ""
    expr: Expr | None = None


@dataclass
class Return(Stmt):
    name: str = ""


@dataclass
class Decl(Node):
    kind: str = "var"  # in | out | var
    typ: str = "float"
    name: str = ""
    length: int | None = None  # array length when declared as an array


@dataclass
class Program(Node):
    name: str = "<program>"
    decls: list[Decl] = field(default_factory=list)
    stmts: list[Stmt] = field(default_factory=list)
