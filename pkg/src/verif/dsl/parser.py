"""Lexer and LL(1) recursive-descent parser for the kernel language.

Grammar (half-open `for`, braces required around blocks):

    program := decl* stmt*
    decl    := ("in"|"out"|"var") type? ident ("[" intlit "]")? ";"
    type    := "float" | "int"            (defaults to float when omitted)
    stmt    := assign | for | if | trace | return
    assign  := ident ("[" expr "]")? "=" expr ";"
    for     := "for" ident "=" expr "to" expr "{" stmt* "}"
    if      := "if" "(" cond ")" block ("else" block)?
    block   := "{" stmt* "}"
    trace   := "trace" "(" string "," expr ")" ";"
    return  := "return" ident ";"
    cond    := expr relop expr
    expr    := term (("+"|"-") term)*
    term    := unary (("*"|"/"|"%") unary)*
    unary   := "-" unary | primary
    primary := number | ident ("[" expr "]")? | "(" expr ")"
             | "sqrt" "(" expr ")" | "fabs" "(" expr ")"

Float literals are decimal with an optional exponent and are resolved to
the nearest carrier value when a backend is chosen.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast

KEYWORDS = {"in", "out", "var", "float", "int", "for", "to", "if", "else",
            "trace", "return", "sqrt", "fabs"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<float>(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op><=|>=|==|!=|[-+*/%<>=;,(){}\[\]])
""", re.VERBOSE)


class ParseError(Exception):
    def __init__(self, message, line, col, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(expected))
        detail = f"{message} at line {line}, column {col}"
        if self.expected:
            detail += " (expected " + " or ".join(self.expected) + ")"
        super().__init__(detail)


@dataclass
class Token:
    kind: str  # float int ident string op keyword eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ws", "comment"):
            pass
        elif kind == "ident" and tok in KEYWORDS:
            tokens.append(Token("keyword", tok, line, col))
        else:
            tokens.append(Token(kind, tok, line, col))
        pos = m.end()
    tokens.append(Token("eof", "<eof>", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, message, expected=()):
        t = self.peek()
        raise ParseError(f"{message}, got {t.text!r}", t.line, t.col, expected)

    def expect(self, kind, text=None):
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            self.error("syntax error", expected=(text or kind,))
        return self.advance()

    def at(self, kind, text=None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def at_keyword(self, *words) -> bool:
        t = self.peek()
        return t.kind == "keyword" and t.text in words

    # ---- grammar ----

    def program(self, name) -> ast.Program:
        first = self.peek()
        decls = []
        while self.at_keyword("in", "out", "var"):
            decls.append(self.decl())
        stmts = []
        while not self.at("eof"):
            stmts.append(self.stmt())
        return ast.Program(first.line, first.col, name=name,
                           decls=decls, stmts=stmts)

    def decl(self) -> ast.Decl:
        kw = self.advance()
        typ = "float"
        if self.at_keyword("float", "int"):
            typ = self.advance().text
        name = self.expect("ident").text
        length = None
        if self.at("op", "["):
            self.advance()
            length = int(self.expect("int").text)
            self.expect("op", "]")
        self.expect("op", ";")
        return ast.Decl(kw.line, kw.col, kind=kw.text, typ=typ,
                        name=name, length=length)

    def stmt(self) -> ast.Stmt:
        if self.at_keyword("for"):
            return self.for_stmt()
        if self.at_keyword("if"):
            return self.if_stmt()
        if self.at_keyword("trace"):
            return self.trace_stmt()
        if self.at_keyword("return"):
            return self.return_stmt()
        if self.at("ident"):
            return self.assign()
        self.error("expected a statement",
                   expected=("identifier", "for", "if", "trace", "return"))

    def assign(self) -> ast.Assign:
        name_tok = self.expect("ident")
        index = None
        if self.at("op", "["):
            self.advance()
            index = self.expr()
            self.expect("op", "]")
        self.expect("op", "=")
        e = self.expr()
        self.expect("op", ";")
        return ast.Assign(name_tok.line, name_tok.col, name=name_tok.text,
                          index=index, expr=e)

    def for_stmt(self) -> ast.For:
        kw = self.advance()
        var = self.expect("ident").text
        self.expect("op", "=")
        start = self.expr()
        if not self.at_keyword("to"):
            self.error("syntax error", expected=("to",))
        self.advance()
        end = self.expr()
        body = self.block()
        return ast.For(kw.line, kw.col, var=var, start=start, end=end,
                       body=body)

    def if_stmt(self) -> ast.If:
        kw = self.advance()
        self.expect("op", "(")
        cond = self.cond()
        self.expect("op", ")")
        then = self.block()
        els = None
        if self.at_keyword("else"):
            self.advance()
            els = self.block()
        return ast.If(kw.line, kw.col, cond=cond, then=then, els=els)

    def block(self) -> list:
        self.expect("op", "{")
        stmts = []
        while not self.at("op", "}"):
            if self.at("eof"):
                self.error("unterminated block", expected=("}",))
            stmts.append(self.stmt())
        self.advance()
        return stmts

    def trace_stmt(self) -> ast.Trace:
        kw = self.advance()
        self.expect("op", "(")
        label = self.expect("string").text[1:-1]
        self.expect("op", ",")
        e = self.expr()
        self.expect("op", ")")
        self.expect("op", ";")
        return ast.Trace(kw.line, kw.col, label=label, expr=e)

    def return_stmt(self) -> ast.Return:
        kw = self.advance()
        name = self.expect("ident").text
        self.expect("op", ";")
        return ast.Return(kw.line, kw.col, name=name)

    def cond(self) -> ast.Compare:
        lhs = self.expr()
        t = self.peek()
        if t.kind != "op" or t.text not in ("<", "<=", ">", ">=", "==", "!="):
            self.error("expected a relational operator",
                       expected=("<", "<=", ">", ">=", "==", "!="))
        self.advance()
        rhs = self.expr()
        return ast.Compare(t.line, t.col, rel=t.text, lhs=lhs, rhs=rhs)

    def expr(self) -> ast.Expr:
        e = self.term()
        while self.at("op", "+") or self.at("op", "-"):
            op = self.advance()
            rhs = self.term()
            e = ast.BinOp(op.line, op.col, op=op.text, lhs=e, rhs=rhs)
        return e

    def term(self) -> ast.Expr:
        e = self.unary()
        while self.at("op", "*") or self.at("op", "/") or self.at("op", "%"):
            op = self.advance()
            rhs = self.unary()
            e = ast.BinOp(op.line, op.col, op=op.text, lhs=e, rhs=rhs)
        return e

    def unary(self) -> ast.Expr:
        if self.at("op", "-"):
            op = self.advance()
            operand = self.unary()
            return ast.UnOp(op.line, op.col, op="-", operand=operand)
        return self.primary()

    def primary(self) -> ast.Expr:
        t = self.peek()
        if t.kind == "float":
            self.advance()
            return ast.FloatLit(t.line, t.col, text=t.text, value=float(t.text))
        if t.kind == "int":
            self.advance()
            return ast.IntLit(t.line, t.col, value=int(t.text))
        if t.kind == "keyword" and t.text in ("sqrt", "fabs"):
            self.advance()
            self.expect("op", "(")
            arg = self.expr()
            self.expect("op", ")")
            return ast.Call(t.line, t.col, fn=t.text, arg=arg)
        if t.kind == "ident":
            self.advance()
            if self.at("op", "["):
                self.advance()
                idx = self.expr()
                self.expect("op", "]")
                return ast.Index(t.line, t.col, name=t.text, idx=idx)
            return ast.Var(t.line, t.col, name=t.text)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect("op", ")")
            return e
        self.error("expected an expression",
                   expected=("number", "identifier", "(", "sqrt", "fabs"))


def parse(text: str, name: str = "<program>") -> ast.Program:
    """Parse kernel source into an AST; raises ParseError with position."""
    return _Parser(tokenize(text)).program(name)
