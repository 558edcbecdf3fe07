"""Kernel language: parser, checker, reference interpreter, compiled VM."""

from .parser import parse, ParseError
from .checker import check, CheckError, CheckedProgram
from .interp import evaluate, EvalResult, TracePoint, DslRuntimeError
from .vm import CompiledProgram, warm_up

__all__ = [
    "parse", "ParseError", "check", "CheckError", "CheckedProgram",
    "evaluate", "EvalResult", "TracePoint", "DslRuntimeError",
    "CompiledProgram", "warm_up",
]
