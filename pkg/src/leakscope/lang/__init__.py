"""Front end for the probabilistic language: AST, parser, static passes."""
from .ast import *  # noqa: F401,F403
from .exprs import UnboundParameterError
from .parser import ParseError, parse, parse_file
from .pretty import pretty
from .static import (
    ExactnessReport, StaticReport, UseBeforeDefineError, Violation,
    bind_program, check_defined, check_exactness, classify, contains_for,
    program_vars, unroll,
)
