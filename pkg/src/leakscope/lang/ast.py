"""AST for the probabilistic language.

Nodes are frozen dataclasses so they can be hashed, shared between
expectations, and compared structurally. Source locations are carried
along for diagnostics but excluded from equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Loc:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _loc():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Num:
    value: float
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Var:
    name: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Param:
    name: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Not:
    """Boolean negation lifted to arithmetic: evaluates to ``1 - operand``."""

    operand: "Expr"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Call:
    fn: str  # exp | log | sqrt
    args: tuple
    loc: Optional[Loc] = _loc()


Expr = Union[Num, Var, Param, BinOp, Neg, Not, Call]

FUNCTIONS = ("exp", "log", "sqrt")


# ----------------------------------------------------------------- predicates

@dataclass(frozen=True)
class Compare:
    op: str  # == != < > <= >=
    left: Expr
    right: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class PConst:
    value: bool
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class PNot:
    operand: "Pred"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class PAnd:
    left: "Pred"
    right: "Pred"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class POr:
    left: "Pred"
    right: "Pred"
    loc: Optional[Loc] = _loc()


Pred = Union[Compare, PConst, PNot, PAnd, POr]


# -------------------------------------------------------------- distributions

@dataclass(frozen=True)
class Bernoulli:
    p: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Categorical:
    items: tuple  # ((value: float, prob: Expr), ...)
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Gauss:
    mean: Expr
    var: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class GMLit:
    items: tuple  # ((weight: Expr, mean: Expr, var: Expr), ...)
    loc: Optional[Loc] = _loc()


Dist = Union[Bernoulli, Categorical, Gauss, GMLit]


# ----------------------------------------------------------------- statements

@dataclass(frozen=True)
class Skip:
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Sample:
    var: str
    dist: Dist
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Observe:
    pred: Pred
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class If:
    pred: Pred
    then: "Stmt"
    orelse: "Stmt"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class For:
    counter: str
    bound: int
    body: "Stmt"
    loc: Optional[Loc] = _loc()


Stmt = Union[Skip, Seq, Assign, Sample, Observe, If, For]


@dataclass(frozen=True)
class ParamDecl:
    name: str
    default: Optional[float] = None
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Program:
    params: tuple = ()  # tuple[ParamDecl, ...]
    body: Stmt = field(default_factory=Skip)
    secrets: tuple = ()
    outputs: tuple = ()

    @property
    def param_defaults(self) -> dict:
        return {p.name: p.default for p in self.params if p.default is not None}


def seq(*stmts: Stmt) -> Stmt:
    """Right-nested sequence of ``stmts``; ``Skip`` when empty."""
    stmts = [s for s in stmts if s is not None]
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def flatten(stmt: Stmt) -> list:
    """List of the non-``Seq`` statements of a sequence tree, in order."""
    out = []
    stack = [stmt]
    while stack:
        s = stack.pop()
        if isinstance(s, Seq):
            stack.append(s.second)
            stack.append(s.first)
        else:
            out.append(s)
    return out
