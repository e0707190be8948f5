"""Symbolic expectations: nonnegative functions of program states.

An :class:`Expectation` is kept in a sum-of-products normal form: a map from
sorted factor tuples to real coefficients. Factors are Iverson brackets,
arithmetic atoms, logarithms of sub-expectations, quotients of
sub-expectations (only produced when a conditional expectation is forced),
and infinity. Every constructor normalizes, so ground subterms fold away as
soon as substitution makes them constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional

from .lang.ast import Compare, Num, PAnd, PConst, PNot, POr, Var
from .lang.exprs import (
    NEGATED_OP, eval_expr, eval_pred, expr_vars, fold_expr, fold_pred,
    pred_vars, subst_expr, subst_pred,
)
from .lang.pretty import fmt_num, pretty_expr, pretty_pred

ONE_BOUND_TOL = 1e-9


class MalformedExpectationError(ValueError):
    """Evaluation produced a value outside the expectation domain."""


def ghost(name: str, tag: int = 0) -> str:
    """Name of a ghost variable for ``name``; never a valid source identifier."""
    return f"{name}#{tag}"


def is_ghost(name: str) -> bool:
    return "#" in name


def _log(x: float, base: float) -> float:
    return math.log(x) / math.log(base)


# ------------------------------------------------------------------ factors

class Factor:
    key: str

    def __lt__(self, other):
        return self.key < other.key


@dataclass(frozen=True, eq=True)
class Iverson(Factor):
    pred: object

    @cached_property
    def key(self) -> str:
        return f"[{pretty_pred(self.pred)}]"


@dataclass(frozen=True, eq=True)
class Atom(Factor):
    expr: object

    @cached_property
    def key(self) -> str:
        return f"({pretty_expr(self.expr)})"


@dataclass(frozen=True, eq=True)
class NegLog(Factor):
    arg: "Expectation"
    base: float = 2.0

    @cached_property
    def key(self) -> str:
        return f"-log{_base_name(self.base)}({self.arg.pretty()})"


@dataclass(frozen=True, eq=True)
class Log(Factor):
    arg: "Expectation"
    base: float = 2.0

    @cached_property
    def key(self) -> str:
        return f"log{_base_name(self.base)}({self.arg.pretty()})"


@dataclass(frozen=True, eq=True)
class Div(Factor):
    num: "Expectation"
    den: "Expectation"

    @cached_property
    def key(self) -> str:
        return f"<{self.num.pretty()} / {self.den.pretty()}>"


@dataclass(frozen=True, eq=True)
class Inf(Factor):
    @property
    def key(self) -> str:
        return "inf"


def _base_name(base: float) -> str:
    if base == 2.0:
        return "2"
    if base == math.e:
        return "e"
    return fmt_num(base)


# -------------------------------------------------------------- expectation

class Expectation:
    """Immutable sum of ``coefficient * product(factors)`` terms."""

    __slots__ = ("terms", "_hash", "_pretty")

    def __init__(self, terms: Optional[Mapping] = None):
        self.terms = dict(terms or {})
        self._hash = None
        self._pretty = None

    # construction ---------------------------------------------------------
    @classmethod
    def const(cls, c: float) -> "Expectation":
        return cls({(): float(c)}) if c != 0 else cls()

    @classmethod
    def from_terms(cls, terms: Iterable) -> "Expectation":
        """Normalize ``(coeff, factors)`` pairs and merge like terms."""
        acc: dict = {}
        for coeff, factors in terms:
            for c, fs in _normalize_term(coeff, factors):
                acc[fs] = acc.get(fs, 0.0) + c
        return cls({k: v for k, v in acc.items() if v != 0})

    # algebra --------------------------------------------------------------
    def __add__(self, other: "Expectation") -> "Expectation":
        acc = dict(self.terms)
        for k, v in other.terms.items():
            acc[k] = acc.get(k, 0.0) + v
        return Expectation({k: v for k, v in acc.items() if v != 0})

    def scale(self, c: float) -> "Expectation":
        if c == 0:
            return Expectation()
        return Expectation({k: v * c for k, v in self.terms.items()})

    def __mul__(self, other: "Expectation") -> "Expectation":
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        return Expectation.from_terms(
            (c1 * c2, f1 + f2)
            for f1, c1 in self.terms.items()
            for f2, c2 in other.terms.items()
        )

    __rmul__ = __mul__

    def subst(self, mapping: Mapping[str, object]) -> "Expectation":
        """``X[v := e]`` for every ``v -> e`` in ``mapping``, simultaneously."""
        if not mapping or not (self.free_vars() & set(mapping)):
            return self
        return Expectation.from_terms(
            (c, tuple(_subst_factor(f, mapping) for f in fs)) for fs, c in self.terms.items()
        )

    # inspection -----------------------------------------------------------
    def is_const(self) -> bool:
        return all(fs == () for fs in self.terms)

    def const_value(self) -> float:
        if not self.is_const():
            raise ValueError("expectation is not constant")
        return self.terms.get((), 0.0)

    def free_vars(self) -> set:
        out: set = set()
        for fs in self.terms:
            for f in fs:
                _factor_vars(f, out)
        return out

    def size(self) -> int:
        n = 0
        for fs in self.terms:
            n += 1
            for f in fs:
                if isinstance(f, (NegLog, Log)):
                    n += f.arg.size()
                elif isinstance(f, Div):
                    n += f.num.size() + f.den.size()
        return n

    def pretty(self) -> str:
        if self._pretty is None:
            if not self.terms:
                self._pretty = "0"
            else:
                parts = []
                for fs, c in self.terms.items():
                    body = "*".join(f.key for f in fs)
                    if not body:
                        parts.append(fmt_num(c))
                    elif c == 1:
                        parts.append(body)
                    else:
                        parts.append(f"{fmt_num(c)}*{body}")
                self._pretty = " + ".join(sorted(parts))
        return self._pretty

    __str__ = pretty

    def __repr__(self) -> str:
        return f"Expectation({self.pretty()})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expectation) and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash


ZERO = Expectation()
ONE = Expectation.const(1.0)


def const(c: float) -> Expectation:
    return Expectation.const(c)


def iverson(pred) -> Expectation:
    return Expectation.from_terms([(1.0, (Iverson(pred),))])


def atom(expr) -> Expectation:
    return Expectation.from_terms([(1.0, (Atom(expr),))])


def neglog(x: Expectation, base: float = 2.0) -> Expectation:
    return Expectation.from_terms([(1.0, (NegLog(x, base),))])


def log(x: Expectation, base: float = 2.0) -> Expectation:
    return Expectation.from_terms([(1.0, (Log(x, base),))])


def div(num: Expectation, den: Expectation) -> Expectation:
    """The forced conditional expectation ``num / den``."""
    return Expectation.from_terms([(1.0, (Div(num, den),))])


def eq(name: str, value) -> Expectation:
    """``[name = value]`` where ``value`` is a variable name or a number."""
    rhs = Var(value) if isinstance(value, str) else Num(float(value))
    return iverson(Compare("==", Var(name), rhs))


# ------------------------------------------------------------ normalization

def _factor_vars(f, out: set) -> None:
    if isinstance(f, Iverson):
        pred_vars(f.pred, out)
    elif isinstance(f, Atom):
        expr_vars(f.expr, out)
    elif isinstance(f, (NegLog, Log)):
        out |= f.arg.free_vars()
    elif isinstance(f, Div):
        out |= f.num.free_vars()
        out |= f.den.free_vars()


def _subst_factor(f, mapping):
    if isinstance(f, Iverson):
        return Iverson(subst_pred(f.pred, mapping))
    if isinstance(f, Atom):
        return Atom(subst_expr(f.expr, mapping))
    if isinstance(f, NegLog):
        return NegLog(f.arg.subst(mapping), f.base)
    if isinstance(f, Log):
        return Log(f.arg.subst(mapping), f.base)
    if isinstance(f, Div):
        return Div(f.num.subst(mapping), f.den.subst(mapping))
    return f


def _push_not(p):
    """Negation normal form for the parts that matter to simplification."""
    if isinstance(p, PNot):
        q = p.operand
        if isinstance(q, Compare):
            return Compare(NEGATED_OP[q.op], q.left, q.right, q.loc)
        if isinstance(q, PConst):
            return PConst(not q.value)
        if isinstance(q, PNot):
            return _push_not(q.operand)
        if isinstance(q, POr):
            return PAnd(_push_not(PNot(q.left)), _push_not(PNot(q.right)))
        if isinstance(q, PAnd):
            return POr(_push_not(PNot(q.left)), _push_not(PNot(q.right)))
    return p


def _split_conj(p, out: list) -> None:
    p = _push_not(p)
    if isinstance(p, PAnd):
        _split_conj(p.left, out)
        _split_conj(p.right, out)
    else:
        out.append(p)


def _binding(f):
    """``(var, Num)`` if the factor is an Iverson ``[var = number]``."""
    if isinstance(f, Iverson) and isinstance(f.pred, Compare) and f.pred.op == "==":
        left, right = f.pred.left, f.pred.right
        if isinstance(left, Var) and isinstance(right, Num):
            return left.name, right
        if isinstance(right, Var) and isinstance(left, Num):
            return right.name, left
    return None


def _normalize_term(coeff: float, factors) -> list:
    """Simplify one product term; returns a list of ``(coeff, factors)``.

    Folds ground factors into the coefficient, resolves ground Iverson
    brackets, splits conjunctions, propagates ``[x = c]`` into the other
    factors of the term, and distributes quotients with constant
    denominators.
    """
    if coeff == 0:
        return []
    pending = list(factors)
    kept: list = []
    while pending:
        f = pending.pop()
        if isinstance(f, Iverson):
            p = fold_pred(f.pred)
            parts: list = []
            _split_conj(p, parts)
            if len(parts) > 1:
                pending.extend(Iverson(q) for q in parts)
                continue
            p = fold_pred(parts[0])
            if isinstance(p, PConst):
                if not p.value:
                    return []
                continue
            kept.append(Iverson(p))
        elif isinstance(f, Atom):
            e = fold_expr(f.expr)
            if isinstance(e, Num):
                if e.value == 0:
                    return []
                coeff *= e.value
                continue
            kept.append(Atom(e))
        elif isinstance(f, NegLog):
            if f.arg.is_const():
                v = f.arg.const_value()
                if v == 0:
                    kept.append(Inf())
                else:
                    if v > 1 + ONE_BOUND_TOL or v < 0:
                        raise MalformedExpectationError(f"-log applied to {v} outside [0, 1]")
                    r = -_log(min(v, 1.0), f.base)
                    if r == 0:
                        return []
                    coeff *= r
                continue
            kept.append(f)
        elif isinstance(f, Log):
            if f.arg.is_const() and f.arg.const_value() > 0:
                r = _log(f.arg.const_value(), f.base)
                if r == 0:
                    return []
                coeff *= r
                continue
            if _only_inf(f.arg):
                kept.append(Inf())
                continue
            kept.append(f)
        elif isinstance(f, Div):
            if f.den.is_const():
                d = f.den.const_value()
                if d != 0:
                    # distribute num / d over the term
                    rest = kept + pending
                    out = []
                    for fs, c in f.num.terms.items():
                        out.extend(_normalize_term(coeff * c / d, tuple(rest) + fs))
                    return out
                if not f.num.terms:
                    kept.append(f)  # 0/0: resolved at evaluation
                    continue
                if f.num.is_const():
                    kept.append(Inf())
                    continue
            elif not f.num.terms:
                return []
            kept.append(f)
        else:
            kept.append(f)

    # propagate [x = c] bindings into the remaining factors
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(kept):
            b = _binding(f)
            if b is None:
                continue
            name, value = b
            others = kept[:i] + kept[i + 1:]
            if not any(_mentions(g, name) for g in others):
                continue
            mapping = {name: value}
            return _normalize_term(coeff, tuple([f] + [_subst_factor(g, mapping) for g in others]))

    uniq = sorted(set(f for f in kept if not isinstance(f, Atom)), key=lambda f: f.key)
    atoms = sorted((f for f in kept if isinstance(f, Atom)), key=lambda f: f.key)
    if any(isinstance(f, Inf) for f in uniq):
        uniq = [f for f in uniq if not isinstance(f, Inf)] + [Inf()]
    return [(coeff, tuple(sorted(uniq + atoms, key=lambda f: f.key)))]


def _mentions(f, name: str) -> bool:
    out: set = set()
    _factor_vars(f, out)
    return name in out


def _only_inf(x: Expectation) -> bool:
    return bool(x.terms) and all(fs == (Inf(),) and c > 0 for fs, c in x.terms.items())


def simplify(x: Expectation) -> Expectation:
    """Re-normalize every term (idempotent on already-normal expectations)."""
    return Expectation.from_terms((c, fs) for fs, c in x.terms.items())


# --------------------------------------------------------------- evaluation

def evaluate(x: Expectation, state: Mapping[str, float], diagnostics: Optional[list] = None) -> float:
    """Value of ``x`` at ``state`` in ``[0, inf]`` (log factors may be signed).

    ``0 * inf`` is taken to be 0. A forced quotient ``0/0`` evaluates to 0
    and, when ``diagnostics`` is given, appends a note to it.
    """
    total = 0.0
    for fs, c in x.terms.items():
        values = [_eval_factor(f, state, diagnostics) for f in fs]
        if any(v == 0 for v in values):
            continue
        term = c
        for v in values:
            term *= v
        total += term
    if math.isnan(total):
        raise MalformedExpectationError("expectation evaluated to nan")
    return total


def _eval_factor(f, state, diagnostics) -> float:
    if isinstance(f, Iverson):
        return 1.0 if eval_pred(f.pred, state) else 0.0
    if isinstance(f, Atom):
        v = eval_expr(f.expr, state)
        if v < -ONE_BOUND_TOL:
            raise MalformedExpectationError(f"negative factor {f.key} = {v}")
        return max(v, 0.0)
    if isinstance(f, NegLog):
        v = evaluate(f.arg, state, diagnostics)
        if v < -ONE_BOUND_TOL or v > 1 + ONE_BOUND_TOL:
            raise MalformedExpectationError(f"-log applied to {v} outside [0, 1]")
        return math.inf if v <= 0 else -_log(min(v, 1.0), f.base)
    if isinstance(f, Log):
        v = evaluate(f.arg, state, diagnostics)
        if v < 0:
            raise MalformedExpectationError(f"log applied to negative value {v}")
        if v == 0:
            return -math.inf
        return _log(v, f.base)
    if isinstance(f, Div):
        n = evaluate(f.num, state, diagnostics)
        d = evaluate(f.den, state, diagnostics)
        if d == 0:
            if n == 0:
                if diagnostics is not None:
                    diagnostics.append(f"0/0 in {f.key} at {dict(state)}")
                return 0.0
            return math.inf
        return n / d
    if isinstance(f, Inf):
        return math.inf
    raise TypeError(f"unknown factor {f!r}")


def expected_value(x: Expectation, pmf: Iterable, diagnostics: Optional[list] = None) -> float:
    """``sum_s D(s) * x(s)`` over ``(state, probability)`` pairs, 0*inf = 0."""
    total = 0.0
    for state, prob in pmf:
        if prob == 0:
            continue
        total += prob * evaluate(x, state, diagnostics)
    return total
