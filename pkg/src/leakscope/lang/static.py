"""Static passes: loop unrolling, definedness, discrete/continuous
classification and the sufficient-exactness check for Gaussian-mixture
semantics."""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .ast import (
    Assign, Bernoulli, BinOp, Categorical, Compare, For, GMLit, Gauss, If,
    Num, Observe, Program, Sample, Seq, Var, flatten, seq,
)
from .exprs import (
    affine_form, bind_expr, bind_pred, eval_expr, expr_vars, fold_expr,
    pred_vars, subst_expr, subst_pred,
)


class UseBeforeDefineError(Exception):
    def __init__(self, name: str, loc=None):
        self.name = name
        self.loc = loc
        where = f"{loc}: " if loc else ""
        super().__init__(f"{where}variable {name!r} is read before it is assigned")


# ------------------------------------------------------------------ unroll

def _index_renamer(counter: str, value: int):
    pattern = re.compile(rf"(?<=_){re.escape(counter)}(?=_|$)")

    def rename(name: str) -> str:
        return pattern.sub(str(value), name) if "_" in name else name

    return rename


def _rename_stmt(s, rename):
    def ex(e):
        names = expr_vars(e)
        mapping = {n: Var(rename(n)) for n in names if rename(n) != n}
        return subst_expr(e, mapping) if mapping else e

    def pr(p):
        names = pred_vars(p)
        mapping = {n: Var(rename(n)) for n in names if rename(n) != n}
        return subst_pred(p, mapping) if mapping else p

    def dist(d):
        if isinstance(d, Bernoulli):
            return Bernoulli(ex(d.p), d.loc)
        if isinstance(d, Gauss):
            return Gauss(ex(d.mean), ex(d.var), d.loc)
        if isinstance(d, Categorical):
            return Categorical(tuple((v, ex(p)) for v, p in d.items), d.loc)
        return GMLit(tuple(tuple(ex(x) for x in it) for it in d.items), d.loc)

    if isinstance(s, Seq):
        return Seq(_rename_stmt(s.first, rename), _rename_stmt(s.second, rename), s.loc)
    if isinstance(s, Assign):
        return Assign(rename(s.var), ex(s.expr), s.loc)
    if isinstance(s, Sample):
        return Sample(rename(s.var), dist(s.dist), s.loc)
    if isinstance(s, Observe):
        return Observe(pr(s.pred), s.loc)
    if isinstance(s, If):
        return If(pr(s.pred), _rename_stmt(s.then, rename), _rename_stmt(s.orelse, rename), s.loc)
    if isinstance(s, For):
        return For(s.counter, s.bound, _rename_stmt(s.body, rename), s.loc)
    return s


def unroll_stmt(s):
    """Expand every ``for`` into counter assignments and body copies.

    ``for i in 1..n { S }`` becomes ``i := 1; S; i := i + 1; ...`` with n
    copies of ``S``. Inside copy ``k``, identifier segments equal to the
    counter name (``fem_i``) are renamed to the iteration value (``fem_k``).
    """
    if isinstance(s, Seq):
        return Seq(unroll_stmt(s.first), unroll_stmt(s.second), s.loc)
    if isinstance(s, If):
        return If(s.pred, unroll_stmt(s.then), unroll_stmt(s.orelse), s.loc)
    if isinstance(s, For):
        i = s.counter
        parts = [Assign(i, Num(1.0), s.loc)]
        for k in range(1, s.bound + 1):
            body = _rename_stmt(s.body, _index_renamer(i, k))
            parts.append(unroll_stmt(body))
            parts.append(Assign(i, BinOp("+", Var(i), Num(1.0)), s.loc))
        return seq(*parts)
    return s


def unroll(p: Program) -> Program:
    return Program(p.params, unroll_stmt(p.body), p.secrets, p.outputs)


def contains_for(s) -> bool:
    if isinstance(s, For):
        return True
    if isinstance(s, Seq):
        return contains_for(s.first) or contains_for(s.second)
    if isinstance(s, If):
        return contains_for(s.then) or contains_for(s.orelse)
    return False


# ------------------------------------------------------------- definedness

def dist_vars(d) -> set:
    if isinstance(d, Bernoulli):
        return expr_vars(d.p)
    if isinstance(d, Gauss):
        return expr_vars(d.mean) | expr_vars(d.var)
    if isinstance(d, Categorical):
        out = set()
        for _, p in d.items:
            expr_vars(p, out)
        return out
    out = set()
    for it in d.items:
        for x in it:
            expr_vars(x, out)
    return out


def _defined_after(s, defined: frozenset) -> frozenset:
    for st in flatten(s):
        if isinstance(st, Assign):
            _require(expr_vars(st.expr), defined, st.loc)
            defined = defined | {st.var}
        elif isinstance(st, Sample):
            _require(dist_vars(st.dist), defined, st.loc)
            defined = defined | {st.var}
        elif isinstance(st, Observe):
            _require(pred_vars(st.pred), defined, st.loc)
        elif isinstance(st, If):
            _require(pred_vars(st.pred), defined, st.loc)
            defined = _defined_after(st.then, defined) & _defined_after(st.orelse, defined)
    return defined


def _require(names, defined, loc):
    for n in sorted(names):
        if n not in defined:
            raise UseBeforeDefineError(n, loc)


def check_defined(p: Program) -> None:
    """Raise :class:`UseBeforeDefineError` on reads of unassigned variables."""
    _defined_after(unroll_stmt(p.body), frozenset())


def program_vars(s) -> list:
    """Variables in order of first appearance (targets and reads)."""
    order: dict = {}

    def add(names):
        for n in sorted(names):
            order.setdefault(n, None)

    def go(st):
        for x in flatten(st):
            if isinstance(x, Assign):
                add(expr_vars(x.expr))
                order.setdefault(x.var, None)
            elif isinstance(x, Sample):
                add(dist_vars(x.dist))
                order.setdefault(x.var, None)
            elif isinstance(x, Observe):
                add(pred_vars(x.pred))
            elif isinstance(x, If):
                add(pred_vars(x.pred))
                go(x.then)
                go(x.orelse)
            elif isinstance(x, For):
                order.setdefault(x.counter, None)
                go(x.body)

    go(s)
    return list(order)


# ---------------------------------------------------------- classification

DISCRETE = "discrete"
CONTINUOUS = "continuous"
SUPPORT_CAP = 4096


@dataclass
class StaticReport:
    """Per-variable tags plus the finite value sets backing discrete tags."""

    tags: dict = field(default_factory=dict)
    supports: dict = field(default_factory=dict)

    @property
    def discrete_only(self) -> bool:
        return all(t == DISCRETE for t in self.tags.values())

    @property
    def program_tag(self) -> str:
        return "discrete-only" if self.discrete_only else "continuous-capable"

    def discrete(self, name: str) -> bool:
        return self.tags.get(name) == DISCRETE


def _expr_support(e, supports: Mapping[str, Optional[frozenset]]):
    names = sorted(expr_vars(e))
    if any(supports.get(n) is None for n in names):
        return None
    combos = 1
    for n in names:
        combos *= len(supports[n])
    if combos > SUPPORT_CAP:
        return None
    out = set()
    for values in itertools.product(*(sorted(supports[n]) for n in names)):
        try:
            out.add(round(eval_expr(e, dict(zip(names, values))), 12) + 0.0)
        except (ZeroDivisionError, ValueError, OverflowError):
            continue
        if len(out) > SUPPORT_CAP:
            return None
    return frozenset(out)


def _dist_support(d):
    if isinstance(d, Bernoulli):
        return frozenset({0.0, 1.0})
    if isinstance(d, Categorical):
        return frozenset(float(v) for v, _ in d.items)
    return None


def _support_pass(s, supports: dict) -> dict:
    for st in flatten(s):
        if isinstance(st, Assign):
            supports[st.var] = _merge(supports.get(st.var, frozenset()), _expr_support(st.expr, supports), replace=True)
        elif isinstance(st, Sample):
            supports[st.var] = _dist_support(st.dist)
        elif isinstance(st, If):
            a = _support_pass(st.then, dict(supports))
            b = _support_pass(st.orelse, dict(supports))
            for n in set(a) | set(b):
                supports[n] = _merge(a.get(n, frozenset({0.0})), b.get(n, frozenset({0.0})))
    return supports


def _merge(a, b, replace=False):
    if replace:
        return b
    if a is None or b is None:
        return None
    u = a | b
    return u if len(u) <= SUPPORT_CAP else None


def classify(p: Program, params: Optional[Mapping[str, float]] = None) -> StaticReport:
    """Tag each variable as discrete (provably finite support) or continuous.

    Variables start at zero, so a variable only assigned in one branch keeps
    the value 0 on the other path.
    """
    body = unroll_stmt(p.body)
    supports = _support_pass(body, {})
    names = program_vars(body)
    report = StaticReport()
    for n in names:
        sup = supports.get(n, frozenset({0.0}))
        report.tags[n] = DISCRETE if sup is not None else CONTINUOUS
        if sup is not None:
            report.supports[n] = sup
    return report


# ---------------------------------------------------------------- exactness

@dataclass(frozen=True)
class Violation:
    loc: object
    condition: str  # "i" | "ii" | "iii" | "iv"
    message: str

    def __str__(self) -> str:
        where = f"{self.loc}: " if self.loc else ""
        return f"{where}condition {self.condition}: {self.message}"


@dataclass
class ExactnessReport:
    violations: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return not self.violations


def _is_equality(pred) -> bool:
    return isinstance(pred, Compare) and pred.op == "=="


def check_exactness(p: Program, params: Optional[Mapping[str, float]] = None) -> ExactnessReport:
    """Check the sufficient conditions under which Gaussian-mixture forward
    semantics coincides with the exact semantics.

    i) assignments are affine; ii) sampled distributions are Gaussian
    mixtures or finite discrete; iii) observations are equalities or only
    read discrete variables; iv) branch guards only read discrete variables.
    """
    params = dict(p.param_defaults, **(params or {}))
    report = classify(p)
    out = ExactnessReport()
    body = unroll_stmt(p.body)

    def bound(e):
        try:
            return bind_expr(e, params)
        except Exception:
            return fold_expr(e)

    def go(s):
        for st in flatten(s):
            if isinstance(st, Assign):
                if affine_form(bound(st.expr)) is None:
                    out.violations.append(Violation(st.loc, "i", f"nonlinear assignment to {st.var!r}"))
            elif isinstance(st, Sample):
                if not isinstance(st.dist, (Bernoulli, Categorical, Gauss, GMLit)):
                    out.violations.append(Violation(st.loc, "ii", "distribution is not a Gaussian mixture"))
                elif dist_vars(st.dist):
                    out.violations.append(Violation(st.loc, "ii", "distribution parameters depend on program variables"))
            elif isinstance(st, Observe):
                names = pred_vars(st.pred)
                if not _is_equality(st.pred) and not all(report.discrete(n) for n in names):
                    cont = sorted(n for n in names if not report.discrete(n))
                    out.violations.append(Violation(
                        st.loc, "iii", f"observation on continuous {', '.join(cont)} is not an equality"))
            elif isinstance(st, If):
                names = pred_vars(st.pred)
                cont = sorted(n for n in names if not report.discrete(n))
                if cont:
                    out.violations.append(Violation(
                        st.loc, "iv", f"branch guard reads continuous {', '.join(cont)}"))
                go(st.then)
                go(st.orelse)

    go(body)
    return out


def bind_program(p: Program, params: Optional[Mapping[str, float]] = None) -> Program:
    """Substitute numeric parameter values (defaults overridden by ``params``)."""
    values = dict(p.param_defaults)
    values.update(params or {})

    def dist(d):
        if isinstance(d, Bernoulli):
            return Bernoulli(bind_expr(d.p, values), d.loc)
        if isinstance(d, Gauss):
            return Gauss(bind_expr(d.mean, values), bind_expr(d.var, values), d.loc)
        if isinstance(d, Categorical):
            return Categorical(tuple((v, bind_expr(q, values)) for v, q in d.items), d.loc)
        return GMLit(tuple(tuple(bind_expr(x, values) for x in it) for it in d.items), d.loc)

    def go(s):
        if isinstance(s, Seq):
            return Seq(go(s.first), go(s.second), s.loc)
        if isinstance(s, Assign):
            return Assign(s.var, bind_expr(s.expr, values), s.loc)
        if isinstance(s, Sample):
            return Sample(s.var, dist(s.dist), s.loc)
        if isinstance(s, Observe):
            return Observe(bind_pred(s.pred, values), s.loc)
        if isinstance(s, If):
            return If(bind_pred(s.pred, values), go(s.then), go(s.orelse), s.loc)
        if isinstance(s, For):
            return For(s.counter, s.bound, go(s.body), s.loc)
        return s

    return Program(p.params, go(p.body), p.secrets, p.outputs)
