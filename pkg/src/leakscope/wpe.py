"""Weakest pre-expectation transformers and exact leakage metrics for
discrete programs.

All metrics are obtained by running a program backwards twice: an inner
conditional pre-expectation computes the termination distribution of the
target as a function of a ghost variable, and an outer one averages a
log-score of that distribution over the same program. The final expectation
is evaluated at the all-zeros initial state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .lang.ast import (
    Assign, Bernoulli, BinOp, Categorical, For, GMLit, Gauss, If, Num,
    Observe, PNot, Program, Sample, Seq, Skip, Var, flatten,
)
from .lang.static import bind_program, program_vars, unroll, unroll_stmt
from .symbolic import (
    ONE, Expectation, Iverson, atom, div, eq, evaluate, ghost, iverson, log, neglog,
)


class ContinuousDistributionError(ValueError):
    """A sampled distribution has infinite support; use the mixture backend."""


class UnsatisfiableObservationsError(ValueError):
    """Every execution violates some observation."""


# -------------------------------------------------------------- transformers

def _sample_wp(st: Sample, post: Expectation) -> Expectation:
    d = st.dist
    if isinstance(d, Bernoulli):
        outcomes = [(1.0, d.p), (0.0, BinOp("-", Num(1.0), d.p))]
    elif isinstance(d, Categorical):
        outcomes = list(d.items)
    elif isinstance(d, (Gauss, GMLit)):
        raise ContinuousDistributionError(
            f"{st.loc or '?'}: {st.var} has a continuous distribution; use the soga semantics")
    else:
        raise TypeError(f"unknown distribution {d!r}")
    total = Expectation()
    for value, prob in outcomes:
        branch = post.subst({st.var: Num(float(value))})
        if not branch.terms:
            continue
        total = total + atom(prob) * branch
    return total


def wp(stmt, post: Expectation) -> Expectation:
    """Weakest pre-expectation of ``post`` with respect to ``stmt``."""
    x = post
    for st in reversed(flatten(stmt)):
        if isinstance(st, Skip):
            continue
        if isinstance(st, Assign):
            x = x.subst({st.var: st.expr})
        elif isinstance(st, Sample):
            x = _sample_wp(st, x)
        elif isinstance(st, Observe):
            x = iverson(st.pred) * x
        elif isinstance(st, If):
            x = iverson(st.pred) * wp(st.then, x) + iverson(PNot(st.pred)) * wp(st.orelse, x)
        elif isinstance(st, For):
            x = wp(unroll_stmt(st), x)
        elif isinstance(st, Seq):  # pragma: no cover - flatten removes these
            x = wp(st, x)
        else:
            raise TypeError(f"unknown statement {st!r}")
    return x


@dataclass(frozen=True)
class CondExpectation:
    """A pair whose ratio is a conditional expected value."""

    numerator: Expectation
    denominator: Expectation

    def force(self) -> Expectation:
        return div(self.numerator, self.denominator)


def cwp(stmt, c: CondExpectation) -> CondExpectation:
    return CondExpectation(wp(stmt, c.numerator), wp(stmt, c.denominator))


# ----------------------------------------------------------------- metrics

@dataclass
class Analysis:
    """A loop-free, parameter-free body plus its initial state."""

    body: object
    init: dict
    evidence: float
    diagnostics: list = field(default_factory=list)

    def at_init(self, x: Expectation) -> Expectation:
        return x.subst({k: Num(v) for k, v in self.init.items()})

    def outer(self, y: Expectation) -> float:
        """Evaluate the outer ``cwp(S, (y, 1))`` at the initial state."""
        num = evaluate(wp(self.body, y), self.init, self.diagnostics)
        return num / self.evidence


def prepare(program: Union[Program, object], params: Optional[Mapping[str, float]] = None,
            init: Optional[Mapping[str, float]] = None) -> Analysis:
    """Bind parameters, unroll loops, and compute the observation mass."""
    if isinstance(program, Program):
        body = unroll(bind_program(program, params)).body
    else:
        body = unroll_stmt(program)
    state = {v: 0.0 for v in program_vars(body)}
    state.update(init or {})
    evidence = evaluate(wp(body, ONE), state)
    if evidence <= 0:
        raise UnsatisfiableObservationsError("observations are unsatisfiable from the initial state")
    return Analysis(body, state, evidence)


def _resolve(program, params, init) -> Analysis:
    return program if isinstance(program, Analysis) else prepare(program, params, init)


def _termination_pmf(a: Analysis, bracket: Expectation) -> Expectation:
    """Inner forced cwp, as a function of the ghost variables in ``bracket``."""
    return a.at_init(wp(a.body, bracket)).scale(1.0 / a.evidence)


def entropy(program, x: str, params=None, base: float = 2.0, init=None) -> float:
    """Entropy of ``x`` on termination."""
    a = _resolve(program, params, init)
    gx = ghost(x, 0)
    pmf = _termination_pmf(a, eq(gx, x)).subst({gx: Var(x)})
    return a.outer(neglog(pmf, base))


def cond_entropy(program, y: str, x: str, params=None, base: float = 2.0, init=None) -> float:
    """Conditional entropy ``H(y | x)`` on termination."""
    a = _resolve(program, params, init)
    gx, gy = ghost(x, 1), ghost(y, 2)
    joint = a.at_init(wp(a.body, eq(gx, x) * eq(gy, y)))
    marg = a.at_init(wp(a.body, eq(gx, x)))
    inner = div(joint, marg).subst({gx: Var(x), gy: Var(y)})
    return a.outer(neglog(inner, base))


def kl(program, x: str, y: str, params=None, base: float = 2.0, init=None,
       diagnostics: Optional[list] = None) -> float:
    """``KL(p_x || p_y)`` between the termination distributions of ``x`` and ``y``.

    Returns ``inf`` when ``x`` takes a value that ``y`` never does; the
    offending values are appended to ``diagnostics``.
    """
    a = _resolve(program, params, init)
    gx = ghost(x, 3)
    px = _termination_pmf(a, eq(gx, x))
    py = _termination_pmf(a, eq(gx, y))
    inner = div(px, py).subst({gx: Var(x)})
    value = a.outer(log(inner, base))
    if math.isinf(value) and diagnostics is not None:
        vx, vy = _ghost_values(px, gx), _ghost_values(py, gx)
        missing = sorted(v for v in vx if v not in vy)
        diagnostics.append(f"support of {x} not contained in support of {y}: {missing}")
    return max(value, 0.0) if abs(value) < 1e-15 else value


def mutual_information(program, x: str, y: str, params=None, base: float = 2.0, init=None) -> float:
    """``I(x; y) = H(x) - H(x | y)``."""
    a = _resolve(program, params, init)
    return entropy(a, x, base=base) - cond_entropy(a, x, y, base=base)


def _ghost_values(pmf: Expectation, g: str) -> dict:
    """Read ``{value: prob}`` off an expectation of the form ``sum c [g = v]``."""
    out: dict = {}
    for fs, c in pmf.terms.items():
        for f in fs:
            if isinstance(f, Iverson) and getattr(f.pred, "op", None) == "==":
                left, right = f.pred.left, f.pred.right
                if isinstance(left, Var) and left.name == g and isinstance(right, Num):
                    out[right.value] = out.get(right.value, 0.0) + c
                elif isinstance(right, Var) and right.name == g and isinstance(left, Num):
                    out[left.value] = out.get(left.value, 0.0) + c
    return {k: v for k, v in out.items() if v > 0}


def termination_pmf(program, x: str, params=None, init=None) -> dict:
    """Termination distribution of ``x`` as ``{value: probability}``."""
    a = _resolve(program, params, init)
    gx = ghost(x, 0)
    return _ghost_values(_termination_pmf(a, eq(gx, x)), gx)
