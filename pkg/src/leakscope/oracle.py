"""Independent ground truth: exhaustive enumeration of discrete programs and
vectorized Monte-Carlo simulation with rejection for observations.

Nothing in here shares code with the symbolic or mixture backends beyond the
AST and scalar expression evaluation, so agreement is meaningful.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .lang.ast import (
    Assign, Bernoulli, BinOp, Call, Categorical, Compare, GMLit, Gauss, If,
    Neg, Not, Num, Observe, PAnd, PConst, PNot, POr, Program, Sample, Skip,
    Var, flatten,
)
from .lang.exprs import EQ_TOL, eval_expr, eval_pred, pred_vars
from .lang.static import bind_program, classify, program_vars, unroll

GENERATOR = "PCG64"
MIN_ACCEPTANCE = 1e-4


class PathBudgetError(RuntimeError):
    pass


class LowAcceptanceError(RuntimeError):
    pass


def _prepare(program: Program, params) -> tuple:
    body = unroll(bind_program(program, params)).body
    return body, program_vars(body)


# ------------------------------------------------------------- enumeration

@dataclass
class JointPmf:
    """Conditional joint distribution of selected variables on termination."""

    varnames: tuple
    probs: dict
    evidence: float

    def marginal(self, names: Sequence[str]) -> dict:
        idx = [self.varnames.index(n) for n in names]
        out: dict = {}
        for key, pr in self.probs.items():
            k = tuple(key[i] for i in idx)
            out[k] = out.get(k, 0.0) + pr
        return out


def _finite_outcomes(d, env) -> list:
    if isinstance(d, Bernoulli):
        p = eval_expr(d.p, env)
        return [(1.0, p), (0.0, 1.0 - p)]
    if isinstance(d, Categorical):
        return [(float(v), eval_expr(q, env)) for v, q in d.items]
    raise ValueError("enumeration needs finite-support distributions; got " + type(d).__name__)


def _enum(stmt, particles: dict, budget: int) -> tuple:
    """Push a ``{state-tuple: prob}`` map through ``stmt``; returns (map, lost mass)."""
    lost = 0.0
    for st in flatten(stmt):
        if isinstance(st, Skip):
            continue
        nxt: dict = {}
        if isinstance(st, Assign):
            for key, pr in particles.items():
                env = dict(key)
                env[st.var] = eval_expr(st.expr, env)
                k = tuple(sorted(env.items()))
                nxt[k] = nxt.get(k, 0.0) + pr
        elif isinstance(st, Sample):
            for key, pr in particles.items():
                env = dict(key)
                for v, q in _finite_outcomes(st.dist, env):
                    if q == 0:
                        continue
                    env[st.var] = v
                    k = tuple(sorted(env.items()))
                    nxt[k] = nxt.get(k, 0.0) + pr * q
        elif isinstance(st, Observe):
            for key, pr in particles.items():
                if eval_pred(st.pred, dict(key)):
                    nxt[key] = nxt.get(key, 0.0) + pr
                else:
                    lost += pr
        elif isinstance(st, If):
            yes = {k: p for k, p in particles.items() if eval_pred(st.pred, dict(k))}
            no = {k: p for k, p in particles.items() if k not in yes}
            a, la = _enum(st.then, yes, budget)
            b, lb = _enum(st.orelse, no, budget)
            lost += la + lb
            nxt = a
            for k, p in b.items():
                nxt[k] = nxt.get(k, 0.0) + p
        else:
            raise TypeError(f"unexpected statement {st!r}")
        if len(nxt) > budget:
            raise PathBudgetError(f"more than {budget} distinct paths")
        particles = nxt
    return particles, lost


def enumerate_program(program: Program, params: Optional[Mapping[str, float]] = None,
                      varnames: Optional[Sequence[str]] = None, max_paths: int = 2 ** 20,
                      init: Optional[Mapping[str, float]] = None) -> JointPmf:
    """Exact conditional joint pmf by exhaustive forward enumeration."""
    body, allvars = _prepare(program, params)
    state = {v: 0.0 for v in allvars}
    state.update(init or {})
    final, lost = _enum(body, {tuple(sorted(state.items())): 1.0}, max_paths)
    evidence = sum(final.values())
    if evidence <= 0:
        raise ValueError("observations are unsatisfiable")
    names = tuple(varnames) if varnames is not None else tuple(allvars)
    probs: dict = {}
    for key, pr in final.items():
        env = dict(key)
        k = tuple(env[n] for n in names)
        probs[k] = probs.get(k, 0.0) + pr / evidence
    return JointPmf(names, probs, evidence)


def _plogp(probs, base) -> float:
    return -sum(p * math.log(p, base) for p in probs if p > 0)


def pmf_metrics(j: JointPmf, x: str, y: str, base: float = 2.0) -> dict:
    """Plug-in ``H(x)``, ``H(x | y)``, ``KL(p_x || p_y)`` and ``I(x; y)``."""
    px = {k[0]: v for k, v in j.marginal([x]).items()}
    py = {k[0]: v for k, v in j.marginal([y]).items()}
    pxy = j.marginal([x, y])
    hx = _plogp(px.values(), base)
    hy = _plogp(py.values(), base)
    hxy = _plogp(pxy.values(), base)
    kl = 0.0
    for v, p in px.items():
        if p == 0:
            continue
        q = py.get(v, 0.0)
        if q == 0:
            kl = math.inf
            break
        kl += p * math.log(p / q, base)
    return {"H": hx, "H_cond": hxy - hy, "KL": kl, "MI": hx + hy - hxy}


# ------------------------------------------------------------- Monte Carlo

def _vexpr(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, BinOp):
        a, b = _vexpr(e.left, env), _vexpr(e.right, env)
        return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[e.op](a, b)
    if isinstance(e, Neg):
        return -_vexpr(e.operand, env)
    if isinstance(e, Not):
        return 1.0 - _vexpr(e.operand, env)
    if isinstance(e, Call):
        return {"exp": np.exp, "log": np.log, "sqrt": np.sqrt}[e.fn](*[_vexpr(a, env) for a in e.args])
    raise TypeError(f"cannot evaluate {e!r}")


def _vpred(p, env):
    if isinstance(p, Compare):
        a, b = _vexpr(p.left, env), _vexpr(p.right, env)
        close = np.abs(a - b) <= EQ_TOL * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        return {
            "==": close, "!=": ~close,
            "<": (a < b) & ~close, ">": (a > b) & ~close,
            "<=": (a <= b) | close, ">=": (a >= b) | close,
        }[p.op]
    if isinstance(p, PConst):
        return np.bool_(p.value)
    if isinstance(p, PNot):
        return ~_vpred(p.operand, env)
    if isinstance(p, PAnd):
        return _vpred(p.left, env) & _vpred(p.right, env)
    if isinstance(p, POr):
        return _vpred(p.left, env) | _vpred(p.right, env)
    raise TypeError(f"cannot evaluate {p!r}")


def _vsample(d, env, rng, n):
    if isinstance(d, Bernoulli):
        return (rng.random(n) < _vexpr(d.p, env)).astype(float)
    if isinstance(d, Categorical):
        u = rng.random(n)
        out = np.zeros(n)
        acc = np.zeros(n)
        taken = np.zeros(n, dtype=bool)
        for v, q in d.items:
            acc = acc + _vexpr(q, env)
            hit = ~taken & (u < acc)
            out[hit] = v
            taken |= hit
        out[~taken] = d.items[-1][0]
        return out
    if isinstance(d, Gauss):
        return _vexpr(d.mean, env) + np.sqrt(_vexpr(d.var, env)) * rng.standard_normal(n)
    if isinstance(d, GMLit):
        u = rng.random(n)
        z = rng.standard_normal(n)
        out = np.zeros(n)
        acc = 0.0
        taken = np.zeros(n, dtype=bool)
        for w, m, v in d.items:
            acc = acc + _vexpr(w, env)
            hit = ~taken & (u < acc)
            out = np.where(hit, _vexpr(m, env) + np.sqrt(_vexpr(v, env)) * z, out)
            taken |= hit
        return out
    raise TypeError(f"cannot sample {d!r}")


def _has_continuous_eq_observe(stmt, continuous: set) -> bool:
    for st in flatten(stmt):
        if isinstance(st, Observe):
            if _has_eq(st.pred) and pred_vars(st.pred) & continuous:
                return True
        elif isinstance(st, If):
            if _has_continuous_eq_observe(st.then, continuous) or \
                    _has_continuous_eq_observe(st.orelse, continuous):
                return True
    return False


def _has_eq(p) -> bool:
    if isinstance(p, Compare):
        return p.op == "=="
    if isinstance(p, PNot):
        return _has_eq(p.operand)
    if isinstance(p, (PAnd, POr)):
        return _has_eq(p.left) or _has_eq(p.right)
    return False


def _vexec(stmt, env, active, alive, rng, n):
    for st in flatten(stmt):
        if isinstance(st, Skip):
            continue
        if isinstance(st, Assign):
            env[st.var] = np.where(active, _vexpr(st.expr, env), env[st.var])
        elif isinstance(st, Sample):
            env[st.var] = np.where(active, _vsample(st.dist, env, rng, n), env[st.var])
        elif isinstance(st, Observe):
            alive &= ~active | _vpred(st.pred, env)
        elif isinstance(st, If):
            b = _vpred(st.pred, env)
            _vexec(st.then, env, active & b, alive, rng, n)
            _vexec(st.orelse, env, active & ~b, alive, rng, n)
        else:
            raise TypeError(f"unexpected statement {st!r}")


@dataclass
class MCResult:
    varnames: tuple
    samples: np.ndarray
    acceptance_rate: float
    seed: int
    generator: str = GENERATOR
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.varnames.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.varnames)
            for row in self.samples:
                w.writerow([repr(float(v)) for v in row])


def mc_run(program: Program, n: int, seed: int = 0, params: Optional[Mapping[str, float]] = None,
           batch: int = 200_000, streams: int = 1, continuous: Optional[set] = None) -> MCResult:
    """Draw ``n`` accepted forward samples by rejection.

    The seed is split into ``streams`` independent PCG64 streams (one per
    worker); each contributes ``n / streams`` rows in stream order, so the
    sample matrix depends only on ``(seed, streams)``.
    """
    body, allvars = _prepare(program, params)
    if continuous is None:
        report = classify(Program((), body))
        continuous = {v for v in allvars if not report.discrete(v)}
    if _has_continuous_eq_observe(body, continuous):
        raise ValueError("rejection sampling cannot condition on an equality over a continuous variable")
    seqs = np.random.SeedSequence(seed).spawn(streams)
    counts = [n // streams + (1 if i < n % streams else 0) for i in range(streams)]
    chunks, tried, accepted = [], 0, 0
    for ss, want in zip(seqs, counts):
        rng = np.random.Generator(np.random.PCG64(ss))
        got = 0
        while got < want:
            m = batch
            env = {v: np.zeros(m) for v in allvars}
            alive = np.ones(m, dtype=bool)
            _vexec(body, env, np.ones(m, dtype=bool), alive, rng, m)
            tried += m
            k = int(alive.sum())
            accepted += k
            if tried >= 10 * batch and accepted / tried < MIN_ACCEPTANCE:
                raise LowAcceptanceError(f"acceptance rate {accepted / tried:.2e} below {MIN_ACCEPTANCE}")
            if k == 0:
                continue
            take = min(k, want - got)
            mat = np.column_stack([env[v][alive] for v in allvars])[:take]
            chunks.append(mat)
            got += take
    samples = np.vstack(chunks) if chunks else np.zeros((0, len(allvars)))
    return MCResult(tuple(allvars), samples, accepted / max(tried, 1), seed,
                    meta={"streams": streams, "batch": batch})


# -------------------------------------------------- sample-based estimators

def histogram_entropy(x: np.ndarray, bins: int = 2000) -> float:
    """Plug-in differential entropy (nats) of a fixed equal-width histogram."""
    counts, edges = np.histogram(x, bins=bins)
    return _hist_entropy(counts, edges[1] - edges[0])


def _hist_entropy(counts: np.ndarray, width: float) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p / width)).sum())


def histogram_entropy_se(x: np.ndarray, bins: int = 2000, reps: int = 200, seed: int = 0) -> tuple:
    """Histogram entropy with its bootstrap standard error.

    With the bin edges held fixed, resampling the data is the same as drawing
    multinomial bin counts, which is what is done here.
    """
    counts, edges = np.histogram(x, bins=bins)
    width = edges[1] - edges[0]
    est = _hist_entropy(counts, width)
    rng = np.random.Generator(np.random.PCG64(seed))
    boots = [_hist_entropy(rng.multinomial(counts.sum(), counts / counts.sum()), width)
             for _ in range(reps)]
    return est, float(np.std(boots, ddof=1))
