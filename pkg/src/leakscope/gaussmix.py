"""Gaussian-mixture program states and forward (SOGA) transfer rules.

A state is a weighted list of possibly degenerate Gaussians over the vector
of program variables. Discrete values live in zero-variance (Dirac)
coordinates, which keeps branching and observation on discrete variables
exact: they only select components. Operations that leave the Gaussian
family (products of two variables) are moment matched per component.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .lang.ast import (
    Assign, Bernoulli, Categorical, Compare, GMLit, Gauss, If, Num, Observe,
    Program, Sample, Skip, Var, flatten, seq,
)
from .lang.exprs import (
    affine_form, eval_expr, eval_pred, expr_vars, fold_expr, pred_vars,
    product_form, subst_expr, values_equal,
)
from .lang.static import bind_program, program_vars, unroll

DIRAC_TOL = 1e-12
LUMP_TOL = 1e-9
PRUNE_TOL = 1e-12
MAX_COMPONENTS = 100_000


class SogaError(ValueError):
    """A statement falls outside what the mixture semantics supports."""


class UnsatisfiableObservationError(SogaError):
    pass


class DegenerateMarginalError(SogaError):
    pass


@dataclass(frozen=True)
class GaussianMixture:
    """``sum_i w[i] N(means[i], covs[i])`` over ``varnames``."""

    varnames: tuple
    weights: np.ndarray   # (C,)
    means: np.ndarray     # (C, n)
    covs: np.ndarray      # (C, n, n)

    @classmethod
    def from_components(cls, varnames: Sequence[str], comps) -> "GaussianMixture":
        n = len(varnames)
        w = np.array([c[0] for c in comps], dtype=float)
        m = np.array([np.asarray(c[1], dtype=float).reshape(n) for c in comps]).reshape(len(comps), n)
        s = np.array([np.asarray(c[2], dtype=float).reshape(n, n) for c in comps]).reshape(len(comps), n, n)
        return cls(tuple(varnames), w, m, s)

    @property
    def dim(self) -> int:
        return len(self.varnames)

    def __len__(self) -> int:
        return len(self.weights)

    def index(self, name: str) -> int:
        try:
            return self.varnames.index(name)
        except ValueError:
            raise KeyError(f"no variable {name!r} in mixture") from None

    def components(self):
        return zip(self.weights, self.means, self.covs)

    def is_dirac(self, c: int, i: int) -> bool:
        return self.covs[c, i, i] <= DIRAC_TOL

    def dirac_values(self, c: int) -> dict:
        return {v: float(self.means[c, i]) for i, v in enumerate(self.varnames) if self.is_dirac(c, i)}

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def cov(self) -> np.ndarray:
        mu = self.mean()
        d = self.means - mu
        return np.einsum("c,cij->ij", self.weights, self.covs) + np.einsum("c,ci,cj->ij", self.weights, d, d)

    def check(self, tol: float = 1e-10) -> None:
        if len(self) == 0:
            raise SogaError("mixture has no components")
        if abs(self.weights.sum() - 1.0) > 1e-12 * max(1, len(self)):
            raise SogaError(f"weights sum to {self.weights.sum()!r}")
        for s in self.covs:
            if np.max(np.abs(s - s.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(s), initial=0.0)):
                raise SogaError("covariance not symmetric")
            if self.dim and np.linalg.eigvalsh(s).min() < -tol * max(1.0, np.abs(s).max()):
                raise SogaError("covariance not positive semidefinite")

    # structural ops -------------------------------------------------------
    def marginal(self, names: Sequence[str]) -> "GaussianMixture":
        idx = [self.index(n) for n in names]
        return GaussianMixture(tuple(names), self.weights.copy(), self.means[:, idx],
                               self.covs[:, idx][:, :, idx])

    def select(self, mask) -> tuple:
        """Components where ``mask`` holds, renormalized, and their total mass."""
        mask = np.asarray(mask, dtype=bool)
        mass = float(self.weights[mask].sum())
        if mass <= 0:
            return None, 0.0
        return GaussianMixture(self.varnames, self.weights[mask] / mass, self.means[mask], self.covs[mask]), mass

    def lump(self, tol: float = LUMP_TOL) -> "GaussianMixture":
        """Merge components whose mean and covariance agree within ``tol``."""
        reps: list = []
        for w, m, s in self.components():
            for r in reps:
                if np.max(np.abs(r[1] - m), initial=0.0) < tol and np.max(np.abs(r[2] - s), initial=0.0) < tol:
                    r[0] += w
                    break
            else:
                reps.append([w, m, s])
        if len(reps) == len(self):
            return self
        return GaussianMixture.from_components(self.varnames, reps)

    def prune(self, tol: float = PRUNE_TOL) -> "GaussianMixture":
        keep = self.weights >= tol
        if keep.all():
            return self
        g, _ = self.select(keep)
        return g

    def normalized(self) -> "GaussianMixture":
        return self.lump().prune()

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "varnames": list(self.varnames),
            "components": [
                {"w": float(w), "mean": [float(x) for x in m], "cov": [[float(x) for x in row] for row in s]}
                for w, m, s in self.components()
            ],
        }

    def to_json(self) -> str:
        """JSON dump with every float written to 17 significant digits."""
        def num(x):
            return format(float(x), ".17g")

        def vec(v):
            return "[" + ", ".join(num(x) for x in v) + "]"

        comps = [
            f'{{"w": {num(w)}, "mean": {vec(m)}, "cov": [{", ".join(vec(r) for r in s)}]}}'
            for w, m, s in self.components()
        ]
        return (f'{{"varnames": {json.dumps(list(self.varnames))}, '
                f'"components": [{", ".join(comps)}]}}')

    @classmethod
    def from_json(cls, text: str) -> "GaussianMixture":
        d = json.loads(text)
        return cls.from_components(d["varnames"], [(c["w"], c["mean"], c["cov"]) for c in d["components"]])


def init(varnames: Sequence[str]) -> GaussianMixture:
    """Point mass at the origin."""
    n = len(varnames)
    return GaussianMixture(tuple(varnames), np.ones(1), np.zeros((1, n)), np.zeros((1, n, n)))


# ------------------------------------------------------------ moment match

def moment_match(d, env: Optional[Mapping[str, float]] = None) -> list:
    """One-dimensional mixture ``[(w, mean, var), ...]`` standing in for ``d``.

    Finite distributions become exact Dirac mixtures, Gaussians and mixture
    literals are returned unchanged. Parameters are evaluated in ``env``.
    """
    env = env or {}
    if isinstance(d, Bernoulli):
        p = eval_expr(d.p, env)
        return [(w, v, 0.0) for w, v in ((p, 1.0), (1.0 - p, 0.0)) if w > 0]
    if isinstance(d, Categorical):
        out = [(eval_expr(q, env), float(v), 0.0) for v, q in d.items]
        return [c for c in out if c[0] > 0]
    if isinstance(d, Gauss):
        var = eval_expr(d.var, env)
        if var < 0:
            raise SogaError(f"negative variance {var}")
        return [(1.0, eval_expr(d.mean, env), var)]
    if isinstance(d, GMLit):
        out = [(eval_expr(w, env), eval_expr(m, env), eval_expr(v, env)) for w, m, v in d.items]
        return [c for c in out if c[0] > 0]
    raise TypeError(f"unknown distribution {d!r}")


def collapse(g: GaussianMixture) -> tuple:
    """Moment-matched single Gaussian ``(mean, cov)`` of a whole mixture."""
    return g.mean(), g.cov()


# -------------------------------------------------------------- transfers

def assign_linear(g: GaussianMixture, target: str, coeffs: Mapping[str, float], const: float) -> GaussianMixture:
    """``target := const + sum coeffs[v] * v`` applied to every component."""
    t = g.index(target)
    a = np.zeros(g.dim)
    for v, c in coeffs.items():
        a[g.index(v)] += c
    means = g.means.copy()
    covs = g.covs.copy()
    means[:, t] = g.means @ a + const
    cross = g.covs @ a                      # (C, n): Cov(x, a.x)
    var = np.einsum("ci,i->c", cross, a)
    covs[:, t, :] = cross
    covs[:, :, t] = cross
    covs[:, t, t] = var
    return GaussianMixture(g.varnames, g.weights.copy(), means, covs)


def assign_product(g: GaussianMixture, target: str, j: str, k: str) -> GaussianMixture:
    """``target := j * k`` with the product moment matched per component."""
    t, j, k = g.index(target), g.index(j), g.index(k)
    means = g.means.copy()
    covs = g.covs.copy()
    for c in range(len(g)):
        mu, s = g.means[c], g.covs[c]
        mj, mk = mu[j], mu[k]
        m = mj * mk + s[j, k]
        var = mj ** 2 * s[k, k] + mk ** 2 * s[j, j] + 2 * mj * mk * s[j, k] + s[j, j] * s[k, k] + s[j, k] ** 2
        cross = mj * s[k, :] + mk * s[j, :]
        means[c, t] = m
        covs[c, t, :] = cross
        covs[c, :, t] = cross
        covs[c, t, t] = var
    return GaussianMixture(g.varnames, g.weights.copy(), means, covs)


def sample(g: GaussianMixture, target: str, d) -> GaussianMixture:
    """``target ~ d``: drop ``target`` and multiply in the moment-matched ``d``.

    Distribution parameters may refer to variables that are Dirac in every
    component; they are evaluated per component.
    """
    t = g.index(target)
    names = _dist_vars(d)
    comps = []
    for c, (w, m, s) in enumerate(g.components()):
        env = _point_env(g, c, names, "distribution parameters")
        base_m = m.copy()
        base_s = s.copy()
        base_s[t, :] = 0.0
        base_s[:, t] = 0.0
        for wd, md, vd in moment_match(d, env):
            mm = base_m.copy()
            ss = base_s.copy()
            mm[t] = md
            ss[t, t] = vd
            comps.append((w * wd, mm, ss))
    _cap(len(comps))
    out = GaussianMixture.from_components(g.varnames, comps)
    return GaussianMixture(out.varnames, out.weights / out.weights.sum(), out.means, out.covs)


def _dist_vars(d) -> set:
    out: set = set()
    if isinstance(d, Bernoulli):
        expr_vars(d.p, out)
    elif isinstance(d, Gauss):
        expr_vars(d.mean, out)
        expr_vars(d.var, out)
    elif isinstance(d, Categorical):
        for _, q in d.items:
            expr_vars(q, out)
    elif isinstance(d, GMLit):
        for it in d.items:
            for x in it:
                expr_vars(x, out)
    return out


def _point_env(g: GaussianMixture, c: int, names, what: str) -> dict:
    env = {}
    for n in names:
        i = g.index(n)
        if not g.is_dirac(c, i):
            raise SogaError(f"{what} depend on {n!r}, which is not discrete in every component")
        env[n] = float(g.means[c, i])
    return env


def _cap(n: int) -> None:
    if n > MAX_COMPONENTS:
        raise SogaError(f"mixture exceeds {MAX_COMPONENTS} components")


def assign(g: GaussianMixture, target: str, expr) -> GaussianMixture:
    """Dispatch an assignment to the linear or product rule.

    Nonlinear expressions become linear when their offending variables are
    Dirac; such components are handled by substituting the point values.
    """
    lin = affine_form(expr)
    if lin is not None:
        return assign_linear(g, target, lin[1], lin[0])
    prod = product_form(expr)
    if prod is not None:
        return assign_product(g, target, *prod)
    parts = []
    for c in range(len(g)):
        point = {v: Num(x) for v, x in g.dirac_values(c).items()}
        e = fold_expr(subst_expr(expr, point))
        sub = GaussianMixture(g.varnames, np.ones(1), g.means[c:c + 1], g.covs[c:c + 1])
        lin = affine_form(e)
        if lin is not None:
            parts.append(assign_linear(sub, target, lin[1], lin[0]))
            continue
        prod = product_form(e)
        if prod is None:
            raise SogaError(f"unsupported nonlinear assignment to {target!r}")
        parts.append(assign_product(sub, target, *prod))
    return GaussianMixture(g.varnames, g.weights.copy(),
                           np.concatenate([p.means for p in parts]),
                           np.concatenate([p.covs for p in parts]))


def _guard_mask(g: GaussianMixture, pred) -> np.ndarray:
    names = pred_vars(pred)
    return np.array([eval_pred(pred, _point_env(g, c, names, "guards")) for c in range(len(g))], dtype=bool)


def observe_discrete(g: GaussianMixture, pred) -> tuple:
    """Keep the components whose Dirac point satisfies ``pred``.

    Returns ``(mixture, evidence)``.
    """
    g2, mass = g.select(_guard_mask(g, pred))
    if g2 is None:
        raise UnsatisfiableObservationError("no component satisfies the observation")
    return g2, mass


def observe_eq(g: GaussianMixture, target: str, value: float) -> tuple:
    """Condition on ``target == value``; returns ``(mixture, evidence density)``."""
    t = g.index(target)
    comps = []
    for w, m, s in g.components():
        stt = s[t, t]
        if stt <= DIRAC_TOL:
            if values_equal(m[t], value):
                comps.append((w, m.copy(), s.copy()))
            continue
        lik = math.exp(-0.5 * (value - m[t]) ** 2 / stt) / math.sqrt(2 * math.pi * stt)
        col = s[:, t]
        mm = m + col * (value - m[t]) / stt
        ss = s - np.outer(col, col) / stt
        ss = 0.5 * (ss + ss.T)
        mm[t] = value
        ss[t, :] = 0.0
        ss[:, t] = 0.0
        comps.append((w * lik, mm, ss))
    mass = sum(c[0] for c in comps)
    if not comps or mass <= 0:
        raise UnsatisfiableObservationError(f"observing {target} = {value} has zero likelihood")
    dirac_hit = any(g.covs[i, t, t] <= DIRAC_TOL for i in range(len(g)))
    if dirac_hit and any(g.covs[i, t, t] > DIRAC_TOL for i in range(len(g))):
        raise SogaError(f"{target!r} mixes point masses and densities; equality observation is ill-posed")
    comps = [(w / mass, m, s) for w, m, s in comps]
    return GaussianMixture.from_components(g.varnames, comps), mass


def observe(g: GaussianMixture, pred) -> tuple:
    names = pred_vars(pred)
    if all(g.is_dirac(c, g.index(n)) for c in range(len(g)) for n in names):
        return observe_discrete(g, pred)
    if isinstance(pred, Compare) and pred.op == "==":
        left, right = fold_expr(pred.left), fold_expr(pred.right)
        if isinstance(left, Var) and isinstance(right, Num):
            return observe_eq(g, left.name, right.value)
        if isinstance(right, Var) and isinstance(left, Num):
            return observe_eq(g, right.name, left.value)
    raise SogaError("observations on continuous variables must be `var == constant`")


# ---------------------------------------------------------------- programs

@dataclass
class SogaResult:
    state: GaussianMixture
    evidence: float
    max_components: int = 1
    trace: list = field(default_factory=list)


def _exec(stmt, g: GaussianMixture, stats: dict) -> tuple:
    ev = 1.0
    for st in flatten(stmt):
        if isinstance(st, Skip):
            continue
        if isinstance(st, Assign):
            g = assign(g, st.var, st.expr)
        elif isinstance(st, Sample):
            g = sample(g, st.var, st.dist)
        elif isinstance(st, Observe):
            g, e = observe(g, st.pred)
            ev *= e
        elif isinstance(st, If):
            mask = _guard_mask(g, st.pred)
            parts = []
            for branch, sel in ((st.then, mask), (st.orelse, ~mask)):
                sub, mass = g.select(sel)
                if sub is None:
                    continue
                try:
                    out, e = _exec(branch, sub, stats)
                except UnsatisfiableObservationError:
                    continue
                parts.append((mass * e, out))
            total = sum(p[0] for p in parts)
            if total <= 0:
                raise UnsatisfiableObservationError("both branches reject every execution")
            g = GaussianMixture(
                g.varnames,
                np.concatenate([p[1].weights * p[0] / total for p in parts]),
                np.concatenate([p[1].means for p in parts]),
                np.concatenate([p[1].covs for p in parts]),
            )
            ev *= total
        else:
            raise TypeError(f"unexpected statement {st!r}")
        g = g.normalized()
        _cap(len(g))
        stats["max"] = max(stats["max"], len(g))
        if stats.get("trace") is not None:
            stats["trace"].append((st, len(g)))
    return g, ev


def prepare(program: Program, params: Optional[Mapping[str, float]] = None,
            observations: Sequence = ()) -> tuple:
    """Bound, unrolled body with extra ``observe(var == value)`` statements appended."""
    body = unroll(bind_program(program, params)).body
    extra = [Observe(Compare("==", Var(v), Num(float(x)))) for v, x in observations]
    return seq(body, *extra) if extra else body


def run_soga(program, params: Optional[Mapping[str, float]] = None, g0: Optional[GaussianMixture] = None,
             observations: Sequence = (), trace: bool = False) -> SogaResult:
    """Forward mixture semantics of ``program`` from the all-zeros point mass."""
    body = prepare(program, params, observations) if isinstance(program, Program) else program
    names = program_vars(body)
    g = g0 if g0 is not None else init(names)
    stats = {"max": len(g), "trace": [] if trace else None}
    g, ev = _exec(body, g, stats)
    return SogaResult(g, ev, stats["max"], stats["trace"] or [])


def run_prefix(program: Program, params=None) -> list:
    """Component counts after each top-level statement (for structure checks)."""
    body = prepare(program, params)
    names = program_vars(body)
    g = init(names)
    stats = {"max": 1, "trace": None}
    counts = []
    for st in flatten(body):
        g, _ = _exec(st, g, stats)
        counts.append((st, len(g)))
    return counts
