"""Backend selection and single-point metric evaluation.

This is the glue used by the command line and the reproduction scripts: it
binds parameters, appends observation overrides, picks the exact symbolic
backend for discrete programs and the mixture backend otherwise, and returns
a uniform :class:`MetricResult`.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Mapping, Optional, Sequence

from . import gaussmix, gm_metrics, wpe
from .lang import Program, bind_program, check_exactness, classify, parse_file, program_vars, unroll
from .lang.ast import Compare, Num, Observe, Var, seq

METRICS = ("entropy", "cond-entropy", "kl", "mi")
SEMANTICS = ("wpe", "soga", "auto")


class RequestError(ValueError):
    """The request is malformed (missing variable, unknown metric, ...)."""


@dataclass
class MetricResult:
    metric: str
    semantics: str
    unit: str
    exact: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    exactness: Optional[bool] = None
    evidence: Optional[float] = None
    methods: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def corpus_path(name: str):
    """Path of a bundled ``.ppl`` program (``alg1``, ``alg2``, ``s1`` ...)."""
    if not name.endswith(".ppl"):
        name += ".ppl"
    return resources.files("leakscope") / "corpus" / name


def load_corpus(name: str) -> Program:
    return parse_file(corpus_path(name))


def unit_name(base: float) -> str:
    return "bits" if base == 2 else ("nats" if base == math.e else f"log{base:g}")


def with_observations(p: Program, observations: Sequence) -> Program:
    if not observations:
        return p
    extra = [Observe(Compare("==", Var(v), Num(float(x)))) for v, x in observations]
    return Program(p.params, seq(p.body, *extra), p.secrets, p.outputs)


def choose_semantics(p: Program, params: Optional[Mapping[str, float]] = None) -> str:
    report = classify(unroll(bind_program(p, params)))
    return "wpe" if report.discrete_only else "soga"


def analyze(program: Program, metric: str, target: str, given: Optional[str] = None,
            semantics: str = "auto", params: Optional[Mapping[str, float]] = None,
            observations: Sequence = (), base: Optional[float] = None,
            init: Optional[Mapping[str, float]] = None) -> MetricResult:
    """Evaluate one metric at one parameter point.

    ``kl`` with observations compares the posterior of ``target`` with its
    prior (the same program without the observation overrides); without
    observations it compares the marginals of ``target`` and ``given``.
    """
    if metric not in METRICS:
        raise RequestError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    if semantics not in SEMANTICS:
        raise RequestError(f"unknown semantics {semantics!r}")
    if metric != "entropy" and given is None and not (metric == "kl" and observations):
        raise RequestError(f"metric {metric!r} needs --given")
    params = dict(params or {})
    full = with_observations(program, observations)
    known = program_vars(unroll(bind_program(program, params)).body)
    for v in [target, given, *(o[0] for o in observations)]:
        if v is not None and v not in known:
            raise RequestError(f"program has no variable {v!r}")
    if semantics == "auto":
        semantics = choose_semantics(full, params)
    if semantics == "wpe" and choose_semantics(full, params) != "wpe":
        raise RequestError("the wpe semantics needs a discrete-only program")
    if base is None:
        base = 2.0 if semantics == "wpe" else math.e
    t0 = time.perf_counter()
    if semantics == "wpe":
        res = _analyze_wpe(full, metric, target, given, params, base, init)
    else:
        res = _analyze_soga(program, metric, target, given, params, observations, base)
    res.seconds = time.perf_counter() - t0
    return res


def _analyze_wpe(p, metric, target, given, params, base, init) -> MetricResult:
    a = wpe.prepare(p, params, init)
    diags: list = []
    if metric == "entropy":
        v = wpe.entropy(a, target, base=base)
    elif metric == "cond-entropy":
        v = wpe.cond_entropy(a, target, given, base=base)
    elif metric == "kl":
        v = wpe.kl(a, target, given, base=base, diagnostics=diags)
    else:
        v = wpe.mutual_information(a, target, given, base=base)
    diags.extend(a.diagnostics)
    return MetricResult(metric, "wpe", unit_name(base), exact=v, exactness=True,
                        evidence=a.evidence, methods={"exact": "wp"}, diagnostics=diags)


def _analyze_soga(p, metric, target, given, params, observations, base) -> MetricResult:
    exactness = check_exactness(unroll(bind_program(with_observations(p, observations), params))).exact
    run = gaussmix.run_soga(p, params, observations=observations)
    g = run.state
    observed = {v for v, _ in observations}
    if metric == "entropy" or (metric == "cond-entropy" and given in observed):
        bv = gm_metrics.entropy_bounds(g.marginal([target]), base=base)
    elif metric == "cond-entropy":
        bv = gm_metrics.cond_entropy_bounds(g, [target], [given], base=base)
    elif metric == "mi":
        bv = gm_metrics.mi_bounds(g, [target], [given], base=base)
    else:
        if observations:
            prior = gaussmix.run_soga(p, params).state.marginal([target]).lump()
            bv = gm_metrics.kl_bounds(g.marginal([target]).lump(), prior, base=base)
        else:
            bv = gm_metrics.kl_bounds(g.marginal([target]).lump(), g.marginal([given]).lump(), base=base)
    methods = {k: v for k, v in bv.methods.items()}
    return MetricResult(metric, "soga", unit_name(base), exact=bv.exact, lower=bv.lower, upper=bv.upper,
                        exactness=exactness, evidence=run.evidence, methods=methods,
                        diagnostics=list(bv.flags))
