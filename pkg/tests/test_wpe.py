import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from leakscope import oracle, wpe
from leakscope.lang import Assign, BinOp, Compare, Num, Program, Var, bind_program, parse, program_vars, unroll
from leakscope.symbolic import atom, const, eq, evaluate, ghost, iverson
from leakscope.wpe import CondExpectation, cwp, wp

from programs import random_discrete_source


def hb(p):
    return -sum(q * math.log2(q) for q in (p, 1 - p) if q > 0)


def rr_p(eps):
    return math.exp(eps) / (math.exp(eps) + 1)


# -------------------------------------------------------------- transformers

def test_wp_skip():
    x = eq("x", 1)
    assert wp(parse("skip;").body, x) == x


def test_wp_observe_free_is_feasible(alg1):
    body = unroll(bind_program(alg1, {"p": 0.3, "eps": 0.7})).body
    assert wp(body, const(1.0)).is_const()
    assert wp(body, const(1.0)).const_value() == pytest.approx(1.0, abs=1e-12)


def test_wp_bernoulli_bracket():
    g = ghost("r", 0)
    res = wp(parse("r ~ bernoulli(0.3);").body, eq(g, "r"))
    assert evaluate(res, {g: 1.0}) == pytest.approx(0.3)
    assert evaluate(res, {g: 0.0}) == pytest.approx(0.7)
    assert evaluate(res, {g: 2.0}) == 0.0


def test_wp_continuous_rejected():
    with pytest.raises(wpe.ContinuousDistributionError):
        wp(parse("x ~ gauss(0, 1);").body, const(1.0))


def test_cwp_denominator_invariant(alg1):
    body = unroll(bind_program(alg1, {"p": 0.4, "eps": 1.0})).body
    c = cwp(body, CondExpectation(eq("o", 1), const(1.0)))
    assert c.denominator == const(1.0)


def test_cwp_observe():
    c = cwp(parse("x := 1; observe(x == 1);").body, CondExpectation(const(1.0), const(1.0)))
    assert evaluate(c.force(), {}) == 1.0


def test_cwp_rr_first_line(alg1):
    # inner bracket of the randomized-response loop body: pmf of o over e^eps + 1
    for p, e in [(0.5, 1.0), (0.2, 3.0)]:
        body = unroll(bind_program(alg1, {"p": p, "eps": e})).body
        g = ghost("o", 0)
        f = cwp(body, CondExpectation(eq(g, "o"), const(1.0))).force()
        top = (p * math.exp(e) - p + 1) / (math.exp(e) + 1)
        assert evaluate(f, {g: 1.0}) == pytest.approx(top, abs=1e-12)
        assert evaluate(f, {g: 0.0}) == pytest.approx(1 - top, abs=1e-12)


# ----------------------------------------------------------------- metrics

@pytest.mark.parametrize("p", [0.1, 0.5, 0.8])
def test_entropy_of_secret(alg1, p):
    assert wpe.entropy(alg1, "r_1", {"p": p, "eps": 1.3}) == pytest.approx(hb(p), abs=1e-12)


def test_entropy_output_fair_coin(alg1):
    assert wpe.entropy(alg1, "o", {"p": 0.5, "eps": 0.0}) == pytest.approx(1.0, abs=1e-12)


def test_entropy_point_mass():
    assert wpe.entropy(parse("x := 5;"), "x") == 0.0


def test_unsatisfiable_observations():
    with pytest.raises(wpe.UnsatisfiableObservationsError):
        wpe.entropy(parse("b ~ bernoulli(0.5); observe(b == 2);"), "b")


@pytest.mark.parametrize("p", [0.2, 0.5])
def test_cond_entropy_no_privacy_loss(alg1, p):
    assert wpe.cond_entropy(alg1, "r_1", "o", {"p": p, "eps": 0.0}) == pytest.approx(hb(p), abs=1e-12)


def test_self_conditioning(alg1):
    assert wpe.cond_entropy(alg1, "o", "o", {"p": 0.3, "eps": 2.0}) == pytest.approx(0.0, abs=1e-12)


def test_cond_entropy_matches_oracle(alg1):
    params = {"p": 0.5, "eps": 10.0}
    ref = oracle.pmf_metrics(oracle.enumerate_program(alg1, params), "r_1", "o")
    assert wpe.cond_entropy(alg1, "r_1", "o", params) == pytest.approx(ref["H_cond"], abs=1e-9)


def test_kl_identical_pipelines():
    prog = parse("x ~ bernoulli(0.3); y ~ bernoulli(0.3);")
    assert wpe.kl(prog, "x", "y") == pytest.approx(0.0, abs=1e-12)


def test_kl_two_bernoullis():
    prog = parse("x ~ bernoulli(0.5); y ~ bernoulli(0.25);")
    ref = oracle.pmf_metrics(oracle.enumerate_program(prog), "x", "y")["KL"]
    assert ref == pytest.approx(0.5 * math.log2(2) + 0.5 * math.log2(0.5 / 0.75))
    assert wpe.kl(prog, "x", "y") == pytest.approx(ref, abs=1e-12)
    assert wpe.kl(prog, "x", "y") == pytest.approx(0.2075, abs=1e-4)


@pytest.mark.parametrize("eps", [0.0, 0.5, 4.0])
def test_kl_rr_fair_coin(alg1, eps):
    assert wpe.kl(alg1, "o", "r_1", {"p": 0.5, "eps": eps}) == pytest.approx(0.0, abs=1e-12)


def test_kl_support_violation():
    diags: list = []
    prog = parse("x ~ bernoulli(0.5); y := 0;")
    assert wpe.kl(prog, "x", "y", diagnostics=diags) == math.inf
    assert "1.0" in diags[0]


def test_mi_zero_without_privacy(alg1):
    assert wpe.mutual_information(alg1, "r_1", "o", {"p": 0.5, "eps": 0.0}) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("eps,expected,tol", [(0.1, 0.002, 5e-4), (10.0, 0.999, 5e-4)])
def test_mi_rr(alg1, eps, expected, tol):
    mi = wpe.mutual_information(alg1, "r_1", "o", {"p": 0.5, "eps": eps})
    assert mi == pytest.approx(expected, abs=tol)
    assert mi == pytest.approx(1 - hb(rr_p(eps)), abs=1e-12)


def test_termination_pmf(alg1):
    pmf = wpe.termination_pmf(alg1, "o", {"p": 0.5, "eps": 1.0})
    assert pmf == pytest.approx({0.0: 0.5, 1.0: 0.5})


def test_init_override():
    # built directly: the parser would reject reading x before assigning it
    prog = Program((), Assign("x", BinOp("+", Var("x"), Num(1.0))))
    assert wpe.termination_pmf(prog, "x", init={"x": 3.0}) == {4.0: 1.0}


# -------------------------------------------------------------- properties

def _states(body):
    names = sorted(program_vars(body))
    for vals in itertools.product([0.0, 1.0], repeat=min(len(names), 6)):
        yield dict(zip(names, vals), **{n: 0.0 for n in names[6:]})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.floats(0, 3), st.floats(0, 3))
def test_wp_linearity(seed, a, b):
    src, x, y = random_discrete_source(seed, max_samples=4)
    body = parse(src).body
    X, Y = atom(Var(x)) + const(2.0), eq(y, 1)
    lhs = wp(body, X.scale(a) + Y.scale(b))
    wx, wy = wp(body, X), wp(body, Y)
    for s in _states(body):
        assert evaluate(lhs, s) == pytest.approx(a * evaluate(wx, s) + b * evaluate(wy, s), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_wp_monotone(seed):
    src, x, y = random_discrete_source(seed, max_samples=4)
    body = parse(src).body
    lo, hi = eq(x, 1), eq(x, 1) + iverson(Compare(">=", Var(y), Num(1.0)))
    wl, wh = wp(body, lo), wp(body, hi)
    for s in _states(body):
        assert evaluate(wl, s) <= evaluate(wh, s) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_feasibility_fuzzed(seed):
    src, _, _ = random_discrete_source(seed, max_observes=0)
    body = parse(src).body
    w = wp(body, const(1.0))
    for s in _states(body):
        assert evaluate(w, s) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_oracle_equivalence(seed):
    src, x, y = random_discrete_source(seed)
    prog = parse(src)
    try:
        a = wpe.prepare(prog)
    except wpe.UnsatisfiableObservationsError:
        return
    ref = oracle.pmf_metrics(oracle.enumerate_program(prog), x, y)
    h, hc = wpe.entropy(a, x), wpe.cond_entropy(a, x, y)
    mi, k = wpe.mutual_information(a, x, y), wpe.kl(a, x, y)
    assert h == pytest.approx(ref["H"], abs=1e-9)
    assert hc == pytest.approx(ref["H_cond"], abs=1e-9)
    assert mi == pytest.approx(ref["MI"], abs=1e-9)
    if math.isinf(ref["KL"]):
        assert math.isinf(k)
    else:
        assert k == pytest.approx(ref["KL"], abs=1e-9)
    hy = wpe.entropy(a, y)
    assert -1e-9 <= mi <= min(h, hy) + 1e-9


@pytest.mark.parametrize("eps", [0.0, 0.1, 1.0, 10.0])
@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_corpus_oracle_equivalence(alg1, p, eps):
    params = {"p": p, "eps": eps}
    ref = oracle.pmf_metrics(oracle.enumerate_program(alg1, params), "r_1", "o")
    a = wpe.prepare(alg1, params)
    assert wpe.entropy(a, "r_1") == pytest.approx(ref["H"], abs=1e-9)
    assert wpe.cond_entropy(a, "r_1", "o") == pytest.approx(ref["H_cond"], abs=1e-9)
    assert wpe.mutual_information(a, "r_1", "o") == pytest.approx(ref["MI"], abs=1e-9)
    assert wpe.kl(a, "r_1", "o") == pytest.approx(ref["KL"], abs=1e-9)


def test_natural_log_base(alg1):
    bits = wpe.entropy(alg1, "r_1", {"p": 0.3, "eps": 1.0})
    nats = wpe.entropy(alg1, "r_1", {"p": 0.3, "eps": 1.0}, base=math.e)
    assert nats == pytest.approx(bits * math.log(2), abs=1e-12)


def test_ghost_names_are_reserved():
    assert ghost("x", 1) != ghost("x", 2)
    assert Num(1.0) == Num(1.0)
