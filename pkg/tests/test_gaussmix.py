import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leakscope import gaussmix as gm
from leakscope import gm_metrics, oracle
from leakscope.lang import Compare, Num, Observe, PConst, Var, check_exactness, parse, unroll

from programs import random_gaussian_source


def dist(src):
    return parse(src).body.dist


def mvn(mean, cov, w=1.0):
    return (w, np.asarray(mean, float), np.asarray(cov, float))


def close_mixtures(a, b, tol=1e-12):
    assert a.varnames == b.varnames and len(a) == len(b)
    np.testing.assert_allclose(a.weights, b.weights, atol=tol)
    np.testing.assert_allclose(a.means, b.means, atol=tol)
    np.testing.assert_allclose(a.covs, b.covs, atol=tol)


# ------------------------------------------------------------------ init

def test_init_one_dim():
    g = gm.init(["x"])
    assert len(g) == 1 and g.weights[0] == 1.0
    assert g.means.tolist() == [[0.0]] and g.covs.tolist() == [[[0.0]]]


def test_init_two_dim_dirac():
    g = gm.init(["x", "y"])
    assert g.dirac_values(0) == {"x": 0.0, "y": 0.0}
    g.check()


# --------------------------------------------------------- moment matching

def test_moment_match_bernoulli():
    assert gm.moment_match(dist("b ~ bernoulli(0.75);")) == [(0.75, 1.0, 0.0), (0.25, 0.0, 0.0)]


def test_moment_match_gauss_fixed_point():
    assert gm.moment_match(dist("x ~ gauss(10, 1);")) == [(1.0, 10.0, 1.0)]


def test_moment_match_gm_literal():
    assert gm.moment_match(dist("x ~ gm(0.25: 0, 1, 0.75: 0, 2);")) == [(0.25, 0.0, 1.0), (0.75, 0.0, 2.0)]


def test_moment_match_idempotent():
    for src in ["b ~ bernoulli(0.3);", "x ~ gauss(1, 2);", "x ~ gm(0.4: 1, 1, 0.6: -1, 3);"]:
        once = gm.moment_match(dist(src))
        g = gm.sample(gm.init(["x"]), "x", dist(src))
        assert sorted((w, m, v) for w, (m,), ((v,),) in g.components()) == sorted(once)


# ---------------------------------------------------------- linear assigns

def test_assign_identity():
    g = gm.GaussianMixture.from_components(["x"], [mvn([1.0], [[2.0]])])
    close_mixtures(gm.assign(g, "x", Var("x")), g)


def test_assign_linear_moments():
    g = gm.GaussianMixture.from_components(["x", "y"], [mvn([1, 2], np.eye(2))])
    h = gm.assign_linear(g, "y", {"x": 1.0, "y": 1.0}, 0.0)
    np.testing.assert_allclose(h.means[0], [1, 3])
    np.testing.assert_allclose(h.covs[0], [[1, 1], [1, 2]])


def test_assign_linear_against_sampling():
    prog = parse("x ~ gauss(1, 1); y ~ gauss(2, 1); y := x + y;")
    g = gm.run_soga(prog).state
    res = oracle.mc_run(prog, 1_000_000, seed=4)
    xy = np.column_stack([res.column("x"), res.column("y")])
    n = len(xy)
    mean, cov = xy.mean(axis=0), np.cov(xy.T)
    se_mean = np.sqrt(np.diag(cov) / n)
    assert np.all(np.abs(mean - g.mean()[[g.index("x"), g.index("y")]]) <= 3 * se_mean)
    assert cov[1, 1] == pytest.approx(2.0, abs=3 * 2.0 * math.sqrt(2 / n))
    assert cov[0, 1] == pytest.approx(1.0, abs=3 * math.sqrt(3 / n))


def test_gdp_count_means():
    state = gm.run_soga(parse("nfem := 0; fem_1 ~ bernoulli(0.75); inc_1 ~ gauss(10, 1); "
                              "nfem := nfem + fem_1;")).state
    i, f = state.index("nfem"), state.index("fem_1")
    assert sorted(state.means[:, i].tolist()) == [0.0, 1.0]
    np.testing.assert_array_equal(state.means[:, i], state.means[:, f])


# ------------------------------------------------------ product assigns

def test_product_of_standard_normals():
    g = gm.run_soga(parse("x1 ~ gauss(0, 1); x2 ~ gauss(0, 1); x3 := x1 * x2;")).state
    i = g.index("x3")
    assert g.means[0, i] == pytest.approx(0.0)
    assert g.covs[0, i, i] == pytest.approx(1.0)


def test_product_with_point_mass_is_scaling():
    g = gm.GaussianMixture.from_components(["x", "c", "t"], [mvn([1.5, 3.0, 0.0], np.diag([2.0, 0.0, 0.0]))])
    close_mixtures(gm.assign_product(g, "t", "x", "c"), gm.assign_linear(g, "t", {"x": 3.0}, 0.0))


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 2), st.floats(0.2, 2), st.floats(-0.9, 0.9))
def test_product_moments_fuzzed(m1, m2, v1, v2, rho):
    c12 = rho * math.sqrt(v1 * v2)
    cov = np.array([[v1, c12, 0], [c12, v2, 0], [0, 0, 0]])
    g = gm.GaussianMixture.from_components(["a", "b", "t"], [mvn([m1, m2, 0], cov)])
    h = gm.assign_product(g, "t", "a", "b")
    rng = np.random.Generator(np.random.PCG64(0))
    n = 400_000
    ab = rng.multivariate_normal([m1, m2], cov[:2, :2], size=n)
    t = ab[:, 0] * ab[:, 1]
    assert abs(t.mean() - h.means[0, 2]) <= 4 * t.std() / math.sqrt(n)
    var_se = t.var() * math.sqrt(2 / n) * 3  # heavy tails: generous band
    assert abs(t.var() - h.covs[0, 2, 2]) <= 4 * var_se
    cross = np.cov(ab[:, 0], t)[0, 1]
    assert abs(cross - h.covs[0, 0, 2]) <= 4 * math.sqrt(np.var(ab[:, 0] * t) / n) + 1e-9


# ----------------------------------------------------------------- sample

def test_first_iteration_two_components():
    g = gm.run_soga(parse("fem ~ bernoulli(0.75);")).state
    assert len(g) == 2
    assert sorted(g.weights.tolist()) == [0.25, 0.75]


def test_resample_breaks_correlation():
    g = gm.run_soga(parse("x ~ gauss(0, 1); y := x; x ~ gauss(0, 1);")).state
    i, j = g.index("x"), g.index("y")
    assert g.covs[0, i, j] == 0.0 and g.covs[0, i, i] == 1.0


def test_gdp_structure(alg2):
    trace = gm.run_soga(alg2, {"eps": 100.0}, trace=True).trace
    counts = [n for st, n in trace]
    k = next(i for i, (st, _) in enumerate(trace) if isinstance(st, Observe))
    assert counts[k - 1] == 16
    assert counts[k] == 15
    assert max(counts) == 16


# ---------------------------------------------------------- observations

def test_observe_always_true():
    g = gm.run_soga(parse("b ~ bernoulli(0.75);")).state
    h, ev = gm.observe_discrete(g, PConst(True))
    close_mixtures(g, h)
    assert ev == 1.0


def test_observe_discrete_evidence():
    g = gm.run_soga(parse("fem ~ bernoulli(0.75);")).state
    h, ev = gm.observe_discrete(g, Compare("==", Var("fem"), Num(1.0)))
    assert len(h) == 1 and h.weights[0] == 1.0
    assert ev == pytest.approx(0.75)
    mc = oracle.mc_run(parse("fem ~ bernoulli(0.75); observe(fem == 1);"), 100_000, seed=2)
    assert abs(mc.acceptance_rate - ev) <= 3 * math.sqrt(0.75 * 0.25 / mc.meta["batch"])


def test_observe_unsatisfiable():
    g = gm.run_soga(parse("b ~ bernoulli(0.5);")).state
    with pytest.raises(gm.UnsatisfiableObservationError):
        gm.observe_discrete(g, Compare("==", Var("b"), Num(3.0)))


def test_observe_eq_conditioning():
    g = gm.GaussianMixture.from_components(["x", "y"], [mvn([0, 0], [[1, 0.5], [0.5, 1]])])
    h, _ = gm.observe_eq(g, "y", 1.0)
    assert h.means[0, 0] == pytest.approx(0.5)
    assert h.covs[0, 0, 0] == pytest.approx(0.75)


def test_observe_eq_matches_banded_sampling():
    rng = np.random.Generator(np.random.PCG64(9))
    xy = rng.multivariate_normal([0, 0], [[1, 0.5], [0.5, 1]], size=4_000_000)
    x = xy[np.abs(xy[:, 1] - 1) < 1e-3, 0]
    se = x.std() / math.sqrt(len(x))
    assert abs(x.mean() - 0.5) <= 4 * se
    assert x.var() == pytest.approx(0.75, abs=4 * 0.75 * math.sqrt(2 / len(x)))


def test_observe_eq_independent():
    g = gm.GaussianMixture.from_components(["x", "y"], [mvn([3, 0], np.diag([2.0, 1.0]))])
    h, _ = gm.observe_eq(g, "y", 1.0)
    assert h.means[0, 0] == 3.0 and h.covs[0, 0, 0] == 2.0


def test_observe_eq_on_point_mass():
    g = gm.run_soga(parse("b ~ bernoulli(0.3);")).state
    h, ev = gm.observe(g, Compare("==", Var("b"), Num(1.0)))
    assert len(h) == 1 and ev == pytest.approx(0.3)


def test_observe_continuous_inequality_rejected():
    g = gm.run_soga(parse("x ~ gauss(0, 1);")).state
    with pytest.raises(gm.SogaError):
        gm.observe(g, Compare("<", Var("x"), Num(1.0)))


def test_gdp_posterior_entropy(alg2):
    g = gm.run_soga(alg2, {"eps": 100.0}, observations=[("output", 9.0)]).state
    h = gm_metrics.entropy_bounds(g.marginal(["inc_1"])).exact
    assert h == pytest.approx(1.386703, abs=1e-3)


# ------------------------------------------------------------- programs

def test_skip_program():
    g0 = gm.init(["x"])
    close_mixtures(gm.run_soga(parse("skip;").body, g0=g0).state, g0)


def test_gdp_output_variance_low_eps(alg2):
    g = gm.run_soga(alg2, {"eps": 0.1}).state
    i = g.index("output")
    assert g.cov()[i, i] == pytest.approx(8333, rel=0.02)


def test_gdp_output_moments_against_sampling(alg2):
    g = gm.run_soga(alg2, {"eps": 100.0}).state
    i = g.index("output")
    x = oracle.mc_run(alg2, 500_000, seed=1, params={"eps": 100.0}).column("output")
    n = len(x)
    assert abs(x.mean() - g.mean()[i]) <= 3 * x.std() / math.sqrt(n)
    assert abs(x.var() - g.cov()[i, i]) <= 3 * np.std((x - x.mean()) ** 2) / math.sqrt(n)


# ---------------------------------------------------------------- lumping

def test_lump_identical():
    g = gm.GaussianMixture.from_components(["x"], [mvn([10], [[1]], 0.3), mvn([10], [[1]], 0.7)])
    h = g.lump()
    assert len(h) == 1 and h.weights[0] == pytest.approx(1.0)


def test_prune_small_weights():
    g = gm.GaussianMixture.from_components(["x"], [mvn([0], [[1]], 1 - 1e-14), mvn([5], [[1]], 1e-14)])
    h = g.prune()
    assert len(h) == 1 and h.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_gdp_inc_marginal_lumps(alg2):
    g = gm.run_soga(alg2, {"eps": 100.0}).state.marginal(["inc_1"])
    lumped = g.lump()
    assert len(lumped) <= 5
    a = gm_metrics.entropy_bounds(g)
    b = gm_metrics.entropy_bounds(lumped)
    assert a.exact == pytest.approx(b.exact, abs=1e-9)


# ------------------------------------------------------------ serialization

def test_json_round_trip(alg2):
    g = gm.run_soga(alg2, {"eps": 100.0}).state
    h = gm.GaussianMixture.from_json(g.to_json())
    close_mixtures(g, h, tol=0.0)
    d = g.to_dict()
    assert set(d) == {"varnames", "components"}
    assert set(d["components"][0]) == {"w", "mean", "cov"}


# -------------------------------------------------------------- invariants

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_invariants_after_every_statement(seed):
    prog = parse(random_gaussian_source(seed))
    body = unroll(prog).body
    from leakscope.lang import flatten, program_vars
    g = gm.init(program_vars(body))
    for stmt in flatten(body):
        try:
            g = gm.run_soga(stmt, g0=g).state
        except gm.UnsatisfiableObservationError:
            return
        g.check()


@pytest.mark.parametrize("seed", range(6))
def test_exact_programs_match_sampling(seed):
    prog = parse(random_gaussian_source(seed))
    assert check_exactness(unroll(prog)).exact
    g = gm.run_soga(prog).state
    res = oracle.mc_run(prog, 1_000_000, seed=seed)
    n = res.samples.shape[0]
    mu, cov = g.mean(), g.cov()
    for v in res.varnames:
        x = res.column(v)
        i = g.index(v)
        sd = x.std()
        if sd == 0:
            assert x[0] == pytest.approx(mu[i], abs=1e-9)
            continue
        assert abs(x.mean() - mu[i]) <= 4 * sd / math.sqrt(n) + 1e-12
        se_var = np.std((x - x.mean()) ** 2) / math.sqrt(n)
        assert abs(x.var() - cov[i, i]) <= 4 * se_var + 1e-12
