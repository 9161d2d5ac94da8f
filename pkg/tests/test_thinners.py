import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from datathin import thinners
from datathin.distributions import DistributionSpec, Family, sample
from datathin.errors import (
    InvalidGamma,
    InvalidNu,
    NonIntegerAllocation,
    OutOfSupport,
    ShapeMismatch,
    SizeMismatch,
    TransformDomainError,
    UnknownRequiredParameter,
    UnsupportedFamily,
)
from datathin.folds import Mode, ThinningPlan
from datathin.mcmc import McmcConfig
from oracles import BetaConditional, GammaConditional
from datathin.thinners import IMPOSSIBLE, Transform, gaussian_uv_decompose, supported_modes, thin


def _chi2_against(counts: dict, probs: dict, n: int) -> float:
    keys = sorted(probs)
    obs = np.array([counts.get(k, 0) for k in keys], dtype=float)
    exp = np.array([probs[k] for k in keys]) * n
    keep = exp >= 5
    obs = np.append(obs[keep], obs[~keep].sum())
    exp = np.append(exp[keep], exp[~keep].sum())
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    return stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue


def _tally(rows):
    out = {}
    for r in map(tuple, np.atleast_2d(np.asarray(rows).T).T):
        out[r if len(r) > 1 else r[0]] = out.get(r if len(r) > 1 else r[0], 0) + 1
    return out


# -- conditional laws checked against brute-force ratios of fold laws ---------

def test_poisson_conditional_is_parameter_free(gen):
    x, n = 9, 20_000
    spec = DistributionSpec("Poisson", {"rate": 2.3}, unknown=("rate",))
    plan = ThinningPlan(2, ["3/10", "7/10"])
    fs = thin(np.full(n, x), spec, plan, gen)
    for theta in (0.7, 5.0):
        oracle = {
            k: stats.poisson.pmf(k, 0.3 * theta) * stats.poisson.pmf(x - k, 0.7 * theta) / stats.poisson.pmf(x, theta)
            for k in range(x + 1)
        }
        assert _chi2_against(_tally(fs.folds[0]), oracle, n) > 1e-3


def test_binomial_conditional(gen):
    x, n, p = 4, 20_000, 0.37
    spec = DistributionSpec("Binomial", {"r": 10, "p": p}, unknown=("p",))
    fs = thin(np.full(n, x), spec, ThinningPlan(2, ["3/10", "7/10"]), gen)
    oracle = {
        k: stats.binom.pmf(k, 3, p) * stats.binom.pmf(x - k, 7, p) / stats.binom.pmf(x, 10, p) for k in range(x + 1)
    }
    assert _chi2_against(_tally(fs.folds[0]), oracle, n) > 1e-3
    assert np.all(fs.folds[0] <= 3) and np.all(fs.folds[1] <= 7)


def test_negbinomial_conditional(gen):
    x, n, p = 6, 20_000, 0.4
    spec = DistributionSpec("NegBinomial", {"r": 4, "p": p}, unknown=("p",))
    fs = thin(np.full(n, x), spec, ThinningPlan(2), gen)
    oracle = {
        k: stats.nbinom.pmf(k, 2, p) * stats.nbinom.pmf(x - k, 2, p) / stats.nbinom.pmf(x, 4, p) for k in range(x + 1)
    }
    assert _chi2_against(_tally(fs.folds[0]), oracle, n) > 1e-3


def test_multinomial_conditional(gen):
    x, n, p = np.array([1, 2, 3]), 20_000, [0.2, 0.3, 0.5]
    spec = DistributionSpec("Multinomial", {"r": 6, "p": p}, unknown=("p",))
    fs = thin(np.tile(x, (n, 1)), spec, ThinningPlan(2, ["1/3", "2/3"]), gen)
    oracle = {}
    for y in itertools.product(*(range(c + 1) for c in x)):
        if sum(y) != 2:
            continue
        y = np.array(y)
        oracle[tuple(y)] = (
            stats.multinomial.pmf(y, 2, p) * stats.multinomial.pmf(x - y, 4, p) / stats.multinomial.pmf(x, 6, p)
        )
    assert sum(oracle.values()) == pytest.approx(1.0)
    assert _chi2_against(_tally(fs.folds[0]), oracle, n) > 1e-3


def _numeric_conditional_cdf(log_joint, lo, hi, m=20_001):
    grid = np.linspace(lo, hi, m)
    dens = np.exp(log_joint(grid) - np.max(log_joint(grid)))
    cum = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cum /= cum[-1]
    return lambda v: np.interp(v, grid, cum)


def test_normal_conditional(gen):
    x, var, n, theta = 1.7, 2.0, 20_000, -0.4
    spec = DistributionSpec("Normal", {"mean": theta, "var": var}, unknown=("mean",))
    fs = thin(np.full(n, x), spec, ThinningPlan(2, ["1/4", "3/4"]), gen)
    f1 = stats.norm(0.25 * theta, math.sqrt(0.25 * var))
    f2 = stats.norm(0.75 * theta, math.sqrt(0.75 * var))
    F = _numeric_conditional_cdf(lambda k: f1.logpdf(k) + f2.logpdf(x - k), -8, 8)
    assert stats.kstest(fs.folds[0], F).pvalue > 1e-3


def test_gamma_conditional(gen):
    x, n = 2.2, 20_000
    spec = DistributionSpec("GammaRate", {"shape": 3.0, "rate": 1.3}, unknown=("rate",))
    fs = thin(np.full(n, x), spec, ThinningPlan(2, ["1/3", "2/3"]), gen)
    f1, f2 = stats.gamma(1.0, scale=1 / 1.3), stats.gamma(2.0, scale=1 / 1.3)
    F = _numeric_conditional_cdf(lambda k: f1.logpdf(k) + f2.logpdf(x - k), 1e-9, x - 1e-9)
    assert stats.kstest(fs.folds[0], F).pvalue > 1e-3


def test_beta_mcmc_conditional_at_small_t(gen):
    t, beta, n = 0.25, 1.0, 4000
    spec = DistributionSpec("Beta", {"a": 0.5, "b": beta}, unknown=("a",))
    fs = thin(np.full(n, t), spec, ThinningPlan(2, mode=Mode.BETA), gen)
    assert stats.kstest(fs.folds[0], BetaConditional(t, beta).cdf).pvalue > 1e-3


def test_gamma_shape_mcmc_conditional(gen):
    t, beta, n = 0.8, 2.0, 4000
    spec = DistributionSpec("GammaShape", {"shape": 3.0, "rate": beta}, unknown=("shape",))
    fs = thin(np.full(n, t), spec, ThinningPlan(2, mode=Mode.GAMMA_SHAPE), gen)
    assert stats.kstest(fs.folds[0], GammaConditional(t, beta).cdf).pvalue > 1e-3


# -- reconstruction ------------------------------------------------------------

def _cases():
    g = np.random.default_rng(11)
    yield "normal", DistributionSpec("Normal", {"mean": 3, "var": 2}, unknown=("mean",)), ThinningPlan(3, ["1/6", "1/3", "1/2"])
    yield "mvn", DistributionSpec("MultivariateNormalIso", {"mean": [0, 5], "var": 1}, unknown=("mean",)), ThinningPlan(2)
    yield "poisson", DistributionSpec("Poisson", {"rate": 4}, unknown=("rate",)), ThinningPlan(4)
    yield "negbin", DistributionSpec("NegBinomial", {"r": 3, "p": 0.4}, unknown=("p",)), ThinningPlan(2, ["1/3", "2/3"])
    yield "binomial", DistributionSpec("Binomial", {"r": 12, "p": 0.4}, unknown=("p",)), ThinningPlan(3)
    yield "multinomial", DistributionSpec("Multinomial", {"r": 9, "p": [0.1, 0.6, 0.3]}, unknown=("p",)), ThinningPlan(3)
    yield "gamma", DistributionSpec("GammaRate", {"shape": 2.5, "rate": 1.5}, unknown=("rate",)), ThinningPlan(5)
    yield "sphere", DistributionSpec("GammaRate", {"shape": 1.5, "rate": 2}, unknown=("rate",)), ThinningPlan(3, mode=Mode.SPHERE)
    yield "weibull", DistributionSpec("GammaRate", {"shape": 3, "rate": 1}, unknown=("rate",)), ThinningPlan(3, mode=Mode.WEIBULL, nu=2.0)
    yield "beta", DistributionSpec("Beta", {"a": 2, "b": 3}, unknown=("a",)), ThinningPlan(3, mode=Mode.BETA)
    yield "gamma-shape", DistributionSpec("GammaShape", {"shape": 2, "rate": 1}, unknown=("shape",)), ThinningPlan(3, mode=Mode.GAMMA_SHAPE)
    yield "max", DistributionSpec("ScaledBeta", {"scale": 2, "shape": 3}, unknown=("scale",)), ThinningPlan(2, ["1/4", "3/4"], mode=Mode.MAX)
    yield "min", DistributionSpec("ShiftedExponential", {"shift": -1, "rate": 2}, unknown=("shift",)), ThinningPlan(3, mode=Mode.MIN)
    yield "transform-normal", DistributionSpec("Normal", {"mean": 1, "var": 2}, unknown=("var",)), ThinningPlan(2, mode=Mode.TRANSFORM)
    yield "transform-weibull", DistributionSpec("Weibull", {"scale": 2, "shape": 1.5}, unknown=("scale",)), ThinningPlan(3, mode=Mode.TRANSFORM)
    yield "transform-pareto", DistributionSpec("Pareto", {"scale": 2, "shape": 3}, unknown=("shape",)), ThinningPlan(2, mode=Mode.TRANSFORM)


CASES = list(_cases())


@pytest.mark.parametrize("name,spec,plan", CASES, ids=[c[0] for c in CASES])
def test_reconstruction(name, spec, plan, gen):
    x = sample(spec, gen, 500)
    fs = thin(x, spec, plan, gen, McmcConfig(burn_in=100, thin_every=5))
    target = fs.target() if fs.indirect_stat is not None else x
    if np.issubdtype(np.asarray(x).dtype, np.integer):
        assert np.array_equal(fs.recombiner(fs.folds), x)
    else:
        assert fs.relative_error(target) <= 1e-12
    assert fs.K == plan.K and len(fs.fold_specs) == plan.K
    for fold in fs.folds:
        assert fold.shape == np.shape(x)


@pytest.mark.parametrize("name,spec,plan", CASES, ids=[c[0] for c in CASES])
def test_fold_specs_hide_the_parameter(name, spec, plan, gen):
    fs = thin(sample(spec, gen, 4), spec, plan, gen, McmcConfig(burn_in=10, thin_every=1))
    for fold_spec in fs.fold_specs:
        assert fold_spec.symbolic
        bound = fold_spec.bind(spec.theta())
        assert not bound.symbolic


def test_k_equal_one_is_identity(gen):
    spec = DistributionSpec("Poisson", {"rate": 3}, unknown=("rate",))
    x = sample(spec, gen, 10)
    fs = thin(x, spec, ThinningPlan(1), gen)
    assert np.array_equal(fs.folds[0], x)


def test_zero_counts_stay_zero(gen):
    spec = DistributionSpec("Poisson", {"rate": 3}, unknown=("rate",))
    fs = thin(np.zeros(50, dtype=int), spec, ThinningPlan(3), gen)
    assert all(np.all(f == 0) for f in fs.folds)


@settings(max_examples=40, deadline=None)
@given(
    rate=st.floats(0.05, 50),
    K=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_poisson_reconstruction_property(rate, K, seed):
    g = np.random.default_rng(seed)
    spec = DistributionSpec("Poisson", {"rate": rate}, unknown=("rate",))
    x = sample(spec, g, 64)
    fs = thin(x, spec, ThinningPlan(K), g)
    assert np.array_equal(sum(fs.folds), x)
    assert all(np.all(f >= 0) for f in fs.folds)


@settings(max_examples=40, deadline=None)
@given(
    shape=st.floats(0.05, 20),
    weights=st.lists(st.integers(1, 9), min_size=2, max_size=5),
    seed=st.integers(0, 2**32 - 1),
)
def test_gamma_reconstruction_property(shape, weights, seed):
    g = np.random.default_rng(seed)
    total = sum(weights)
    plan = ThinningPlan(len(weights), [f"{w}/{total}" for w in weights])
    spec = DistributionSpec("GammaRate", {"shape": shape, "rate": 1.0}, unknown=("rate",))
    x = sample(spec, g, 64)
    x = np.where(x > 0, x, 1e-300)
    fs = thin(x, spec, plan, g)
    assert fs.relative_error(x) <= 1e-12


# -- individual thinners ---------------------------------------------------------

def test_max_holder_frequency(gen):
    spec = DistributionSpec("UniformScale", {"upper": 1.0}, unknown=("upper",))
    x = np.full(40_000, 0.6)
    fs = thin(x, spec, ThinningPlan(2, ["1/4", "3/4"], mode=Mode.MAX), gen)
    held = np.mean(fs.folds[0] == 0.6)
    assert abs(held - 0.25) < 4 * math.sqrt(0.25 * 0.75 / x.size)
    below = fs.folds[0][fs.folds[0] < 0.6] / 0.6
    # the non-holding fold is x·Beta(1/4, 1)
    assert stats.kstest(below, stats.beta(0.25, 1).cdf).pvalue > 1e-3


def test_min_holder_frequency(gen):
    spec = DistributionSpec("ShiftedExponential", {"shift": 0.0, "rate": 3.0}, unknown=("shift",))
    x = np.full(30_000, 2.0)
    fs = thin(x, spec, ThinningPlan(3, mode=Mode.MIN), gen)
    assert np.all(np.minimum.reduce(fs.folds) == 2.0)
    held = np.array([np.mean(f == 2.0) for f in fs.folds])
    assert np.allclose(held, 1 / 3, atol=0.02)


def test_sphere_direction_is_uniform(gen):
    spec = DistributionSpec("GammaRate", {"shape": 1.0, "rate": 1.0}, unknown=("rate",))
    fs = thin(np.full(20_000, 4.0), spec, ThinningPlan(2, mode=Mode.SPHERE), gen)
    angle = np.arctan2(fs.folds[1], fs.folds[0])
    assert stats.kstest(angle, stats.uniform(-math.pi, 2 * math.pi).cdf).pvalue > 1e-3


def test_mean_variance_keeps_statistics(gen):
    x = gen.normal(2.0, 3.0, size=(200, 6))
    x[0] = 1.5
    fs = thin(x, DistributionSpec("Normal", {"mean": 2, "var": 9}, unknown=("mean", "var")), ThinningPlan(6, mode=Mode.MEAN_VARIANCE), gen)
    out = np.stack(fs.folds, axis=-1)
    assert np.allclose(out.mean(axis=-1), x.mean(axis=-1), rtol=1e-12, atol=1e-12)
    assert np.allclose(out.var(axis=-1, ddof=1), x.var(axis=-1, ddof=1), rtol=1e-12, atol=1e-12)
    assert fs.degenerate[0] and not fs.degenerate[1:].any()
    with pytest.raises(SizeMismatch):
        thin(x, DistributionSpec("Normal", {"mean": 2, "var": 9}, unknown=("mean", "var")), ThinningPlan(5, mode=Mode.MEAN_VARIANCE), gen)


def test_split_is_a_partition(gen):
    x = np.arange(7.0)[None, :].repeat(3000, axis=0)
    spec = DistributionSpec("Cauchy", {"loc": 0, "scale": 1}, unknown=("loc",))
    fs = thin(x, spec, ThinningPlan(2, mode=Mode.SPLIT, fold_sizes=[2, 5]), gen)
    assert fs.folds[0].shape == (3000, 2) and fs.folds[1].shape == (3000, 5)
    assert np.array_equal(np.sort(np.concatenate(fs.folds, axis=1), axis=1), x)
    # every record lands in the first fold with probability 2/7
    freq = np.array([np.mean(np.any(fs.folds[0] == v, axis=1)) for v in range(7)])
    assert np.allclose(freq, 2 / 7, atol=0.03)


def test_pareto_direct_recombiner(gen):
    spec = DistributionSpec("Pareto", {"scale": 2, "shape": 3}, unknown=("shape",))
    x = sample(spec, gen, 100)
    fs = thin(x, spec, ThinningPlan(3, mode=Mode.TRANSFORM), gen)
    direct = Transform("LogOverNu", 2.0).direct_recombiner()
    assert np.allclose(direct(fs.folds), x, rtol=1e-12)


def test_transform_round_trip():
    t = Transform("PowerNu", 1.5)
    x = np.array([0.1, 1.0, 7.0])
    assert np.allclose(t.invert(t.apply(x)), x)
    with pytest.raises(TransformDomainError):
        Transform("LogOverNu", 2.0).apply(np.array([1.0]))
    with pytest.raises(TransformDomainError):
        Transform("SquareAboutMu", 0.0).invert(np.array([1.0]))


# -- (U, V) form ------------------------------------------------------------------

def test_uv_matches_convolution_draws():
    x = np.linspace(-2, 2, 9)
    gamma = 2.0
    u, v = gaussian_uv_decompose(x, gamma, np.random.default_rng(5))
    spec = DistributionSpec("Normal", {"mean": 0, "var": 1}, unknown=("mean",))
    fs = thin(x, spec, ThinningPlan(2, ["1/3", "2/3"]), np.random.default_rng(5))
    assert np.allclose(u / 3, fs.folds[0], rtol=1e-12, atol=1e-15)
    assert np.allclose(2 * v / 3, fs.folds[1], rtol=1e-12, atol=1e-15)


def test_uv_with_supplied_noise():
    u, v = gaussian_uv_decompose(np.array([1.0]), 4.0, noise=np.array([2.0]))
    assert u[0] == 3.0 and v[0] == 0.5


@pytest.mark.parametrize("gamma", [0.0, -1.0, float("inf")])
def test_uv_rejects_bad_gamma(gamma):
    with pytest.raises(InvalidGamma):
        gaussian_uv_decompose(np.zeros(2), gamma, 0)


# -- refusals -----------------------------------------------------------------------

@pytest.mark.parametrize("family,params", [("Bernoulli", {"p": 0.3}), ("Categorical", {"p": [0.2, 0.8]})])
def test_no_thinner_for_bernoulli_or_categorical(family, params, gen):
    assert supported_modes(family) == []
    spec = DistributionSpec(family, params, unknown=("p",))
    for mode in Mode:
        with pytest.raises(UnsupportedFamily) as info:
            thin(np.zeros(2), spec, ThinningPlan(2, mode=mode, fold_sizes=[1, 1] if mode is Mode.SPLIT else None), gen)
        assert info.value.message == IMPOSSIBLE[Family(family)]


def test_cauchy_cannot_be_added(gen):
    spec = DistributionSpec("Cauchy", {"loc": 0, "scale": 1}, unknown=("loc",))
    with pytest.raises(UnsupportedFamily) as info:
        thin(np.zeros(2), spec, ThinningPlan(2), gen)
    assert "not sufficient" in info.value.message
    assert supported_modes("Cauchy") == [Mode.SPLIT]


def test_errors(gen):
    binom = DistributionSpec("Binomial", {"r": 10, "p": 0.5}, unknown=("p",))
    with pytest.raises(NonIntegerAllocation):
        thin(np.array([3]), binom, ThinningPlan(3), gen)
    with pytest.raises(OutOfSupport):
        thin(np.array([11]), binom, ThinningPlan(2), gen)
    with pytest.raises(UnknownRequiredParameter):
        thin(np.array([1.0]), DistributionSpec("Normal", {"mean": 0}, unknown=("mean",)), ThinningPlan(2), gen)
    gamma = DistributionSpec("GammaRate", {"shape": 2, "rate": 1}, unknown=("rate",))
    with pytest.raises(ShapeMismatch):
        thin(np.array([1.0]), gamma, ThinningPlan(2, mode=Mode.SPHERE), gen)
    with pytest.raises(InvalidNu):
        thin(np.array([1.0]), gamma, ThinningPlan(2, mode=Mode.WEIBULL), gen)
    with pytest.raises(OutOfSupport):
        thin(np.array([1.5]), DistributionSpec("Beta", {"a": 1, "b": 1}, unknown=("a",)), ThinningPlan(2, mode=Mode.BETA), gen)


def test_negbinomial_allows_real_shares(gen):
    spec = DistributionSpec("NegBinomial", {"r": 1, "p": 0.5}, unknown=("p",))
    fs = thin(np.array([5, 0, 2]), spec, ThinningPlan(3), gen)
    assert fs.fold_specs[0].params["r"] == pytest.approx(1 / 3)
    assert np.array_equal(sum(fs.folds), [5, 0, 2])


def test_default_unknowns_cover_every_mode():
    for mode, families in thinners._MODES.items():
        for fam in families:
            if mode is Mode.SPLIT:
                continue
            assert thinners.default_unknown(fam, mode), (mode, fam)
