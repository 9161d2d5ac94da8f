import json

import numpy as np
import pytest
from scipy import stats

from datathin.distributions import DistributionSpec, Family, Theta, cdf, log_density, marginal, sample
from datathin.errors import InvalidParameter, UnknownRequiredParameter

# (spec, scipy frozen law) pairs sharing one parameterization
SCALAR_LAWS = [
    (DistributionSpec("Normal", {"mean": 1.5, "var": 4.0}), stats.norm(1.5, 2.0)),
    (DistributionSpec("Poisson", {"rate": 7.0}), stats.poisson(7.0)),
    (DistributionSpec("NegBinomial", {"r": 2.5, "p": 0.3}), stats.nbinom(2.5, 0.3)),
    (DistributionSpec("Binomial", {"r": 12, "p": 0.35}), stats.binom(12, 0.35)),
    (DistributionSpec("GammaRate", {"shape": 2.5, "rate": 3.0}), stats.gamma(2.5, scale=1 / 3.0)),
    (DistributionSpec("GammaShape", {"shape": 0.4, "rate": 1.0}), stats.gamma(0.4)),
    (DistributionSpec("Beta", {"a": 0.5, "b": 2.0}), stats.beta(0.5, 2.0)),
    (DistributionSpec("Weibull", {"scale": 2.0, "shape": 1.5}), stats.weibull_min(1.5, scale=2.0)),
    (DistributionSpec("Pareto", {"scale": 2.0, "shape": 3.0}), stats.pareto(3.0, scale=2.0)),
    (DistributionSpec("UniformScale", {"upper": 3.0}), stats.uniform(0, 3.0)),
    (DistributionSpec("ScaledBeta", {"scale": 2.0, "shape": 0.5}), stats.beta(0.5, 1.0, scale=2.0)),
    (DistributionSpec("ShiftedExponential", {"shift": 1.0, "rate": 2.0}), stats.expon(1.0, 0.5)),
    (DistributionSpec("Exponential", {"rate": 0.5}), stats.expon(scale=2.0)),
    (DistributionSpec("Hypergeometric", {"ngood": 7, "nbad": 9, "nsample": 6}), stats.hypergeom(16, 7, 6)),
    (DistributionSpec("Cauchy", {"loc": -1.0, "scale": 0.5}), stats.cauchy(-1.0, 0.5)),
    (DistributionSpec("Bernoulli", {"p": 0.2}), stats.bernoulli(0.2)),
]
IDS = [s.family.value for s, _ in SCALAR_LAWS]


def _grid(law, discrete):
    lo, hi = law.ppf(0.001), law.ppf(0.999)
    if discrete:
        return np.arange(lo - 1, hi + 2)
    return np.linspace(lo, hi, 41)


@pytest.mark.parametrize("spec,law", SCALAR_LAWS, ids=IDS)
def test_cdf_matches_scipy(spec, law):
    discrete = hasattr(law.dist, "pmf")
    x = _grid(law, discrete)
    assert np.allclose(cdf(spec, x), law.cdf(x), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("spec,law", SCALAR_LAWS, ids=IDS)
def test_log_density_matches_scipy(spec, law):
    discrete = hasattr(law.dist, "pmf")
    x = _grid(law, discrete)
    ref = law.logpmf(x) if discrete else law.logpdf(x)
    ours = log_density(spec, x)
    finite = np.isfinite(ref)
    assert np.array_equal(np.isfinite(ours), finite)
    assert np.allclose(ours[finite], ref[finite], rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("spec,law", [p for p in SCALAR_LAWS if not hasattr(p[1].dist, "pmf")], ids=lambda v: getattr(v, "family", None) and v.family.value)
def test_sampler_follows_law(spec, law):
    x = sample(spec, np.random.default_rng(3), 20_000)
    assert stats.kstest(x, law.cdf).pvalue > 1e-3


@pytest.mark.parametrize("spec,law", [p for p in SCALAR_LAWS if hasattr(p[1].dist, "pmf")], ids=lambda v: getattr(v, "family", None) and v.family.value)
def test_discrete_sampler_mean(spec, law):
    x = sample(spec, np.random.default_rng(4), 40_000)
    assert abs(x.mean() - law.mean()) < 5 * law.std() / np.sqrt(x.size)


def test_multivariate_samplers_and_densities():
    g = np.random.default_rng(0)
    mvn = DistributionSpec("MultivariateNormalIso", {"mean": [0.0, 1.0, 2.0], "var": 2.0})
    assert mvn.dim == 3
    x = sample(mvn, g, 5)
    ref = stats.multivariate_normal([0, 1, 2], 2 * np.eye(3)).logpdf(x)
    assert np.allclose(log_density(mvn, x), ref)

    mult = DistributionSpec("Multinomial", {"r": 10, "p": [0.2, 0.3, 0.5]})
    y = sample(mult, g, 5)
    assert np.all(y.sum(axis=1) == 10)
    assert np.allclose(log_density(mult, y), stats.multinomial(10, [0.2, 0.3, 0.5]).logpmf(y))

    dirich = DistributionSpec("Dirichlet", {"alpha": [1.5, 2.0, 0.7]})
    z = sample(dirich, g, 5)
    assert np.allclose(log_density(dirich, z), [stats.dirichlet([1.5, 2.0, 0.7]).logpdf(r) for r in z])

    dm = DistributionSpec("DirichletMultinomial", {"n": 8, "alpha": [1.0, 2.0, 3.0]})
    w = sample(dm, g, 5)
    assert np.allclose(log_density(dm, w), stats.dirichlet_multinomial([1.0, 2.0, 3.0], 8).logpmf(w))


def test_marginals():
    mult = DistributionSpec("Multinomial", {"r": 10, "p": [0.2, 0.3, 0.5]})
    assert marginal(mult, 1) == DistributionSpec("Binomial", {"r": 10, "p": 0.3})
    mvn = DistributionSpec("MultivariateNormalIso", {"mean": [0.0, 1.0], "var": 2.0})
    assert marginal(mvn, 1).params == {"mean": 1.0, "var": 2.0}


def test_support_violations_give_minus_inf():
    assert log_density(DistributionSpec("Poisson", {"rate": 2.0}), -1.0) == -np.inf
    assert log_density(DistributionSpec("Poisson", {"rate": 2.0}), 1.5) == -np.inf
    assert log_density(DistributionSpec("Beta", {"a": 2, "b": 2}), 1.0) == -np.inf
    assert log_density(DistributionSpec("Pareto", {"scale": 2, "shape": 1}), 1.9) == -np.inf


@pytest.mark.parametrize(
    "family,params,field",
    [
        ("Normal", {"mean": 0, "var": -1}, "var"),
        ("Poisson", {"rate": 0}, "rate"),
        ("Binomial", {"r": 3.5, "p": 0.5}, "r"),
        ("Binomial", {"r": 3, "p": 1.0}, "p"),
        ("Multinomial", {"r": 3, "p": [0.5, 0.6]}, "p"),
        ("Normal", {"loc": 0}, "loc"),
    ],
)
def test_invalid_parameters(family, params, field):
    with pytest.raises(InvalidParameter) as info:
        DistributionSpec(family, params)
    assert info.value.field == field


def test_unknown_parameters_are_hidden():
    spec = DistributionSpec("Poisson", {"rate": 7.0}, unknown=("rate",))
    assert spec.theta() == 7.0
    with pytest.raises(UnknownRequiredParameter):
        spec.hide_unknown().known("rate")
    with pytest.raises(UnknownRequiredParameter):
        spec.known("rate")


def test_theta_round_trip_and_binding():
    for text in ["θ", "0.3*θ", "0.5*θ^-1.0", "0.5*θ+0.5", "θ2"]:
        assert str(Theta.parse(text)) == text
    t = Theta(scale=0.5, power=-1.0)
    assert t.bind(4.0) == pytest.approx(0.125)
    assert Theta(scale=0.5, offset=0.5).bind(3.0) == pytest.approx(2.0)


def test_spec_json_round_trip():
    spec = DistributionSpec("GammaRate", {"shape": 1.0, "rate": Theta(scale=0.5, power=-1.0)}, unknown=("rate",))
    text = json.dumps(spec.to_json(), ensure_ascii=False)
    back = DistributionSpec.from_json(json.loads(text))
    assert back == spec
    assert back.bind(2.0).params["rate"] == pytest.approx(0.25)


def test_multi_theta_binding():
    spec = DistributionSpec("Normal", {"mean": Theta("θ1"), "var": Theta("θ2")}, unknown=("mean", "var"))
    bound = spec.bind({"θ1": 1.0, "θ2": 3.0})
    assert bound.params == {"mean": 1.0, "var": 3.0}
    truth = DistributionSpec("Normal", {"mean": 1.0, "var": 3.0}, unknown=("mean", "var"))
    assert truth.theta() == {"θ1": 1.0, "θ2": 3.0}
