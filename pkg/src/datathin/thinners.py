"""Thinners: split one draw into independent folds without the unknown parameter.

Each thinner takes a draw ``x`` (any leading batch shape), a
:class:`~datathin.distributions.DistributionSpec`, a
:class:`~datathin.folds.ThinningPlan` and a random source.  The spec is
stripped of its unknown parameters on entry, so the sampling code has no way
to read them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from .distributions import DistributionSpec, Family, Theta
from .errors import (
    InvalidGamma,
    InvalidParameter,
    InvalidNu,
    NonIntegerAllocation,
    OutOfSupport,
    ShapeMismatch,
    SizeMismatch,
    TransformDomainError,
    UnsupportedFamily,
)
from .folds import FoldSet, Mode, Recombiner, ThinningPlan
from .mcmc import GaussianRandomWalk, McmcConfig, UniformBox, metropolis_sample
from .rng import as_generator

__all__ = [
    "thin",
    "thin_convolution",
    "thin_sphere",
    "thin_weibull",
    "thin_beta",
    "thin_gamma_shape",
    "thin_max",
    "thin_min",
    "thin_mean_variance",
    "thin_split",
    "thin_transformed",
    "gaussian_uv_decompose",
    "Transform",
    "transform_for",
    "supported_modes",
    "default_unknown",
    "IMPOSSIBLE",
]

# Families with no thinner at all, and why.
IMPOSSIBLE = {
    Family.BERNOULLI: (
        "Bernoulli cannot be thinned: a nondegenerate Bernoulli variable is never a "
        "function of two or more independent nonconstant variables, so no recombiner T exists"
    ),
    Family.CATEGORICAL: (
        "Categorical cannot be thinned: it contains the Bernoulli case, which admits no "
        "decomposition into independent nonconstant parts"
    ),
    Family.CAUCHY: (
        "Cauchy cannot be thinned by addition: the family is closed under convolution, but "
        "the sum of the folds is not sufficient (only the order statistics of a sample are), "
        "so the folds given their sum still depend on the parameter; sample splitting of an "
        "i.i.d. Cauchy sample is the available alternative"
    ),
}

_CONVOLUTION_FAMILIES = {
    Family.NORMAL,
    Family.MVN_ISO,
    Family.POISSON,
    Family.NEG_BINOMIAL,
    Family.BINOMIAL,
    Family.MULTINOMIAL,
    Family.GAMMA_RATE,
}

_MODES = {
    Mode.CONVOLUTION: _CONVOLUTION_FAMILIES,
    Mode.SPHERE: {Family.GAMMA_RATE},
    Mode.WEIBULL: {Family.GAMMA_RATE},
    Mode.BETA: {Family.BETA},
    Mode.GAMMA_SHAPE: {Family.GAMMA_SHAPE, Family.GAMMA_RATE},
    Mode.MAX: {Family.SCALED_BETA, Family.UNIFORM_SCALE},
    Mode.MIN: {Family.SHIFTED_EXPONENTIAL},
    Mode.MEAN_VARIANCE: {Family.NORMAL},
    # splitting an i.i.d. sample needs no sufficient reduction, so Cauchy is allowed
    Mode.SPLIT: {f for f in Family if f not in (Family.BERNOULLI, Family.CATEGORICAL)},
    Mode.TRANSFORM: {Family.NORMAL, Family.WEIBULL, Family.PARETO},
}


_DEFAULT_UNKNOWN = {
    (Mode.CONVOLUTION, Family.NORMAL): ("mean",),
    (Mode.CONVOLUTION, Family.MVN_ISO): ("mean",),
    (Mode.CONVOLUTION, Family.POISSON): ("rate",),
    (Mode.CONVOLUTION, Family.NEG_BINOMIAL): ("p",),
    (Mode.CONVOLUTION, Family.BINOMIAL): ("p",),
    (Mode.CONVOLUTION, Family.MULTINOMIAL): ("p",),
    (Mode.CONVOLUTION, Family.GAMMA_RATE): ("rate",),
    (Mode.SPHERE, Family.GAMMA_RATE): ("rate",),
    (Mode.WEIBULL, Family.GAMMA_RATE): ("rate",),
    (Mode.BETA, Family.BETA): ("a",),
    (Mode.GAMMA_SHAPE, Family.GAMMA_SHAPE): ("shape",),
    (Mode.GAMMA_SHAPE, Family.GAMMA_RATE): ("shape",),
    (Mode.MAX, Family.SCALED_BETA): ("scale",),
    (Mode.MAX, Family.UNIFORM_SCALE): ("upper",),
    (Mode.MIN, Family.SHIFTED_EXPONENTIAL): ("shift",),
    (Mode.MEAN_VARIANCE, Family.NORMAL): ("mean", "var"),
    (Mode.TRANSFORM, Family.NORMAL): ("var",),
    (Mode.TRANSFORM, Family.WEIBULL): ("scale",),
    (Mode.TRANSFORM, Family.PARETO): ("shape",),
}


def default_unknown(family, mode) -> tuple[str, ...]:
    """The parameter each thinner treats as unknown when none is named."""
    return _DEFAULT_UNKNOWN.get((Mode(mode), Family(family)), ())


def supported_modes(family) -> list[Mode]:
    family = Family(family)
    return [mode for mode, fams in _MODES.items() if family in fams]


def _refuse(family: Family, mode: Mode):
    if family in IMPOSSIBLE and (family is not Family.CAUCHY or mode is not Mode.SPLIT):
        raise UnsupportedFamily(IMPOSSIBLE[family], field="family")
    raise UnsupportedFamily(f"no {mode.value} thinner for {family.value}", field="family")


def _check_family(spec: DistributionSpec, mode: Mode):
    if spec.family not in _MODES[mode]:
        _refuse(spec.family, mode)


def _identity(x, recombiner, fold_spec, indirect=None):
    x = np.array(x, copy=True)
    return FoldSet(
        folds=(x,),
        recombiner=recombiner,
        t_value=recombiner((x,)),
        fold_specs=(fold_spec,),
        indirect_stat=indirect,
    )


def _finish(folds, recombiner, fold_specs, indirect=None, degenerate=None, diagnostics=None):
    folds = tuple(folds)
    return FoldSet(
        folds=folds,
        recombiner=recombiner,
        t_value=recombiner(folds),
        fold_specs=tuple(fold_specs),
        indirect_stat=indirect,
        degenerate=degenerate,
        diagnostics=diagnostics,
    )


def _integer_counts(x, upper=None, what="count"):
    x = np.asarray(x)
    if not np.all(np.isfinite(x)) or np.any(np.floor(x) != x) or np.any(x < 0):
        raise OutOfSupport(f"{what} input must be nonnegative integers", field="x")
    if upper is not None and np.any(x > upper):
        raise OutOfSupport(f"{what} input exceeds {upper}", field="x")
    return x.astype(np.int64)


def _allocation(plan: ThinningPlan, r, name="r") -> list[int]:
    """Exact per-fold trial counts ``eps_k * r``."""
    counts = []
    for w in plan.weights:
        share = w * Fraction(r)
        if share.denominator != 1 or share <= 0:
            raise NonIntegerAllocation(
                f"eps_k * {name} must be a positive integer; got {share} for eps_k={w}", field="eps"
            )
        counts.append(int(share))
    return counts


def _placeholder_share(w) -> Theta:
    return Theta(scale=float(w))


def _symbolic(spec: DistributionSpec) -> DistributionSpec:
    """Replace unknown parameters by placeholders (θ, or θ1, θ2, ... if several)."""
    names = ["θ"] if len(spec.unknown) == 1 else [f"θ{i + 1}" for i in range(len(spec.unknown))]
    params = dict(spec.hide_unknown().params)
    params.update({p: Theta(n) for p, n in zip(spec.unknown, names)})
    return DistributionSpec(spec.family, params, dim=spec.dim, unknown=spec.unknown)


# -- convolution -------------------------------------------------------------

def thin_convolution(x, spec: DistributionSpec, plan: ThinningPlan, rng) -> FoldSet:
    """Thin a draw from a convolution-closed family.

    The folds are drawn from the law of K independent fold variables given
    their sum, which for these families does not involve the unknown
    parameter.
    """
    _check_family(spec, Mode.CONVOLUTION)
    spec = spec.hide_unknown()
    fam = spec.family
    eps = plan.eps
    K = plan.K
    g = as_generator(rng)

    if fam in (Family.NORMAL, Family.MVN_ISO):
        var = spec.known("var")
        x = np.asarray(x, dtype=float)
        specs = [
            DistributionSpec(fam, {"mean": _placeholder_share(w), "var": float(w) * var}, dim=spec.dim, unknown=("mean",))
            for w in plan.weights
        ]
        if K == 1:
            return _identity(x, Recombiner("Sum"), specs[0])
        sd = np.sqrt(eps * var).reshape((K,) + (1,) * x.ndim)
        z = sd * g.standard_normal((K,) + x.shape)
        total = z.sum(axis=0)
        e = eps.reshape(sd.shape)
        folds = e * x + z - e * total
        return _finish(list(folds), Recombiner("Sum"), specs)

    if fam is Family.POISSON:
        counts = _integer_counts(x, what="Poisson")
        specs = [DistributionSpec(fam, {"rate": _placeholder_share(w)}, unknown=("rate",)) for w in plan.weights]
        if K == 1:
            return _identity(counts, Recombiner("Sum"), specs[0])
        out = np.zeros((K,) + counts.shape, dtype=np.int64)
        live = counts > 0
        if np.any(live):
            out[:, live] = g.multinomial(counts[live], eps).T
        return _finish(list(out), Recombiner("Sum"), specs)

    if fam is Family.BINOMIAL:
        r = spec.known("r")
        sizes = _allocation(plan, r)
        counts = _integer_counts(x, upper=r, what="Binomial")
        specs = [DistributionSpec(fam, {"r": n, "p": Theta()}, unknown=("p",)) for n in sizes]
        if K == 1:
            return _identity(counts, Recombiner("Sum"), specs[0])
        out = np.zeros((K,) + counts.shape, dtype=np.int64)
        live = counts > 0
        if np.any(live):
            out[:, live] = _partition_trials(counts[live], r, sizes, g)
        return _finish(list(out), Recombiner("Sum"), specs)

    if fam is Family.MULTINOMIAL:
        r = spec.known("r")
        sizes = _allocation(plan, r)
        counts = _integer_counts(x, upper=r, what="Multinomial")
        if counts.shape[-1:] != (spec.dim,):
            raise ShapeMismatch(f"Multinomial draws must have last axis {spec.dim}", field="x")
        if np.any(counts.sum(axis=-1) != r):
            raise OutOfSupport(f"Multinomial counts must sum to r={r}", field="x")
        specs = [DistributionSpec(fam, {"r": n, "p": Theta()}, dim=spec.dim, unknown=("p",)) for n in sizes]
        if K == 1:
            return _identity(counts, Recombiner("Sum"), specs[0])
        return _finish(list(_partition_labeled(counts, sizes, g)), Recombiner("Sum"), specs)

    if fam is Family.NEG_BINOMIAL:
        r = float(spec.known("r"))
        counts = _integer_counts(x, what="NegBinomial")
        specs = [DistributionSpec(fam, {"r": float(w) * r, "p": Theta()}, unknown=("p",)) for w in plan.weights]
        if K == 1:
            return _identity(counts, Recombiner("Sum"), specs[0])
        out = np.zeros((K,) + counts.shape, dtype=np.int64)
        live = counts > 0
        if np.any(live):
            n = counts[live]
            probs = g.dirichlet(eps * r, size=n.shape[0])
            out[:, live] = g.multinomial(n, probs).T
        return _finish(list(out), Recombiner("Sum"), specs)

    # GammaRate
    alpha = float(spec.known("shape"))
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)) or not np.all(np.isfinite(x)):
        raise OutOfSupport("Gamma input must be finite and > 0", field="x")
    specs = [DistributionSpec(Family.GAMMA_RATE, {"shape": float(w) * alpha, "rate": Theta()}, unknown=("rate",)) for w in plan.weights]
    if K == 1:
        return _identity(x, Recombiner("Sum"), specs[0])
    return _finish(list(_gamma_split(x, eps * alpha, g)), Recombiner("Sum"), specs)


def _gamma_split(x, shapes, g):
    """``x * Dirichlet(shapes)``, returned with the fold axis first."""
    probs = g.dirichlet(shapes, size=x.shape) if x.ndim else g.dirichlet(shapes)
    return np.moveaxis(x[..., None] * probs, -1, 0)


def _partition_trials(successes, r, sizes, g):
    """Spread ``successes`` among r trials split into blocks of ``sizes``.

    Each block draws its successes by hypergeometric sampling from what is
    left; the last block takes the remainder.
    """
    left = successes.copy()
    pool = r
    out = np.zeros((len(sizes),) + successes.shape, dtype=np.int64)
    for k, n_k in enumerate(sizes[:-1]):
        take = np.zeros_like(left)
        live = left > 0
        if np.any(live):
            take[live] = g.hypergeometric(left[live], pool - left[live], n_k)
        out[k] = take
        left = left - take
        pool -= n_k
    out[-1] = left
    return out


def _partition_labeled(counts, sizes, g):
    """Random partition of category-labelled trials into blocks of ``sizes``."""
    remaining = counts.copy()
    out = np.zeros((len(sizes),) + counts.shape, dtype=np.int64)
    d = counts.shape[-1]
    for k, n_k in enumerate(sizes[:-1]):
        need = np.full(counts.shape[:-1], n_k, dtype=np.int64)
        rest = remaining.sum(axis=-1)
        for j in range(d):
            c_j = remaining[..., j]
            rest = rest - c_j
            draw = np.zeros_like(c_j)
            live = (need > 0) & (c_j > 0)
            if np.any(live):
                if j == d - 1:
                    draw[live] = need[live]
                else:
                    draw[live] = g.hypergeometric(c_j[live], rest[live], need[live])
            out[k][..., j] = draw
            need = need - draw
        remaining = remaining - out[k]
    out[-1] = remaining
    return out


# -- Gaussian (U, V) form ----------------------------------------------------

def gaussian_uv_decompose(x, gamma: float, rng=None, *, noise=None):
    """Split ``x ~ N(θ, I)`` into ``U = x + W`` and ``V = x - W/γ``, W ~ N(0, γI).

    W is built from the same two normal vectors that :func:`thin_convolution`
    draws for a Normal with ``eps = (1/(1+γ), γ/(1+γ))`` and unit variance::

        W = (eps2 * Z1 - eps1 * Z2) / eps1

    so that ``eps1 * U`` and ``eps2 * V`` coincide with its two folds.  Pass
    ``noise`` to supply W directly.
    """
    if not (isinstance(gamma, (int, float)) and math.isfinite(gamma) and gamma > 0):
        raise InvalidGamma("gamma must be a positive finite number", field="gamma")
    x = np.asarray(x, dtype=float)
    e1 = 1.0 / (1.0 + gamma)
    e2 = 1.0 - e1
    if noise is None:
        g = as_generator(rng)
        sd = np.sqrt(np.array([e1, e2])).reshape((2,) + (1,) * x.ndim)
        z = sd * g.standard_normal((2,) + x.shape)
        w = (e2 * z[0] - e1 * z[1]) / e1
    else:
        w = np.broadcast_to(np.asarray(noise, dtype=float), x.shape)
    return x + w, x - w / gamma


# -- sphere and Weibull ------------------------------------------------------

def thin_sphere(x, spec: DistributionSpec, plan: ThinningPlan, rng) -> FoldSet:
    """Gamma(K/2, θ) into K normals: ``sqrt(x) * Z / |Z|``."""
    _check_family(spec, Mode.SPHERE)
    spec = spec.hide_unknown()
    K = plan.K
    if spec.known("shape") != K / 2:
        raise ShapeMismatch(f"sphere thinning needs shape K/2 = {K / 2}", field="shape")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise OutOfSupport("Gamma input must be finite and >= 0", field="x")
    fold_spec = DistributionSpec(Family.NORMAL, {"mean": 0.0, "var": Theta(scale=0.5, power=-1.0)}, unknown=("var",))
    recomb = Recombiner("SumOfSquares")
    g = as_generator(rng)
    z = g.standard_normal((K,) + x.shape)
    norm = np.sqrt(np.sum(z * z, axis=0))
    folds = np.sqrt(x) * z / norm
    return _finish(list(folds), recomb, [fold_spec] * K)


def thin_weibull(x, spec: DistributionSpec, plan: ThinningPlan, rng) -> FoldSet:
    """Gamma(K, θ) into K Weibull(θ^(-1/ν), ν) folds via ``Y_k ** (1/ν)``."""
    _check_family(spec, Mode.WEIBULL)
    spec = spec.hide_unknown()
    K = plan.K
    nu = plan.nu
    if nu is None:
        raise InvalidNu("Weibull thinning needs plan.nu", field="nu")
    if spec.known("shape") != K:
        raise ShapeMismatch(f"Weibull thinning needs shape K = {K}", field="shape")
    inner = thin_convolution(
        x, DistributionSpec(Family.GAMMA_RATE, {"shape": float(K)}, unknown=("rate",)), ThinningPlan(K), rng
    )
    folds = [y ** (1.0 / nu) for y in inner.folds]
    fold_spec = DistributionSpec(Family.WEIBULL, {"scale": Theta(power=-1.0 / nu), "shape": nu}, unknown=("scale",))
    return _finish(folds, Recombiner("SumOfPowers", nu), [fold_spec] * K)


# -- geometric-mean thinners (MCMC) ------------------------------------------

def _scalar_batch(x):
    x = np.asarray(x, dtype=float)
    return x, x.reshape(-1)


def _beta_log_target(log_t, K, beta):
    offsets = (np.arange(1, K) - K) / K - 1.0
    power = beta / K - 1.0

    def log_target(free):
        logs = np.log(free)
        log_last = K * log_t - logs.sum(axis=1)
        inside = np.all((free > 0) & (free < 1), axis=1) & (log_last < 0)
        val = logs @ offsets + power * (np.log1p(-free).sum(axis=1) + np.log1p(-np.exp(np.minimum(log_last, 0.0))))
        return np.where(inside, val, -np.inf)

    return log_target


def _gamma_log_target(log_t, K, beta):
    offsets = (np.arange(1, K) - K) / K

    def log_target(y):
        log_last = K * log_t - y.sum(axis=1)
        return y @ offsets - (beta / K) * (np.exp(y).sum(axis=1) + np.exp(log_last))

    return log_target


def _geometric_folds(free_logs, log_t, K, shape):
    last = K * log_t - free_logs.sum(axis=1)
    logs = np.concatenate([free_logs, last[:, None]], axis=1)
    return [np.exp(logs[:, k]).reshape(shape) for k in range(K)]


def _simplex_log_target(log_t, K, beta):
    """Beta conditional in additive log-ratio coordinates.

    With ``u_k = -log x_k`` the K log-folds satisfy ``sum(u) = L = -K log t``,
    so ``w = u / L`` lies on the simplex.  ``z_k = log(w_k / w_K)`` is
    unconstrained, and the boundary spikes of the density at ``x_k -> 1``
    become exponential tails in z.
    """
    L = -K * log_t
    offsets = (np.arange(1, K) - K) / K - 1.0
    power = beta / K - 1.0

    def unpack(z):
        full = np.concatenate([z, np.zeros((z.shape[0], 1))], axis=1)
        log_w = full - np.logaddexp.reduce(full, axis=1, keepdims=True)
        return log_w, np.exp(log_w) * L[:, None]

    def log_target(z):
        log_w, u = unpack(z)
        free = u[:, :-1]
        val = -(free @ offsets) + power * np.log(-np.expm1(-u)).sum(axis=1)
        return val - free.sum(axis=1) + log_w.sum(axis=1)

    return log_target, unpack


def thin_beta(
    x,
    spec: DistributionSpec,
    plan: ThinningPlan,
    rng,
    mcmc_cfg: McmcConfig | None = None,
    proposal_space: str = "simplex",
) -> FoldSet:
    """Beta(θ, β) into K folds whose geometric mean is x.

    Fold k is Beta(θ/K + (k-1)/K, β/K); the fold order matters.  By default
    the K-1 free folds are drawn by adaptive random-walk Metropolis on the
    log-ratio coordinates of ``-log x_k / (-K log x)``, which mixes for every
    t and β.  ``proposal_space="linear"`` instead uses a uniform independence
    proposal on ``[x^K, 1)`` per free fold; that sampler sticks when x is
    small or β < K.
    """
    _check_family(spec, Mode.BETA)
    spec = spec.hide_unknown()
    beta = float(spec.known("b"))
    K = plan.K
    x, flat = _scalar_batch(x)
    if np.any(~((flat > 0) & (flat < 1))):
        raise OutOfSupport("Beta input must lie in (0, 1)", field="x")
    if proposal_space not in ("simplex", "linear"):
        raise InvalidParameter("proposal_space must be 'simplex' or 'linear'", field="proposal_space")
    specs = [
        DistributionSpec(Family.BETA, {"a": Theta(scale=1.0 / K, offset=(k - 1) / K), "b": beta / K}, unknown=("a",))
        for k in range(1, K + 1)
    ]
    if K == 1:
        return _identity(x, Recombiner("GeometricMean"), specs[0])
    cfg = mcmc_cfg or McmcConfig()
    log_t = np.log(flat)
    if proposal_space == "simplex":
        log_target, unpack = _simplex_log_target(log_t, K, beta)
        proposal = cfg.proposal
        if not isinstance(proposal, GaussianRandomWalk):
            proposal = GaussianRandomWalk(2.4 / math.sqrt(K - 1))
        z, diag = metropolis_sample(log_target, np.zeros((flat.size, K - 1)), cfg.with_proposal(proposal), rng)
        free_logs = -unpack(z)[1][:, :-1]
    else:
        ones = np.ones((1, K - 1))
        box = UniformBox(np.exp(K * log_t)[:, None] * ones, ones)
        init = np.repeat(flat[:, None], K - 1, axis=1)
        free, diag = metropolis_sample(_beta_log_target(log_t, K, beta), init, cfg.with_proposal(box), rng)
        free_logs = np.log(free)
    folds = _geometric_folds(free_logs, log_t, K, x.shape)
    return _finish(folds, Recombiner("GeometricMean"), specs, diagnostics=diag)


def thin_gamma_shape(x, spec: DistributionSpec, plan: ThinningPlan, rng, mcmc_cfg: McmcConfig | None = None) -> FoldSet:
    """Gamma(θ, β) with θ the unknown shape into K folds with geometric mean x.

    Fold k is Gamma(θ/K + (k-1)/K, β/K).  Random-walk Metropolis on the logs
    of the K-1 free folds.
    """
    _check_family(spec, Mode.GAMMA_SHAPE)
    spec = spec.hide_unknown()
    beta = float(spec.known("rate"))
    K = plan.K
    x, flat = _scalar_batch(x)
    if np.any(~(flat > 0)) or not np.all(np.isfinite(flat)):
        raise OutOfSupport("Gamma input must be finite and > 0", field="x")
    specs = [
        DistributionSpec(
            Family.GAMMA_SHAPE, {"shape": Theta(scale=1.0 / K, offset=(k - 1) / K), "rate": beta / K}, unknown=("shape",)
        )
        for k in range(1, K + 1)
    ]
    if K == 1:
        return _identity(x, Recombiner("GeometricMean"), specs[0])
    cfg = mcmc_cfg or McmcConfig()
    proposal = cfg.proposal
    if not isinstance(proposal, GaussianRandomWalk):
        proposal = GaussianRandomWalk(2.4 / math.sqrt((K - 1) * (1.0 + beta / K)))
    log_t = np.log(flat)
    init = np.repeat(log_t[:, None], K - 1, axis=1)
    free, diag = metropolis_sample(_gamma_log_target(log_t, K, beta), init, cfg.with_proposal(proposal), rng)
    folds = _geometric_folds(free, log_t, K, x.shape)
    return _finish(folds, Recombiner("GeometricMean"), specs, diagnostics=diag)


# -- truncated-support thinners ----------------------------------------------

def thin_max(x, spec: DistributionSpec, plan: ThinningPlan, rng) -> FoldSet:
    """θ·Beta(α, 1) into K folds of θ·Beta(ε_k α, 1) whose maximum is x.

    Fold k holds x itself with probability ε_k; the others fall below it.
    """
    _check_family(spec, Mode.MAX)
    spec = spec.hide_unknown()
    alpha = 1.0 if spec.family is Family.UNIFORM_SCALE else float(spec.known("shape"))
    K = plan.K
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)) or not np.all(np.isfinite(x)):
        raise OutOfSupport("input must be finite and > 0", field="x")
    specs = [
        DistributionSpec(Family.SCALED_BETA, {"scale": Theta(), "shape": float(w) * alpha}, unknown=("scale",))
        for w in plan.weights
    ]
    if K == 1:
        return _identity(x, Recombiner("Max"), specs[0])
    g = as_generator(rng)
    expand = (K,) + (1,) * x.ndim
    holder = g.choice(K, p=plan.eps, size=x.shape)
    shrunk = x * g.random((K,) + x.shape) ** (1.0 / (plan.eps * alpha)).reshape(expand)
    folds = np.where(np.arange(K).reshape(expand) == holder, x, shrunk)
    return _finish(list(folds), Recombiner("Max"), specs)


def thin_min(x, spec: DistributionSpec, plan: ThinningPlan, rng) -> FoldSet:
    """θ + Exp(λ) into K folds of θ + Exp(ε_k λ) whose minimum is x."""
    _check_family(spec, Mode.MIN)
    spec = spec.hide_unknown()
    rate = float(spec.known("rate"))
    K = plan.K
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise OutOfSupport("input must be finite", field="x")
    specs = [
        DistributionSpec(Family.SHIFTED_EXPONENTIAL, {"shift": Theta(), "rate": float(w) * rate}, unknown=("shift",))
        for w in plan.weights
    ]
    if K == 1:
        return _identity(x, Recombiner("Min"), specs[0])
    g = as_generator(rng)
    expand = (K,) + (1,) * x.ndim
    holder = g.choice(K, p=plan.eps, size=x.shape)
    bumped = x + g.standard_exponential((K,) + x.shape) / (plan.eps * rate).reshape(expand)
    folds = np.where(np.arange(K).reshape(expand) == holder, x, bumped)
    return _finish(list(folds), Recombiner("Min"), specs)


# -- indirect thinners -------------------------------------------------------

def thin_mean_variance(x, plan: ThinningPlan, rng) -> FoldSet:
    """Resample a normal sample uniformly given its mean and variance.

    ``x`` has the n observations on its last axis; ``plan.K`` must equal n.
    Rows with zero sample variance come back unchanged and are flagged in
    ``degenerate``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] if x.ndim else 0
    if n < 2:
        raise SizeMismatch("mean-variance thinning needs n >= 2 observations", field="x")
    if plan.K != n:
        raise SizeMismatch(f"plan.K={plan.K} must equal n={n}", field="K")
    t1 = x.mean(axis=-1)
    t2 = x.var(axis=-1, ddof=1)
    g = as_generator(rng)
    z = g.standard_normal(x.shape)
    z = z - z.mean(axis=-1, keepdims=True)
    norm = np.sqrt(np.sum(z * z, axis=-1, keepdims=True))
    out = t1[..., None] + z * (np.sqrt((n - 1) * t2)[..., None] / norm)
    flat = t2 == 0
    out = np.where(flat[..., None], x, out)
    fold_spec = DistributionSpec(Family.NORMAL, {"mean": Theta("θ1"), "var": Theta("θ2")}, unknown=("mean", "var"))
    return _finish(
        [out[..., i] for i in range(n)],
        Recombiner("MeanAndVariance"),
        [fold_spec] * n,
        indirect=np.stack([t1, t2], axis=-1),
        degenerate=flat,
    )


def thin_split(x, plan: ThinningPlan, rng, spec: DistributionSpec | None = None) -> FoldSet:
    """Uniform random partition of the n records on the last axis of ``x``.

    ``plan.fold_sizes`` gives the subsample sizes.  ``spec``, if given, is the
    per-record law and is copied into ``fold_specs``.
    """
    x = np.asarray(x)
    n = x.shape[-1] if x.ndim else 0
    sizes = plan.fold_sizes if plan.fold_sizes is not None else ((n,) if plan.K == 1 else None)
    if sizes is None or sum(sizes) != n:
        raise SizeMismatch(f"fold sizes {sizes} must sum to n={n}", field="fold_sizes")
    specs = [spec] * plan.K if spec is not None else []
    recomb = Recombiner("ConcatSort")
    indirect = np.sort(x, axis=-1)
    if plan.K == 1:
        return _finish([x.copy()], recomb, specs, indirect=indirect)
    g = as_generator(rng)
    perm = np.argsort(g.random(x.shape), axis=-1)
    shuffled = np.take_along_axis(x, perm, axis=-1)
    cuts = np.cumsum(sizes)[:-1]
    return _finish(np.split(shuffled, cuts, axis=-1), recomb, specs, indirect=indirect)


@dataclass(frozen=True)
class Transform:
    """Map S(x) to a gamma variable with known shape.

    ``SquareAboutMu(μ)``: (x-μ)² ~ Gamma(1/2, 1/(2θ)) for x ~ N(μ, θ).
    ``PowerNu(ν)``: x^ν ~ Exp(θ^-ν) for x ~ Weibull(θ, ν).
    ``LogOverNu(ν)``: log(x/ν) ~ Exp(θ) for x ~ Pareto(ν, θ).
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in _GAMMA_OF:
            raise TransformDomainError(f"unknown transform {self.kind!r}", field="transform")
        if self.kind != "SquareAboutMu" and not self.param > 0:
            raise TransformDomainError(f"{self.kind} needs a positive parameter", field="transform")

    @property
    def shape(self) -> float:
        return _GAMMA_OF[self.kind][0]

    @property
    def rate_placeholder(self) -> Theta:
        kind = self.kind
        if kind == "SquareAboutMu":
            return Theta(scale=0.5, power=-1.0)
        if kind == "PowerNu":
            return Theta(power=-self.param)
        return Theta()

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise TransformDomainError("input must be finite", field="x")
        if self.kind == "SquareAboutMu":
            return (x - self.param) ** 2
        if self.kind == "PowerNu":
            if np.any(x < 0):
                raise TransformDomainError("PowerNu needs x >= 0", field="x")
            return x**self.param
        if np.any(x < self.param):
            raise TransformDomainError(f"LogOverNu needs x >= ν = {self.param}", field="x")
        return np.log(x / self.param)

    def invert(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "PowerNu":
            return s ** (1.0 / self.param)
        if self.kind == "LogOverNu":
            return self.param * np.exp(s)
        raise TransformDomainError("SquareAboutMu loses the sign of x-μ", field="transform")

    def direct_recombiner(self) -> Recombiner | None:
        """Recombiner that maps the folds straight back to x, where one exists."""
        return Recombiner("ExpOfSum", self.param) if self.kind == "LogOverNu" else None


_GAMMA_OF = {"SquareAboutMu": (0.5,), "PowerNu": (1.0,), "LogOverNu": (1.0,)}


def transform_for(spec: DistributionSpec) -> Transform:
    """The transform matching a spec with its single unknown parameter."""
    fam = spec.family
    if fam is Family.NORMAL and spec.unknown == ("var",):
        return Transform("SquareAboutMu", float(spec.known("mean")))
    if fam is Family.WEIBULL and spec.unknown == ("scale",):
        return Transform("PowerNu", float(spec.known("shape")))
    if fam is Family.PARETO and spec.unknown == ("shape",):
        return Transform("LogOverNu", float(spec.known("scale")))
    if fam in IMPOSSIBLE:
        _refuse(fam, Mode.TRANSFORM)
    raise UnsupportedFamily(
        f"no transform for {fam.value} with unknown {list(spec.unknown)}", field="family"
    )


def thin_transformed(x, transform: Transform | DistributionSpec, inner_plan: ThinningPlan, rng) -> FoldSet:
    """Thin S(x) by gamma convolution; ``indirect_stat`` holds S(x).

    ``transform`` may be a :class:`Transform` or a spec from which one is
    derived (Normal with unknown variance, Weibull with unknown scale, Pareto
    with unknown shape).
    """
    if isinstance(transform, DistributionSpec):
        transform = transform_for(transform)
    s = transform.apply(x)
    shape = transform.shape
    specs = [
        DistributionSpec(Family.GAMMA_RATE, {"shape": float(w) * shape, "rate": transform.rate_placeholder}, unknown=("rate",))
        for w in inner_plan.weights
    ]
    recomb = Recombiner("Sum")
    if inner_plan.K == 1:
        return _identity(s, recomb, specs[0], indirect=s)
    g = as_generator(rng)
    out = np.zeros((inner_plan.K,) + s.shape)
    live = s > 0
    if np.any(live):
        out[:, live] = _gamma_split(s[live], inner_plan.eps * shape, g)
    return _finish(list(out), recomb, specs, indirect=s)


# -- dispatch ----------------------------------------------------------------

def thin(x, spec: DistributionSpec, plan: ThinningPlan, rng, mcmc_cfg: McmcConfig | None = None) -> FoldSet:
    """Run the thinner selected by ``plan.mode`` after checking the family."""
    mode = plan.mode
    if spec.family not in _MODES[mode]:
        _refuse(spec.family, mode)
    if mode is Mode.CONVOLUTION:
        return thin_convolution(x, spec, plan, rng)
    if mode is Mode.SPHERE:
        return thin_sphere(x, spec, plan, rng)
    if mode is Mode.WEIBULL:
        return thin_weibull(x, spec, plan, rng)
    if mode is Mode.BETA:
        return thin_beta(x, spec, plan, rng, mcmc_cfg)
    if mode is Mode.GAMMA_SHAPE:
        return thin_gamma_shape(x, spec, plan, rng, mcmc_cfg)
    if mode is Mode.MAX:
        return thin_max(x, spec, plan, rng)
    if mode is Mode.MIN:
        return thin_min(x, spec, plan, rng)
    if mode is Mode.MEAN_VARIANCE:
        return thin_mean_variance(x, plan, rng)
    if mode is Mode.SPLIT:
        return thin_split(x, plan, rng, spec=_symbolic(spec))
    return thin_transformed(x, spec, plan, rng)
