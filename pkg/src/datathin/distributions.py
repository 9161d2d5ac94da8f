"""Parametric families: specs, samplers, log densities and CDFs.

A :class:`DistributionSpec` names a family and its parameters.  Parameters
listed in ``unknown`` are the ones a thinner is not allowed to see; their
values may be real numbers (when simulating) or :class:`Theta` placeholders
(when a thinner describes the law of a fold symbolically).

Gamma is parameterised by shape and *rate* everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
import math
import re
from typing import Any, Mapping

import numpy as np

from . import special
from .errors import InvalidParameter, Unsupported, UnknownRequiredParameter
from .rng import as_generator

__all__ = [
    "Family",
    "Theta",
    "DistributionSpec",
    "sample",
    "log_density",
    "cdf",
    "is_discrete",
    "is_scalar",
]


class Family(str, Enum):
    NORMAL = "Normal"
    MVN_ISO = "MultivariateNormalIso"
    POISSON = "Poisson"
    NEG_BINOMIAL = "NegBinomial"
    BINOMIAL = "Binomial"
    MULTINOMIAL = "Multinomial"
    GAMMA_RATE = "GammaRate"
    GAMMA_SHAPE = "GammaShape"
    BETA = "Beta"
    WEIBULL = "Weibull"
    PARETO = "Pareto"
    UNIFORM_SCALE = "UniformScale"
    SCALED_BETA = "ScaledBeta"
    SHIFTED_EXPONENTIAL = "ShiftedExponential"
    EXPONENTIAL = "Exponential"
    DIRICHLET = "Dirichlet"
    HYPERGEOMETRIC = "Hypergeometric"
    DIRICHLET_MULTINOMIAL = "DirichletMultinomial"
    CATEGORICAL = "Categorical"
    # sampleable, but deliberately absent from the thinner registry
    BERNOULLI = "Bernoulli"
    CAUCHY = "Cauchy"


# family -> ordered parameter names
PARAMS: dict[Family, tuple[str, ...]] = {
    Family.NORMAL: ("mean", "var"),
    Family.MVN_ISO: ("mean", "var"),
    Family.POISSON: ("rate",),
    Family.NEG_BINOMIAL: ("r", "p"),
    Family.BINOMIAL: ("r", "p"),
    Family.MULTINOMIAL: ("r", "p"),
    Family.GAMMA_RATE: ("shape", "rate"),
    Family.GAMMA_SHAPE: ("shape", "rate"),
    Family.BETA: ("a", "b"),
    Family.WEIBULL: ("scale", "shape"),
    Family.PARETO: ("scale", "shape"),
    Family.UNIFORM_SCALE: ("upper",),
    Family.SCALED_BETA: ("scale", "shape"),
    Family.SHIFTED_EXPONENTIAL: ("shift", "rate"),
    Family.EXPONENTIAL: ("rate",),
    Family.DIRICHLET: ("alpha",),
    Family.HYPERGEOMETRIC: ("ngood", "nbad", "nsample"),
    Family.DIRICHLET_MULTINOMIAL: ("n", "alpha"),
    Family.CATEGORICAL: ("p",),
    Family.BERNOULLI: ("p",),
    Family.CAUCHY: ("loc", "scale"),
}

_VECTOR_PARAMS = {
    (Family.MVN_ISO, "mean"),
    (Family.MULTINOMIAL, "p"),
    (Family.DIRICHLET, "alpha"),
    (Family.DIRICHLET_MULTINOMIAL, "alpha"),
    (Family.CATEGORICAL, "p"),
}

_DISCRETE = {
    Family.POISSON,
    Family.NEG_BINOMIAL,
    Family.BINOMIAL,
    Family.MULTINOMIAL,
    Family.HYPERGEOMETRIC,
    Family.DIRICHLET_MULTINOMIAL,
    Family.CATEGORICAL,
    Family.BERNOULLI,
}

_MULTIVARIATE = {
    Family.MVN_ISO,
    Family.MULTINOMIAL,
    Family.DIRICHLET,
    Family.DIRICHLET_MULTINOMIAL,
}


def is_discrete(family) -> bool:
    return Family(family) in _DISCRETE


def is_scalar(family) -> bool:
    return Family(family) not in _MULTIVARIATE


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_THETA_RE = re.compile(
    rf"^\s*(?:(?P<scale>{_NUM})\s*\*\s*)?(?P<name>θ\w*)"
    rf"(?:\s*\^\s*(?P<power>{_NUM}))?(?:\s*(?P<sign>[-+])\s*(?P<offset>{_NUM}))?\s*$"
)


@dataclass(frozen=True)
class Theta:
    """Placeholder ``scale * θ**power + offset`` for an unknown parameter."""

    name: str = "θ"
    scale: float = 1.0
    power: float = 1.0
    offset: float = 0.0

    def bind(self, value):
        value = np.asarray(value, dtype=float)
        out = self.scale * value**self.power + self.offset
        return float(out) if out.ndim == 0 else tuple(out.tolist())

    def __str__(self):
        text = self.name
        if self.power != 1.0:
            text += f"^{self.power!r}"
        if self.scale != 1.0:
            text = f"{self.scale!r}*{text}"
        if self.offset > 0:
            text += f"+{self.offset!r}"
        elif self.offset < 0:
            text += f"-{-self.offset!r}"
        return text

    @classmethod
    def parse(cls, text: str) -> "Theta":
        m = _THETA_RE.match(text)
        if m is None:
            raise InvalidParameter(f"cannot parse placeholder {text!r}")
        offset = float(m["offset"]) if m["offset"] else 0.0
        if m["sign"] == "-":
            offset = -offset
        return cls(
            name=m["name"],
            scale=float(m["scale"]) if m["scale"] else 1.0,
            power=float(m["power"]) if m["power"] else 1.0,
            offset=offset,
        )


def _freeze(value):
    if isinstance(value, Theta):
        return value
    if isinstance(value, str):
        return Theta.parse(value)
    arr = np.asarray(value)
    if arr.ndim == 0:
        item = arr.item()
        return int(item) if isinstance(item, (bool, int)) else float(item)
    return tuple(float(v) for v in arr.ravel())


@dataclass(frozen=True)
class DistributionSpec:
    """A parametric family with named parameters.

    Parameters
    ----------
    family : Family or str
    params : mapping
        Parameter values keyed by the family's parameter names.  Unknown
        parameters may be omitted, hold a value (simulation truth) or hold a
        :class:`Theta` placeholder.
    dim : int
        Event dimension; 1 for scalar families.
    unknown : tuple of str
        Names of the parameters treated as unknown.
    """

    family: Family
    params: Mapping[str, Any] = field(default_factory=dict)
    dim: int = 1
    unknown: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        frozen = {k: _freeze(v) for k, v in dict(self.params).items()}
        object.__setattr__(self, "params", frozen)
        object.__setattr__(self, "unknown", tuple(self.unknown))
        names = PARAMS[self.family]
        for key in frozen:
            if key not in names:
                raise InvalidParameter(f"{self.family.value} has no parameter {key!r}", field=key)
        for key in self.unknown:
            if key not in names:
                raise InvalidParameter(f"{self.family.value} has no parameter {key!r}", field=key)
        if self.family in _MULTIVARIATE and self.dim == 1:
            vec = next((frozen[n] for n in names if (self.family, n) in _VECTOR_PARAMS and isinstance(frozen.get(n), tuple)), None)
            if vec is not None:
                object.__setattr__(self, "dim", len(vec))
        if not isinstance(self.dim, int) or self.dim < 1:
            raise InvalidParameter("dim must be a positive integer", field="dim")
        self._validate()

    # -- parameter access ------------------------------------------------
    def known(self, name: str):
        """Value of a known parameter; unknown or missing ones raise."""
        if name in self.unknown or name not in self.params:
            raise UnknownRequiredParameter(
                f"{self.family.value} parameter {name!r} must be known here", field=name
            )
        value = self.params[name]
        if isinstance(value, Theta):
            raise UnknownRequiredParameter(f"parameter {name!r} is symbolic", field=name)
        return value

    def value(self, name: str):
        value = self.params.get(name)
        if value is None or isinstance(value, Theta):
            raise InvalidParameter(f"parameter {name!r} has no numeric value", field=name)
        return value

    def hide_unknown(self) -> "DistributionSpec":
        """Copy with every unknown parameter removed."""
        kept = {k: v for k, v in self.params.items() if k not in self.unknown}
        return replace(self, params=kept)

    def theta(self):
        """Numeric value(s) of the unknown parameter(s), for binding placeholders."""
        if len(self.unknown) == 1:
            return self.value(self.unknown[0])
        return {f"θ{i + 1}": self.value(name) for i, name in enumerate(self.unknown)}

    def bind(self, theta) -> "DistributionSpec":
        """Substitute placeholders with numeric values."""
        bound = {}
        for k, v in self.params.items():
            if isinstance(v, Theta):
                if isinstance(theta, Mapping):
                    v = v.bind(theta[v.name])
                else:
                    v = v.bind(theta)
            bound[k] = v
        return replace(self, params=bound)

    @property
    def symbolic(self) -> bool:
        return any(isinstance(v, Theta) for v in self.params.values())

    # -- validation ------------------------------------------------------
    def _validate(self):
        fam = self.family
        p = {k: v for k, v in self.params.items() if not isinstance(v, Theta)}

        def positive(name):
            if name in p and not np.all(np.asarray(p[name], dtype=float) > 0):
                raise InvalidParameter(f"{fam.value}: {name} must be > 0", field=name)

        def prob(name):
            if name in p:
                v = np.asarray(p[name], dtype=float)
                if not np.all((v > 0) & (v < 1)):
                    raise InvalidParameter(f"{fam.value}: {name} must lie in (0, 1)", field=name)

        def count(name, strict=False):
            if name in p:
                v = p[name]
                if isinstance(v, float) and v.is_integer():
                    v = int(v)
                    p[name] = v
                    self.params[name] = v  # type: ignore[index]
                if not isinstance(v, int) or v < (1 if strict else 0):
                    raise InvalidParameter(f"{fam.value}: {name} must be a nonnegative integer", field=name)

        def simplex(name):
            if name in p:
                v = np.asarray(p[name], dtype=float)
                if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
                    raise InvalidParameter(f"{fam.value}: {name} must be a probability vector", field=name)

        if fam in (Family.NORMAL, Family.MVN_ISO):
            if "var" in p and not np.all(np.asarray(p["var"], dtype=float) >= 0):
                raise InvalidParameter(f"{fam.value}: var must be >= 0", field="var")
            if fam is Family.MVN_ISO and isinstance(p.get("mean"), tuple) and len(p["mean"]) != self.dim:
                raise InvalidParameter("mean length must equal dim", field="mean")
        elif fam in (Family.POISSON, Family.EXPONENTIAL):
            positive("rate")
        elif fam is Family.NEG_BINOMIAL:
            positive("r")
            prob("p")
        elif fam is Family.BINOMIAL:
            count("r")
            prob("p")
        elif fam is Family.MULTINOMIAL:
            count("r")
            simplex("p")
        elif fam in (Family.GAMMA_RATE, Family.GAMMA_SHAPE):
            positive("shape")
            positive("rate")
        elif fam is Family.BETA:
            positive("a")
            positive("b")
        elif fam in (Family.WEIBULL, Family.PARETO, Family.SCALED_BETA):
            positive("scale")
            positive("shape")
        elif fam is Family.UNIFORM_SCALE:
            positive("upper")
        elif fam is Family.SHIFTED_EXPONENTIAL:
            positive("rate")
        elif fam is Family.DIRICHLET:
            positive("alpha")
        elif fam is Family.HYPERGEOMETRIC:
            for name in ("ngood", "nbad", "nsample"):
                count(name)
            if all(n in p for n in ("ngood", "nbad", "nsample")) and p["nsample"] > p["ngood"] + p["nbad"]:
                raise InvalidParameter("nsample exceeds population", field="nsample")
        elif fam is Family.DIRICHLET_MULTINOMIAL:
            count("n")
            positive("alpha")
        elif fam is Family.CATEGORICAL:
            simplex("p")
        elif fam is Family.BERNOULLI:
            if "p" in p and not 0 <= p["p"] <= 1:
                raise InvalidParameter("Bernoulli p must lie in [0, 1]", field="p")
        elif fam is Family.CAUCHY:
            positive("scale")

    # -- serialisation ---------------------------------------------------
    def to_json(self) -> dict:
        out = {}
        for k, v in self.params.items():
            if isinstance(v, Theta):
                out[k] = str(v)
            elif isinstance(v, tuple):
                out[k] = list(v)
            else:
                out[k] = v
        data = {"family": self.family.value, "params": out, "dim": self.dim}
        if self.unknown:
            data["unknown"] = list(self.unknown)
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "DistributionSpec":
        extra = set(data) - {"family", "params", "dim", "unknown"}
        if extra:
            raise InvalidParameter(f"unexpected keys {sorted(extra)}")
        try:
            family = Family(data["family"])
        except (KeyError, ValueError) as exc:
            raise InvalidParameter(f"unknown family {data.get('family')!r}", field="family") from exc
        return cls(
            family=family,
            params=dict(data.get("params", {})),
            dim=int(data.get("dim", 1)),
            unknown=tuple(data.get("unknown", ())),
        )


def _require(spec, *names):
    missing = [n for n in names if n not in spec.params or isinstance(spec.params[n], Theta)]
    if missing:
        raise InvalidParameter(f"{spec.family.value} needs numeric values for {missing}", field=missing[0])
    return [spec.params[n] for n in names]


def _event_shape(spec):
    return () if is_scalar(spec.family) else (spec.dim,)


# -- sampling ----------------------------------------------------------------

def sample(spec: DistributionSpec, rng, size=None):
    """Draw from ``spec``; ``size`` prefixes the event shape."""
    g = as_generator(rng)
    shape = () if size is None else tuple(np.atleast_1d(size))
    fam = spec.family
    if fam is Family.NORMAL:
        mean, var = _require(spec, "mean", "var")
        return mean + math.sqrt(var) * g.standard_normal(shape) if shape else mean + math.sqrt(var) * g.standard_normal()
    if fam is Family.MVN_ISO:
        mean, var = _require(spec, "mean", "var")
        mean = np.broadcast_to(np.asarray(mean, dtype=float), (spec.dim,))
        return mean + math.sqrt(var) * g.standard_normal(shape + (spec.dim,))
    if fam is Family.POISSON:
        (rate,) = _require(spec, "rate")
        return g.poisson(rate, size=shape or None)
    if fam is Family.NEG_BINOMIAL:
        r, p = _require(spec, "r", "p")
        return g.negative_binomial(r, p, size=shape or None)
    if fam is Family.BINOMIAL:
        r, p = _require(spec, "r", "p")
        return g.binomial(r, p, size=shape or None)
    if fam is Family.MULTINOMIAL:
        r, p = _require(spec, "r", "p")
        return g.multinomial(r, p, size=shape or None)
    if fam in (Family.GAMMA_RATE, Family.GAMMA_SHAPE):
        shape_param, rate = _require(spec, "shape", "rate")
        return g.gamma(shape_param, 1.0 / rate, size=shape or None)
    if fam is Family.BETA:
        a, b = _require(spec, "a", "b")
        return g.beta(a, b, size=shape or None)
    if fam is Family.WEIBULL:
        scale, k = _require(spec, "scale", "shape")
        return scale * g.weibull(k, size=shape or None)
    if fam is Family.PARETO:
        scale, k = _require(spec, "scale", "shape")
        # numpy's pareto is Lomax; shift onto [scale, inf)
        return scale * (1.0 + g.pareto(k, size=shape or None))
    if fam is Family.UNIFORM_SCALE:
        (upper,) = _require(spec, "upper")
        return upper * g.random(shape or None)
    if fam is Family.SCALED_BETA:
        scale, a = _require(spec, "scale", "shape")
        return scale * g.beta(a, 1.0, size=shape or None)
    if fam is Family.SHIFTED_EXPONENTIAL:
        shift, rate = _require(spec, "shift", "rate")
        return shift + g.exponential(1.0 / rate, size=shape or None)
    if fam is Family.EXPONENTIAL:
        (rate,) = _require(spec, "rate")
        return g.exponential(1.0 / rate, size=shape or None)
    if fam is Family.DIRICHLET:
        (alpha,) = _require(spec, "alpha")
        return g.dirichlet(alpha, size=shape or None)
    if fam is Family.HYPERGEOMETRIC:
        ngood, nbad, nsample = _require(spec, "ngood", "nbad", "nsample")
        return g.hypergeometric(ngood, nbad, nsample, size=shape or None)
    if fam is Family.DIRICHLET_MULTINOMIAL:
        n, alpha = _require(spec, "n", "alpha")
        probs = g.dirichlet(alpha, size=shape or None)
        return g.multinomial(n, probs)
    if fam is Family.CATEGORICAL:
        (p,) = _require(spec, "p")
        return g.choice(len(p), p=p, size=shape or None)
    if fam is Family.BERNOULLI:
        (p,) = _require(spec, "p")
        return g.binomial(1, p, size=shape or None)
    if fam is Family.CAUCHY:
        loc, scale = _require(spec, "loc", "scale")
        return loc + scale * g.standard_cauchy(size=shape or None)
    raise Unsupported(f"no sampler for {fam.value}")


# -- log densities -----------------------------------------------------------

def _lfact(k):
    return special.log_gamma(np.asarray(k, dtype=float) + 1.0)


def _is_int(x):
    return np.isfinite(x) & (np.floor(x) == x)


def _masked(x, ok, fn):
    """Evaluate ``fn`` where ``ok`` holds and -inf elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    if np.any(ok):
        out[ok] = fn(x[ok])
    return out


def log_density(spec: DistributionSpec, x):
    """Log density (or log mass) of ``spec`` at ``x``; ``-inf`` off support.

    Multivariate families reduce over the last axis.
    """
    fam = spec.family
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _log_density(spec, fam, x)
    return float(out) if np.ndim(out) == 0 else out


def _log_density(spec, fam, x):
    if fam is Family.NORMAL:
        mean, var = _require(spec, "mean", "var")
        if var == 0:
            return np.where(x == mean, np.inf, -np.inf)
        return -0.5 * np.log(2 * np.pi * var) - 0.5 * (x - mean) ** 2 / var
    if fam is Family.MVN_ISO:
        mean, var = _require(spec, "mean", "var")
        mean = np.asarray(mean, dtype=float)
        return np.sum(-0.5 * np.log(2 * np.pi * var) - 0.5 * (x - mean) ** 2 / var, axis=-1)
    if fam is Family.POISSON:
        (rate,) = _require(spec, "rate")
        return _masked(x, _is_int(x) & (x >= 0), lambda k: k * math.log(rate) - rate - _lfact(k))
    if fam is Family.NEG_BINOMIAL:
        r, p = _require(spec, "r", "p")
        return _masked(
            x,
            _is_int(x) & (x >= 0),
            lambda k: special.log_gamma(k + r) - special.log_gamma(r) - _lfact(k) + r * math.log(p) + k * math.log1p(-p),
        )
    if fam is Family.BINOMIAL:
        r, p = _require(spec, "r", "p")
        return _masked(
            x,
            _is_int(x) & (x >= 0) & (x <= r),
            lambda k: _lfact(r) - _lfact(k) - _lfact(r - k) + k * math.log(p) + (r - k) * math.log1p(-p),
        )
    if fam is Family.MULTINOMIAL:
        r, p = _require(spec, "r", "p")
        p = np.asarray(p)
        ok = np.all(_is_int(x) & (x >= 0), axis=-1) & (np.sum(x, axis=-1) == r)
        safe = np.where(ok[..., None], x, 0.0)
        terms = np.where(safe > 0, safe * np.log(np.where(p > 0, p, 1.0)), 0.0)
        val = _lfact(r) - np.sum(_lfact(safe), axis=-1) + np.sum(terms, axis=-1)
        return np.where(ok, val, -np.inf)
    if fam in (Family.GAMMA_RATE, Family.GAMMA_SHAPE):
        a, rate = _require(spec, "shape", "rate")
        return _masked(x, x > 0, lambda v: a * math.log(rate) - special.log_gamma(a) + (a - 1) * np.log(v) - rate * v)
    if fam is Family.BETA:
        a, b = _require(spec, "a", "b")
        lb = special.log_beta(a, b)
        return _masked(x, (x > 0) & (x < 1), lambda v: (a - 1) * np.log(v) + (b - 1) * np.log1p(-v) - lb)
    if fam is Family.WEIBULL:
        lam, k = _require(spec, "scale", "shape")
        return _masked(x, x > 0, lambda v: math.log(k / lam) + (k - 1) * np.log(v / lam) - (v / lam) ** k)
    if fam is Family.PARETO:
        nu, k = _require(spec, "scale", "shape")
        return _masked(x, x >= nu, lambda v: math.log(k) + k * math.log(nu) - (k + 1) * np.log(v))
    if fam is Family.UNIFORM_SCALE:
        (upper,) = _require(spec, "upper")
        return np.where((x >= 0) & (x <= upper), -math.log(upper), -np.inf)
    if fam is Family.SCALED_BETA:
        scale, a = _require(spec, "scale", "shape")
        return _masked(x, (x > 0) & (x <= scale), lambda v: math.log(a / scale) + (a - 1) * np.log(v / scale))
    if fam is Family.SHIFTED_EXPONENTIAL:
        shift, rate = _require(spec, "shift", "rate")
        return _masked(x, x >= shift, lambda v: math.log(rate) - rate * (v - shift))
    if fam is Family.EXPONENTIAL:
        (rate,) = _require(spec, "rate")
        return _masked(x, x >= 0, lambda v: math.log(rate) - rate * v)
    if fam is Family.DIRICHLET:
        (alpha,) = _require(spec, "alpha")
        alpha = np.asarray(alpha)
        ok = np.all(x > 0, axis=-1) & (np.abs(np.sum(x, axis=-1) - 1) < 1e-9)
        lnorm = special.log_gamma(alpha.sum()) - np.sum(special.log_gamma(alpha))
        val = lnorm + np.sum((alpha - 1) * np.log(np.where(x > 0, x, 1.0)), axis=-1)
        return np.where(ok, val, -np.inf)
    if fam is Family.HYPERGEOMETRIC:
        ngood, nbad, nsample = _require(spec, "ngood", "nbad", "nsample")
        ok = _is_int(x) & (x >= max(0, nsample - nbad)) & (x <= min(nsample, ngood))

        def lchoose(n, k):
            return _lfact(n) - _lfact(k) - _lfact(n - k)

        return _masked(x, ok, lambda k: lchoose(ngood, k) + lchoose(nbad, nsample - k) - lchoose(ngood + nbad, nsample))
    if fam is Family.DIRICHLET_MULTINOMIAL:
        n, alpha = _require(spec, "n", "alpha")
        alpha = np.asarray(alpha)
        a0 = alpha.sum()
        ok = np.all(_is_int(x) & (x >= 0), axis=-1) & (np.sum(x, axis=-1) == n)
        safe = np.where(ok[..., None], x, 0.0)
        val = (
            _lfact(n)
            + special.log_gamma(a0)
            - special.log_gamma(n + a0)
            + np.sum(special.log_gamma(safe + alpha) - special.log_gamma(alpha) - _lfact(safe), axis=-1)
        )
        return np.where(ok, val, -np.inf)
    if fam is Family.CATEGORICAL:
        (p,) = _require(spec, "p")
        p = np.asarray(p)
        ok = _is_int(x) & (x >= 0) & (x < len(p))
        idx = np.where(ok, x, 0).astype(int)
        return np.where(ok, np.log(p[idx]), -np.inf)
    if fam is Family.BERNOULLI:
        (p,) = _require(spec, "p")
        return np.where(x == 1, np.log(p), np.where(x == 0, np.log1p(-p), -np.inf))
    if fam is Family.CAUCHY:
        loc, scale = _require(spec, "loc", "scale")
        z = (x - loc) / scale
        return -math.log(math.pi * scale) - np.log1p(z * z)
    raise Unsupported(f"no density for {fam.value}")


# -- CDFs --------------------------------------------------------------------

def _discrete_cdf(x, upper_bound, log_pmf):
    """Exact summation of the mass function up to ``floor(x)``."""
    x = np.asarray(x, dtype=float)
    k = np.floor(x)
    out = np.zeros(x.shape)
    above = k >= 0
    if not np.any(above):
        return out
    top = int(np.max(k[above]))
    if upper_bound is not None:
        top = min(top, int(upper_bound))
    support = np.arange(top + 1, dtype=float)
    pmf = np.exp(log_pmf(support))
    running = np.minimum(np.cumsum(pmf), 1.0)
    idx = np.clip(k, 0, top).astype(int)
    out = np.where(above, running[idx], 0.0)
    if upper_bound is not None:
        out = np.where(k >= upper_bound, 1.0, out)
    return out


def cdf(spec: DistributionSpec, x):
    """``P(X <= x)`` for scalar families."""
    fam = spec.family
    if not is_scalar(fam):
        raise Unsupported(f"cdf is only defined for scalar families, not {fam.value}")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _cdf(spec, fam, x)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _cdf(spec, fam, x):
    if fam is Family.NORMAL:
        mean, var = _require(spec, "mean", "var")
        if var == 0:
            return np.where(x >= mean, 1.0, 0.0)
        return special.normal_cdf((x - mean) / math.sqrt(var))
    if fam in (Family.POISSON, Family.NEG_BINOMIAL, Family.BINOMIAL, Family.HYPERGEOMETRIC):
        upper = None
        if fam is Family.BINOMIAL:
            upper = spec.value("r")
        elif fam is Family.HYPERGEOMETRIC:
            upper = min(spec.value("nsample"), spec.value("ngood"))
        return _discrete_cdf(x, upper, lambda k: _log_density(spec, fam, k))
    if fam in (Family.GAMMA_RATE, Family.GAMMA_SHAPE):
        a, rate = _require(spec, "shape", "rate")
        return special.regularized_inc_gamma(a, np.maximum(x, 0.0) * rate)
    if fam is Family.BETA:
        a, b = _require(spec, "a", "b")
        return special.regularized_inc_beta(a, b, np.clip(x, 0.0, 1.0))
    if fam is Family.WEIBULL:
        lam, k = _require(spec, "scale", "shape")
        z = np.maximum(x, 0.0) / lam
        return -np.expm1(-(z**k))
    if fam is Family.PARETO:
        nu, k = _require(spec, "scale", "shape")
        return np.where(x < nu, 0.0, -np.expm1(k * np.log(nu / np.maximum(x, nu))))
    if fam is Family.UNIFORM_SCALE:
        (upper,) = _require(spec, "upper")
        return np.clip(x / upper, 0.0, 1.0)
    if fam is Family.SCALED_BETA:
        scale, a = _require(spec, "scale", "shape")
        return np.clip(x / scale, 0.0, 1.0) ** a
    if fam is Family.SHIFTED_EXPONENTIAL:
        shift, rate = _require(spec, "shift", "rate")
        return -np.expm1(-rate * np.maximum(x - shift, 0.0))
    if fam is Family.EXPONENTIAL:
        (rate,) = _require(spec, "rate")
        return -np.expm1(-rate * np.maximum(x, 0.0))
    if fam is Family.CATEGORICAL:
        (p,) = _require(spec, "p")
        return _discrete_cdf(x, len(p) - 1, lambda k: _log_density(spec, fam, k))
    if fam is Family.BERNOULLI:
        (p,) = _require(spec, "p")
        return np.where(x < 0, 0.0, np.where(x < 1, 1.0 - p, 1.0))
    if fam is Family.CAUCHY:
        loc, scale = _require(spec, "loc", "scale")
        return 0.5 + np.arctan((x - loc) / scale) / math.pi
    raise Unsupported(f"no cdf for {fam.value}")


def marginal(spec: DistributionSpec, index: int = 0) -> DistributionSpec:
    """Scalar marginal of coordinate ``index`` of a multivariate family."""
    fam = spec.family
    if is_scalar(fam):
        return spec
    if fam is Family.MVN_ISO:
        mean = spec.params.get("mean")
        if isinstance(mean, tuple):
            mean = mean[index]
        return DistributionSpec(Family.NORMAL, {"mean": mean, "var": spec.params.get("var")})
    if fam is Family.MULTINOMIAL:
        p = spec.params.get("p")
        if isinstance(p, tuple):
            p = p[index]
        return DistributionSpec(Family.BINOMIAL, {"r": spec.params.get("r"), "p": p})
    if fam is Family.DIRICHLET:
        alpha = np.asarray(spec.value("alpha"))
        return DistributionSpec(Family.BETA, {"a": alpha[index], "b": alpha.sum() - alpha[index]})
    raise Unsupported(f"no scalar marginal for {fam.value}")
