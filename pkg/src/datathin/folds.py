"""Thinning plans, recombiners and the FoldSet container."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import math
from typing import Any, Sequence

import numpy as np

from .distributions import DistributionSpec
from .errors import EmptyFolds, InvalidParameter

__all__ = ["Mode", "ThinningPlan", "Recombiner", "FoldSet", "recombine", "parse_weight"]


class Mode(str, Enum):
    CONVOLUTION = "Convolution"
    SPHERE = "SphereProjection"
    WEIBULL = "WeibullPower"
    BETA = "GeometricMeanBeta"
    GAMMA_SHAPE = "GeometricMeanGamma"
    MAX = "MaxSupport"
    MIN = "MinSupport"
    MEAN_VARIANCE = "MeanVariance"
    SPLIT = "SampleSplit"
    TRANSFORM = "Transform"


def parse_weight(w) -> Fraction:
    """Exact rational form of a weight: ``"3/10"``, ``0.3`` and ``Fraction(3, 10)`` agree."""
    if isinstance(w, Fraction):
        return w
    if isinstance(w, int):
        return Fraction(w)
    if isinstance(w, str):
        try:
            return Fraction(w.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameter(f"bad weight {w!r}", field="eps") from exc
    # shortest repr round-trips, so 0.3 becomes 3/10 rather than its binary expansion
    return Fraction(repr(float(w)))


@dataclass(frozen=True)
class ThinningPlan:
    """Number of folds plus their allocation.

    ``weights`` default to ``1/K`` each.  ``fold_sizes`` is only used by
    sample splitting.  ``nu`` is the Weibull power hyperparameter.
    """

    K: int
    weights: tuple[Fraction, ...] | None = None
    fold_sizes: tuple[int, ...] | None = None
    mode: Mode = Mode.CONVOLUTION
    nu: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not isinstance(self.K, (int, np.integer)) or self.K < 1:
            raise InvalidParameter("K must be an integer >= 1", field="K")
        object.__setattr__(self, "K", int(self.K))
        if self.fold_sizes is not None:
            sizes = tuple(int(n) for n in self.fold_sizes)
            if len(sizes) != self.K or any(n <= 0 for n in sizes):
                raise InvalidParameter("fold_sizes must be K positive integers", field="fold_sizes")
            object.__setattr__(self, "fold_sizes", sizes)
        if self.weights is None:
            weights = tuple(Fraction(1, self.K) for _ in range(self.K))
        else:
            weights = tuple(parse_weight(w) for w in self.weights)
        if len(weights) != self.K:
            raise InvalidParameter(f"expected {self.K} weights, got {len(weights)}", field="eps")
        if any(w <= 0 for w in weights):
            raise InvalidParameter("weights must be positive", field="eps")
        if abs(float(sum(weights)) - 1.0) > 1e-12:
            raise InvalidParameter("weights must sum to 1", field="eps")
        if self.mode in (Mode.BETA, Mode.GAMMA_SHAPE, Mode.WEIBULL) and self.weights is not None:
            if any(w != Fraction(1, self.K) for w in weights):
                raise InvalidParameter(f"{self.mode.value} uses equal weights 1/K", field="eps")
        object.__setattr__(self, "weights", weights)
        if self.nu is not None and not (math.isfinite(self.nu) and self.nu > 0):
            from .errors import InvalidNu

            raise InvalidNu("nu must be a positive finite number", field="nu")

    @property
    def eps(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def to_json(self) -> dict:
        data: dict[str, Any] = {
            "K": self.K,
            "eps": [f"{w.numerator}/{w.denominator}" for w in self.weights],
            "mode": self.mode.value,
        }
        if self.fold_sizes is not None:
            data["fold_sizes"] = list(self.fold_sizes)
        if self.nu is not None:
            data["nu"] = self.nu
        return data

    @classmethod
    def from_json(cls, data) -> "ThinningPlan":
        extra = set(data) - {"K", "eps", "mode", "fold_sizes", "nu"}
        if extra:
            raise InvalidParameter(f"unexpected plan keys {sorted(extra)}")
        if "K" not in data:
            raise InvalidParameter("plan needs K", field="K")
        return cls(
            K=int(data["K"]),
            weights=data.get("eps"),
            fold_sizes=data.get("fold_sizes"),
            mode=data.get("mode", Mode.CONVOLUTION),
            nu=data.get("nu"),
        )


_RECOMBINERS = {
    "Sum",
    "SumOfSquares",
    "SumOfPowers",
    "GeometricMean",
    "Max",
    "Min",
    "MeanAndVariance",
    "ConcatSort",
    "ExpOfSum",
}


@dataclass(frozen=True)
class Recombiner:
    """The statistic T mapping folds back to the thinned quantity.

    Sum, SumOfSquares, SumOfPowers, Max, Min and GeometricMean are symmetric
    in the folds.  For the geometric-mean thinners the value is symmetric but
    the fold laws are not: fold k carries its own shape offset.
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in _RECOMBINERS:
            raise InvalidParameter(f"unknown recombiner {self.kind!r}")
        if self.kind in ("SumOfPowers", "ExpOfSum") and self.param is None:
            raise InvalidParameter(f"{self.kind} needs a parameter")

    def __str__(self):
        return self.kind if self.param is None else f"{self.kind}({self.param!r})"

    @classmethod
    def parse(cls, text: str) -> "Recombiner":
        if "(" in text:
            kind, rest = text.split("(", 1)
            return cls(kind, float(rest.rstrip(")")))
        return cls(text)

    def __call__(self, folds: Sequence[np.ndarray]) -> np.ndarray:
        if len(folds) == 0:
            raise EmptyFolds("no folds to recombine")
        kind = self.kind
        if kind == "ConcatSort":
            return np.sort(np.concatenate([np.asarray(f, dtype=float) for f in folds], axis=-1), axis=-1)
        stack = np.stack([np.asarray(f) for f in folds])
        if kind == "Sum":
            return stack.sum(axis=0)
        if kind == "SumOfSquares":
            return np.sum(stack.astype(float) ** 2, axis=0)
        if kind == "SumOfPowers":
            return np.sum(stack.astype(float) ** self.param, axis=0)
        if kind == "GeometricMean":
            with np.errstate(divide="ignore"):
                return np.exp(np.mean(np.log(stack.astype(float)), axis=0))
        if kind == "Max":
            return stack.max(axis=0)
        if kind == "Min":
            return stack.min(axis=0)
        if kind == "MeanAndVariance":
            stack = stack.astype(float)
            mean = stack.mean(axis=0)
            var = stack.var(axis=0, ddof=1) if len(folds) > 1 else np.zeros_like(mean)
            return np.stack([mean, var], axis=-1)
        # ExpOfSum
        return self.param * np.exp(stack.astype(float).sum(axis=0))

    def scale(self, folds: Sequence[np.ndarray]) -> np.ndarray:
        """Magnitude of the terms entering T, the yardstick for relative error."""
        if self.kind == "Sum":
            return np.sum(np.abs(np.stack(folds).astype(float)), axis=0)
        value = self(folds)
        if self.kind == "MeanAndVariance":
            # the mean is judged against the spread, which may dwarf it
            spread = np.sqrt(np.abs(value[..., 1]))
            return np.stack([np.maximum(np.abs(value[..., 0]), spread), np.abs(value[..., 1])], axis=-1)
        return np.abs(value)


def recombine(foldset: "FoldSet") -> np.ndarray:
    return foldset.recombiner(foldset.folds)


def _tolist(a):
    return None if a is None else np.asarray(a).tolist()


@dataclass(frozen=True)
class FoldSet:
    """Output of a thinner.

    ``folds`` holds K arrays; each has the batch shape of the input followed
    by the fold's event shape.  ``fold_specs`` describe the fold laws with the
    unknown parameter left as a placeholder.
    """

    folds: tuple[np.ndarray, ...]
    recombiner: Recombiner
    t_value: np.ndarray
    fold_specs: tuple[DistributionSpec, ...]
    indirect_stat: np.ndarray | None = None
    degenerate: np.ndarray | None = None
    diagnostics: Any = field(default=None, compare=False)

    @property
    def K(self) -> int:
        return len(self.folds)

    def stacked(self) -> np.ndarray:
        return np.stack(self.folds)

    def target(self) -> np.ndarray:
        """The quantity the recombiner reproduces: S(x) if indirect, else t_value."""
        return self.t_value if self.indirect_stat is None else self.indirect_stat

    def relative_error(self, reference) -> float:
        """Largest relative gap between T(folds) and ``reference``."""
        t = np.asarray(self.recombiner(self.folds), dtype=float)
        ref = np.asarray(reference, dtype=float)
        denom = np.maximum(np.abs(ref), self.recombiner.scale(self.folds))
        gap = np.abs(t - ref)
        rel = np.divide(gap, denom, out=np.zeros_like(gap), where=denom > 0)
        return float(np.max(rel)) if rel.size else 0.0

    def to_json(self) -> dict:
        return {
            "recombiner": str(self.recombiner),
            "t_value": _tolist(self.t_value),
            "indirect_stat": _tolist(self.indirect_stat),
            "folds": [_tolist(f) for f in self.folds],
            "fold_specs": [s.to_json() for s in self.fold_specs],
        }

    @classmethod
    def from_json(cls, data) -> "FoldSet":
        folds = tuple(np.asarray(f) for f in data["folds"])
        stat = data.get("indirect_stat")
        return cls(
            folds=folds,
            recombiner=Recombiner.parse(data["recombiner"]),
            t_value=np.asarray(data["t_value"]),
            fold_specs=tuple(DistributionSpec.from_json(s) for s in data["fold_specs"]),
            indirect_stat=None if stat is None else np.asarray(stat),
        )
