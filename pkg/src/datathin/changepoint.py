"""Variance changepoints in a zero-mean Gaussian series.

Squares of N(0, θ_i) observations are Gamma(1/2, 1/(2θ_i)), so a change in
variance is a change in gamma rate.  The naive pipeline detects and tests on
the same squares.  The thinned pipeline splits every square into two
independent Gamma(1/4, 1/(2θ_i)) halves, detects on one and tests on the
other.

Detection is binary segmentation with a known-shape gamma cost on the
deviance scale (twice the negative log-likelihood), so the penalty is
directly comparable to a likelihood-ratio statistic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
from enum import Enum
import io
import json
from typing import NamedTuple

import numpy as np

from . import special
from .errors import EmptySegment, InvalidParameter, SeriesTooShort
from .folds import ThinningPlan
from .rng import RngState, as_generator
from .thinners import Transform, thin_transformed

__all__ = [
    "Method",
    "SHAPE",
    "square_transform",
    "thin_series",
    "segment_cost",
    "detect_changepoints",
    "RateTest",
    "test_rate_change",
    "CpTest",
    "ChangepointResult",
    "run_pipeline",
    "StabilityResult",
    "stability_analysis",
    "simulate_series",
    "SimulationResult",
    "simulate",
    "TRUE_CHANGEPOINTS",
    "read_series",
]


class Method(str, Enum):
    NAIVE = "Naive"
    THINNED = "Thinned"


# known gamma shapes: squares of N(0, θ) and their two thinned halves
SHAPE = {Method.NAIVE: 0.5, Method.THINNED: 0.25}

# 0-based index of the first observation of each new regime in the bundled alternative
TRUE_CHANGEPOINTS = (500, 1500)
_ALT_VARIANCES = (4.0, 25.0, 1.0)


def square_transform(x) -> np.ndarray:
    return np.square(np.asarray(x, dtype=float))


def thin_series(x, rng) -> tuple[np.ndarray, np.ndarray]:
    """Split each ``x_i**2`` into independent Gamma(1/4) halves (train, test)."""
    fs = thin_transformed(x, Transform("SquareAboutMu", 0.0), ThinningPlan(2), rng)
    return fs.folds[0], fs.folds[1]


def _profile_loglik(total, m, a):
    """Gamma log-likelihood at the rate MLE ``a m / total``, dropping terms
    that do not depend on the segmentation."""
    total = np.maximum(total, np.finfo(float).tiny * np.maximum(m, 1))
    am = a * m
    return am * np.log(am / total) - am


def segment_cost(total, m, a) -> np.ndarray:
    """Twice the negative profile log-likelihood of a segment."""
    return -2.0 * _profile_loglik(np.asarray(total, dtype=float), np.asarray(m, dtype=float), a)


def detect_changepoints(z, penalty: float = 10.0, min_segment: int = 10, shape: float = 0.5) -> list[int]:
    """Binary segmentation under a gamma model with known shape.

    Returns sorted 0-based indices; index ``τ`` means the new segment starts
    at ``z[τ]``.  A split is kept when it lowers the cost by more than
    ``penalty``; both sides must keep at least ``min_segment`` points.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if min_segment < 1:
        raise InvalidParameter("min_segment must be >= 1", field="min_segment")
    if n < 2 * min_segment:
        raise SeriesTooShort(f"series of length {n} is shorter than 2*min_segment={2 * min_segment}", field="x")
    if np.any(z < 0) or not np.all(np.isfinite(z)):
        raise InvalidParameter("z must be finite and >= 0", field="z")
    prefix = np.concatenate([[0.0], np.cumsum(z)])
    found: list[int] = []
    stack = [(0, n)]
    while stack:
        s, e = stack.pop()
        if e - s < 2 * min_segment:
            continue
        taus = np.arange(s + min_segment, e - min_segment + 1)
        left = segment_cost(prefix[taus] - prefix[s], taus - s, shape)
        right = segment_cost(prefix[e] - prefix[taus], e - taus, shape)
        whole = segment_cost(prefix[e] - prefix[s], e - s, shape)
        gain = whole - left - right
        best = int(np.argmax(gain))
        if gain[best] > penalty:
            tau = int(taus[best])
            found.append(tau)
            stack.append((s, tau))
            stack.append((tau, e))
    return sorted(found)


class RateTest(NamedTuple):
    lr_stat: float
    p_value: float
    all_zero: bool = False


def test_rate_change(z_left, z_right, shape: float) -> RateTest:
    """Likelihood-ratio test of equal gamma rates with known shape.

    ``2 [l(left) + l(right) - l(pooled)]`` referred to chi-square(1).
    """
    z_left = np.asarray(z_left, dtype=float)
    z_right = np.asarray(z_right, dtype=float)
    if z_left.size < 2 or z_right.size < 2:
        raise EmptySegment("both segments need at least 2 points", field="segment")
    sl, sr = z_left.sum(), z_right.sum()
    if sl == 0 or sr == 0:
        return RateTest(0.0, 1.0, True)
    ml, mr = z_left.size, z_right.size
    lr = 2.0 * (
        _profile_loglik(sl, ml, shape) + _profile_loglik(sr, mr, shape) - _profile_loglik(sl + sr, ml + mr, shape)
    )
    lr = max(float(lr), 0.0)
    return RateTest(lr, float(special.chi2_sf(lr, 1)) if lr > 0 else 1.0)


# the name starts with "test_" but it is library code, not a test
test_rate_change.__test__ = False  # type: ignore[attr-defined]


@dataclass(frozen=True)
class CpTest:
    index: int
    lr_statistic: float
    p_value: float
    reject: bool


@dataclass
class ChangepointResult:
    estimated_cps: list[int]
    per_cp: list[CpTest]
    method: Method
    alpha: float
    seed: int | None = None
    stream: int | None = None

    @property
    def rejected(self) -> list[int]:
        return [c.index for c in self.per_cp if c.reject]

    def to_json(self) -> dict:
        return {
            "method": self.method.value,
            "alpha": self.alpha,
            "seed": self.seed,
            "stream": self.stream,
            "estimated_cps": list(self.estimated_cps),
            "per_cp": [
                {"index": c.index, "lr_statistic": c.lr_statistic, "p_value": c.p_value, "reject": c.reject}
                for c in self.per_cp
            ],
        }


def _test_all(z, cps, shape, alpha) -> list[CpTest]:
    bounds = [0, *cps, z.size]
    out = []
    for i, tau in enumerate(cps):
        res = test_rate_change(z[bounds[i] : tau], z[tau : bounds[i + 2]], shape)
        out.append(CpTest(tau, res.lr_stat, res.p_value, res.p_value < alpha))
    return out


def run_pipeline(
    x,
    method: Method | str = Method.THINNED,
    penalty: float = 10.0,
    min_segment: int = 10,
    alpha: float = 0.05,
    rng=None,
) -> ChangepointResult:
    """Detect variance changepoints and test each one.

    Each changepoint is tested on the two segments between its neighbouring
    changepoints (or the series ends).  The naive method detects and tests on
    ``x**2``; the thinned method detects on the train half and tests on the
    test half.
    """
    method = Method(method)
    if not 0 < alpha < 1:
        raise InvalidParameter("alpha must lie in (0, 1)", field="alpha")
    x = np.asarray(x, dtype=float)
    shape = SHAPE[method]
    if method is Method.NAIVE:
        fit = check = square_transform(x)
    else:
        if rng is None:
            raise InvalidParameter("thinned pipeline needs an rng", field="rng")
        fit, check = thin_series(x, rng)
    cps = detect_changepoints(fit, penalty, min_segment, shape)
    seed = rng.seed if isinstance(rng, RngState) else None
    stream = rng.stream if isinstance(rng, RngState) else None
    return ChangepointResult(cps, _test_all(check, cps, shape, alpha), method, alpha, seed, stream)


@dataclass
class StabilityResult:
    window: int
    detected_freq: np.ndarray
    rejected_freq: np.ndarray
    R: int

    @property
    def window_starts(self) -> np.ndarray:
        return np.arange(self.detected_freq.size) * self.window

    def top_windows(self, count: int = 2, rejected: bool = True) -> list[int]:
        """Start indices of the ``count`` windows with the highest frequency."""
        freq = self.rejected_freq if rejected else self.detected_freq
        order = np.argsort(-freq, kind="stable")[:count]
        return [int(i) * self.window for i in order]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window", "detected_freq", "rejected_freq"])
        for start, d, r in zip(self.window_starts, self.detected_freq, self.rejected_freq):
            w.writerow([int(start), repr(float(d)), repr(float(r))])
        return buf.getvalue()


def stability_analysis(
    x,
    R: int = 100,
    window: int = 10,
    penalty: float = 10.0,
    min_segment: int = 10,
    alpha: float = 0.05,
    rng=None,
) -> StabilityResult:
    """Repeat the thinned pipeline R times and tally changepoints per window.

    Repeat r uses ``rng.split(r)``, so ``R=1`` matches
    ``run_pipeline(x, rng=rng.split(0))``.
    """
    if R < 1:
        raise InvalidParameter("R must be >= 1", field="R")
    if window < 1:
        raise InvalidParameter("window must be >= 1", field="window")
    state = rng if isinstance(rng, RngState) else RngState(int(rng))
    x = np.asarray(x, dtype=float)
    n_win = -(-x.size // window)
    detected = np.zeros(n_win)
    rejected = np.zeros(n_win)
    for r in range(R):
        res = run_pipeline(x, Method.THINNED, penalty, min_segment, alpha, state.split(r))
        hit = np.zeros(n_win, dtype=bool)
        hit[[c // window for c in res.estimated_cps]] = True
        rej = np.zeros(n_win, dtype=bool)
        rej[[c // window for c in res.rejected]] = True
        detected += hit
        rejected += rej
    return StabilityResult(window, detected / R, rejected / R, R)


def simulate_series(scenario: str, rng, n: int = 2000) -> np.ndarray:
    """Synthetic zero-mean series.

    ``"null"``: iid N(0, 1).  ``"alternative"``: variance 4, then 25 from
    index 500, then 1 from index 1500 (needs n = 2000).
    """
    g = as_generator(rng)
    if scenario == "null":
        return g.standard_normal(n)
    if scenario == "alternative":
        if n != 2000:
            raise InvalidParameter("the alternative scenario is defined for n = 2000", field="n")
        sd = np.repeat(np.sqrt(_ALT_VARIANCES), np.diff([0, *TRUE_CHANGEPOINTS, n]))
        return sd * g.standard_normal(n)
    raise InvalidParameter(f"unknown scenario {scenario!r}", field="scenario")


@dataclass
class SimulationResult:
    scenario: str
    replicates: list[dict] = field(default_factory=list)

    def aggregate(self) -> list[dict]:
        rows = []
        for method in Method:
            reps = [r for r in self.replicates if r["method"] == method.value]
            if not reps:
                continue
            det = sum(r["n_detected"] for r in reps)
            rej = sum(r["n_rejected"] for r in reps)
            row = {
                "method": method.value,
                "replicates": len(reps),
                "n_detected": det,
                "n_rejected": rej,
                "rejection_rate": rej / det if det else float("nan"),
            }
            if self.scenario == "alternative":
                row["all_rejected_near_truth"] = sum(r["all_rejected_near_truth"] for r in reps) / len(reps)
            rows.append(row)
        return rows

    def rejection_rate(self, method: Method | str) -> float:
        method = Method(method).value
        for row in self.aggregate():
            if row["method"] == method:
                return row["rejection_rate"]
        return float("nan")

    def near_truth_fraction(self, method: Method | str = Method.THINNED) -> float:
        method = Method(method).value
        reps = [r for r in self.replicates if r["method"] == method]
        return sum(r["all_rejected_near_truth"] for r in reps) / len(reps) if reps else float("nan")

    def replicate_csv(self) -> str:
        return _to_csv(self.replicates, ["replicate", "method", "n_detected", "n_rejected", "all_rejected_near_truth", "cps", "rejected"])

    def aggregate_csv(self) -> str:
        fields = ["method", "replicates", "n_detected", "n_rejected", "rejection_rate"]
        if self.scenario == "alternative":
            fields.append("all_rejected_near_truth")
        return _to_csv(self.aggregate(), fields)


def _to_csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _near(cps, truth, tol) -> bool:
    return all(any(abs(c - t) <= tol for t in truth) for c in cps)


def _replicate(r, scenario, n, penalty, min_segment, alpha, state: RngState, tol):
    lane = state.split(r)
    x = simulate_series(scenario, lane.split_named("series"), n)
    truth = TRUE_CHANGEPOINTS if scenario == "alternative" else ()
    rows = []
    for method in Method:
        res = run_pipeline(x, method, penalty, min_segment, alpha, lane.split_named("thin"))
        rows.append(
            {
                "replicate": r,
                "method": method.value,
                "n_detected": len(res.estimated_cps),
                "n_rejected": len(res.rejected),
                "all_rejected_near_truth": _near(res.rejected, truth, tol),
                "cps": " ".join(map(str, res.estimated_cps)),
                "rejected": " ".join(map(str, res.rejected)),
            }
        )
    return rows


def simulate(
    scenario: str,
    R: int,
    rng,
    *,
    n: int = 2000,
    penalty: float = 10.0,
    min_segment: int = 10,
    alpha: float = 0.05,
    threads: int = 1,
    tolerance: int = 25,
) -> SimulationResult:
    """R replicates of both pipelines on fresh synthetic series.

    Replicate r draws its series and its thinning noise from
    ``rng.split(r)``; rows are ordered by replicate whatever ``threads`` is.
    """
    if R < 0:
        raise InvalidParameter("R must be >= 0", field="R")
    state = rng if isinstance(rng, RngState) else RngState(int(rng))
    args = (scenario, n, penalty, min_segment, alpha, state, tolerance)
    if threads > 1 and R > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda r: _replicate(r, *args), range(R)))
    else:
        chunks = [_replicate(r, *args) for r in range(R)]
    return SimulationResult(scenario, [row for chunk in chunks for row in chunk])


def read_series(path) -> np.ndarray:
    """Read a single-column CSV with header ``x``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x"]:
            raise InvalidParameter("series CSV must have the single header 'x'", field="input")
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError as exc:
                raise InvalidParameter(f"line {lineno}: {row[0]!r} is not a number", field="input") from exc
    return np.asarray(values)


def result_json(result: ChangepointResult) -> str:
    return json.dumps(result.to_json(), indent=2)
