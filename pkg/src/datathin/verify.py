"""Fresh-draw verification of thinners.

Draw ``x_b`` from the full model, thin each one, and check that

* the recombiner reproduces the thinned quantity,
* each fold's PIT under its declared law is uniform (one-sample KS),
* neighbouring folds look independent (Pearson r and a 10x10 copula
  chi-square).

Discrete folds use the randomized PIT ``F(x-1) + V (F(x) - F(x-1))`` so that
the uniformity checks stay exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
from importlib import resources
import io
import json
import math
from typing import Callable

import numpy as np

from . import special
from .distributions import DistributionSpec, Family, cdf, is_discrete, is_scalar, marginal, sample
from .errors import DegeneratePits, InvalidParameter, ThinningError, UnsortedInput, UnsupportedFamily
from .folds import FoldSet, Mode, ThinningPlan
from .mcmc import McmcConfig
from .rng import RngState
from .thinners import thin, thin_convolution

__all__ = [
    "ks_one_sample",
    "kolmogorov_pvalue",
    "copula_independence",
    "CopulaGrid",
    "pit",
    "run_verification",
    "fisher_additivity_check",
    "VerificationReport",
    "FisherCheck",
    "load_matrix",
    "run_matrix",
]

KS_LEVEL = 0.01
COPULA_LEVEL = 0.01
RECON_TOL = 1e-9
N_LANES = 8


def kolmogorov_pvalue(d: float, n: int) -> float:
    """Asymptotic ``P(sqrt(n) D > sqrt(n) d)``, Kolmogorov series to 100 terms."""
    lam = math.sqrt(n) * d
    if lam < 0.2:
        # the alternating series is useless here and the answer is 1 to double precision
        return 1.0
    j = np.arange(1, 101)
    total = 2.0 * np.sum((-1.0) ** (j - 1) * np.exp(-2.0 * j * j * lam * lam))
    return float(min(max(total, 0.0), 1.0))


def ks_one_sample(sample_sorted, cdf_fn: Callable) -> tuple[float, float]:
    """One-sample KS statistic and asymptotic p-value for a sorted sample."""
    xs = np.asarray(sample_sorted, dtype=float)
    n = xs.size
    if n == 0:
        raise InvalidParameter("sample is empty", field="sample")
    if np.any(np.diff(xs) < 0):
        raise UnsortedInput("sample must be sorted ascending", field="sample")
    f = np.asarray(cdf_fn(xs), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return d, kolmogorov_pvalue(d, n)


def _uniform_cdf(u):
    return np.clip(u, 0.0, 1.0)


@dataclass
class CopulaGrid:
    bins: np.ndarray

    @classmethod
    def from_pits(cls, u, v, n_bins: int = 10) -> "CopulaGrid":
        iu = np.minimum((np.asarray(u) * n_bins).astype(int), n_bins - 1)
        iv = np.minimum((np.asarray(v) * n_bins).astype(int), n_bins - 1)
        counts = np.zeros((n_bins, n_bins), dtype=np.int64)
        np.add.at(counts, (iu, iv), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.bins.sum())


def copula_independence(u, v) -> tuple[float, float, float]:
    """Pearson correlation and 10x10 chi-square (df 81) for PIT pairs.

    Cell expectations are row total x column total / B.  With uniform PITs
    these are all close to B/100; using the margins makes the statistic a
    pure independence test whose null law really has 81 degrees of freedom.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.size == 0:
        raise InvalidParameter("PIT vectors must be non-empty and of equal length", field="pits")
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise InvalidParameter("PITs must lie in [0, 1]", field="pits")
    if np.all(u == u[0]) and np.all(v == v[0]):
        raise DegeneratePits("all PIT pairs are identical", field="pits")
    su, sv = u.std(), v.std()
    if su == 0 or sv == 0:
        r = 0.0
    else:
        r = float(np.mean((u - u.mean()) * (v - v.mean())) / (su * sv))
    grid = CopulaGrid.from_pits(u, v)
    rows = grid.bins.sum(axis=1, keepdims=True)
    cols = grid.bins.sum(axis=0, keepdims=True)
    expected = rows * cols / u.size
    with np.errstate(divide="ignore", invalid="ignore"):
        cells = np.where(expected > 0, (grid.bins - expected) ** 2 / expected, 0.0)
    chi2 = float(np.sum(cells))
    return r, chi2, float(special.chi2_sf(chi2, 81))


def pit(spec: DistributionSpec, values, rng=None) -> np.ndarray:
    """PIT of ``values`` under a scalar ``spec``; randomized for discrete laws."""
    values = np.asarray(values, dtype=float)
    upper = np.asarray(cdf(spec, values), dtype=float)
    if not is_discrete(spec.family):
        return upper
    lower = np.asarray(cdf(spec, values - 1), dtype=float)
    g = rng if isinstance(rng, np.random.Generator) else RngState(0).generator() if rng is None else rng.generator()
    return lower + g.random(values.shape) * (upper - lower)


@dataclass
class FisherCheck:
    estimate: float
    target: float
    rel_err: float
    tolerance: float = 0.02

    @property
    def passed(self) -> bool:
        return self.rel_err <= self.tolerance

    def to_json(self):
        return {"estimate": self.estimate, "target": self.target, "rel_err": self.rel_err, "passed": self.passed}


@dataclass
class VerificationReport:
    thinner_id: str
    spec: DistributionSpec
    plan: ThinningPlan
    B: int
    recon_max_rel_err: float
    integer_exact: bool
    per_fold_ks: list[tuple[float, float]]
    pairwise_independence: list[tuple[int, int, float, float]]
    fisher_check: FisherCheck | None = None
    errors: list[str] = field(default_factory=list)

    @property
    def reasons(self) -> list[str]:
        out = list(self.errors)
        if self.integer_exact:
            if self.recon_max_rel_err != 0:
                out.append(f"integer reconstruction not exact ({self.recon_max_rel_err:.3g})")
        elif not self.recon_max_rel_err <= RECON_TOL:
            out.append(f"reconstruction error {self.recon_max_rel_err:.3g} > {RECON_TOL:g}")
        for k, (d, p) in enumerate(self.per_fold_ks):
            if not p > KS_LEVEL:
                out.append(f"fold {k + 1} KS p={p:.3g} (D={d:.4g})")
        band = 3.0 / math.sqrt(self.B)
        for i, j, r, p in self.pairwise_independence:
            if not abs(r) < band:
                out.append(f"folds {i + 1},{j + 1} |r|={abs(r):.3g} >= {band:.3g}")
            if not p > COPULA_LEVEL:
                out.append(f"folds {i + 1},{j + 1} copula p={p:.3g}")
        if self.fisher_check is not None and not self.fisher_check.passed:
            out.append(f"Fisher rel_err {self.fisher_check.rel_err:.3g}")
        return out

    @property
    def passed(self) -> bool:
        return not self.reasons

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        return {
            "thinner_id": self.thinner_id,
            "spec": self.spec.to_json(),
            "plan": self.plan.to_json(),
            "B": self.B,
            "recon_max_rel_err": self.recon_max_rel_err,
            "per_fold_ks": [{"fold": k + 1, "D": d, "p": p} for k, (d, p) in enumerate(self.per_fold_ks)],
            "pairwise_independence": [
                {"fold_i": i + 1, "fold_j": j + 1, "pearson_r": r, "copula_chi2_p": p}
                for i, j, r, p in self.pairwise_independence
            ],
            "fisher_check": None if self.fisher_check is None else self.fisher_check.to_json(),
            "verdict": self.verdict,
            "reasons": self.reasons,
        }

    def csv_rows(self) -> list[dict]:
        """One row per sub-check."""
        band = 3.0 / math.sqrt(self.B)
        tol = 0.0 if self.integer_exact else RECON_TOL
        rows = [
            {"check": "reconstruction", "target": "", "statistic": self.recon_max_rel_err, "p_value": "",
             "threshold": tol, "passed": self.recon_max_rel_err <= tol},
        ]
        for k, (d, p) in enumerate(self.per_fold_ks):
            rows.append({"check": "ks", "target": f"fold{k + 1}", "statistic": d, "p_value": p,
                         "threshold": KS_LEVEL, "passed": p > KS_LEVEL})
        for i, j, r, p in self.pairwise_independence:
            rows.append({"check": "pearson", "target": f"fold{i + 1}-fold{j + 1}", "statistic": r, "p_value": "",
                         "threshold": band, "passed": abs(r) < band})
            rows.append({"check": "copula", "target": f"fold{i + 1}-fold{j + 1}", "statistic": "", "p_value": p,
                         "threshold": COPULA_LEVEL, "passed": p > COPULA_LEVEL})
        if self.fisher_check is not None:
            f = self.fisher_check
            rows.append({"check": "fisher", "target": "", "statistic": f.rel_err, "p_value": "",
                         "threshold": f.tolerance, "passed": f.passed})
        for message in self.errors:
            rows.append({"check": "error", "target": message, "statistic": "", "p_value": "", "threshold": "", "passed": False})
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["check", "target", "statistic", "p_value", "threshold", "passed"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)


def _as_state(rng) -> RngState:
    if isinstance(rng, RngState):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngState(int(rng))
    raise InvalidParameter("verification needs an RngState or integer seed so lanes can be split", field="rng")


_RECORD_MODES = (Mode.SPLIT, Mode.MEAN_VARIANCE)


def _record_count(plan: ThinningPlan) -> int:
    if plan.mode is Mode.MEAN_VARIANCE:
        return plan.K
    return sum(plan.fold_sizes) if plan.fold_sizes is not None else plan.K


def _pit_inputs(fold: np.ndarray, spec: DistributionSpec, records: bool):
    """Values to transform, their scalar law, and whether they are record blocks."""
    if records and fold.ndim == 2:
        return fold.ravel(), spec, True
    if not is_scalar(spec.family):
        return fold[:, 0], marginal(spec, 0), False
    return fold, spec, False


def _lane(thinner, spec, plan, n, state: RngState, mcmc_cfg, fold_override):
    g = state.split_named("data").generator()
    records = plan.mode in _RECORD_MODES and not callable(thinner)
    size = (n, _record_count(plan)) if records else n
    x = sample(spec, g, size)
    t = state.split_named("thin").generator()
    try:
        if callable(thinner):
            fs: FoldSet = thinner(x, spec, plan, t)
        else:
            fs = thin(x, spec, plan, t, mcmc_cfg)
    except ThinningError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    reference = fs.indirect_stat if fs.indirect_stat is not None else x
    recon = fs.relative_error(reference)
    exact = np.issubdtype(np.asarray(fs.folds[0]).dtype, np.integer)
    theta = spec.theta()
    laws = fold_override or fs.fold_specs
    pit_rng = state.split_named("pit").generator()
    ks_vals, pair_vals = [], []
    for fold, law in zip(fs.folds, laws):
        fold = np.asarray(fold)
        values, scalar_law, blocks = _pit_inputs(fold, law.bind(theta) if law.symbolic else law, records)
        u = pit(scalar_law, values, pit_rng)
        ks_vals.append(u)
        # one record per replicate for the pair check, so pairs stay independent across b
        pair_vals.append(u.reshape(fold.shape)[:, 0] if blocks else u)
    return {"recon": recon, "exact": exact, "ks": ks_vals, "pair": pair_vals}


def _pairs(K: int) -> list[tuple[int, int]]:
    # one pair per configuration keeps the matrix-wide false-alarm count manageable
    return [(0, 1)] if K > 1 else []


def run_verification(
    thinner,
    spec: DistributionSpec,
    plan: ThinningPlan,
    B: int,
    rng,
    *,
    mcmc_cfg: McmcConfig | None = None,
    threads: int = 1,
    fold_specs=None,
) -> VerificationReport:
    """Fresh-draw verification of one (thinner, spec, plan) configuration.

    ``thinner`` is a mode name, a :class:`Mode`, or a callable with the
    signature of :func:`~datathin.thinners.thin_convolution`.  Work is split
    into a fixed number of lanes, each with its own stream, so results do not
    depend on ``threads``.  ``fold_specs`` overrides the declared fold laws
    (used for negative controls).
    """
    if B < 1:
        raise InvalidParameter("B must be >= 1", field="B")
    state = _as_state(rng)
    if not callable(thinner):
        thinner = Mode(thinner)
        if thinner is not plan.mode:
            raise InvalidParameter(f"thinner {thinner.value} does not match plan mode {plan.mode.value}", field="mode")
    n_lanes = min(N_LANES, B)
    sizes = [B // n_lanes + (1 if i < B % n_lanes else 0) for i in range(n_lanes)]
    jobs = [(thinner, spec, plan, n, state.split(i), mcmc_cfg, fold_specs) for i, n in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _lane(*job), jobs))
    else:
        results = [_lane(*job) for job in jobs]

    thinner_id = thinner.__name__ if callable(thinner) else thinner.value
    errors = [r["error"] for r in results if "error" in r]
    good = [r for r in results if "error" not in r]
    if not good:
        return VerificationReport(thinner_id, spec, plan, B, float("nan"), False, [], [], errors=errors)
    K = len(good[0]["ks"])
    per_fold = []
    for k in range(K):
        u = np.sort(np.concatenate([r["ks"][k] for r in good]))
        per_fold.append(ks_one_sample(u, _uniform_cdf))
    pairs = []
    for i, j in _pairs(K):
        u = np.concatenate([r["pair"][i] for r in good])
        v = np.concatenate([r["pair"][j] for r in good])
        r_, _, p = copula_independence(u, v)
        pairs.append((i, j, r_, p))
    return VerificationReport(
        thinner_id=thinner_id,
        spec=spec,
        plan=plan,
        B=B,
        recon_max_rel_err=max(r["recon"] for r in good),
        integer_exact=all(r["exact"] for r in good),
        per_fold_ks=per_fold,
        pairwise_independence=pairs,
        errors=errors,
    )


def fisher_additivity_check(spec: DistributionSpec, plan: ThinningPlan, B: int, rng) -> FisherCheck:
    """Compare the summed per-fold score variances with ``1/θ`` for Poisson(θ).

    Fold k is Poisson(ε_k θ), whose score in θ is ``x_k/θ - ε_k``.
    """
    if spec.family is not Family.POISSON:
        raise UnsupportedFamily("Fisher additivity check is implemented for Poisson only", field="family")
    state = _as_state(rng)
    theta = float(spec.value("rate"))
    x = sample(spec, state.split_named("data").generator(), B)
    fs = thin_convolution(x, spec, plan, state.split_named("thin").generator())
    eps = plan.eps
    estimate = float(sum(np.var(f / theta - e, ddof=1) for f, e in zip(fs.folds, eps)))
    target = 1.0 / theta
    return FisherCheck(estimate, target, abs(estimate - target) / target)


def load_matrix(path=None) -> dict:
    """The bundled verification matrix: 3 settings per thinner."""
    if path is None:
        text = resources.files("datathin").joinpath("data/verification_matrix.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    configs = [
        (c["name"], DistributionSpec.from_json(c["spec"]), ThinningPlan.from_json(c["plan"]))
        for c in data["configs"]
    ]
    return {"seed": data["seed"], "B": data["B"], "configs": configs}


def run_matrix(B: int | None = None, seed: int | None = None, threads: int = 1, names=None) -> dict[str, VerificationReport]:
    """Run every matrix configuration; each gets the stream named after it."""
    matrix = load_matrix()
    B = matrix["B"] if B is None else B
    root = RngState(matrix["seed"] if seed is None else seed)
    reports = {}
    for name, spec, plan in matrix["configs"]:
        if names is not None and name not in names:
            continue
        reports[name] = run_verification(plan.mode, spec, plan, B, root.split_named(name), threads=threads)
    return reports
