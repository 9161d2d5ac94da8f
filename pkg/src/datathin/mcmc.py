"""A small vectorised Metropolis engine.

Every call advances a batch of independent chains in lockstep and keeps a
single state per chain, taken after ``burn_in + thin_every`` steps.  Proposal
scales adapt per chain during burn-in only, so the retained state comes from
a fixed kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import BadInit, InvalidParameter, NonFiniteTarget
from .rng import as_generator

__all__ = [
    "UniformBox",
    "GaussianRandomWalk",
    "McmcConfig",
    "ChainDiagnostics",
    "metropolis_sample",
    "adapt_scale",
]


@dataclass(frozen=True)
class UniformBox:
    """Independence proposal, uniform on ``[lower, upper)`` per coordinate."""

    lower: np.ndarray | float
    upper: np.ndarray | float

    def __post_init__(self):
        if np.any(np.asarray(self.lower) >= np.asarray(self.upper)):
            raise InvalidParameter("box lower must be < upper", field="proposal")

    def to_json(self):
        return {"kind": "UniformBox", "lower": np.asarray(self.lower).tolist(), "upper": np.asarray(self.upper).tolist()}


@dataclass(frozen=True)
class GaussianRandomWalk:
    """Symmetric random walk ``x + scale * N(0, I)``."""

    scale: np.ndarray | float

    def __post_init__(self):
        if np.any(np.asarray(self.scale) <= 0):
            raise InvalidParameter("proposal scale must be > 0", field="proposal")

    def to_json(self):
        return {"kind": "GaussianRandomWalk", "scale": np.asarray(self.scale).tolist()}


@dataclass(frozen=True)
class McmcConfig:
    burn_in: int = 1000
    thin_every: int = 50
    proposal: UniformBox | GaussianRandomWalk | None = None
    adapt: bool = True
    target_acceptance: float = 0.3
    adapt_interval: int = 50

    def __post_init__(self):
        if self.burn_in < 0:
            raise InvalidParameter("burn_in must be >= 0", field="burn_in")
        if self.thin_every < 1:
            raise InvalidParameter("thin_every must be >= 1", field="thin_every")
        if not 0 < self.target_acceptance < 1:
            raise InvalidParameter("target_acceptance must lie in (0, 1)", field="target_acceptance")
        if self.adapt_interval < 1:
            raise InvalidParameter("adapt_interval must be >= 1", field="adapt_interval")

    def with_proposal(self, proposal) -> "McmcConfig":
        return replace(self, proposal=proposal)

    def to_json(self) -> dict:
        data = {
            "burn_in": self.burn_in,
            "thin_every": self.thin_every,
            "adapt": self.adapt,
            "target_acceptance": self.target_acceptance,
            "adapt_interval": self.adapt_interval,
        }
        if self.proposal is not None:
            data["proposal"] = self.proposal.to_json()
        return data

    @classmethod
    def from_json(cls, data) -> "McmcConfig":
        allowed = {"burn_in", "thin_every", "adapt", "target_acceptance", "adapt_interval", "proposal"}
        extra = set(data) - allowed
        if extra:
            raise InvalidParameter(f"unexpected mcmc keys {sorted(extra)}", field="mcmc")
        kwargs = {k: v for k, v in data.items() if k != "proposal"}
        prop = data.get("proposal")
        if prop is not None:
            kind = prop.get("kind")
            if kind == "UniformBox":
                kwargs["proposal"] = UniformBox(np.asarray(prop["lower"]), np.asarray(prop["upper"]))
            elif kind == "GaussianRandomWalk":
                kwargs["proposal"] = GaussianRandomWalk(np.asarray(prop["scale"]))
            else:
                raise InvalidParameter(f"unknown proposal {kind!r}", field="proposal")
        return cls(**kwargs)


@dataclass
class ChainDiagnostics:
    """Acceptance bookkeeping, per chain."""

    n_proposed: int
    n_accepted: np.ndarray
    final_scale: np.ndarray | None
    accepted_after_burn_in: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def acceptance_rate(self) -> np.ndarray:
        if self.n_proposed == 0:
            return np.zeros_like(self.n_accepted, dtype=float)
        return self.n_accepted / self.n_proposed

    @property
    def never_moved(self) -> int:
        """Chains that rejected every proposal; their state is still the init."""
        return int(np.sum(self.n_accepted == 0)) if self.n_proposed else 0

    def to_json(self) -> dict:
        rate = self.acceptance_rate
        return {
            "n_proposed": self.n_proposed,
            "mean_acceptance_rate": float(np.mean(rate)) if rate.size else 0.0,
            "min_acceptance_rate": float(np.min(rate)) if rate.size else 0.0,
            "never_moved": self.never_moved,
        }


def adapt_scale(scale, acceptance, target: float = 0.3, gain: float = 1.0):
    """Multiplicative update: grow when accepting too often, shrink otherwise."""
    return np.asarray(scale) * np.exp(gain * (np.asarray(acceptance) - target))


def _check(lp, stage):
    if np.any(np.isnan(lp)) or np.any(lp == np.inf):
        raise NonFiniteTarget(f"log target returned NaN or +inf during {stage}")


def metropolis_sample(
    log_target: Callable[[np.ndarray], np.ndarray],
    init,
    cfg: McmcConfig,
    rng,
) -> tuple[np.ndarray, ChainDiagnostics]:
    """Run one Metropolis chain per row of ``init`` and return the last state.

    ``log_target`` maps a ``(B, d)`` array to ``B`` log densities (``-inf``
    off support).  A 1-D ``init`` is treated as a single chain and the state
    comes back 1-D.
    """
    g = as_generator(rng)
    init = np.asarray(init, dtype=float)
    single = init.ndim == 1
    state = np.atleast_2d(init).copy()
    B, d = state.shape
    lp = np.asarray(log_target(state), dtype=float).reshape(B)
    if not np.all(np.isfinite(lp)):
        raise BadInit("log target is not finite at the initial state")

    proposal = cfg.proposal if cfg.proposal is not None else GaussianRandomWalk(1.0)
    box = isinstance(proposal, UniformBox)
    if box:
        lower = np.broadcast_to(np.asarray(proposal.lower, dtype=float), (B, d))
        width = np.broadcast_to(np.asarray(proposal.upper, dtype=float), (B, d)) - lower
        scale = None
    else:
        scale = np.broadcast_to(np.asarray(proposal.scale, dtype=float), (B, d)).copy()

    accepted = np.zeros(B, dtype=np.int64)
    window = np.zeros(B, dtype=np.int64)
    after = np.zeros(B, dtype=np.int64)
    n_steps = cfg.burn_in + cfg.thin_every
    for step in range(n_steps):
        if box:
            cand = lower + width * g.random((B, d))
        else:
            cand = state + scale * g.standard_normal((B, d))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lp_cand = np.asarray(log_target(cand), dtype=float).reshape(B)
        _check(lp_cand, "burn-in" if step < cfg.burn_in else "sampling")
        log_u = np.log(g.random(B))
        take = log_u < lp_cand - lp
        state[take] = cand[take]
        lp[take] = lp_cand[take]
        accepted += take
        if step >= cfg.burn_in:
            after += take
        elif cfg.adapt and not box:
            window += take
            if (step + 1) % cfg.adapt_interval == 0:
                scale = adapt_scale(scale, (window / cfg.adapt_interval)[:, None], cfg.target_acceptance)
                window[:] = 0
    diag = ChainDiagnostics(
        n_proposed=n_steps,
        n_accepted=accepted,
        final_scale=None if scale is None else scale,
        accepted_after_burn_in=after,
    )
    return (state[0] if single else state), diag
