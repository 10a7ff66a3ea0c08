"""Full-distribution recovery by prefix-tree search over an individual estimator.

An estimator of the all-zeros probability becomes an estimator of ``P(x)``
by XOR-shifting every sample by ``x``.  Applied to prefixes, it drives a
breadth-first search: every surviving prefix is extended by one bit, the
marginal of each extension is estimated, and extensions whose estimate does
not exceed the pruning threshold (``2 delta`` by default) are dropped.  Only
``O(1/delta)`` prefixes survive any level when every estimate is accurate to
``delta``, so the search stays cheap.

Weights of shifted prefixes are maintained incrementally: extending prefix
``x`` by bit ``b`` adds one to a record's weight exactly when its next symbol
equals ``1 - b``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .estimators import (
    EstimatorCoefficients,
    SampleBatch,
    WeightCounts,
    apply_linear_estimator,
    estimate_p_x,
    smoothed_coefficients,
    unbiased_coefficients,
)
from .minimax import FunctionalVector, synthesize_estimator
from .model import LOSSY, ChannelModel, HypercubeDistribution, build_phi, write_distribution

EstimatorFactory = Callable[[int], EstimatorCoefficients]


@dataclass(frozen=True)
class RecoveryConfig:
    """Accuracy target and failure budget.

    ``tau`` sets the number of median-of-batches slices, ``ceil(log2(1/tau))``;
    the default ``0.5`` means a single batch.  ``output_threshold`` is
    ``"survivors"`` (report every final survivor) or ``"prune"`` (also drop
    final estimates at or below the pruning threshold, which survivors already
    satisfy).
    """

    delta: float
    tau: float = 0.5
    prune_threshold: float | None = None
    output_threshold: str = "survivors"

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.output_threshold not in ("survivors", "prune"):
            raise ValueError(f"unknown output_threshold {self.output_threshold!r}")

    @property
    def threshold(self) -> float:
        return 2 * self.delta if self.prune_threshold is None else self.prune_threshold

    @property
    def batches(self) -> int:
        return boost_batches(self.tau)


@dataclass(frozen=True)
class LevelStats:
    level: int
    candidates: int
    survivors: int
    calls: int
    overflow: bool


@dataclass(frozen=True)
class RecoveryResult:
    estimate: HypercubeDistribution
    survivors: tuple[str, ...]
    stats: tuple[LevelStats, ...] = field(default=())

    @property
    def calls(self) -> int:
        return sum(s.calls for s in self.stats)

    @property
    def overflowed(self) -> bool:
        return any(s.overflow for s in self.stats)


def boost_batches(tau: float) -> int:
    """``ceil(log2(1/tau))``, at least one."""
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    return max(1, math.ceil(math.log2(1 / tau) - 1e-12))


def median_boost(estimates: Sequence[float]) -> float:
    """Median of the estimates; the lower median for an even count."""
    if len(estimates) == 0:
        raise ValueError("median of an empty list")
    s = sorted(estimates)
    return float(s[(len(s) - 1) // 2])


def _slices(n: int, batches: int) -> list[slice]:
    size = n // batches
    return [slice(k * size, n if k == batches - 1 else (k + 1) * size) for k in range(batches)]


def boosted_estimate_p_x(x: str, batch: SampleBatch, g: EstimatorCoefficients, tau: float) -> float:
    """Median of :func:`estimate_p_x` over ``ceil(log2(1/tau))`` contiguous slices of the batch."""
    B = boost_batches(tau)
    if batch.n < B:
        raise ValueError(f"batch too small: {batch.n} records, need at least {B}")
    if B == 1:
        return estimate_p_x(x, batch, g)
    ests = []
    for sl in _slices(batch.n, B):
        sub = SampleBatch.from_matrix(batch.matrix[sl], model=batch.model)
        ests.append(estimate_p_x(x, sub, g))
    return median_boost(ests)


class CachedEstimatorFactory:
    """Per-prefix-length estimator provider, memoized on ``(i, model, eps, n, kind)``.

    ``kind`` is ``"lp"`` (minimax synthesis at sample size ``n``),
    ``"unbiased"``, ``"smoothed"`` or ``"empirical"`` (``g = e_0``).
    """

    _cache: dict = {}

    def __init__(self, channel: ChannelModel, n: float, kind: str = "lp"):
        if kind not in ("lp", "unbiased", "smoothed", "empirical"):
            raise ValueError(f"unknown estimator kind {kind!r}")
        self.channel, self.n, self.kind = channel, n, kind
        self.synthesized = 0

    def __call__(self, i: int) -> EstimatorCoefficients:
        key = (i, self.channel.kind, float(self.channel.epsilon), float(self.n), self.kind)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._build(i)
            self._cache[key] = hit
            self.synthesized += 1
        return hit

    def _build(self, i: int) -> EstimatorCoefficients:
        ch = self.channel
        if self.kind == "empirical":
            g = np.zeros(i + 1)
            g[0] = 1.0
            return EstimatorCoefficients(i, g, "empirical")
        if self.kind == "lp":
            return synthesize_estimator(build_phi(ch, i), FunctionalVector.e0(i), self.n).g
        if ch.kind != LOSSY:
            raise ValueError(f"{self.kind} coefficients are defined for the lossy channel only")
        if self.kind == "unbiased":
            return unbiased_coefficients(i, ch.epsilon)
        return smoothed_coefficients(i, ch.epsilon, self.n)

    @classmethod
    def clear(cls) -> None:
        cls._cache.clear()


def _estimate(weights: np.ndarray, g: EstimatorCoefficients, slices: list[slice]) -> float:
    ests = []
    for sl in slices:
        w = weights[sl]
        counts = WeightCounts(g.d, np.bincount(w, minlength=g.d + 1))
        ests.append(apply_linear_estimator(g, counts))
    return median_boost(ests)


def recover_population(
    batch: SampleBatch,
    channel: ChannelModel,
    config: RecoveryConfig,
    estimator_factory: EstimatorFactory | None = None,
) -> RecoveryResult:
    """Prefix-tree recovery of the whole distribution from a corrupted batch.

    Returns ``P_hat`` equal to the final-level estimates on surviving strings
    and zero elsewhere, plus per-level statistics.  A survivor count above
    ``1/delta`` is flagged in the statistics but does not stop the search.
    """
    if batch.n == 0:
        raise ValueError("empty batch")
    if batch.d < 1:
        raise ValueError("batch dimension must be at least 1")
    if estimator_factory is None:
        estimator_factory = CachedEstimatorFactory(channel, batch.n)
    B = config.batches
    if batch.n < B:
        raise ValueError(f"batch too small: {batch.n} records, need at least {B}")
    slices = _slices(batch.n, B)
    M = batch.matrix
    cap = 1 / config.delta
    thr = config.threshold

    frontier: dict[str, np.ndarray] = {"": np.zeros(batch.n, dtype=np.int64)}
    stats: list[LevelStats] = []
    estimates: dict[str, float] = {}
    for i in range(1, batch.d + 1):
        g = estimator_factory(i)
        if g.d != i:
            raise ValueError(f"estimator factory returned dimension {g.d} for prefix length {i}")
        col = M[:, i - 1]
        hit = {"0": (col == 1), "1": (col == 0)}
        nxt: dict[str, np.ndarray] = {}
        estimates = {}
        calls = 0
        for x, w in frontier.items():
            for b in "01":
                wx = w + hit[b]
                est = _estimate(wx, g, slices)
                calls += 1
                if est > thr:
                    nxt[x + b] = wx
                    estimates[x + b] = est
        stats.append(LevelStats(i, 2 * len(frontier), len(nxt), calls, len(nxt) > cap))
        frontier = nxt
        if not frontier:
            break

    survivors = tuple(sorted(frontier)) if len(frontier) and len(next(iter(frontier))) == batch.d else ()
    out = {x: estimates[x] for x in survivors}
    if config.output_threshold == "prune":
        out = {x: v for x, v in out.items() if v > thr}
    return RecoveryResult(HypercubeDistribution.estimate(batch.d, out), survivors, tuple(stats))


def write_recovery(result: RecoveryResult, path: str | Path, stats_path: str | Path | None = None) -> None:
    """Estimate in the distribution file format plus a ``level,candidates,survivors,calls,overflow`` CSV."""
    write_distribution(result.estimate, path)
    if stats_path is None:
        stats_path = Path(str(path) + ".stats.csv")
    with open(stats_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "candidates", "survivors", "calls", "overflow"])
        for s in result.stats:
            w.writerow([s.level, s.candidates, s.survivors, s.calls, int(s.overflow)])


def sup_error(P: HypercubeDistribution, P_hat: HypercubeDistribution) -> float:
    """``max_x |P(x) - P_hat(x)|`` over the union of both supports."""
    keys = set(dict(P.items())) | set(dict(P_hat.items()))
    return max((abs(P.prob(x) - P_hat.prob(x)) for x in keys), default=0.0)


def certificate_at(channel: ChannelModel, d: int, n: float, z: float = 3.0) -> float:
    """Largest ``bias + z ||g||_inf / sqrt(n)`` over prefix lengths ``1..d``.

    Each estimator is synthesized at ``n / z^2``, where the synthesis
    objective equals exactly this quantity.
    """
    return max(
        synthesize_estimator(build_phi(channel, i), FunctionalVector.e0(i), n / (z * z)).value
        for i in range(1, d + 1)
    )


def certified_sample_size(channel: ChannelModel, d: int, target: float, z: float = 3.0, n_max: float = 1e9) -> int:
    """Smallest integer ``n`` (to 1% relative) whose per-call certificate is at most ``target``.

    Use the result with ``CachedEstimatorFactory(channel, n / z**2)``.
    """
    if target <= 0:
        raise ValueError("target must be positive")
    lo, hi = float(z * z), float(z * z)
    while certificate_at(channel, d, hi, z) > target:
        lo, hi = hi, hi * 4
        if hi > n_max:
            raise ValueError(f"certificate {target} not reached below n = {n_max:g}")
    while hi / lo > 1.01:
        mid = math.sqrt(lo * hi)
        if certificate_at(channel, d, mid, z) > target:
            lo = mid
        else:
            hi = mid
    return math.ceil(hi)
