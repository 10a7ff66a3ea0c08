"""Seeded sampling, channel corruption and Monte Carlo risk experiments.

Every trial draws from its own generator, seeded by the triple
``(seed, n-index, trial)`` through :class:`numpy.random.SeedSequence` and
driving a counter-based Philox bit generator.  Results therefore do not
depend on the order in which trials run, and the pool of workers is free to
schedule them in any order.

Linear estimators only see the histogram of output Hamming weights, whose law
is ``Multinomial(n, Phi pi)`` for an input weight law ``pi``.  The default
``"weights"`` method samples that histogram directly; ``"strings"`` simulates
every bit and serves as a cross-check.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .estimators import (
    EstimatorCoefficients,
    SampleBatch,
    smoothed_coefficients,
    unbiased_coefficients,
)
from .lpsolve import SolverStalled
from .minimax import FunctionalVector, LPFailure, delta_tilde_of_t, least_favorable_pair, synthesize_estimator
from .model import (
    LOSSY,
    NOISY,
    ChannelModel,
    HypercubeDistribution,
    WeightDistribution,
    build_phi,
    weight_distribution_of,
)

ESTIMATORS = ("lp", "unbiased", "smoothed", "empirical")
METHODS = ("weights", "strings")
MAX_D = 60
MAX_N = 10**7
MAX_TRIALS = 10**4


class SynthesisError(RuntimeError):
    """Estimator construction failed for a grid point."""


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


# ---------------------------------------------------------------------------
# sampling


def _sample_matrix(P: HypercubeDistribution | WeightDistribution, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(P, WeightDistribution):
        k = rng.choice(d + 1, size=n, p=np.asarray(P.probs, dtype=float))
        ranks = rng.random((n, d)).argsort(axis=1).argsort(axis=1)
        return (ranks < k[:, None]).astype(np.int8)
    keys = list(P.support)
    probs = np.array([float(P.support[x]) for x in keys])
    table = np.array([[int(c) for c in x] for x in keys], dtype=np.int8).reshape(len(keys), d)
    return table[rng.choice(len(keys), size=n, p=probs / probs.sum())]


def _corrupt(X: np.ndarray, channel: ChannelModel, rng: np.random.Generator) -> np.ndarray:
    eps = float(channel.epsilon)
    hit = rng.random(X.shape) < eps
    if channel.kind == LOSSY:
        return np.where(hit, np.int8(-1), X).astype(np.int8)
    return (X ^ hit).astype(np.int8)


def sample_hypercube(P: HypercubeDistribution, n: int, seed: int) -> list[str]:
    """``n`` independent draws from ``P``, reproducible from ``seed``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    X = _sample_matrix(P, P.d, n, _rng(seed))
    return ["".join("1" if v else "0" for v in row) for row in X]


def apply_channel(samples: Sequence[str], channel: ChannelModel, seed: int) -> SampleBatch:
    """Erase (lossy) or flip (noisy) every bit independently with probability ``epsilon``."""
    d = len(samples[0]) if samples else 0
    X = np.array([[int(c) for c in s] for s in samples], dtype=np.int8).reshape(len(samples), d)
    Y = _corrupt(X, channel, _rng(seed))
    return SampleBatch.from_matrix(Y, model=channel.kind, epsilon=float(channel.epsilon), seed=seed)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo risk experiment at a fixed input distribution.

    ``distribution`` is either a sparse :class:`HypercubeDistribution` or a
    :class:`WeightDistribution`, the latter standing for its
    permutation-invariant lift.  ``estimator`` is one of ``LP``, ``Unbiased``,
    ``Smoothed`` or ``Empirical`` (case-insensitive).
    """

    model: ChannelModel
    d: int
    distribution: HypercubeDistribution | WeightDistribution
    n_grid: tuple[int, ...]
    trials: int
    estimator: str
    seed: int
    method: str = "weights"
    workers: int = 1
    max_d: int = MAX_D
    max_n: int = MAX_N
    max_trials: int = MAX_TRIALS

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "estimator", self.estimator.lower())
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be non-empty and strictly increasing")
        if self.n_grid[0] < 1:
            raise ValueError("sample sizes must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 1 <= self.d <= self.max_d:
            raise ValueError(f"d={self.d} outside 1..{self.max_d}")
        if self.n_grid[-1] > self.max_n:
            raise ValueError(f"n={self.n_grid[-1]} exceeds cap {self.max_n}")
        if self.trials > self.max_trials:
            raise ValueError(f"trials={self.trials} exceeds cap {self.max_trials}")
        dd = self.distribution.d
        if dd != self.d:
            raise ValueError(f"distribution dimension {dd} does not match d={self.d}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def weights(self) -> np.ndarray:
        P = self.distribution
        pi = P if isinstance(P, WeightDistribution) else weight_distribution_of(P)
        return np.asarray(pi.probs, dtype=float)

    @property
    def p0(self) -> float:
        return float(self.weights[0])

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        doc = dict(doc)
        model = doc.pop("model")
        if isinstance(model, Mapping):
            channel = ChannelModel(model["kind"], model["epsilon"])
        else:
            channel = ChannelModel(model, doc.pop("epsilon"))
        d = int(doc.pop("d"))
        dist = doc.pop("distribution")
        if "weights" in dist:
            P = WeightDistribution(np.asarray(dist["weights"], dtype=float))
        elif "support" in dist:
            P = HypercubeDistribution(d, {k: float(v) for k, v in dist["support"].items()})
        else:
            raise ValueError("distribution needs a 'support' or 'weights' entry")
        return cls(channel, d, P, tuple(doc.pop("n_grid")), int(doc.pop("trials")), doc.pop("estimator"), int(doc.pop("seed")), **doc)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        P = self.distribution
        dist = (
            {"weights": [float(v) for v in P.probs]}
            if isinstance(P, WeightDistribution)
            else {"support": {k: float(v) for k, v in P.items()}}
        )
        return {
            "model": self.model.kind,
            "epsilon": float(self.model.epsilon),
            "d": self.d,
            "distribution": dist,
            "n_grid": list(self.n_grid),
            "trials": self.trials,
            "estimator": self.estimator,
            "seed": self.seed,
            "method": self.method,
            "workers": self.workers,
        }


# ---------------------------------------------------------------------------
# estimators and certificates


def estimator_for(channel: ChannelModel, d: int, n: int, kind: str) -> EstimatorCoefficients:
    """Coefficients of the requested estimator at sample size ``n``."""
    kind = kind.lower()
    eps = float(channel.epsilon)
    try:
        if kind == "empirical":
            g = np.zeros(d + 1)
            g[0] = 1.0
            return EstimatorCoefficients(d, g, "empirical")
        if kind == "lp":
            return synthesize_estimator(build_phi(channel, d), FunctionalVector.e0(d), n).g
        if channel.kind != LOSSY:
            raise ValueError(f"{kind} estimator is defined for the lossy channel only")
        if kind == "unbiased":
            return unbiased_coefficients(d, eps)
        if kind == "smoothed":
            return smoothed_coefficients(d, eps, n)
    except (LPFailure, SolverStalled, ArithmeticError) as exc:
        raise SynthesisError(f"estimator synthesis failed at n={n}, d={d}, eps={eps}: {exc}") from exc
    raise ValueError(f"unknown estimator {kind!r}")


def certificate_upper(g: EstimatorCoefficients, phi: np.ndarray, n: int) -> float:
    """``(||Phi^T g - e_0||_inf + ||g||_inf / sqrt(n))^2``, a bound on the MSE at every input."""
    gv = g.as_float()
    e0 = np.zeros(len(gv))
    e0[0] = 1.0
    bias = float(np.max(np.abs(phi.T @ gv - e0)))
    return (bias + float(np.max(np.abs(gv))) / math.sqrt(n)) ** 2


def exact_mse(g: EstimatorCoefficients | np.ndarray, phi: np.ndarray, pi: np.ndarray, n: int) -> float:
    """MSE of the linear estimator at input weight law ``pi``: squared bias plus variance over ``n``."""
    gv = g.as_float() if isinstance(g, EstimatorCoefficients) else np.asarray(g, dtype=float)
    pi = np.asarray(pi, dtype=float)
    q = phi @ pi
    mean = float(gv @ q)
    var = float((gv * gv) @ q) - mean * mean
    return (mean - pi[0]) ** 2 + max(var, 0.0) / n


def least_favorable_input(channel: ChannelModel, d: int, n: int, g: EstimatorCoefficients | None = None) -> WeightDistribution:
    """Hardest member of the two-point family built from the zero-mass modulus at ``t = 1/sqrt(n)``.

    Each side of the pair, with its leftover mass on every possible weight,
    is scored by the exact MSE of ``g`` (the synthesized estimator at ``n`` by
    default); the worst one is returned.
    """
    phi_t = build_phi(channel, d)
    phi = phi_t.as_float()
    h = FunctionalVector.e0(d)
    if g is None:
        g = synthesize_estimator(phi_t, h, n).g
    t = 1 / math.sqrt(n)
    D = delta_tilde_of_t(phi_t, h, t).delta
    best, arg = -1.0, None
    for base in range(d + 1):
        for pi in least_favorable_pair(phi_t, h, t, base, perturbation=D):
            pi = np.clip(pi, 0.0, None)
            pi = pi / pi.sum()
            risk = exact_mse(g, phi, pi, n)
            if risk > best:
                best, arg = risk, pi
    return WeightDistribution(arg)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class TrialRow:
    n: int
    trial: int
    estimate: float
    sq_error: float


@dataclass(frozen=True)
class SummaryRow:
    n: int
    mse: float
    stderr: float
    certificate_upper: float


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple[TrialRow, ...]
    summary: tuple[SummaryRow, ...]
    coefficients: dict = field(default_factory=dict, repr=False, compare=False)

    def write_rows(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "trial", "estimate", "sq_error"])
            for r in self.rows:
                w.writerow([r.n, r.trial, repr(r.estimate), repr(r.sq_error)])

    def write_summary(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "mse", "stderr", "certificate_upper"])
            for s in self.summary:
                w.writerow([s.n, repr(s.mse), repr(s.stderr), repr(s.certificate_upper)])


def _one_trial(config: ExperimentConfig, k: int, t: int, g: np.ndarray, q: np.ndarray) -> float:
    n = config.n_grid[k]
    rng = _rng(config.seed, k, t)
    if config.method == "weights":
        counts = rng.multinomial(n, q)
    else:
        X = _sample_matrix(config.distribution, config.d, n, rng)
        Y = _corrupt(X, config.model, rng)
        counts = np.bincount((Y == 1).sum(axis=1), minlength=config.d + 1)
    return float(g @ counts) / n


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Estimate ``P_0`` ``trials`` times at every ``n`` and summarize the squared errors."""
    ch = config.model
    if ch.kind == NOISY and ch.is_degenerate_noisy:
        raise ValueError("noisy channel with epsilon = 1/2 carries no information")
    phi = build_phi(ch, config.d).as_float()
    q = np.clip(phi @ config.weights, 0.0, None)
    q = q / q.sum()
    p0 = config.p0
    rows: list[TrialRow] = []
    summary: list[SummaryRow] = []
    coeffs = {}
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for k, n in enumerate(config.n_grid):
            gc = estimator_for(ch, config.d, n, config.estimator)
            coeffs[n] = gc
            g = gc.as_float()
            trials = range(config.trials)
            if pool is None:
                ests = [_one_trial(config, k, t, g, q) for t in trials]
            else:
                ests = list(pool.map(lambda t: _one_trial(config, k, t, g, q), trials))
            sq = np.array([(e - p0) ** 2 for e in ests])
            rows.extend(TrialRow(n, t, e, float(s)) for t, (e, s) in enumerate(zip(ests, sq)))
            se = float(sq.std(ddof=1) / math.sqrt(len(sq))) if len(sq) > 1 else 0.0
            summary.append(SummaryRow(n, float(sq.mean()), se, certificate_upper(gc, phi, n)))
    finally:
        if pool is not None:
            pool.shutdown()
    return ExperimentResult(config, tuple(rows), tuple(summary), coeffs)


def fit_rate_slope(summary: ExperimentResult | Iterable) -> float:
    """Least-squares slope of ``log MSE`` against ``log n``.

    Accepts an :class:`ExperimentResult`, :class:`SummaryRow` items, a mapping
    ``n -> mse`` or ``(n, mse)`` pairs.
    """
    if isinstance(summary, ExperimentResult):
        summary = summary.summary
    if isinstance(summary, Mapping):
        pts = list(summary.items())
    else:
        pts = [(s.n, s.mse) if isinstance(s, SummaryRow) else tuple(s) for s in summary]
    if len(pts) < 3:
        raise ValueError("need at least 3 grid points to fit a slope")
    n = np.array([p[0] for p in pts], dtype=float)
    mse = np.array([p[1] for p in pts], dtype=float)
    if np.any(mse <= 0) or np.any(n <= 0):
        raise ValueError("degenerate MSE: values must be positive")
    return float(np.polyfit(np.log(n), np.log(mse), 1)[0])
