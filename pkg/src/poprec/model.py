"""Channel models, weight transition matrices and distribution containers.

A sample is a length-``d`` bit string.  Under the lossy model every bit is
independently replaced by ``'?'`` with probability ``epsilon``; under the
noisy model every bit is independently flipped with probability ``epsilon``.
Because the quantities of interest are permutation invariant, most of the
library works with Hamming weights: the transition matrix ``Phi`` maps the
distribution of the input weight to the distribution of the output weight
(number of ``'1'`` symbols).

Matrices come in two arithmetics.  ``"float"`` evaluates binomial pmfs in
log space and stores doubles; ``"exact"`` stores :class:`fractions.Fraction`
entries in a numpy object array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

MAX_DIMENSION = 200

LOSSY = "lossy"
NOISY = "noisy"


class DimensionError(ValueError):
    """Raised when a dimension exceeds the configured maximum or mismatches."""


def to_rational(x) -> Fraction:
    """Snap a number to an exact rational via its shortest decimal text.

    ``0.1`` becomes ``1/10`` rather than the binary expansion of the double.
    Strings such as ``"3/4"`` or ``"0.75"`` are accepted too.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"cannot convert {x!r} to a rational")
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class ChannelModel:
    """Per-bit corruption model: ``kind`` is ``"lossy"`` (BEC) or ``"noisy"`` (BSC)."""

    kind: str
    epsilon: float | Fraction

    def __post_init__(self):
        if self.kind not in (LOSSY, NOISY):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def epsilon_bar(self):
        return 1 - self.epsilon

    @property
    def is_degenerate_noisy(self) -> bool:
        """True for the noisy channel at epsilon = 1/2, whose output ignores the input."""
        return self.kind == NOISY and self.epsilon == Fraction(1, 2)

    def exact(self) -> "ChannelModel":
        return ChannelModel(self.kind, to_rational(self.epsilon))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic ``(d+1) x (d+1)`` matrix; column = input weight, row = output weight."""

    d: int
    entries: np.ndarray
    mode: str = "float"
    channel: ChannelModel | None = None

    def __post_init__(self):
        if self.entries.shape != (self.d + 1, self.d + 1):
            raise DimensionError(
                f"entries have shape {self.entries.shape}, expected {(self.d + 1, self.d + 1)}"
            )
        if self.mode not in ("float", "exact"):
            raise ValueError(f"unknown mode {self.mode!r}")
        _frozen(self.entries)

    @property
    def is_exact(self) -> bool:
        return self.mode == "exact"

    def as_float(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _check_dims(d: int, max_dim: int) -> None:
    if d < 0:
        raise DimensionError(f"dimension must be non-negative, got {d}")
    if d > max_dim:
        raise DimensionError(f"dimension too large: d={d} exceeds maximum {max_dim}")


def _log_or_none(p: float) -> float | None:
    return math.log(p) if p > 0 else None


def binomial_pmf(n: int, p) -> np.ndarray:
    """pmf of ``Bin(n, p)`` on ``0..n``.

    Floats are evaluated in log space through ``lgamma``; a ``Fraction`` ``p``
    gives an exact object array.
    """
    if isinstance(p, Fraction):
        q = 1 - p
        return np.array([math.comb(n, k) * p**k * q ** (n - k) for k in range(n + 1)], dtype=object)
    p = float(p)
    lp, lq = _log_or_none(p), _log_or_none(1.0 - p)
    out = np.zeros(n + 1)
    lgn = math.lgamma(n + 1)
    for k in range(n + 1):
        if (k > 0 and lp is None) or (n - k > 0 and lq is None):
            continue
        s = lgn - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        if k:
            s += k * lp
        if n - k:
            s += (n - k) * lq
        out[k] = math.exp(s)
    return out


def _coerce_eps(epsilon, exact: bool):
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    return to_rational(epsilon) if exact else float(epsilon)


def build_phi_lossy(d: int, epsilon, *, exact: bool = False, max_dim: int = MAX_DIMENSION) -> TransitionMatrix:
    """Erasure-channel weight kernel ``Phi[i, j] = C(j, i) (1-eps)^i eps^(j-i)`` for ``i <= j``."""
    _check_dims(d, max_dim)
    eps = _coerce_eps(epsilon, exact)
    keep = 1 - eps
    dtype = object if exact else float
    phi = np.zeros((d + 1, d + 1), dtype=dtype)
    if exact:
        phi[:, :] = Fraction(0)
    for j in range(d + 1):
        phi[: j + 1, j] = binomial_pmf(j, keep)
    return TransitionMatrix(d, phi, "exact" if exact else "float", ChannelModel(LOSSY, eps))


def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype == object or b.dtype == object:
        out = np.array([Fraction(0)] * (len(a) + len(b) - 1), dtype=object)
        for i, x in enumerate(a):
            if x:
                out[i : i + len(b)] += x * b
        return out
    return np.convolve(a, b)


def build_phi_noisy(d: int, epsilon, *, exact: bool = False, max_dim: int = MAX_DIMENSION) -> TransitionMatrix:
    """Symmetric-channel weight kernel: column ``j`` is ``Bin(j, 1-eps) * Bin(d-j, eps)``."""
    _check_dims(d, max_dim)
    eps = _coerce_eps(epsilon, exact)
    keep = 1 - eps
    phi = np.zeros((d + 1, d + 1), dtype=object if exact else float)
    for j in range(d + 1):
        phi[:, j] = _convolve(binomial_pmf(j, keep), binomial_pmf(d - j, eps))
    return TransitionMatrix(d, phi, "exact" if exact else "float", ChannelModel(NOISY, eps))


def build_phi(channel: ChannelModel, d: int, *, exact: bool = False, max_dim: int = MAX_DIMENSION) -> TransitionMatrix:
    builder = build_phi_lossy if channel.kind == LOSSY else build_phi_noisy
    return builder(d, channel.epsilon, exact=exact, max_dim=max_dim)


@dataclass(frozen=True)
class WeightDistribution:
    """Probability vector indexed by Hamming weight ``0..d``."""

    probs: np.ndarray
    tol: float = field(default=1e-12, repr=False, compare=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=object if _is_exact(self.probs) else float)
        if p.ndim != 1 or len(p) == 0:
            raise DimensionError("weight distribution must be a non-empty vector")
        if any(v < 0 for v in p):
            raise ValueError("weight distribution has negative entries")
        total = sum(p)
        if p.dtype == object:
            if total != 1:
                raise ValueError(f"weight distribution sums to {total}, not 1")
        elif abs(total - 1.0) > self.tol:
            raise ValueError(f"weight distribution sums to {total!r}, not 1")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def d(self) -> int:
        return len(self.probs) - 1

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, k):
        return self.probs[k]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)


@dataclass(frozen=True)
class SignedWeightVector:
    """Signed perturbation vector indexed by weight; the LP variable of the dual programs."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=object if _is_exact(self.values) else float)
        if v.dtype != object and not np.all(np.isfinite(v)):
            raise ValueError("signed weight vector has non-finite entries")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def d(self) -> int:
        return len(self.values) - 1

    def l1(self):
        return sum(abs(v) for v in self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _is_exact(values) -> bool:
    if isinstance(values, np.ndarray):
        return values.dtype == object
    return any(isinstance(v, Fraction) for v in values)


def push_forward(phi: TransitionMatrix, pi: WeightDistribution) -> WeightDistribution:
    """Output-weight law ``Phi @ pi`` of the channel fed with input-weight law ``pi``."""
    if len(pi) != phi.d + 1:
        raise DimensionError(f"distribution has length {len(pi)}, matrix expects {phi.d + 1}")
    if phi.is_exact and pi.probs.dtype == object:
        out = phi.entries.dot(pi.probs)
        return WeightDistribution(out)
    out = phi.as_float() @ np.asarray(pi.probs, dtype=float)
    # The product of stochastic objects can drift by a few ulps.
    out = np.clip(out, 0.0, None)
    return WeightDistribution(out / out.sum(), tol=1e-9)


def hamming_weight(x: str) -> int:
    return x.count("1")


def _check_bits(x: str) -> None:
    if not x or any(c not in "01" for c in x):
        raise ValueError(f"invalid bit string {x!r}")


@dataclass(frozen=True)
class HypercubeDistribution:
    """Sparse distribution on ``{0,1}^d``; keys are MSB-first ``'0'/'1'`` strings."""

    d: int
    support: Mapping[str, float]
    tol: float = field(default=1e-9, repr=False, compare=False)
    check_mass: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for x, p in self.support.items():
            _check_bits(x)
            if len(x) != self.d:
                raise DimensionError(f"string {x!r} has length {len(x)}, expected {self.d}")
            if p < 0 and self.check_mass:
                raise ValueError(f"negative probability {p} for {x!r}")
            if p != 0:
                clean[x] = p
        total = float(sum(clean.values()))
        if self.check_mass and abs(total - 1.0) > self.tol:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "support", dict(sorted(clean.items())))

    @classmethod
    def point_mass(cls, x: str) -> "HypercubeDistribution":
        return cls(len(x), {x: 1.0})

    @classmethod
    def uniform(cls, strings: Iterable[str]) -> "HypercubeDistribution":
        strings = sorted(set(strings))
        if not strings:
            raise ValueError("need at least one string")
        return cls(len(strings[0]), {x: 1.0 / len(strings) for x in strings})

    @classmethod
    def estimate(cls, d: int, values: Mapping[str, float]) -> "HypercubeDistribution":
        """Container for estimated probabilities; total mass is not enforced."""
        return cls(d, values, check_mass=False)

    def total_mass(self) -> float:
        return float(sum(self.support.values()))

    def prob(self, x: str) -> float:
        return self.support.get(x, 0.0)

    def __len__(self):
        return len(self.support)

    def items(self):
        return self.support.items()


def weight_distribution_of(P: HypercubeDistribution) -> WeightDistribution:
    """Marginal law of the Hamming weight under ``P``."""
    probs = np.zeros(P.d + 1)
    for x, p in P.items():
        probs[hamming_weight(x)] += p
    return WeightDistribution(probs / probs.sum(), tol=1e-9)


def permutation_invariant_distribution(pi: WeightDistribution, *, max_strings: int = 1 << 20) -> HypercubeDistribution:
    """Spread each weight class uniformly over its strings (inverse of :func:`weight_distribution_of`).

    Only usable when the support stays enumerable; ``max_strings`` bounds it.
    """
    d = pi.d
    count = sum(math.comb(d, k) for k, p in enumerate(pi.probs) if p > 0)
    if count > max_strings:
        raise DimensionError(f"support of {count} strings exceeds max_strings={max_strings}")
    support = {}
    for k, p in enumerate(pi.probs):
        if p <= 0:
            continue
        share = float(p) / math.comb(d, k)
        for ones in _combinations(d, k):
            support["".join("1" if i in ones else "0" for i in range(d))] = share
    return HypercubeDistribution(d, support)


def _combinations(d: int, k: int):
    from itertools import combinations

    for c in combinations(range(d), k):
        yield set(c)


def read_distribution(path: str | Path, *, check_mass: bool = True) -> HypercubeDistribution:
    """Parse ``<bitstring> <probability>`` records; ``#`` lines are comments.

    Pass ``check_mass=False`` to read estimates whose total mass is not one.
    """
    support: dict[str, float] = {}
    d = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected '<bitstring> <probability>'")
        x, p = parts
        try:
            _check_bits(x)
            prob = float(p)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if d is None:
            d = len(x)
        support[x] = support.get(x, 0.0) + prob
    if d is None:
        raise ValueError(f"{path}: no records")
    return HypercubeDistribution(d, support, check_mass=check_mass)


def format_distribution(P: HypercubeDistribution, header: str | None = None) -> str:
    lines = [f"# {header}"] if header else []
    lines += [f"{x} {p!r}" for x, p in P.items()]
    return "\n".join(lines) + "\n"


def write_distribution(P: HypercubeDistribution, path: str | Path, header: str | None = None) -> None:
    Path(path).write_text(format_distribution(P, header), encoding="utf-8")
