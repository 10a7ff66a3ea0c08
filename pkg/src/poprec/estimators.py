"""Linear estimators of the zero-weight probability and the batches they act on.

A linear estimator is a coefficient vector ``g`` indexed by observed Hamming
weight; its estimate is ``(1/n) sum_j g_j N_j`` where ``N_j`` counts samples of
weight ``j``.  Three families live here:

* coefficients synthesized by the minimax LP (built in :mod:`poprec.minimax`),
* the exactly unbiased inverse of the lossy channel, ``g_j = (-eps/(1-eps))^j``,
* a Poisson-smoothed version of the unbiased inverse that trades bias for a
  much smaller sup norm.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .model import LOSSY, NOISY, build_phi_lossy, to_rational

LP_SYNTHESIZED = "lp"
UNBIASED = "unbiased"
SMOOTHED = "smoothed"

AGREEMENT_TOL = 1e-10


@dataclass(frozen=True)
class EstimatorCoefficients:
    """Coefficient vector ``g`` of length ``d+1`` and where it came from.

    ``bias_bound`` and ``sup_norm_bound`` are certificates attached by the
    constructors that know them; ``None`` means no certificate.
    """

    d: int
    g: np.ndarray
    provenance: str
    n: float | None = None
    lam: float | None = None
    bias_bound: float | None = None
    sup_norm_bound: float | None = None
    note: str | None = None

    def __post_init__(self):
        exact = any(isinstance(v, Fraction) for v in np.ravel(self.g))
        g = np.array(self.g, dtype=object if exact else float)
        if g.shape != (self.d + 1,):
            raise ValueError(f"coefficient vector has shape {g.shape}, expected ({self.d + 1},)")
        if not exact and not np.all(np.isfinite(g)):
            raise ValueError("coefficient vector has non-finite entries")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    def sup_norm(self) -> float:
        return float(max(abs(v) for v in self.g))

    def as_float(self) -> np.ndarray:
        return np.asarray(self.g, dtype=float)


_HEADER = re.compile(r"#\s*d=(\d+)\s+model=(lossy|noisy)\s+eps=(\S+)\s+seed=(\S+)\s*$")


@dataclass(frozen=True)
class SampleBatch:
    """Observed strings over ``{0,1,?}`` (lossy) or ``{0,1}`` (noisy), each of length ``d``."""

    d: int
    records: tuple[str, ...] = ()
    model: str | None = None
    epsilon: float | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.model not in (None, LOSSY, NOISY):
            raise ValueError(f"unknown model {self.model!r}")
        allowed = "01" if self.model == NOISY else "01?"
        for lineno, rec in enumerate(self.records, start=1):
            if len(rec) != self.d or any(ch not in allowed for ch in rec):
                raise ValueError(f"malformed record at line {lineno}: {rec!r} (expected {self.d} symbols from {allowed!r})")

    @property
    def n(self) -> int:
        return len(self.records)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, **kw) -> "SampleBatch":
        """Build from an integer matrix with entries 0, 1 and -1 for erasures."""
        m = np.asarray(matrix, dtype=np.int8)
        lut = np.array([ord("?"), ord("0"), ord("1")], dtype=np.uint8)
        raw = lut[m + 1]
        d = m.shape[1]
        recs = [row.tobytes().decode("ascii") for row in raw] if d else [""] * m.shape[0]
        obj = cls(d, tuple(recs), **kw)
        obj.__dict__["matrix"] = m
        return obj

    @cached_property
    def matrix(self) -> np.ndarray:
        """``n x d`` int8 array: 1, 0, or -1 for an erased symbol."""
        if not self.records or self.d == 0:
            return np.zeros((self.n, self.d), dtype=np.int8)
        raw = np.frombuffer("".join(self.records).encode("ascii"), dtype=np.uint8).reshape(self.n, self.d)
        out = np.where(raw == ord("1"), 1, np.where(raw == ord("0"), 0, -1))
        return out.astype(np.int8)


def read_batch(path: str | Path) -> SampleBatch:
    """Read one record per line; an optional ``#d=.. model=.. eps=.. seed=..`` header is verified."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    header = None
    records: list[str] = []
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if lineno == 1 and _HEADER.match(s):
                m = _HEADER.match(s)
                header = (int(m.group(1)), m.group(2), float(m.group(3)), int(m.group(4)))
            continue
        records.append((lineno, s))
    if header is None:
        d = len(records[0][1]) if records else 0
        model = None
        eps = seed = None
    else:
        d, model, eps, seed = header
    allowed = "01" if model == NOISY else "01?"
    for lineno, s in records:
        if len(s) != d or any(ch not in allowed for ch in s):
            raise ValueError(f"{path}:{lineno}: malformed record {s!r} (expected {d} symbols from {allowed!r})")
    return SampleBatch(d, tuple(s for _, s in records), model=model, epsilon=eps, seed=seed)


def format_batch(batch: SampleBatch) -> str:
    lines = []
    if batch.model is not None:
        lines.append(f"#d={batch.d} model={batch.model} eps={batch.epsilon} seed={batch.seed}")
    lines.extend(batch.records)
    return "\n".join(lines) + ("\n" if lines else "")


def write_batch(batch: SampleBatch, path: str | Path) -> None:
    Path(path).write_text(format_batch(batch), encoding="utf-8")


@dataclass(frozen=True)
class WeightCounts:
    """Histogram ``N_j`` of observed Hamming weights (count of ``'1'`` symbols)."""

    d: int
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        c = np.zeros(self.d + 1, dtype=np.int64) if self.counts is None else np.asarray(self.counts)
        if c.shape != (self.d + 1,):
            raise ValueError(f"counts have shape {c.shape}, expected ({self.d + 1},)")
        if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise ValueError("counts must be non-negative integers")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def weight_counts(batch: SampleBatch) -> WeightCounts:
    """Count samples by number of ``'1'`` symbols; ``'0'`` and ``'?'`` are ignored."""
    w = (batch.matrix == 1).sum(axis=1)
    return WeightCounts(batch.d, np.bincount(w, minlength=batch.d + 1))


def apply_linear_estimator(g: EstimatorCoefficients, counts: WeightCounts) -> float:
    """Return ``(1/n) sum_j g_j N_j``."""
    if counts.n == 0:
        raise ValueError("empty batch")
    if g.d != counts.d:
        raise ValueError(f"estimator dimension {g.d} does not match counts dimension {counts.d}")
    return float(np.dot(g.as_float(), counts.counts) / counts.n)


def unbiased_coefficients(d: int, epsilon, *, exact: bool = False) -> EstimatorCoefficients:
    """Coefficients ``(-eps/(1-eps))^j`` that invert the lossy channel exactly."""
    eps = to_rational(epsilon) if exact else float(epsilon)
    if eps == 1:
        raise ValueError("channel uninvertible")
    if not 0 <= eps < 1:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    ratio = -eps / (1 - eps)
    g = [ratio**j for j in range(d + 1)]
    return EstimatorCoefficients(d, np.array(g, dtype=object if exact else float), UNBIASED, bias_bound=0.0)


def poisson_tail(lam: float, kmax: int) -> np.ndarray:
    """``P(L >= i)`` for ``i = 0..kmax`` with ``L ~ Poisson(lam)``.

    Terms are accumulated from the far tail inward so no ``1 - CDF``
    cancellation occurs.
    """
    if lam < 0:
        raise ValueError("Poisson mean must be non-negative")
    if lam == 0:
        out = np.zeros(kmax + 1)
        out[0] = 1.0
        return out
    # walk past the mode until terms drop below 1e-18
    top = max(kmax, int(lam))
    log_lam = math.log(lam)
    while math.exp(-lam + top * log_lam - math.lgamma(top + 1)) >= 1e-18 or top < lam:
        top += 1
    k = np.arange(top + 1)
    pmf = np.exp(-lam + k * log_lam - np.array([math.lgamma(i + 1) for i in k]))
    tail = np.cumsum(pmf[::-1])[::-1]
    tail[0] = 1.0
    return tail[: kmax + 1]


def smoothed_lambda(epsilon: float, n: float) -> float:
    """Smoothing mean ``((1-eps)/(3 eps - 1)) ln n``."""
    if n < 2:
        raise ValueError("log n nonpositive")
    return (1 - epsilon) / (3 * epsilon - 1) * math.log(n)


def smoothed_coefficients_lambda(d: int, epsilon: float, lam: float) -> EstimatorCoefficients:
    """Smoothed coefficients ``(-eps/(1-eps))^i P(L >= i)`` at an explicit Poisson mean."""
    eps = float(epsilon)
    if not 0 <= eps < 1:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    ratio = -eps / (1 - eps)
    g = ratio ** np.arange(d + 1) * poisson_tail(lam, d)
    sup = math.exp(lam * (2 * eps - 1) / (1 - eps)) if eps > 0.5 else None
    return EstimatorCoefficients(
        d, g, SMOOTHED, lam=lam, bias_bound=math.exp(-lam / 2), sup_norm_bound=sup
    )


def smoothed_coefficients(d: int, epsilon: float, n: float) -> EstimatorCoefficients:
    """Poisson-smoothed inverse with ``lam = ((1-eps)/(3 eps - 1)) ln n``.

    For ``eps <= 1/2`` the smoothing mean would be negative or undefined and
    the unbiased coefficients are returned instead, with a note.
    """
    if n < 2:
        raise ValueError("log n nonpositive")
    eps = float(epsilon)
    if eps <= 0.5:
        u = unbiased_coefficients(d, eps)
        return EstimatorCoefficients(
            d, u.g, UNBIASED, n=n, bias_bound=0.0, sup_norm_bound=1.0,
            note="epsilon <= 1/2: unbiased coefficients returned without smoothing",
        )
    lam = smoothed_lambda(eps, n)
    out = smoothed_coefficients_lambda(d, eps, lam)
    return EstimatorCoefficients(
        d, out.g, SMOOTHED, n=n, lam=lam, bias_bound=out.bias_bound, sup_norm_bound=out.sup_norm_bound
    )


def laguerre_all(kmax: int, x: float, alpha: float = 0.0) -> np.ndarray:
    """``L_k^{(alpha)}(x)`` for ``k = 0..kmax`` via the three-term recurrence."""
    out = np.empty(kmax + 1)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = 1.0 + alpha - x
    for k in range(1, kmax):
        out[k + 1] = ((2 * k + 1 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def laguerre(k: int, lam: float, alpha: float = 0.0) -> float:
    """Generalized Laguerre polynomial ``L_k^{(alpha)}(lam)``; ``alpha = 0`` is the classical one."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    return float(laguerre_all(k, lam, alpha)[k])


def laguerre_explicit(k: int, lam: float) -> float:
    """``sum_i (-lam)^i / i! * C(k, i)``, summed with compensation."""
    return math.fsum((-lam) ** i / math.factorial(i) * math.comb(k, i) for i in range(k + 1))


def smoothed_bias_closed_form(d: int, epsilon: float, lam: float) -> np.ndarray:
    """``(Phi^T g^s - e_0)_j = eps^j e^{-lam} L_{j-1}(lam)`` for ``j >= 1``, zero at ``j = 0``."""
    out = np.zeros(d + 1)
    if d >= 1:
        L = laguerre_all(d - 1, lam)
        j = np.arange(1, d + 1)
        out[1:] = float(epsilon) ** j * math.exp(-lam) * L
    return out


def smoothed_bias_direct(d: int, epsilon, lam: float, dps: int = 50) -> np.ndarray:
    """``Phi^T g^s - e_0`` by explicit matrix product in ``dps``-digit arithmetic.

    The alternating coefficients cancel heavily, so double precision loses
    about seven digits here; extended precision keeps the product faithful.
    """
    e = to_rational(epsilon)
    with mpmath.workdps(dps):
        eps = mpmath.mpf(e.numerator) / e.denominator
        ebar = 1 - eps
        lam_mp = mpmath.mpf(lam)
        pmf = [mpmath.exp(-lam_mp) * lam_mp**k / mpmath.factorial(k) for k in range(d + 1)]
        tail, acc = [], mpmath.mpf(1)
        for k in range(d + 1):
            tail.append(acc)
            acc -= pmf[k]
        g = [(-eps / ebar) ** i * tail[i] for i in range(d + 1)]
        out = []
        for j in range(d + 1):
            s = mpmath.fsum(mpmath.binomial(j, i) * ebar**i * eps ** (j - i) * g[i] for i in range(j + 1))
            out.append(float(s - (1 if j == 0 else 0)))
    return np.array(out)


def smoothed_bias_exact(d: int, epsilon: float, lam: float) -> np.ndarray:
    """Bias vector of the smoothed estimator, cross-checked by two independent routes.

    Raises ``ArithmeticError`` if the matrix product and the Laguerre closed
    form disagree by more than ``1e-10``.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    closed = smoothed_bias_closed_form(d, epsilon, lam)
    direct = smoothed_bias_direct(d, epsilon, lam)
    gap = float(np.max(np.abs(closed - direct)))
    if gap > AGREEMENT_TOL:
        raise ArithmeticError(f"bias routes disagree by {gap:.3e}")
    return closed


def lossy_bias_vector(g: EstimatorCoefficients, epsilon, h: Sequence | None = None) -> np.ndarray:
    """``Phi^T g - h`` for the lossy channel (``h`` defaults to ``e_0``)."""
    exact = g.g.dtype == object
    phi = build_phi_lossy(g.d, epsilon, exact=exact)
    target = np.zeros(g.d + 1, dtype=object if exact else float)
    target[0] = 1
    if h is not None:
        target = np.asarray(h, dtype=target.dtype)
    return phi.entries.T.dot(g.g) - target


def estimate_p_x(x: str, batch: SampleBatch, g: EstimatorCoefficients) -> float:
    """Estimate ``P(X_{1..k} = x)`` by shifting each record by ``x`` and estimating ``P_0``.

    Only the first ``k = len(x)`` coordinates of each record are used; erased
    symbols stay erased under the shift.  ``g`` must be built for dimension ``k``.
    """
    k = len(x)
    if k > batch.d:
        raise ValueError(f"prefix length {k} exceeds sample dimension {batch.d}")
    if g.d != k:
        raise ValueError(f"estimator dimension {g.d} does not match prefix length {k}")
    if any(ch not in "01" for ch in x):
        raise ValueError(f"prefix must be a bit string, got {x!r}")
    return apply_linear_estimator(g, shifted_weight_counts(x, batch))


def shifted_weight_counts(x: str, batch: SampleBatch) -> WeightCounts:
    """Weight counts of ``Y XOR x`` restricted to the first ``len(x)`` coordinates."""
    k = len(x)
    sub = batch.matrix[:, :k]
    flipped = np.array([1 - int(ch) for ch in x], dtype=np.int8)
    w = (sub == flipped[None, :]).sum(axis=1) if k else np.zeros(batch.n, dtype=np.int64)
    return WeightCounts(k, np.bincount(w, minlength=k + 1))


def hoeffding_envelope(g: EstimatorCoefficients, n: int, deviation: float) -> float:
    """Two-sided tail bound ``P(|est - mean| >= dev) <= 2 exp(-n dev^2 / (2 ||g||_inf^2))``."""
    s = g.sup_norm()
    if s == 0:
        return 0.0
    return min(1.0, 2 * math.exp(-n * deviation**2 / (2 * s * s)))


def coefficients_from_values(values: Iterable, provenance: str = LP_SYNTHESIZED, **kw) -> EstimatorCoefficients:
    v = np.asarray(list(values))
    return EstimatorCoefficients(len(v) - 1, v, provenance, **kw)
