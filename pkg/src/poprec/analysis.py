"""Closed-form bounds, power-series constructions and statistical distances.

The lossy-channel extremal constructions revolve around the function
``g(z) = beta^((1+z)/(1-z))``: it has modulus one on the unit circle and decays
geometrically on horodisks tangent at ``z = 1``, which is exactly how the
lossy channel acts on generating functions (``f(z) -> f(eps + (1-eps) z)``).
Its Maclaurin coefficients are ``beta * L_n^{(-1)}(2 ln(1/beta))`` where
``L_n^{(nu)}`` is the generalized Laguerre polynomial, so they are computed by
the three-term recurrence rather than by composing power series.

Unspecified absolute constants in the asymptotic bounds are exposed as
keyword parameters defaulting to one; the bound objects also report the bare
exponent arguments so shape comparisons do not depend on them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .estimators import laguerre_all
from .model import WeightDistribution, binomial_pmf, build_phi_lossy

BOUND_TABLE_HEADER = ("model", "eps", "delta", "d", "lp_value", "lower_bound", "upper_bound", "trivial_cap")


# ---------------------------------------------------------------------------
# power series


@dataclass(frozen=True)
class PowerSeries:
    """Truncated Maclaurin series ``sum_{n<=d} a_n z^n``."""

    coeffs: np.ndarray

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float)
        if a.ndim != 1 or len(a) == 0:
            raise ValueError("power series needs a non-empty coefficient vector")
        if not np.all(np.isfinite(a)):
            raise ValueError("power series has non-finite coefficients")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @property
    def d(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    def scaled(self, alpha: float) -> "PowerSeries":
        """Coefficients of ``f(alpha z)``."""
        return PowerSeries(self.coeffs * alpha ** np.arange(self.d + 1))

    def times_one_minus_z(self) -> "PowerSeries":
        """Coefficients of ``(1 - z) f(z)``, degree raised by one."""
        a = np.append(self.coeffs, 0.0)
        a[1:] -= self.coeffs
        return PowerSeries(a)

    def truncated(self, degree: int) -> "PowerSeries":
        return PowerSeries(self.coeffs[: degree + 1])


def a_norm(f: PowerSeries) -> float:
    """Wiener-algebra norm ``sum |a_n|`` of the truncation."""
    return math.fsum(abs(float(v)) for v in f.coeffs)


def hinf_grid(f: PowerSeries, grid_points: int = 4096) -> float:
    """Approximate ``sup_{|z|=1} |f(z)|`` on a uniform grid of ``grid_points`` angles.

    A diagnostic, not a certified value: the true supremum can sit between
    grid points.
    """
    if grid_points < 16:
        raise ValueError("grid_points must be at least 16")
    a = f.coeffs
    if len(a) > grid_points:
        # aliasing fold: z^n and z^(n mod M) agree on the M-point grid
        pad = (-len(a)) % grid_points
        a = np.append(a, np.zeros(pad)).reshape(-1, grid_points).sum(axis=0)
    vals = np.fft.fft(a, n=grid_points)
    return float(np.max(np.abs(vals)))


def generalized_laguerre_series(x: float, nu: float, degree: int, scale: float = 1.0) -> PowerSeries:
    """Coefficients ``scale * L_n^{(nu)}(x)`` of ``scale * (1-z)^{-nu-1} exp(-x z / (1-z))``."""
    return PowerSeries(scale * laguerre_all(degree, x, nu))


def _exp_series(h: np.ndarray) -> np.ndarray:
    """Coefficients of ``exp(h(z))`` for a series with ``h(0) = 0``, via ``n e_n = sum k h_k e_{n-k}``."""
    n = len(h)
    e = np.zeros(n)
    e[0] = 1.0
    k = np.arange(n)
    for m in range(1, n):
        e[m] = np.dot(k[1 : m + 1] * h[1 : m + 1], e[m - 1 :: -1][:m]) / m
    return e


def mother_series_direct(beta: float, degree: int) -> PowerSeries:
    """``beta^((1+z)/(1-z))`` by composing ``exp`` with ``-x z/(1-z)``; quadratic cost, low degree only."""
    x = 2 * math.log(1 / beta)
    h = np.full(degree + 1, -x)
    h[0] = 0.0
    return PowerSeries(beta * _exp_series(h))


def mother_series(beta: float, degree: int) -> PowerSeries:
    """Maclaurin coefficients of ``g(z) = beta^((1+z)/(1-z))`` up to ``degree``.

    ``a_n = beta * L_n^{(-1)}(2 ln(1/beta))``.  The leading coefficients are
    cross-checked against direct composition.
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    x = 2 * math.log(1 / beta)
    out = generalized_laguerre_series(x, -1.0, degree, beta)
    k = min(degree, 15)
    ref = mother_series_direct(beta, k).coeffs
    gap = float(np.max(np.abs(out.coeffs[: k + 1] - ref)))
    if gap > 1e-10:
        raise ArithmeticError(f"recurrence and composition disagree by {gap:.3e}")
    return out


def damped_mother_series(delta: float, degree: int, power: int = 2) -> PowerSeries:
    """Coefficients of ``(1-z)^power * delta^((1+z)/(1-z))``.

    Computed as ``delta * L_n^{(-2)}(x)`` (one damping factor absorbed into the
    Laguerre parameter) followed by ``power - 1`` explicit ``(1-z)`` products.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if power < 1:
        raise ValueError("power must be at least 1")
    x = 2 * math.log(1 / delta)
    f = generalized_laguerre_series(x, -2.0, degree, delta)
    for _ in range(power - 1):
        f = f.times_one_minus_z()
    return f.truncated(degree)


def gnorm_bound(delta: float) -> float:
    """``4 (ln(1/delta) + 3)``, an upper bound on the A-norm of the doubly damped mother function."""
    return 4 * (math.log(1 / delta) + 3)


# ---------------------------------------------------------------------------
# closed-form bounds


@dataclass(frozen=True)
class TBounds:
    """Interval for the min-TV value; ``upper`` is the formula value, ``trivial_cap = delta``."""

    lower: float
    upper: float
    trivial_cap: float
    note: str | None = None

    @property
    def capped_upper(self) -> float:
        return min(self.upper, self.trivial_cap)

    def __iter__(self):
        yield self.lower
        yield self.upper


def lossy_t_bounds(delta: float, epsilon: float) -> TBounds:
    """Two-sided bound on the lossy min-TV value at separation ``delta``.

    For ``eps <= 1/2``: ``[delta, 2(1-eps) delta]``.  For ``eps > 1/2``:
    ``[delta^(eps/(1-eps)), (e delta ln(1/delta))^(eps/(1-eps))]``, the upper
    side requiring ``delta < 1/e``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if epsilon <= 0.5:
        return TBounds(delta, 2 * (1 - epsilon) * delta, delta)
    rho = epsilon / (1 - epsilon)
    lower = delta**rho
    if delta >= 1 / math.e:
        return TBounds(lower, delta, delta, note="delta >= 1/e: only the trivial upper bound applies")
    return TBounds(lower, (math.e * delta * math.log(1 / delta)) ** rho, delta)


def noisy_mu(epsilon: float) -> float:
    """``eps (1-eps) / (1 - 2 eps)^2``."""
    if epsilon == 0.5:
        raise ValueError("degenerate noisy channel")
    return epsilon * (1 - epsilon) / (1 - 2 * epsilon) ** 2


@dataclass(frozen=True)
class NoisyTBounds:
    lower: float
    upper: float
    trivial_cap: float
    mu: float
    lower_exponent_arg: float
    upper_exponent_arg: float

    @property
    def capped_upper(self) -> float:
        return min(self.upper, self.trivial_cap)

    def __iter__(self):
        yield self.lower
        yield self.capped_upper


def noisy_exponent_arg(d: int, epsilon: float, delta: float, *, e_shift: bool = False) -> float:
    """``(d mu log^2(1/delta))^(1/3)``, or with ``log(e/delta)`` when ``e_shift``."""
    L = math.log((math.e if e_shift else 1.0) / delta)
    return (d * noisy_mu(epsilon) * L * L) ** (1 / 3)


def noisy_t_bounds(delta: float, d: int, epsilon: float, *, c: float = 1.0, c_prime: float = 1.0) -> NoisyTBounds:
    """Exponent-level envelope of the noisy min-TV value (constants ``c, c'`` unspecified, default 1)."""
    if epsilon == 0.5:
        raise ValueError("degenerate noisy channel")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    mu = noisy_mu(epsilon)
    lo_arg = noisy_exponent_arg(d, epsilon, delta, e_shift=True)
    up_arg = noisy_exponent_arg(d, epsilon, delta)
    lower = min(1.0, math.exp(-c * lo_arg))
    upper = max(math.exp(-((1 - 2 * epsilon) ** 2) * d), math.exp(-c_prime * up_arg))
    return NoisyTBounds(lower, upper, delta, mu, lo_arg, up_arg)


def sample_complexity_lossy(delta: float, epsilon: float) -> float:
    """Dimension-free sample-size upper bound: ``1/delta^2`` or ``delta^(-2 eps/(1-eps))``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if epsilon <= 0.5:
        return delta**-2
    return delta ** (-2 * epsilon / (1 - epsilon))


def sample_complexity_lossy_lower(delta: float, epsilon: float, *, c1: float = 1.0, c2: float = 1.0) -> float:
    """Companion lower bound: ``c1/delta^2`` or ``c2 (e delta ln(1/delta))^(-2 eps/(1-eps))``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if epsilon <= 0.5:
        return c1 * delta**-2
    return c2 * (math.e * delta * math.log(1 / delta)) ** (-2 * epsilon / (1 - epsilon))


def sample_complexity_noisy(delta: float, d: int, epsilon: float, *, c1: float = 1.0, c2: float = 1.0) -> tuple[float, float]:
    """``(lower, upper)`` sample-size envelope for the noisy model, constants defaulting to one."""
    arg = noisy_exponent_arg(d, epsilon, delta)
    lower = min(math.exp(c1 * (1 - 2 * epsilon) ** 2 * d), math.exp(c1 * arg))
    return lower, math.exp(c2 * arg)


def lecam_dimension(delta: float, epsilon: float) -> int:
    """Smallest ``d`` with ``d >= (2 eps/(1-eps)) ln^2(1/delta)``."""
    return math.ceil(2 * epsilon / (1 - epsilon) * math.log(1 / delta) ** 2)


# ---------------------------------------------------------------------------
# distances


def _probs(p) -> np.ndarray:
    return np.asarray(p.probs if isinstance(p, WeightDistribution) else p, dtype=float)


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    a, b = _probs(p), _probs(q)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def tv_distance(p, q) -> float:
    """``(1/2) sum |p_i - q_i|``."""
    a, b = _pair(p, q)
    return 0.5 * math.fsum(np.abs(a - b))


def _hellinger_terms(a: np.ndarray, b: np.ndarray, diff: np.ndarray | None = None) -> np.ndarray:
    # (sqrt a - sqrt b)^2 = (a - b)^2 / (sqrt a + sqrt b)^2 avoids cancellation when a ~ b
    d = a - b if diff is None else diff
    s = np.sqrt(np.maximum(a, 0)) + np.sqrt(np.maximum(b, 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, d * d / (s * s), 0.0)


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance ``sum (sqrt p_i - sqrt q_i)^2`` (range ``[0, 2]``)."""
    a, b = _pair(p, q)
    return math.fsum(_hellinger_terms(a, b))


def hellinger_bin_shift_bound(d_prime: int, d: int, p: float) -> float:
    """``4 p d^2 / ((1-p) d')``, bounding ``H^2(Bin(d', p), Bin(d' - d, p))``."""
    if not d_prime >= d >= 1:
        raise ValueError("need d_prime >= d >= 1")
    if p == 1:
        raise ValueError("p must be below 1")
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    return 4 * p * d * d / ((1 - p) * d_prime)


def hellinger_bin_shift_exact(d_prime: int, d: int, p: float) -> float:
    """Exact ``H^2(Bin(d', p), Bin(d' - d, p))`` by summing over the common support."""
    a = binomial_pmf(d_prime, p)
    b = np.zeros(d_prime + 1)
    b[: d_prime - d + 1] = binomial_pmf(d_prime - d, p)
    return hellinger_sq(a, b)


# ---------------------------------------------------------------------------
# Le Cam pair


@dataclass(frozen=True)
class LeCamPair:
    """Two weight distributions far apart at zero whose lossy outputs are close."""

    pi: WeightDistribution
    pi_prime: WeightDistribution
    separation: float
    hellinger_sq: float
    delta: float
    epsilon: float
    alpha: float
    beta: float
    perturbation: np.ndarray
    raw_separation: float

    @property
    def hellinger_bound(self) -> float:
        """``36 (e delta ln(1/delta))^(2 eps/(1-eps))``."""
        rho = 2 * self.epsilon / (1 - self.epsilon)
        return 36 * (math.e * self.delta * math.log(1 / self.delta)) ** rho


def lecam_parameters(delta: float) -> tuple[float, float]:
    """``(alpha, beta) = (1 - 1/ln(1/delta), delta ln(1/delta))``."""
    L = math.log(1 / delta)
    return 1 - 1 / L, delta * L


def lecam_perturbation(delta: float, d: int) -> np.ndarray:
    """Coefficients ``D_k`` of ``(1-alpha) (g(alpha z) - g(alpha))`` for ``k = 0..d``."""
    alpha, beta = lecam_parameters(delta)
    abar = 1 - alpha
    a = mother_series(beta, d).coeffs
    D = abar * alpha ** np.arange(d + 1) * a
    D[0] = abar * beta - abar * beta ** ((1 + alpha) / (1 - alpha))
    return D


def lecam_pair(delta: float, epsilon: float, d: int) -> LeCamPair:
    """Perturb the geometric law ``(1-alpha) alpha^k`` by ``+-D`` and condition on ``{0..d}``.

    ``H^2`` of the lossy-channel outputs is summed directly.
    """
    if not epsilon > 0.5:
        raise ValueError(f"lecam_pair requires epsilon > 1/2, got {epsilon}")
    if not 0 < delta < 1 / (2 * math.e):
        raise ValueError(f"lecam_pair requires delta < 1/(2e) = {1 / (2 * math.e):.6f}, got {delta}")
    need = lecam_dimension(delta, epsilon)
    if d < need:
        raise ValueError(f"lecam_pair requires d >= (2 eps/(1-eps)) ln^2(1/delta) = {need}, got {d}")
    alpha, beta = lecam_parameters(delta)
    D = lecam_perturbation(delta, d)
    mu = (1 - alpha) * alpha ** np.arange(d + 1)
    p, q = mu + D, mu - D
    if np.any(p < 0) or np.any(q < 0):
        raise ArithmeticError("perturbation exceeds the geometric center")
    zp, zq = p.sum(), q.sum()
    pt, qt = p / zp, q / zq
    phi = build_phi_lossy(d, epsilon).as_float()
    out_p, out_q = phi @ pt, phi @ qt
    # difference pushed through separately to keep small gaps accurate
    diff = phi @ (D * (1 / zp + 1 / zq) + mu * (1 / zp - 1 / zq))
    h2 = math.fsum(_hellinger_terms(out_p, out_q, diff))
    return LeCamPair(
        pi=WeightDistribution(pt),
        pi_prime=WeightDistribution(qt),
        separation=float(pt[0] - qt[0]),
        hellinger_sq=h2,
        delta=delta,
        epsilon=epsilon,
        alpha=alpha,
        beta=beta,
        perturbation=D,
        raw_separation=float(2 * D[0]),
    )


# ---------------------------------------------------------------------------
# feasible-solution certificate for the lossy min-TV program


@dataclass(frozen=True)
class FeasibleCertificate:
    """Explicit feasible point for the lossy min-TV program at separation ``delta/2``."""

    series: PowerSeries
    output: PowerSeries
    value_at_zero: float
    norm: float
    output_norm: float
    target: float


def lossy_push(f: PowerSeries, epsilon: float) -> PowerSeries:
    """Coefficients of ``f(eps + (1-eps) z)``: the lossy channel acting on a generating function."""
    phi = build_phi_lossy(f.d, epsilon).as_float()
    return PowerSeries(phi @ f.coeffs)


def truncated_feasible_solution(delta: float, epsilon: float, d: int) -> FeasibleCertificate:
    """Half the scaled mother function truncated to degree ``d``.

    Returns coefficients ``(1/2)(1-alpha) alpha^n a_n``; the point has value
    ``delta/2`` at zero, A-norm at most one, and lossy-output A-norm below
    ``(e delta ln(1/delta))^(eps/(1-eps))`` once ``d`` is large enough.
    """
    if not epsilon > 0.5:
        raise ValueError("requires epsilon > 1/2")
    if not 0 < delta < 1 / math.e:
        raise ValueError("requires delta < 1/e")
    alpha, beta = lecam_parameters(delta)
    f = PowerSeries(0.5 * (1 - alpha) * mother_series(beta, d).scaled(alpha).coeffs)
    out = lossy_push(f, epsilon)
    rho = epsilon / (1 - epsilon)
    return FeasibleCertificate(
        series=f,
        output=out,
        value_at_zero=float(f.coeffs[0]),
        norm=a_norm(f),
        output_norm=a_norm(out),
        target=(math.e * delta * math.log(1 / delta)) ** rho,
    )


# ---------------------------------------------------------------------------
# bound tables


@dataclass(frozen=True)
class BoundRow:
    model: str
    eps: float
    delta: float
    d: int
    lp_value: float
    lower_bound: float
    upper_bound: float
    trivial_cap: float


def write_bound_table(rows: Iterable[BoundRow], path: str | Path | None = None, stream=None) -> None:
    """CSV with header ``model,eps,delta,d,lp_value,lower_bound,upper_bound,trivial_cap``."""
    close = False
    if stream is None:
        stream = open(path, "w", newline="", encoding="utf-8")
        close = True
    try:
        w = csv.writer(stream)
        w.writerow(BOUND_TABLE_HEADER)
        for r in rows:
            w.writerow([r.model, r.eps, r.delta, r.d, repr(r.lp_value), repr(r.lower_bound), repr(r.upper_bound), repr(r.trivial_cap)])
    finally:
        if close:
            stream.close()


def read_bound_table(path: str | Path) -> list[BoundRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != BOUND_TABLE_HEADER:
            raise ValueError(f"{path}: unexpected header {rd.fieldnames}")
        return [
            BoundRow(r["model"], float(r["eps"]), float(r["delta"]), int(r["d"]), float(r["lp_value"]),
                     float(r["lower_bound"]), float(r["upper_bound"]), float(r["trivial_cap"]))
            for r in rd
        ]


def fit_envelope(values: Sequence[float], lower_shape: Sequence[float], upper_shape: Sequence[float]) -> tuple[float, float]:
    """Tightest constants ``a, b`` with ``a * lower_shape <= values <= b * upper_shape`` pointwise."""
    v = np.asarray(values, dtype=float)
    a = float(np.min(v / np.asarray(lower_shape, dtype=float)))
    b = float(np.max(v / np.asarray(upper_shape, dtype=float)))
    return a, b
