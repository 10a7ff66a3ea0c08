"""Minimax linear estimation of a linear functional through a known channel.

For a transition matrix ``Phi`` and functional ``F(pi) = <pi, h>`` two linear
programs bracket the minimax risk:

* the synthesis program ``min_g ||Phi^T g - h||_inf + ||g||_inf / sqrt(n)``
  whose minimizer is a linear estimator with a worst-case MSE guarantee;
* the dual modulus ``delta(t) = max <D, h>`` over ``||D||_1 <= 1`` and
  ``||Phi D||_1 <= t``, which certifies lower bounds through two-point
  arguments.

By LP duality the synthesis optimum equals ``delta(1/sqrt(n))``.  All norms
are linearized with sign-split and epigraph variables before reaching
:func:`poprec.lpsolve.solve`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .estimators import LP_SYNTHESIZED, EstimatorCoefficients
from .lpsolve import LinearProgram, LPSolution, SolverStalled, Status, solve
from .model import SignedWeightVector, TransitionMatrix, to_rational

# below this budget float tolerances swamp the constraint and exact arithmetic is used
RATIONAL_SWITCH_T = 1e-12


class LPFailure(RuntimeError):
    """The underlying LP was infeasible or unbounded."""

    def __init__(self, status: Status, what: str):
        super().__init__(f"{what}: LP {status.value}")
        self.status = status


@dataclass(frozen=True)
class FunctionalVector:
    """Coefficients ``h`` of the linear functional ``F(pi) = <pi, h>``."""

    d: int
    h: np.ndarray

    def __post_init__(self):
        exact = any(isinstance(v, Fraction) for v in np.ravel(self.h))
        h = np.array(self.h, dtype=object if exact else float)
        if h.shape != (self.d + 1,):
            raise ValueError(f"functional has shape {h.shape}, expected ({self.d + 1},)")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def e0(cls, d: int) -> "FunctionalVector":
        """Indicator of weight zero: the functional ``P_0``."""
        h = np.zeros(d + 1)
        h[0] = 1.0
        return cls(d, h)

    @property
    def has_both_signs(self) -> bool:
        return bool(any(v <= 0 for v in self.h) and any(v >= 0 for v in self.h))

    @property
    def spread(self) -> float:
        """``(max h - min h) / 2``."""
        return float(max(self.h) - min(self.h)) / 2

    def sign_warning(self) -> str | None:
        if self.has_both_signs:
            return None
        return (
            "h does not take both signs; the risk bracket assumes it does, "
            "shift h by a constant before interpreting bounds"
        )


@dataclass(frozen=True)
class SynthesisResult:
    g: EstimatorCoefficients
    value: float
    bias_bound: float
    sup_norm: float
    n: float
    warning: str | None = None
    arithmetic: str = "float"


@dataclass(frozen=True)
class DualResult:
    delta: SignedWeightVector
    value: float
    t: float | None = None
    kind: str = "delta"
    warning: str | None = None
    arithmetic: str = "float"
    exact_value: Fraction | None = None


def _check(phi: TransitionMatrix, h: FunctionalVector | None = None) -> None:
    if h is not None and h.d != phi.d:
        raise ValueError(f"functional dimension {h.d} does not match channel dimension {phi.d}")


def _pick_arithmetic(phi: TransitionMatrix, arithmetic: str, budget: float | None) -> str:
    if arithmetic not in ("auto", "float", "rational"):
        raise ValueError(f"unknown arithmetic {arithmetic!r}")
    if arithmetic != "auto":
        return arithmetic
    if phi.is_exact:
        return "rational"
    if budget is not None and 0 < budget < RATIONAL_SWITCH_T:
        return "rational"
    return "float"


def _entries(phi: TransitionMatrix, arith: str) -> np.ndarray:
    if arith == "rational":
        if phi.is_exact:
            return phi.entries
        return np.vectorize(to_rational, otypes=[object])(phi.entries)
    return phi.as_float()


def _num(x, arith: str):
    return to_rational(x) if arith == "rational" else float(x)


def _run(lp: LinearProgram, arith: str, what: str) -> LPSolution:
    try:
        sol = solve(lp, arith)
    except SolverStalled:
        if arith != "float":
            raise
        sol = solve(lp, "rational")
    if not sol.is_optimal:
        raise LPFailure(sol.status, what)
    return sol


def _l1_program(P: np.ndarray, objective, sense: str, arith: str) -> tuple[LinearProgram, int]:
    """Skeleton over ``[D+, D-, s]`` with ``||D||_1 <= 1`` and ``s >= |P D|`` rowwise."""
    m = P.shape[0]
    k = P.shape[1]
    zero = _num(0, arith)
    one = _num(1, arith)
    nv = 2 * k + m
    lp = LinearProgram(objective, sense)
    row = [one] * (2 * k) + [zero] * m
    lp.add(row, "<=", one)
    for i in range(m):
        pd = list(P[i]) + [-v for v in P[i]]
        e = [zero] * m
        e[i] = -one
        lp.add(pd + e, "<=", zero)
        lp.add([-v for v in pd] + e, "<=", zero)
    assert lp.n_vars == nv
    return lp, k


def _dual_lp(phi: TransitionMatrix, h: FunctionalVector, t, arith: str, zero_sum: bool) -> LinearProgram:
    P = _entries(phi, arith)
    k = phi.d + 1
    hv = [_num(v, arith) for v in h.h]
    zero = _num(0, arith)
    one = _num(1, arith)
    obj = hv + [-v for v in hv] + [zero] * k
    lp, _ = _l1_program(P, obj, "max", arith)
    lp.add([zero] * (2 * k) + [one] * k, "<=", _num(t, arith))
    if zero_sum:
        lp.add([one] * k + [-one] * k + [zero] * k, "==", zero)
    return lp


def _delta_vector(sol: LPSolution, k: int, arith: str) -> SignedWeightVector:
    x = sol.primal
    vals = [x[j] - x[k + j] for j in range(k)]
    if arith == "float":
        vals = [float(v) for v in vals]
    return SignedWeightVector(np.array(vals, dtype=object if arith == "rational" else float))


def _modulus(phi, h, t, arithmetic, zero_sum, kind) -> DualResult:
    _check(phi, h)
    if t < 0:
        raise ValueError("t must be non-negative")
    arith = _pick_arithmetic(phi, arithmetic, float(t))
    sol = _run(_dual_lp(phi, h, t, arith, zero_sum), arith, kind)
    return DualResult(
        delta=_delta_vector(sol, phi.d + 1, arith),
        value=float(sol.value),
        t=float(t),
        kind=kind,
        warning=h.sign_warning(),
        arithmetic=arith,
        exact_value=sol.value if arith == "rational" else None,
    )


def delta_of_t(phi: TransitionMatrix, h: FunctionalVector, t: float, *, arithmetic: str = "auto") -> DualResult:
    """Modulus ``max <D,h>`` subject to ``||D||_1 <= 1`` and ``||Phi D||_1 <= t``."""
    return _modulus(phi, h, t, arithmetic, False, "delta")


def delta_tilde_of_t(phi: TransitionMatrix, h: FunctionalVector, t: float, *, arithmetic: str = "auto") -> DualResult:
    """Same as :func:`delta_of_t` restricted to perturbations with zero total mass."""
    return _modulus(phi, h, t, arithmetic, True, "delta_tilde")


def t_of_delta(phi: TransitionMatrix, delta_target: float, *, arithmetic: str = "auto") -> DualResult:
    """Smallest output distance ``min ||Phi D||_1`` with ``D_0 >= delta`` and ``||D||_1 <= 1``.

    Raises :class:`LPFailure` (status infeasible) when ``delta_target > 1``.
    """
    _check(phi)
    if delta_target <= 0:
        raise ValueError("delta_target must be positive")
    arith = _pick_arithmetic(phi, arithmetic, None)
    P = _entries(phi, arith)
    k = phi.d + 1
    zero, one = _num(0, arith), _num(1, arith)
    obj = [zero] * (2 * k) + [one] * k
    lp, _ = _l1_program(P, obj, "min", arith)
    row = [zero] * (3 * k)
    row[0], row[k] = one, -one
    lp.add(row, ">=", _num(delta_target, arith))
    sol = _run(lp, arith, "t_of_delta")
    return DualResult(
        delta=_delta_vector(sol, k, arith),
        value=float(sol.value),
        t=float(sol.value),
        kind="t_of_delta",
        arithmetic=arith,
        exact_value=sol.value if arith == "rational" else None,
    )


def _inv_sqrt(n, arith: str):
    if arith == "rational" and isinstance(n, int) and math.isqrt(n) ** 2 == n:
        return Fraction(1, math.isqrt(n))
    return _num(1 / math.sqrt(n), arith)


def synthesize_estimator(
    phi: TransitionMatrix, h: FunctionalVector, n: float, *, arithmetic: str = "auto"
) -> SynthesisResult:
    """Coefficients minimizing ``||Phi^T g - h||_inf + ||g||_inf / sqrt(n)``.

    Variables are ``g`` (free), ``u`` (bias bound) and ``v`` (sup norm).
    """
    _check(phi, h)
    if n < 1:
        raise ValueError("n must be at least 1")
    arith = _pick_arithmetic(phi, arithmetic, 1 / math.sqrt(n))
    P = _entries(phi, arith)
    k = phi.d + 1
    zero, one = _num(0, arith), _num(1, arith)
    w = _inv_sqrt(n, arith)
    hv = [_num(v, arith) for v in h.h]
    lp = LinearProgram([zero] * k + [one, w], "min", bounds=[(None, None)] * k + [(0, None), (0, None)])
    for j in range(k):
        col = list(P[:, j])
        lp.add(col + [-one, zero], "<=", hv[j])
        lp.add([-v for v in col] + [-one, zero], "<=", -hv[j])
    for i in range(k):
        e = [zero] * k
        e[i] = one
        lp.add(e + [zero, -one], "<=", zero)
        e[i] = -one
        lp.add(e + [zero, -one], "<=", zero)
    sol = _run(lp, arith, "synthesize_estimator")
    g = np.array(sol.primal[:k], dtype=object if arith == "rational" else float)
    gf = np.asarray(g, dtype=float)
    Pf = phi.as_float()
    bias = float(np.max(np.abs(Pf.T @ gf - np.asarray(h.h, dtype=float))))
    sup = float(np.max(np.abs(gf)))
    coeffs = EstimatorCoefficients(phi.d, g, LP_SYNTHESIZED, n=n, bias_bound=bias, sup_norm_bound=sup)
    return SynthesisResult(
        g=coeffs,
        value=float(sol.value),
        bias_bound=bias,
        sup_norm=sup,
        n=n,
        warning=h.sign_warning(),
        arithmetic=arith,
    )


def risk_bounds(phi: TransitionMatrix, h: FunctionalVector, n: float, *, arithmetic: str = "auto") -> tuple[float, float]:
    """``(delta(1/n)^2 / 64, delta(1/sqrt(n))^2)``, a bracket on the minimax quadratic risk."""
    if n < 1:
        raise ValueError("n must be at least 1")
    lo = delta_of_t(phi, h, 1 / n, arithmetic=arithmetic).value
    hi = delta_of_t(phi, h, 1 / math.sqrt(n), arithmetic=arithmetic).value
    return lo * lo / 64, hi * hi


def least_favorable_pair(
    phi: TransitionMatrix, h: FunctionalVector, t: float, base: int = 0, *, perturbation=None
) -> tuple[np.ndarray, np.ndarray]:
    """Two weight distributions whose difference solves the zero-mass modulus at ``t``.

    With ``D`` the optimal perturbation of :func:`delta_tilde_of_t`, returns
    ``D+ + r e_base`` and ``D- + r e_base`` where ``r = 1 - ||D+||_1`` fills
    the remaining mass.  The pair is ``<D, h>`` apart in the functional while
    their channel outputs are within ``t`` in ``l1``.  A previously solved
    ``perturbation`` skips the LP.
    """
    if not 0 <= base <= phi.d:
        raise ValueError(f"base index {base} outside 0..{phi.d}")
    if perturbation is None:
        perturbation = delta_tilde_of_t(phi, h, t).delta
    D = np.asarray(perturbation, dtype=float)
    plus, minus = np.maximum(D, 0.0), np.maximum(-D, 0.0)
    rest = max(0.0, 1.0 - plus.sum())
    plus[base] += rest
    minus[base] += 1.0 - minus.sum()
    return plus, minus


# ---------------------------------------------------------------------------
# line-oriented records


@dataclass(frozen=True)
class Record:
    """``kind value t_or_n d epsilon v0,v1,...``"""

    kind: str
    value: float
    t_or_n: float
    d: int
    epsilon: float | None
    vector: tuple[float, ...]


def format_record(rec: Record) -> str:
    eps = "nan" if rec.epsilon is None else repr(float(rec.epsilon))
    vec = ",".join(repr(float(v)) for v in rec.vector)
    return f"{rec.kind} {float(rec.value)!r} {float(rec.t_or_n)!r} {rec.d} {eps} {vec}"


def parse_record(line: str) -> Record:
    parts = line.split()
    if len(parts) not in (5, 6):
        raise ValueError(f"malformed record: {line!r}")
    kind, value, t_or_n, d, eps = parts[:5]
    vec = tuple(float(v) for v in parts[5].split(",")) if len(parts) == 6 else ()
    e = float(eps)
    return Record(kind, float(value), float(t_or_n), int(d), None if math.isnan(e) else e, vec)


def record_of(result: DualResult | SynthesisResult, phi: TransitionMatrix) -> Record:
    eps = phi.channel.epsilon if phi.channel is not None else None
    if isinstance(result, SynthesisResult):
        return Record("synthesis", result.value, result.n, phi.d, eps, tuple(result.g.as_float()))
    return Record(result.kind, result.value, result.t, phi.d, eps, tuple(np.asarray(result.delta, dtype=float)))
