"""Dense linear-program solver with float and exact-rational arithmetic.

The solver is a two-phase revised simplex method that keeps an explicit basis
inverse.  Pricing takes the most negative reduced cost; after a run of
degenerate pivots it switches to Bland's rule (smallest eligible index enters,
ties in the ratio test leave by smallest basic index) until progress resumes,
so results are deterministic and cycling is impossible in exact arithmetic.

Float mode equilibrates rows and columns with power-of-two factors before
solving, which keeps the scaled problem bit-for-bit equivalent to the input.
Its ratio test lets basic values dip below zero by a small tolerance; once
optimal, a few dual simplex pivots restore exact primal feasibility.
Rational mode first runs the float solver to find a candidate optimal basis,
re-derives that basis exactly and resumes exact pivoting from there; when the
float answer is unusable it falls back to an exact solve from scratch.

Instances here are small (a few hundred columns at most), so everything is
dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import to_rational

LE, EQ, GE = "<=", "==", ">="
_RELATIONS = {LE: LE, "<": LE, EQ: EQ, "=": EQ, GE: GE, ">": GE}

FEAS_TOL = 1e-9
OPT_TOL = 1e-11
PIVOT_TOL = 1e-9
# a ray only counts as unbounded when its reduced cost is clearly negative
UNBOUNDED_TOL = 1e-7
# consecutive degenerate pivots before switching to smallest-index pricing
DEGENERATE_LIMIT = 50
# basic values below -CLEAN_TOL (relative to ||b||) trigger dual simplex cleanup
CLEAN_TOL = 1e-13
# bound relaxation in the two-pass ratio test
RATIO_TOL = 1e-11
# iterative refinement steps per basis solve
REFINE_STEPS = 2


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SolverStalled(RuntimeError):
    """Float simplex exceeded its pivot budget; retrying in rational mode is the remedy."""


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple
    relation: str
    rhs: object


@dataclass
class LinearProgram:
    """``min``/``max`` of ``objective . x`` subject to linear constraints and variable bounds.

    ``bounds[j]`` is a ``(lower, upper)`` pair where ``None`` means unbounded on
    that side.  When ``bounds`` is omitted every variable is non-negative.
    """

    objective: Sequence
    sense: str = "min"
    constraints: list[Constraint] = field(default_factory=list)
    bounds: list[tuple] | None = None

    def __post_init__(self):
        self.objective = tuple(self.objective)
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.bounds is None:
            self.bounds = [(0, None)] * len(self.objective)
        else:
            self.bounds = [tuple(b) for b in self.bounds]
        self.constraints = [self._check(c) for c in self.constraints]
        if len(self.bounds) != self.n_vars:
            raise ValueError(f"{len(self.bounds)} bounds for {self.n_vars} variables")

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def _check(self, con: Constraint) -> Constraint:
        rel = _RELATIONS.get(con.relation)
        if rel is None:
            raise ValueError(f"unknown relation {con.relation!r}")
        if len(con.coeffs) != self.n_vars:
            raise ValueError(f"constraint has {len(con.coeffs)} coefficients, objective has {self.n_vars}")
        return Constraint(tuple(con.coeffs), rel, con.rhs)

    def add(self, coeffs: Sequence, relation: str, rhs) -> None:
        self.constraints.append(self._check(Constraint(tuple(coeffs), relation, rhs)))


@dataclass(frozen=True)
class LPSolution:
    """Outcome of :func:`solve`.

    ``dual_certificate`` holds one multiplier per user constraint, oriented so
    that ``dual_value`` (the dual objective, including variable-bound terms)
    equals ``value`` at an optimum.
    """

    status: Status
    value: object = None
    primal: tuple | None = None
    dual_certificate: tuple | None = None
    dual_value: object = None
    arithmetic: str = "float"
    pivots: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def format_lp(lp: LinearProgram) -> str:
    """Plain-text listing for debugging; not a stable interchange format."""

    def term(c, j):
        return f"{c}*x{j}"

    lines = [f"{lp.sense} " + " + ".join(term(c, j) for j, c in enumerate(lp.objective) if c)]
    for con in lp.constraints:
        lhs = " + ".join(term(c, j) for j, c in enumerate(con.coeffs) if c) or "0"
        lines.append(f"  {lhs} {con.relation} {con.rhs}")
    for j, (lo, hi) in enumerate(lp.bounds):
        if (lo, hi) != (0, None):
            lines.append(f"  {'-inf' if lo is None else lo} <= x{j} <= {'inf' if hi is None else hi}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# standard form


@dataclass
class _StandardForm:
    """``min c.xs  s.t.  A xs = b, xs >= 0`` with ``x = T xs + offset``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    T: np.ndarray
    offset: np.ndarray
    c_orig: np.ndarray
    row_sign: np.ndarray
    n_user_rows: int
    basis0: list
    n_art: int
    exact: bool


def _convert(values, exact: bool):
    if exact:
        return np.array([to_rational(v) for v in values], dtype=object)
    return np.array([float(v) for v in values], dtype=float)


def _standard_form(lp: LinearProgram, exact: bool) -> _StandardForm:
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    dtype = object if exact else float
    n = lp.n_vars
    num = (lambda v: to_rational(v)) if exact else float

    # variable substitution x = T xs + offset, plus upper-bound rows
    t_cols, offset, bound_rows = [], [zero] * n, []
    for j, (lo, hi) in enumerate(lp.bounds):
        col = [zero] * n
        if lo is not None:
            col[j] = one
            offset[j] = num(lo)
            t_cols.append(col)
            if hi is not None:
                if num(hi) < num(lo):
                    raise ValueError(f"variable {j} has lower bound above upper bound")
                bound_rows.append((len(t_cols) - 1, num(hi) - num(lo)))
        elif hi is not None:
            col[j] = -one
            offset[j] = num(hi)
            t_cols.append(col)
        else:
            col[j] = one
            t_cols.append(col)
            neg = [zero] * n
            neg[j] = -one
            t_cols.append(neg)
    T = np.array(t_cols, dtype=dtype).T.reshape(n, len(t_cols))
    offset = np.array(offset, dtype=dtype)
    ns = T.shape[1]

    c_orig = _convert(lp.objective, exact)
    c_int = c_orig if lp.sense == "min" else -c_orig

    rows, rels, rhs = [], [], []
    for con in lp.constraints:
        a = _convert(con.coeffs, exact)
        rows.append(a.dot(T) if ns else np.zeros(0, dtype=dtype))
        rels.append(con.relation)
        rhs.append(num(con.rhs) - a.dot(offset))
    n_user = len(rows)
    for k, ub in bound_rows:
        r = np.array([zero] * ns, dtype=dtype)
        r[k] = one
        rows.append(r)
        rels.append(LE)
        rhs.append(ub)
    m = len(rows)

    n_slack = sum(1 for r in rels if r != EQ)
    A = np.array([[zero] * (ns + n_slack) for _ in range(m)], dtype=dtype).reshape(m, ns + n_slack)
    b = np.array(rhs, dtype=dtype).reshape(m)
    slack_of = [None] * m
    s = ns
    for i, (r, rel) in enumerate(zip(rows, rels)):
        A[i, :ns] = r
        if rel != EQ:
            A[i, s] = one if rel == LE else -one
            slack_of[i] = s
            s += 1
    row_sign = np.array([one] * m, dtype=dtype).reshape(m)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            row_sign[i] = -one

    basis, art_rows = [], []
    for i in range(m):
        k = slack_of[i]
        if k is not None and A[i, k] == one:
            basis.append(k)
        else:
            basis.append(None)
            art_rows.append(i)
    N = A.shape[1]
    if art_rows:
        art = np.array([[zero] * len(art_rows) for _ in range(m)], dtype=dtype).reshape(m, len(art_rows))
        for a_idx, i in enumerate(art_rows):
            art[i, a_idx] = one
            basis[i] = N + a_idx
        A = np.hstack([A, art])
    c = np.array([zero] * A.shape[1], dtype=dtype)
    c[:ns] = c_int.dot(T) if n else c[:ns]
    return _StandardForm(A, b, c, T, offset, c_int, row_sign, n_user, basis, len(art_rows), exact)


def _pow2(x: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(x)))


def _equilibrate(A: np.ndarray):
    """Power-of-two row then column factors ``r, s`` bringing each max-norm to about one."""
    absA = np.abs(A)
    rmax = absA.max(axis=1, initial=0.0)
    r = np.where(rmax > 0, 1.0 / _pow2(np.where(rmax > 0, rmax, 1.0)), 1.0)
    cmax = (absA * r[:, None]).max(axis=0, initial=0.0)
    s = np.where(cmax > 0, 1.0 / _pow2(np.where(cmax > 0, cmax, 1.0)), 1.0)
    return r, s


def _exact_inverse(B: np.ndarray) -> np.ndarray | None:
    """Gauss-Jordan inverse over the rationals; ``None`` when singular."""
    m = B.shape[0]
    M = [list(row) + [Fraction(int(i == k)) for k in range(m)] for i, row in enumerate(B)]
    for col in range(m):
        piv = next((i for i in range(col, m) if M[i][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        prow = [v * inv for v in M[col]]
        M[col] = prow
        nzp = [k for k, v in enumerate(prow) if v]
        for i in range(m):
            f = M[i][col]
            if i != col and f:
                row = M[i]
                for k in nzp:
                    row[k] -= f * prow[k]
    return np.array([row[m:] for row in M], dtype=object)


# ---------------------------------------------------------------------------
# simplex core


class _Simplex:
    """Revised simplex state on ``min c.x, A x = b, x >= 0`` (already scaled).

    Exact mode updates the basis inverse in place with rational row
    operations.  Float mode refactors the basis every pivot (instances are
    small) and applies one step of iterative refinement to each solve, which
    keeps rounding from accumulating across long degenerate runs.
    """

    def __init__(self, A, b, basis, exact, max_pivots, Binv=None, feas_tol=FEAS_TOL, opt_tol=OPT_TOL):
        self.A, self.b = A, b
        self.m, self.N = A.shape
        self.basis = list(basis)
        self.exact = exact
        self.max_pivots = max_pivots
        self.pivots = 0
        self.feas_tol = 0 if exact else feas_tol
        self.ratio_tol = 0 if exact else RATIO_TOL
        self.opt_tol = 0 if exact else opt_tol
        if Binv is None:
            self.refactor()
        else:
            self.Binv = Binv
            self.xB = Binv.dot(b)

    def refactor(self):
        B = self.A[:, self.basis]
        if self.exact:
            Binv = _exact_inverse(B)
            if Binv is None:
                raise np.linalg.LinAlgError("singular basis")
            self.Binv = Binv
            self.xB = Binv.dot(self.b)
        else:
            self.B = B
            self.B_ext = B.astype(np.longdouble)
            self.Binv = np.linalg.inv(B)
            xB = self._refined(self.b)
            # drift below zero within tolerance is rounding, not infeasibility
            xB[(xB < 0) & (xB > -10 * self.feas_tol)] = 0.0
            self.xB = xB

    def _refined(self, rhs):
        # residuals in extended precision; a float64 residual stalls at cond(B) * eps
        x = self.Binv @ rhs
        for _ in range(REFINE_STEPS):
            res = np.asarray(rhs, dtype=np.longdouble) - self.B_ext @ x.astype(np.longdouble)
            x = x + self.Binv @ res.astype(float)
        return x

    def duals(self, c):
        cb = c[self.basis]
        if self.exact:
            return cb.dot(self.Binv)
        y = cb @ self.Binv
        for _ in range(REFINE_STEPS):
            res = np.asarray(cb, dtype=np.longdouble) - y.astype(np.longdouble) @ self.B_ext
            y = y + res.astype(float) @ self.Binv
        return y

    def _price(self, red, eligible, stalled: bool):
        """Entering column: most negative reduced cost, or smallest index while degenerate pivots persist."""
        idx = np.flatnonzero(eligible)
        if not len(idx):
            return None
        if stalled:
            return int(idx[0])
        vals = red[idx]
        return int(idx[min(range(len(idx)), key=lambda k: vals[k])])

    def run(self, c, allowed):
        """Pivot until optimal or unbounded; ``allowed`` masks columns that may enter."""
        rejected: set[int] = set()
        visited: set[tuple] = set()
        opt_tol = self.opt_tol
        degenerate = 0
        while True:
            if not self.exact:
                key = tuple(sorted(self.basis))
                if key in visited:
                    # a repeated basis means the pricing threshold sits below rounding noise
                    opt_tol = min(10 * opt_tol, UNBOUNDED_TOL)
                    visited.clear()
                visited.add(key)
            y = self.duals(c)
            red = c - y.dot(self.A)
            cand = allowed.copy()
            cand[self.basis] = False
            stalled = degenerate >= DEGENERATE_LIMIT
            if self.exact:
                eligible = cand & np.array([v < 0 for v in red], dtype=bool)
                q = self._price(red, eligible, stalled)
                if q is None:
                    return Status.OPTIMAL
                u = self.Binv.dot(self.A[:, q])
                r = self._ratio_test(u)
                if r is None:
                    return Status.UNBOUNDED
            else:
                eligible = cand & (red < -opt_tol)
                if rejected:
                    eligible[list(rejected)] = False
                q = self._price(red, eligible, stalled)
                if q is None:
                    return Status.OPTIMAL
                u = self._refined(self.A[:, q])
                r = self._harris_ratio_test(u)
                if r is None and red[q] < -UNBOUNDED_TOL:
                    return Status.UNBOUNDED
                if r is None or r < 0:
                    # only numerically meaningless pivots available for this column
                    rejected.add(q)
                    continue
            theta = max(self.xB[r], 0 * self.xB[r]) / u[r]
            if self.pivot(r, q, u, theta):
                rejected.clear()
                degenerate = degenerate + 1 if theta <= self.feas_tol else 0
            else:
                rejected.add(q)

    def cleanup(self, c, allowed, max_pivots: int = 100) -> bool:
        """Dual simplex pivots that remove slightly negative basic values left by the relaxed ratio test.

        Reduced costs stay non-negative (up to rounding), so optimality is
        kept while primal feasibility becomes exact.  Returns ``False`` and
        restores the starting basis when no clean basis is reached.
        """
        start = list(self.basis)
        tol = CLEAN_TOL * max(1.0, float(np.max(np.abs(self.b), initial=0.0)))
        for _ in range(max_pivots):
            x = self._refined(self.b)
            r = int(np.argmin(x))
            if x[r] >= -tol:
                return True
            red = np.maximum(c - self.duals(c) @ self.A, 0.0)
            alpha = self.Binv[r] @ self.A
            cand = allowed & (alpha < -PIVOT_TOL * max(1.0, float(np.max(np.abs(alpha)))))
            cand[self.basis] = False
            idx = np.flatnonzero(cand)
            if not len(idx):
                break
            ratios = red[idx] / -alpha[idx]
            best = ratios.min()
            near = idx[ratios <= best + 1e-14]
            q = int(near[np.argmax(-alpha[near])])
            if not self.pivot(r, q, self._refined(self.A[:, q]), 0.0):
                break
        self.basis = start
        self.refactor()
        return False

    def _ratio_test(self, u):
        """Minimum ratio, ties broken by smallest basic index."""
        rows = [i for i in range(self.m) if u[i] > 0]
        if not rows:
            return None
        ratios = {i: max(self.xB[i], 0 * self.xB[i]) / u[i] for i in rows}
        theta = min(ratios.values())
        return min((i for i in rows if ratios[i] == theta), key=lambda i: self.basis[i])

    def _harris_ratio_test(self, u):
        """Two-pass ratio test: relax bounds by the feasibility tolerance, then take the largest pivot.

        Returns ``None`` for a direction of unboundedness and ``-1`` when the
        only positive entries are rounding noise relative to the column.
        """
        umax = float(np.max(np.abs(u)))
        if not np.any(u > PIVOT_TOL * 1e-3 * max(1.0, umax)):
            return None
        rows = np.flatnonzero(u > PIVOT_TOL * max(1.0, umax))
        if not len(rows):
            return -1
        xb = np.maximum(self.xB[rows], 0.0)
        relaxed = np.min((xb + self.ratio_tol) / u[rows])
        ok = rows[xb / u[rows] <= relaxed]
        best = np.max(u[ok])
        ok = ok[u[ok] >= best * (1 - 1e-12)]
        return int(min(ok, key=lambda i: self.basis[i]))

    def pivot(self, r, q, u, theta) -> bool:
        """Swap column ``q`` into row ``r``; float mode returns ``False`` and undoes a singular swap."""
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise SolverStalled(f"solver stalled after {self.max_pivots} pivots")
        old = self.basis[r]
        self.basis[r] = q
        if not self.exact:
            try:
                self.refactor()
            except np.linalg.LinAlgError:
                self.basis[r] = old
                self.refactor()
                return False
            if not np.all(np.isfinite(self.xB)) or np.max(np.abs(self.B @ self.xB - self.b)) > 1e-6 * (1 + np.max(np.abs(self.b))):
                self.basis[r] = old
                self.refactor()
                return False
            return True
        self.xB = self.xB - theta * u
        self.xB[r] = theta
        prow = self.Binv[r] / u[r]
        self.Binv = self.Binv - np.outer(u, prow)
        self.Binv[r] = prow
        return True


def _two_phase(sf: _StandardForm, A, b, c, exact, max_pivots, start=None):
    """Returns ``(status, simplex)``; ``start`` is an optional ``(basis, Binv)`` warm start."""
    N = A.shape[1]
    first_art = N - sf.n_art
    art = np.zeros(N, dtype=bool)
    art[first_art:] = True
    if start is not None:
        sx = _Simplex(A, b, start[0], exact, max_pivots, Binv=start[1])
    else:
        sx = _Simplex(A, b, sf.basis0, exact, max_pivots)
        if sf.n_art:
            zero = Fraction(0) if exact else 0.0
            c1 = np.array([zero] * N, dtype=A.dtype)
            c1[first_art:] = 1
            sx.run(c1, np.ones(N, dtype=bool))
            infeas = sum(sx.xB[i] for i, k in enumerate(sx.basis) if k >= first_art)
            tol = 0 if exact else FEAS_TOL * max(1.0, float(np.max(np.abs(b), initial=0.0)))
            if infeas > tol:
                return Status.INFEASIBLE, sx
            _drive_out_artificials(sx, first_art)
    status = sx.run(c, ~art)
    if status is Status.OPTIMAL and not exact:
        for _ in range(3):
            before = sx.pivots
            if not sx.cleanup(c, ~art) or sx.pivots == before:
                break
            status = sx.run(c, ~art)
            if status is not Status.OPTIMAL:
                break
    return status, sx


def _drive_out_artificials(sx: _Simplex, first_art: int) -> None:
    for r in range(sx.m):
        if sx.basis[r] < first_art:
            continue
        row = sx.Binv[r].dot(sx.A[:, :first_art])
        mags = [abs(v) for v in row]
        tol = 0 if sx.exact else PIVOT_TOL * max(1.0, float(max(mags, default=0.0)))
        cand = [j for j in range(first_art) if mags[j] > tol and j not in sx.basis]
        if not cand:
            continue  # redundant row: artificial stays basic at zero
        q = cand[0] if sx.exact else max(cand, key=lambda j: mags[j])
        u = sx.Binv.dot(sx.A[:, q]) if sx.exact else sx._refined(sx.A[:, q])
        sx.pivot(r, q, u, 0 * u[r])


def _extract(sf: _StandardForm, sx: _Simplex, status, scale=None, arithmetic="float") -> LPSolution:
    if status is not Status.OPTIMAL:
        return LPSolution(status, arithmetic=arithmetic, pivots=sx.pivots)
    N = sx.N
    zero = Fraction(0) if sf.exact else 0.0
    xs = np.array([zero] * N, dtype=sx.A.dtype)
    for i, k in enumerate(sx.basis):
        xs[k] = sx.xB[i]
    c_scaled = sf.c if scale is None else sf.c * scale[1]
    y = sx.duals(c_scaled)
    if scale is not None:
        xs = xs * scale[1]
        y = y * scale[0]
    ns = sf.T.shape[1]
    x = sf.T.dot(xs[:ns]) + sf.offset if sf.T.size else sf.offset.copy()
    value = sf.c_orig.dot(x) if len(x) else zero
    dual_value = y.dot(sf.b) + sf.c_orig.dot(sf.offset) if len(x) else zero
    duals = y[: sf.n_user_rows] * sf.row_sign[: sf.n_user_rows]
    if not sf.exact:
        value, dual_value = float(value), float(dual_value)
        x, duals = [float(v) for v in x], [float(v) for v in duals]
    return LPSolution(
        Status.OPTIMAL,
        value=value,
        primal=tuple(x),
        dual_certificate=tuple(duals),
        dual_value=dual_value,
        arithmetic=arithmetic,
        pivots=sx.pivots,
    )


def _negate_for_max(sol: LPSolution, sense: str) -> LPSolution:
    if sense == "min" or not sol.is_optimal:
        return sol
    return LPSolution(
        sol.status,
        value=-sol.value,
        primal=sol.primal,
        dual_certificate=tuple(-v for v in sol.dual_certificate),
        dual_value=-sol.dual_value,
        arithmetic=sol.arithmetic,
        pivots=sol.pivots,
    )


def _solve_float(sf: _StandardForm, max_pivots: int):
    r, s = _equilibrate(sf.A)
    A = sf.A * r[:, None] * s[None, :]
    b = sf.b * r
    c = sf.c * s
    cmax = np.max(np.abs(c), initial=0.0)
    if cmax > 0:
        c = c * _pow2(np.array([1.0 / cmax]))[0]
    status, sx = _two_phase(sf, A, b, c, False, max_pivots)
    return status, sx, (r, s)


def solve(lp: LinearProgram, arithmetic: str = "float", *, max_pivots: int | None = None, warm_start: bool = True) -> LPSolution:
    """Solve ``lp`` with ``arithmetic`` in ``{"float", "rational"}``.

    Infeasible or unbounded programs are reported through ``status``.  A float
    solve that exceeds ``max_pivots`` raises :class:`SolverStalled`.
    """
    if arithmetic not in ("float", "rational"):
        raise ValueError(f"unknown arithmetic {arithmetic!r}")
    if arithmetic == "float":
        sf = _standard_form(lp, exact=False)
        if max_pivots is None:
            max_pivots = _default_pivot_budget(sf)
        status, sx, scale = _solve_float(sf, max_pivots)
        return _negate_for_max(_extract(sf, sx, status, scale, "float"), lp.sense)

    sf = _standard_form(lp, exact=True)
    if max_pivots is None:
        max_pivots = _default_pivot_budget(sf)
    start = None
    if warm_start:
        start = _float_warm_start(lp, sf, max_pivots)
    status, sx = None, None
    if start is not None:
        status, sx = _two_phase(sf, sf.A, sf.b, sf.c, True, 10 * max_pivots, start=start)
    else:
        status, sx = _two_phase(sf, sf.A, sf.b, sf.c, True, 10 * max_pivots)
    return _negate_for_max(_extract(sf, sx, status, None, "rational"), lp.sense)


def max_violation(lp: LinearProgram, primal: Sequence) -> float:
    """Largest violation of any constraint or bound by ``primal``, evaluated in double precision."""
    x = np.array([float(v) for v in primal])
    worst = 0.0
    for con in lp.constraints:
        lhs = float(np.dot([float(a) for a in con.coeffs], x))
        rhs = float(con.rhs)
        if con.relation == LE:
            worst = max(worst, lhs - rhs)
        elif con.relation == GE:
            worst = max(worst, rhs - lhs)
        else:
            worst = max(worst, abs(lhs - rhs))
    for v, (lo, hi) in zip(x, lp.bounds):
        if lo is not None:
            worst = max(worst, float(lo) - v)
        if hi is not None:
            worst = max(worst, v - float(hi))
    return worst


def _default_pivot_budget(sf: _StandardForm) -> int:
    m, N = sf.A.shape
    return 20 * (m + N) + 1000


def _float_warm_start(lp: LinearProgram, sf: _StandardForm, max_pivots: int):
    """Exact ``(basis, Binv)`` from the float optimum, or ``None`` when unusable."""
    sff = _standard_form(lp, exact=False)
    if sff.A.shape != sf.A.shape:
        return None
    try:
        status, sx, _ = _solve_float(sff, max_pivots)
    except (SolverStalled, np.linalg.LinAlgError):
        return None
    if status is not Status.OPTIMAL:
        return None
    first_art = sf.A.shape[1] - sf.n_art
    if any(k >= first_art for k in sx.basis):
        return None
    Binv = _exact_inverse(sf.A[:, sx.basis])
    if Binv is None:
        return None
    if any(v < 0 for v in Binv.dot(sf.b)):
        return None
    return sx.basis, Binv

