"""Linear programs in the form ``min c.x  s.t.  A x = b,  G x <= h,  x >= 0``
and a two-phase revised primal simplex solver.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.linalg as la

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
BLAND_AFTER = 50


def _as_matrix(m, ncols: int) -> sp.csr_matrix:
    if m is None:
        return sp.csr_matrix((0, ncols))
    return sp.csr_matrix(m, dtype=float)


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    A_eq: sp.csr_matrix | None = None
    b_eq: np.ndarray | None = None
    A_ub: sp.csr_matrix | None = None
    b_ub: np.ndarray | None = None
    names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = len(self.c)
        self.A_eq = _as_matrix(self.A_eq, n)
        self.A_ub = _as_matrix(self.A_ub, n)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float)
        self.b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float)
        if self.A_eq.shape != (len(self.b_eq), n) or self.A_ub.shape != (len(self.b_ub), n):
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(self.b_eq)) and np.all(np.isfinite(self.b_ub))):
            raise ValueError("right-hand sides must be finite")
        if not self.names:
            self.names = [f"x{j}" for j in range(n)]

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_constraints(self) -> int:
        return len(self.b_eq) + len(self.b_ub)

    def residuals(self, x: np.ndarray) -> tuple[float, float, float]:
        """Max equality violation, max inequality violation, most negative entry."""
        eq = float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0))
        ub = float(np.max(self.A_ub @ x - self.b_ub, initial=0.0))
        return eq, max(ub, 0.0), float(min(x.min(initial=0.0), 0.0))

    def dump(self) -> str:
        """Human-readable listing for debugging."""

        def expr(row) -> str:
            row = row.tocoo()
            parts = [f"{v:+.12g} {self.names[j]}" for j, v in sorted(zip(row.col, row.data))]
            return " ".join(parts) if parts else "0"

        out = ["minimize", "  " + expr(sp.csr_matrix(self.c)), "subject to"]
        rn = self.row_names
        for i in range(len(self.b_eq)):
            name = rn[i] if i < len(rn) else f"e{i}"
            out.append(f"  {name}: {expr(self.A_eq[i])} = {self.b_eq[i]:.12g}")
        off = len(self.b_eq)
        for i in range(len(self.b_ub)):
            name = rn[off + i] if off + i < len(rn) else f"u{i}"
            out.append(f"  {name}: {expr(self.A_ub[i])} <= {self.b_ub[i]:.12g}")
        out.append("bounds")
        out.append("  all variables >= 0")
        return "\n".join(out) + "\n"


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    iterations: int
    time: float

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


SUSPECT_PIVOT = 1e-6
REFACTOR_EVERY = 64
SINGULAR_TOL = 1e-11
# pivots this small relative to their column usually make the basis near singular
PIVOT_REL = 1e-7
HARRIS_TOL = 1e-10


class _Basis:
    """LU factors of the basis matrix plus product-form updates since then.

    ``unit[i]`` names a column equal to the unit vector of row ``i``; it is
    used to swap out dependent columns when a factorization is singular.
    """

    def __init__(self, A: sp.csc_matrix, basis: np.ndarray, unit: np.ndarray):
        self.A = A
        self.basis = basis
        self.unit = unit
        self.repairs = 0
        self.factor()

    def factor(self) -> None:
        B = self.A[:, self.basis].toarray()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            self.lu = la.lu_factor(B, check_finite=False)
            d = np.abs(np.diag(self.lu[0]))
            if d.min(initial=1.0) <= SINGULAR_TOL * max(d.max(initial=1.0), 1.0):
                self._repair(B)
                self.lu = la.lu_factor(self.A[:, self.basis].toarray(), check_finite=False)
        self.etas: list[tuple[int, np.ndarray]] = []

    def _repair(self, B: np.ndarray) -> None:
        """Replace dependent basic columns by unit columns of uncovered rows."""
        _, R, P = la.qr(B, mode="economic", pivoting=True)
        r = np.abs(np.diag(R))
        rank = int(np.sum(r > SINGULAR_TOL * max(r[0], 1.0))) if len(r) else 0
        keep, dep = P[:rank], P[rank:]
        perm, _, _ = la.lu(B[:, keep])
        covered = np.argmax(perm[:, :rank], axis=0)
        free = np.setdiff1d(np.arange(B.shape[0]), covered)
        self.basis[dep] = self.unit[free]
        self.repairs += 1

    def ftran(self, v: np.ndarray) -> np.ndarray:
        """Solve ``B x = v``."""
        x = la.lu_solve(self.lu, v, check_finite=False)
        for p, w in self.etas:
            xp = x[p] / w[p]
            x -= xp * w
            x[p] = xp
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        """Solve ``B^T y = v``."""
        u = v.copy()
        for p, w in reversed(self.etas):
            u[p] = (u[p] - (w @ u - w[p] * u[p])) / w[p]
        return la.lu_solve(self.lu, u, trans=1, check_finite=False)

    def replace(self, p: int, q: int, w: np.ndarray) -> None:
        self.basis[p] = q
        self.etas.append((p, w))
        if len(self.etas) >= REFACTOR_EVERY:
            self.factor()


class _Simplex:
    def __init__(self, A: sp.csc_matrix, b: np.ndarray, basis: np.ndarray, unit: np.ndarray,
                 tol: float, max_iter: int):
        self.A = A
        self.AT = A.T.tocsr()
        self.b = b
        self.tol = tol
        self.max_iter = max_iter
        self.B = _Basis(A, basis, unit)
        self.iterations = 0
        self.xb = self.B.ftran(b)

    @property
    def basis(self) -> np.ndarray:
        return self.B.basis

    def refresh(self) -> None:
        self.B.factor()
        xb = self.B.ftran(self.b)
        self.xb = np.where(np.abs(xb) < 1e-12, 0.0, xb)

    def run(self, cost: np.ndarray, allowed: np.ndarray, frozen: np.ndarray, drop: np.ndarray | None = None) -> str:
        """Minimize ``cost``; ``frozen`` variables may stay basic but only at level zero."""
        n_total = self.A.shape[1]
        is_basic = np.zeros(n_total, dtype=bool)
        degenerate_run = 0
        rejected = np.zeros(n_total, dtype=bool)
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            is_basic[:] = False
            is_basic[self.basis] = True
            y = self.B.btran(cost[self.basis])
            d = cost - self.AT @ y
            cand = allowed & ~is_basic & ~rejected & (d < -self.tol)
            if not cand.any():
                if self.B.etas:
                    # confirm optimality on fresh factors
                    self.refresh()
                    is_basic[:] = False
                    is_basic[self.basis] = True
                    y = self.B.btran(cost[self.basis])
                    d = cost - self.AT @ y
                    cand = allowed & ~is_basic & ~rejected & (d < -self.tol)
                if not cand.any():
                    return OPTIMAL
            bland = degenerate_run >= BLAND_AFTER
            q = int(np.argmax(cand)) if bland else int(np.argmin(np.where(cand, d, np.inf)))
            w = self.B.ftran(self.A[:, q].toarray().ravel())
            p = self._ratio(w, frozen, bland)
            if (p < 0 or abs(w[p]) < SUSPECT_PIVOT) and self.B.etas:
                # recheck on fresh factors before trusting a tiny pivot or an open ray
                self.refresh()
                continue
            if p < 0:
                return UNBOUNDED
            if abs(w[p]) < SUSPECT_PIVOT:
                # a pivot this small is likely rounding noise; try another column
                rejected[q] = True
                continue
            rejected[:] = False
            theta = max(self.xb[p], 0.0) / w[p] if w[p] > 0 else 0.0
            degenerate_run = degenerate_run + 1 if theta <= self.tol else 0
            leaving = self.basis[p]
            self.xb -= theta * w
            self.xb[p] = theta
            self.xb[np.abs(self.xb) < 1e-13] = 0.0
            self.B.replace(p, q, w)
            if not self.B.etas:
                self.xb = self.B.ftran(self.b)
            self.iterations += 1
            if drop is not None and drop[leaving]:
                # artificial variables never re-enter once they leave
                allowed[leaving] = False

    def _ratio(self, w: np.ndarray, frozen: np.ndarray, bland: bool) -> int:
        """Harris two-pass ratio test; frozen basics leave at once if touched."""
        fz = frozen[self.basis] & (np.abs(w) > self.tol)
        if fz.any():
            rows = np.flatnonzero(fz)
            return int(rows[np.argmax(np.abs(w[rows]))])
        ok = w > max(self.tol, PIVOT_REL * np.abs(w).max(initial=0.0))
        if not ok.any():
            return -1
        xb = np.maximum(self.xb, 0.0)
        rows = np.flatnonzero(ok)
        wr = w[rows]
        if bland:
            ratio = xb[rows] / wr
            best = ratio.min()
            ties = rows[ratio <= best + self.tol * max(1.0, best)]
            return int(ties[np.argmin(self.basis[ties])])
        bound = ((xb[rows] + HARRIS_TOL) / wr).min()
        inside = rows[xb[rows] / wr <= bound]
        return int(inside[np.argmax(w[inside])])


def _standard_form(lp: LinearProgram):
    n = lp.n_vars
    me, mu = len(lp.b_eq), len(lp.b_ub)
    A = sp.vstack([sp.hstack([lp.A_eq, sp.csr_matrix((me, mu))]),
                   sp.hstack([lp.A_ub, sp.eye(mu)])]).tocsr()
    b = np.concatenate([lp.b_eq, lp.b_ub])
    flip = b < 0
    A = (sp.diags(np.where(flip, -1.0, 1.0)) @ A).tocsr()
    return A, np.abs(b), flip


def simplex(lp: LinearProgram, tol: float = PIVOT_TOL, max_iter: int | None = None) -> LpSolution:
    """Two-phase revised primal simplex with slack and artificial columns."""
    t0 = time.perf_counter()
    n = lp.n_vars
    me, mu = len(lp.b_eq), len(lp.b_ub)
    m = me + mu
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    A, b, flip = _standard_form(lp)

    # rows whose slack has coefficient +1 can start with the slack basic
    basis = np.full(m, -1, dtype=np.int64)
    for i in range(me, m):
        if not flip[i]:
            basis[i] = n + (i - me)
    art_rows = np.flatnonzero(basis < 0)
    na = len(art_rows)
    width = n + mu + na
    basis[art_rows] = n + mu + np.arange(na)
    A = sp.hstack([A, sp.csr_matrix((np.ones(na), (art_rows, np.arange(na))), shape=(m, na))]).tocsc()
    is_art = np.zeros(width, dtype=bool)
    is_art[n + mu:] = True

    if m == 0:
        if np.any(lp.c < -tol):
            return LpSolution(UNBOUNDED, np.zeros(n), float("nan"), 0, time.perf_counter() - t0)
        return LpSolution(OPTIMAL, np.zeros(n), 0.0, 0, time.perf_counter() - t0)

    unit = basis.copy()
    sx = _Simplex(A, b, basis, unit, tol, max_iter)
    allowed = np.ones(width, dtype=bool)
    no_frozen = np.zeros(width, dtype=bool)
    if na:
        # phase 1: minimize the sum of artificials
        status = sx.run(is_art.astype(float), allowed, no_frozen, drop=is_art)
        if status == ITERATION_LIMIT:
            return _result(lp, sx, status, t0)
        sx.refresh()
        infeas = float(np.sum(sx.xb[is_art[sx.basis]]))
        if infeas > FEAS_TOL * max(1.0, b.max(initial=0.0)):
            return _result(lp, sx, INFEASIBLE, t0)
        allowed[n + mu:] = False

    cost = np.zeros(width)
    cost[:n] = lp.c
    # artificials left in the basis sit on redundant rows and must stay at zero
    status = sx.run(cost, allowed, is_art)
    return _result(lp, sx, status, t0)


def _result(lp: LinearProgram, sx: _Simplex, status: str, t0: float) -> LpSolution:
    n = lp.n_vars
    z = np.zeros(sx.A.shape[1])
    if status == OPTIMAL:
        sx.refresh()
    z[sx.basis] = sx.xb
    x = _clean(z[:n])
    obj = float(lp.c @ x) if status == OPTIMAL else float("nan")
    return LpSolution(status, x, obj, sx.iterations, time.perf_counter() - t0)


def _clean(x: np.ndarray) -> np.ndarray:
    x = np.where(np.abs(x) < 1e-12, 0.0, x)
    return np.where((x < 0) & (x > -1e-9), 0.0, x)


Solver = Callable[[LinearProgram], LpSolution]


def solve(lp: LinearProgram, tol: float = PIVOT_TOL, max_iter: int | None = None) -> LpSolution:
    return simplex(lp, tol=tol, max_iter=max_iter)
