"""Dense matrix helpers and a self-contained bounded-variable LP solver.

Matrices are plain float64 numpy arrays in row-major layout; no sparse
storage anywhere (largest systems here are a few thousand rows). The LP
solver is a two-phase primal simplex on the slack-augmented system with
per-variable bounds, so the rest of the package has no solver dependency.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "LpIterationError",
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "as_matrix",
    "as_vector",
    "box_support",
    "expm",
    "matmul",
    "solve_lp",
]


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce to a finite, 2-D float64 array, optionally checking its shape."""
    a = np.asarray(data, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if rows is not None and a.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {a.shape[0]}")
    if cols is not None and a.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got {a.shape[1]}")
    return a


def as_vector(data, size: int | None = None, allow_inf: bool = False) -> np.ndarray:
    """Coerce to a 1-D float64 array, optionally checking its length."""
    v = np.asarray(data, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got ndim={v.ndim}")
    if not allow_inf and not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    if allow_inf and np.any(np.isnan(v)):
        raise ValueError("vector entries must not be NaN")
    if size is not None and v.shape[0] != size:
        raise ValueError(f"expected length {size}, got {v.shape[0]}")
    return v


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul operands must be 2-D")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def box_support(coeffs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    """Maximum of coeffs . v over the box lo <= v <= hi.

    Returns +inf when a nonzero coefficient meets an infinite bound in the
    improving direction.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    with np.errstate(invalid="ignore"):
        terms = np.where(coeffs > 0.0, coeffs * hi, coeffs * lo)
    terms = np.where(coeffs == 0.0, 0.0, terms)
    return float(np.sum(terms))


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Taylor series.

    Adequate for the small, well-scaled matrices used here (the series is
    run to machine precision after scaling the 1-norm below 1/2).
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("expm requires a square matrix")
    n = a.shape[0]
    norm = float(np.linalg.norm(a, 1))
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    t = a / (2.0 ** squarings)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ t / k
        result = result + term
        if np.linalg.norm(term, 1) < 1e-18 * np.linalg.norm(result, 1):
            break
    for _ in range(squarings):
        result = result @ result
    return result


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpIterationError(RuntimeError):
    """Simplex failed to converge within the iteration budget."""


@dataclass(frozen=True)
class LpProblem:
    """maximize objective . x  subject to  a x <= b,  lo <= x <= hi."""

    objective: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        c = as_vector(self.objective)
        n = c.shape[0]
        a = as_matrix(self.a, cols=n) if np.size(self.a) else np.zeros((0, n))
        b = as_vector(self.b, size=a.shape[0])
        lo = as_vector(self.lo, size=n, allow_inf=True)
        hi = as_vector(self.hi, size=n, allow_inf=True)
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    value: float
    point: np.ndarray
    iterations: int


# Nonbasic status codes used by the simplex core.
_BASIC, _AT_LO, _AT_HI, _FREE = 0, 1, 2, 3

_PIV_TOL = 1e-9
_STALL_LIMIT = 200


class _Simplex:
    """Bounded-variable primal simplex over the slack-augmented equalities.

    Maintains the dense tableau T = Binv [A | I | A_art], the basic values,
    and an incrementally updated reduced-cost row. Dantzig pricing with a
    permanent-until-progress Bland fallback once the objective stalls.
    """

    def __init__(self, p: LpProblem, feas_tol: float, opt_tol: float, max_iter: int | None):
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        m, n = p.a.shape
        self.m, self.n = m, n
        self.max_iter = max_iter if max_iter is not None else 20000 + 60 * (m + n)
        self.iterations = 0

        # Structural variables then slacks; artificials are appended later.
        self.lo = np.concatenate([p.lo, np.zeros(m)])
        self.hi = np.concatenate([p.hi, np.full(m, np.inf)])
        self.T = np.hstack([p.a, np.eye(m)]) if m else np.zeros((0, n))
        self.b = p.b.copy()
        self.c_real = np.concatenate([p.objective, np.zeros(m)])

        self.stat = np.empty(n + m, dtype=np.int8)
        for j in range(n):
            if np.isfinite(self.lo[j]) and (not np.isfinite(self.hi[j]) or abs(self.lo[j]) <= abs(self.hi[j])):
                self.stat[j] = _AT_LO
            elif np.isfinite(self.hi[j]):
                self.stat[j] = _AT_HI
            else:
                self.stat[j] = _FREE
        self.stat[n:] = _BASIC
        self.basis = np.arange(n, n + m)

    def _nonbasic_values(self) -> np.ndarray:
        v = np.zeros(self.stat.shape[0])
        at_lo = self.stat == _AT_LO
        at_hi = self.stat == _AT_HI
        v[at_lo] = self.lo[at_lo]
        v[at_hi] = self.hi[at_hi]
        return v

    def _refresh(self):
        """Recompute basic values and reduced costs from scratch."""
        v = self._nonbasic_values()
        nonbasic = self.stat != _BASIC
        # T stays equal to Binv @ A_all, so the slack block of T is Binv
        # itself (the original slack columns were the identity). Basic values
        # follow from Binv b - T_N v_N.
        binv_b = self.T[:, self.n:self.n + self.m] @ self.b
        xb = binv_b - self.T[:, nonbasic] @ v[nonbasic]
        self.xb = xb
        cb = self.c[self.basis]
        self.r = self.c - cb @ self.T
        self.z = float(cb @ self.xb + self.c[nonbasic] @ v[nonbasic])

    def _extract(self) -> np.ndarray:
        v = self._nonbasic_values()
        v[self.basis] = self.xb
        return v

    def _iterate(self) -> str:
        """Run simplex pivots for the current objective until optimal.

        Returns 'optimal' or 'unbounded'. Raises LpIterationError past the
        iteration budget.
        """
        ntot = self.stat.shape[0]
        r_tol = _PIV_TOL * max(1.0, float(np.max(np.abs(self.c))) if ntot else 1.0)
        stall = 0
        bland = False
        last_z = self.z
        refresh_every = 500

        while True:
            if self.iterations >= self.max_iter:
                raise LpIterationError(
                    f"simplex exceeded {self.max_iter} iterations "
                    f"(m={self.m}, n={self.n}, z={self.z:.6g}, stalled={stall})")
            self.iterations += 1
            if self.iterations % refresh_every == 0:
                self._refresh()

            movable = (self.hi - self.lo) > 0.0
            elig = ((self.stat == _AT_LO) & movable & (self.r > r_tol)) | \
                   ((self.stat == _AT_HI) & movable & (self.r < -r_tol)) | \
                   ((self.stat == _FREE) & (np.abs(self.r) > r_tol))
            if not np.any(elig):
                return "optimal"

            if bland:
                j = int(np.argmax(elig))
            else:
                score = np.where(elig, np.abs(self.r), 0.0)
                j = int(np.argmax(score))
            sigma = 1.0 if (self.stat[j] == _AT_LO or (self.stat[j] == _FREE and self.r[j] > 0)) else -1.0

            y = self.T[:, j]
            step_dn = sigma * y  # positive entries push a basic variable down
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio_lo = np.where((step_dn > _PIV_TOL) & np.isfinite(lo_b),
                                    (self.xb - lo_b) / step_dn, np.inf)
                ratio_hi = np.where((step_dn < -_PIV_TOL) & np.isfinite(hi_b),
                                    (self.xb - hi_b) / step_dn, np.inf)
            ratios = np.minimum(np.maximum(ratio_lo, 0.0), np.maximum(ratio_hi, 0.0))
            t_basic = float(np.min(ratios)) if self.m else np.inf
            own_range = self.hi[j] - self.lo[j] if self.stat[j] != _FREE else np.inf

            if own_range <= t_basic:
                if not np.isfinite(own_range):
                    return "unbounded"
                # Bound flip: the entering variable crosses its own range.
                self.xb = self.xb - sigma * own_range * y
                self.z += self.r[j] * sigma * own_range
                self.stat[j] = _AT_HI if self.stat[j] == _AT_LO else _AT_LO
            else:
                if not np.isfinite(t_basic):
                    return "unbounded"
                near = ratios <= t_basic + 1e-12
                if bland:
                    cand = np.where(near)[0]
                    ir = int(cand[np.argmin(self.basis[cand])])
                else:
                    stab = np.where(near, np.abs(y), -1.0)
                    ir = int(np.argmax(stab))
                piv = self.T[ir, j]
                leaving = self.basis[ir]
                # Entering variable value after the move.
                if self.stat[j] == _AT_LO:
                    enter_val = self.lo[j] + t_basic
                elif self.stat[j] == _AT_HI:
                    enter_val = self.hi[j] - t_basic
                else:
                    enter_val = sigma * t_basic
                self.xb = self.xb - sigma * t_basic * y
                self.z += self.r[j] * sigma * t_basic
                # Leaving variable lands on the bound it hit.
                self.stat[leaving] = _AT_LO if step_dn[ir] > 0 else _AT_HI
                # Pivot row update.
                self.T[ir] = self.T[ir] / piv
                col = self.T[:, j].copy()
                col[ir] = 0.0
                self.T -= np.outer(col, self.T[ir])
                self.T[:, j] = 0.0
                self.T[ir, j] = 1.0
                self.r = self.r - self.r[j] * self.T[ir]
                self.r[j] = 0.0
                self.xb[ir] = enter_val
                self.basis[ir] = j
                self.stat[j] = _BASIC

            if self.z > last_z + 1e-12 * (1.0 + abs(last_z)):
                last_z = self.z
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True

    def solve(self) -> tuple[str, np.ndarray]:
        n, m = self.n, self.m
        v = self._nonbasic_values()
        s0 = self.b - self.T[:, :n] @ v[:n] if m else np.zeros(0)
        bad = np.where(s0 < -self.feas_tol)[0]

        if bad.size:
            # Phase 1: artificials on the violated rows, maximize -sum(art).
            # Each artificial enters its row with coefficient -1, so negate
            # those tableau rows to keep the basis block an identity.
            n_art = bad.size
            art_cols = np.zeros((m, n_art))
            for k, i in enumerate(bad):
                art_cols[i, k] = -1.0
            self.T = np.hstack([self.T, art_cols])
            self.T[bad] *= -1.0
            self.lo = np.concatenate([self.lo, np.zeros(n_art)])
            self.hi = np.concatenate([self.hi, np.full(n_art, np.inf)])
            self.stat = np.concatenate([self.stat, np.full(n_art, _BASIC, dtype=np.int8)])
            for k, i in enumerate(bad):
                self.stat[n + i] = _AT_LO  # displaced slack
                self.basis[i] = n + m + k
            self.c = np.concatenate([np.zeros(n + m), -np.ones(n_art)])
            self._refresh()
            outcome = self._iterate()
            if outcome != "optimal":
                raise LpIterationError("phase-1 simplex reported unbounded, which is impossible")
            self._refresh()
            scale = max(1.0, float(np.max(np.abs(self.b))) if m else 1.0)
            if self.z < -self.feas_tol * scale:
                return "infeasible", np.zeros(0)
            # Freeze artificials at zero and restore the real objective.
            self.lo[n + m:] = 0.0
            self.hi[n + m:] = 0.0
            self.c = np.concatenate([self.c_real, np.zeros(n_art)])
        else:
            self.c = self.c_real
            self.xb = s0

        self._refresh()
        outcome = self._iterate()
        if outcome == "unbounded":
            return "unbounded", np.zeros(0)
        self._refresh()
        return "optimal", self._extract()[:n]


def solve_lp(p: LpProblem, feas_tol: float = 1e-7, opt_tol: float = 1e-7,
             max_iter: int | None = None) -> LpSolution:
    """Solve the LP, returning one of Optimal / Infeasible / Unbounded.

    Optimal points satisfy every row and bound within feas_tol, and the
    value is within opt_tol of the true optimum on the problem scales used
    in this package. Non-convergence raises LpIterationError rather than
    returning a bogus status.
    """
    if feas_tol <= 0 or opt_tol <= 0:
        raise ValueError("tolerances must be positive")
    m, n = p.a.shape

    if m == 0:
        # Pure box problem: optimize each coordinate independently.
        c = p.objective
        point = np.where(c > 0, p.hi, np.where(c < 0, p.lo, np.where(np.isfinite(p.lo), p.lo, 0.0)))
        if np.any(~np.isfinite(point) & (c != 0)):
            return LpSolution(LpStatus.UNBOUNDED, np.inf, np.zeros(n), 0)
        point = np.where(np.isfinite(point), point, 0.0)
        return LpSolution(LpStatus.OPTIMAL, float(c @ point), point, 0)

    core = _Simplex(p, feas_tol, opt_tol, max_iter)
    status, point = core.solve()
    if status == "infeasible":
        return LpSolution(LpStatus.INFEASIBLE, -np.inf, np.zeros(n), core.iterations)
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, np.inf, np.zeros(n), core.iterations)
    point = np.clip(point, p.lo, p.hi)
    return LpSolution(LpStatus.OPTIMAL, float(p.objective @ point), point, core.iterations)
