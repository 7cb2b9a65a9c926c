"""Big-M MILP over scenario indicators and its branch-and-bound solver.

One binary per scenario (or per seed) guards the block of reach-avoid rows
for that scenario: F(G_x x0 + G_u U + phi_i) <= h + M (1 - z_i) 1. After
substituting the trajectory map, every block shares the same input
coefficients F G_u; only the right-hand side differs per scenario, and
partitioned problems tighten it further by the cell buffers.

The solver is best-bound branch-and-bound on the z variables over LP
relaxations. Relaxations are solved with lazy row activation: an LP over
the currently active subset of rows is a relaxation of the full LP, so
its value is always a valid bound, and rows violated at its solution are
activated until none remain. Objectives live on the lattice of multiples
of 1/K, so node bounds are floored to that lattice and incumbents are
compared in integer weight units, which makes pruning exact.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .linops import LpProblem, LpStatus, as_matrix, as_vector, solve_lp
from .partition import PartitionModel
from .scenarios import ScenarioSet
from .sets import InputBox
from .system import StackedSystem

__all__ = ["MilpProblem", "SolveResult", "build_full", "build_partitioned",
           "compute_bigM", "dump_problem", "solve_milp"]

_INT_TOL = 1e-6
_ACTIVATE_TOL = 1e-9


@dataclass(frozen=True)
class MilpProblem:
    """max sum_i (weight_counts[i]/weight_denom) z_i subject to, per binary i,
    g_rows U + big_m[i] z_i <= rhs[i] + big_m[i], U in the box, z binary."""

    g_rows: np.ndarray        # (L, n_cont) input coefficients F G_u
    rhs: np.ndarray           # (n_bin, L) per-binary right-hand sides
    big_m: np.ndarray         # (n_bin, L) per-row deactivation constants
    weight_counts: np.ndarray  # (n_bin,) integer objective numerators
    weight_denom: int          # shared denominator K
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self):
        g = as_matrix(self.g_rows)
        nb = np.asarray(self.weight_counts, dtype=np.int64)
        rhs = as_matrix(self.rhs, rows=nb.shape[0], cols=g.shape[0])
        big_m = as_matrix(self.big_m, rows=nb.shape[0], cols=g.shape[0])
        lo = as_vector(self.box_lo, size=g.shape[1])
        hi = as_vector(self.box_hi, size=g.shape[1])
        if np.any(lo > hi):
            raise ValueError("input box lower bound exceeds upper bound")
        if np.any(big_m <= 0.0):
            raise ValueError("big-M entries must be positive")
        if np.any(nb < 1):
            raise ValueError("objective counts must be positive integers")
        if int(nb.sum()) != int(self.weight_denom):
            raise ValueError("objective weights must sum to one")
        object.__setattr__(self, "g_rows", g)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "big_m", big_m)
        object.__setattr__(self, "weight_counts", nb)
        object.__setattr__(self, "weight_denom", int(self.weight_denom))
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)

    @property
    def n_continuous(self) -> int:
        return self.g_rows.shape[1]

    @property
    def n_binary(self) -> int:
        return self.weight_counts.shape[0]

    @property
    def n_rows(self) -> int:
        return self.g_rows.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.weight_counts / self.weight_denom


@dataclass(frozen=True)
class SolveResult:
    p_value: float
    u_opt: np.ndarray
    z: np.ndarray
    nodes_explored: int
    lp_calls: int
    wall_time: float
    optimal: bool
    bound: float


def compute_bigM(stacked: StackedSystem, f: np.ndarray, h: np.ndarray, x0,
                 phi_rows: np.ndarray, box: InputBox, margin: float = 1.0,
                 buffers: np.ndarray | None = None) -> np.ndarray:
    """Per-row constants M[i, ell] >= the worst violation of row ell by
    scenario i over the input box, plus a safety margin.

    The violation bound is closed-form interval arithmetic: the box support
    of F_ell G_u plus the scenario-fixed terms minus the (buffered)
    right-hand side.
    """
    f = as_matrix(f)
    h = as_vector(h, size=f.shape[0])
    x0 = as_vector(x0, size=stacked.n_x)
    phi_rows = as_matrix(phi_rows, cols=f.shape[1])
    if not (np.all(np.isfinite(box.lo)) and np.all(np.isfinite(box.hi))):
        raise ValueError("big-M needs a bounded input box")
    if margin <= 0.0:
        raise ValueError("margin must be positive")
    g_rows = f @ stacked.g_u
    support = np.clip(g_rows, 0.0, None) @ box.hi + np.clip(g_rows, None, 0.0) @ box.lo
    fixed = f @ (stacked.g_x @ x0) + phi_rows @ f.T - h  # (n_bin, L) broadcast
    if buffers is not None:
        fixed = fixed + as_matrix(buffers, rows=phi_rows.shape[0], cols=f.shape[0])
    return np.clip(support[None, :] + fixed, 0.0, None) + margin


def build_full(stacked: StackedSystem, f: np.ndarray, h: np.ndarray, x0,
               scenarios: ScenarioSet, box: InputBox, margin: float = 1.0) -> MilpProblem:
    """One binary per scenario, all with weight 1/K."""
    f = as_matrix(f, cols=stacked.horizon * stacked.n_x)
    h = as_vector(h, size=f.shape[0])
    x0 = as_vector(x0, size=stacked.n_x)
    phi = scenarios.w @ stacked.g_w.T
    k = scenarios.count
    rhs = h[None, :] - (f @ (stacked.g_x @ x0))[None, :] - phi @ f.T
    big_m = compute_bigM(stacked, f, h, x0, phi, box, margin=margin)
    return MilpProblem(g_rows=f @ stacked.g_u, rhs=rhs, big_m=big_m,
                       weight_counts=np.ones(k, dtype=np.int64), weight_denom=k,
                       box_lo=box.lo, box_hi=box.hi)


def build_partitioned(stacked: StackedSystem, f: np.ndarray, h: np.ndarray, x0,
                      model: PartitionModel, box: InputBox, margin: float = 1.0) -> MilpProblem:
    """One binary per seed, weighted by its cell count, rows tightened by
    the cell buffers."""
    if model.buffers is None:
        raise ValueError("partition model carries no buffers; run compute_buffers first")
    f = as_matrix(f, cols=stacked.horizon * stacked.n_x)
    h = as_vector(h, size=f.shape[0])
    x0 = as_vector(x0, size=stacked.n_x)
    buffers = as_matrix(model.buffers, rows=model.n_cells, cols=f.shape[0])
    k = int(model.alpha.sum())
    rhs = (h[None, :] - buffers
           - (f @ (stacked.g_x @ x0))[None, :] - model.seeds @ f.T)
    big_m = compute_bigM(stacked, f, h, x0, model.seeds, box, margin=margin,
                         buffers=buffers)
    return MilpProblem(g_rows=f @ stacked.g_u, rhs=rhs, big_m=big_m,
                       weight_counts=model.alpha.copy(), weight_denom=k,
                       box_lo=box.lo, box_hi=box.hi)


class _BranchAndBound:
    def __init__(self, p: MilpProblem, gap_tol: float, node_limit: int):
        self.p = p
        self.gap_int = int(math.floor(gap_tol * p.weight_denom + 1e-12))
        self.node_limit = node_limit
        self.active = np.zeros((p.n_binary, p.n_rows), dtype=bool)
        self.lp_calls = 0
        self.nodes = 0

    def _node_lp(self, z_lo: np.ndarray, z_hi: np.ndarray):
        """Solve the node relaxation by lazy row activation.

        Returns (value, u, z) or None when the node is LP-infeasible. The
        subset LP is a relaxation of the full node LP, so the returned
        value is a valid upper bound even though rows activate lazily.
        """
        p = self.p
        nc, nb = p.n_continuous, p.n_binary
        obj = np.concatenate([np.zeros(nc), p.weights])
        lo = np.concatenate([p.box_lo, z_lo])
        hi = np.concatenate([p.box_hi, z_hi])
        while True:
            ii, ll = np.nonzero(self.active)
            a = np.zeros((ii.size, nc + nb))
            a[:, :nc] = p.g_rows[ll]
            a[np.arange(ii.size), nc + ii] = p.big_m[ii, ll]
            b = p.rhs[ii, ll] + p.big_m[ii, ll]
            sol = solve_lp(LpProblem(objective=obj, a=a, b=b, lo=lo, hi=hi))
            self.lp_calls += 1
            if sol.status is LpStatus.INFEASIBLE:
                return None
            if sol.status is not LpStatus.OPTIMAL:
                raise RuntimeError("node relaxation cannot be unbounded")
            u = sol.point[:nc]
            z = sol.point[nc:]
            gu = p.g_rows @ u
            viol = gu[None, :] - p.rhs - p.big_m * (1.0 - z)[:, None]
            viol = np.where(self.active, -np.inf, viol)
            worst = viol.max(axis=1)
            grow = worst > _ACTIVATE_TOL
            if not np.any(grow):
                return float(sol.value), u, z
            self.active[grow, np.argmax(viol[grow], axis=1)] = True

    def _margin_polish(self, selected: np.ndarray, u_start: np.ndarray):
        """Maximize the uniform slack t over the rows of the selected
        scenarios; returns (t, u) or None when nothing is selected."""
        p = self.p
        if not np.any(selected):
            return None
        nc = p.n_continuous
        sel_idx = np.nonzero(selected)[0]
        slack0 = p.rhs[sel_idx] - (p.g_rows @ u_start)[None, :]
        local = np.zeros_like(slack0, dtype=bool)
        local[np.arange(sel_idx.size), np.argmin(slack0, axis=1)] = True
        obj = np.concatenate([np.zeros(nc), [1.0]])
        lo = np.concatenate([p.box_lo, [-np.inf]])
        hi = np.concatenate([p.box_hi, [np.inf]])
        while True:
            rr, ll = np.nonzero(local)
            a = np.zeros((rr.size, nc + 1))
            a[:, :nc] = p.g_rows[ll]
            a[:, nc] = 1.0
            b = p.rhs[sel_idx[rr], ll]
            sol = solve_lp(LpProblem(objective=obj, a=a, b=b, lo=lo, hi=hi))
            self.lp_calls += 1
            if sol.status is not LpStatus.OPTIMAL:
                raise RuntimeError("margin polish LP must be bounded and feasible")
            u = sol.point[:nc]
            t = float(sol.value)
            slack = p.rhs[sel_idx] - (p.g_rows @ u)[None, :]
            slack = np.where(local, np.inf, slack)
            worst = slack.min(axis=1)
            grow = worst < t - _ACTIVATE_TOL
            if not np.any(grow):
                return t, u
            local[grow, np.argmin(slack[grow], axis=1)] = True

    def _exact_value(self, u: np.ndarray) -> tuple[int, np.ndarray]:
        """Tolerance-free indicator count at u: z_i = 1 iff every row of
        scenario i holds with non-strict inequality."""
        gu = self.p.g_rows @ u
        z = np.all(gu[None, :] <= self.p.rhs, axis=1)
        return int(self.p.weight_counts @ z), z.astype(np.int8)

    def _candidates(self, u_node: np.ndarray, z_node: np.ndarray):
        """Incumbent candidates: the raw LP point plus margin-polished
        points for the tolerantly-satisfied and rounded z patterns.

        Yields (u, polished); polished points carry the pattern's best
        uniform slack, so ties in exact value must prefer them: slack is
        what lets cell members inherit seed feasibility through rounding.
        """
        yield u_node, False
        gu = self.p.g_rows @ u_node
        tol_pattern = np.all(gu[None, :] <= self.p.rhs + 1e-6, axis=1)
        patterns = [tol_pattern]
        rounded = z_node > 0.5
        if not np.array_equal(rounded, tol_pattern):
            patterns.append(rounded)
        for pattern in patterns:
            polished = self._margin_polish(pattern, u_node)
            if polished is not None:
                yield polished[1], True

    def solve(self) -> SolveResult:
        p = self.p
        start = time.perf_counter()
        denom = p.weight_denom
        free = np.full(p.n_binary, -1, dtype=np.int8)
        heap = [(-denom, 0, free.tobytes())]
        counter = 1
        inc_val = -1
        inc_u = np.where(np.isfinite(p.box_lo), p.box_lo, 0.0)
        inc_z = np.zeros(p.n_binary, dtype=np.int8)
        inc_polished = False
        hit_limit = False

        while heap:
            if self.nodes >= self.node_limit:
                hit_limit = True
                break
            neg_bound, _, fixed_bytes = heapq.heappop(heap)
            parent_bound = -neg_bound
            if parent_bound <= inc_val + self.gap_int:
                continue
            self.nodes += 1
            fixed = np.frombuffer(fixed_bytes, dtype=np.int8)
            z_lo = (fixed == 1).astype(float)
            z_hi = (fixed != 0).astype(float)
            res = self._node_lp(z_lo, z_hi)
            if res is None:
                if not np.any(fixed != -1):
                    raise RuntimeError(
                        "root relaxation infeasible; big-M constants are inconsistent")
                continue
            value, u, z = res
            bound = min(parent_bound,
                        int(math.floor(value * denom + denom * 1e-7 + 1e-9)))
            if bound <= inc_val + self.gap_int:
                continue
            for u_cand, polished in self._candidates(u, z):
                val, z_exact = self._exact_value(u_cand)
                if val > inc_val or (val == inc_val and polished and not inc_polished):
                    inc_val, inc_u, inc_z = val, u_cand.copy(), z_exact
                    inc_polished = polished
            if bound <= inc_val + self.gap_int:
                continue
            frac = np.minimum(z, 1.0 - z)
            frac[fixed != -1] = -1.0
            if float(frac.max()) < _INT_TOL:
                continue
            j = int(np.argmax(frac))
            for value_first in (1, 0):
                child = fixed.copy()
                child[j] = value_first
                heapq.heappush(heap, (-bound, counter, child.tobytes()))
                counter += 1

        best_open = max((-nb for nb, _, _ in heap), default=inc_val)
        bound_final = max(inc_val, best_open) if hit_limit else inc_val
        return SolveResult(
            p_value=inc_val / denom if inc_val >= 0 else 0.0,
            u_opt=np.clip(inc_u, p.box_lo, p.box_hi),
            z=inc_z,
            nodes_explored=self.nodes,
            lp_calls=self.lp_calls,
            wall_time=time.perf_counter() - start,
            optimal=not hit_limit,
            bound=bound_final / denom,
        )


def solve_milp(p: MilpProblem, gap_tol: float = 1e-6,
               node_limit: int = 10 ** 6) -> SolveResult:
    """Branch-and-bound to global optimality within gap_tol.

    Node selection is best-bound with insertion-order tie-break; branching
    picks the most fractional z (ties to the lowest index) and explores
    the z=1 child first. If the node budget runs out, the incumbent is
    returned with optimal=False and `bound` still a valid upper bound.
    """
    if gap_tol < 0:
        raise ValueError("gap_tol must be nonnegative")
    if node_limit < 1:
        raise ValueError("node_limit must be positive")
    solver = _BranchAndBound(p, gap_tol, node_limit)
    return solver.solve()


def dump_problem(p: MilpProblem) -> str:
    """Plain-text LP-style rendering of the MILP for external cross-checks.

    Layout: objective, one tagged row per (binary, constraint) pair as
    r<i>_<ell>, variable bounds, then the binary declarations. Continuous
    inputs are u0..u{n-1}; indicator k is z{k}.
    """
    lines = ["maximize"]
    obj = " + ".join(f"{float(w)!r} z{i}" for i, w in enumerate(p.weights))
    lines.append(f"  obj: {obj}")
    lines.append("subject to")
    for i in range(p.n_binary):
        for ell in range(p.n_rows):
            terms = [f"{float(c)!r} u{k}" for k, c in enumerate(p.g_rows[ell]) if c != 0.0]
            terms.append(f"{float(p.big_m[i, ell])!r} z{i}")
            lines.append(f"  r{i}_{ell}: " + " + ".join(terms)
                         + f" <= {float(p.rhs[i, ell] + p.big_m[i, ell])!r}")
    lines.append("bounds")
    for k in range(p.n_continuous):
        lines.append(f"  {float(p.box_lo[k])!r} <= u{k} <= {float(p.box_hi[k])!r}")
    lines.append("binaries")
    lines.append("  " + " ".join(f"z{i}" for i in range(p.n_binary)))
    lines.append("end")
    return "\n".join(lines) + "\n"
