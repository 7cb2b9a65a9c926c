"""Shared test utilities: slow reference implementations and random problem
generators used as oracles against the package code."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from scenreach.linops import LpProblem
from scenreach.milp import MilpProblem, build_full
from scenreach.scenarios import NoiseModel, sample
from scenreach.sets import InputBox, Polytope, ReachAvoidSpec, build_trajectory_constraint
from scenreach.system import LtiSystem, stack


def matmul_loops(a, b):
    """Triple-loop matrix product, the obviously-correct reference."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def lp_oracle(p: LpProblem):
    """Solve an LpProblem with scipy's HiGHS solver.

    Returns (status, value) with status in {"optimal", "infeasible",
    "unbounded"} and value for the maximization form.
    """
    bounds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
              for lo, hi in zip(p.lo, p.hi)]
    a_ub = p.a if p.a.size else None
    b_ub = p.b if p.a.size else None
    res = linprog(-p.objective, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 0:
        return "optimal", -res.fun
    if res.status in (2, 3):
        # HiGHS presolve can conflate infeasible with unbounded; settle it
        # with an explicit feasibility solve.
        feas = linprog(np.zeros_like(p.objective), A_ub=a_ub, b_ub=b_ub,
                       bounds=bounds, method="highs")
        return ("unbounded" if feas.status == 0 else "infeasible"), None
    raise RuntimeError(f"oracle solver failed: {res.status} {res.message}")


def random_lp(rng: np.random.Generator, n_max: int = 6, m_max: int = 8) -> LpProblem:
    """Random dense LP with a mix of finite and infinite bounds."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    a = rng.normal(size=(m, n))
    b = rng.normal(scale=2.0, size=m)
    c = rng.normal(size=n)
    lo = np.where(rng.random(n) < 0.8, rng.uniform(-3.0, 0.0, size=n), -np.inf)
    hi = np.where(rng.random(n) < 0.8, rng.uniform(0.0, 3.0, size=n), np.inf)
    hi = np.maximum(hi, lo)
    if m and rng.random() < 0.3:
        # Plant a guaranteed-feasible interior point to vary the mix.
        x0 = np.clip(rng.normal(size=n), np.where(np.isfinite(lo), lo, -1.0),
                     np.where(np.isfinite(hi), hi, 1.0))
        b = a @ x0 + rng.uniform(0.1, 1.0, size=m)
    return LpProblem(objective=c, a=a, b=b, lo=lo, hi=hi)


def pattern_feasible(mp: MilpProblem, indices) -> bool:
    """Can one input satisfy every row of all the listed scenarios?"""
    indices = list(indices)
    if not indices:
        return True
    a = np.vstack([mp.g_rows] * len(indices))
    b = np.concatenate([mp.rhs[i] for i in indices])
    res = linprog(np.zeros(mp.n_continuous), A_ub=a, b_ub=b,
                  bounds=list(zip(mp.box_lo, mp.box_hi)), method="highs")
    return res.status == 0


def milp_oracle(mp: MilpProblem) -> float:
    """Exhaustive best z pattern by per-pattern LP feasibility.

    Prunes supersets of known-infeasible patterns and skips scenarios that
    are infeasible on their own, so K up to ~12 stays fast.
    """
    nb = mp.n_binary
    cand = [i for i in range(nb) if pattern_feasible(mp, [i])]
    weights = [int(mp.weight_counts[i]) for i in cand]
    order = sorted(range(1 << len(cand)),
                   key=lambda m: -sum(w for j, w in enumerate(weights) if m >> j & 1))
    best = 0
    infeasible_masks: list[int] = []
    for mask in order:
        total = sum(w for j, w in enumerate(weights) if mask >> j & 1)
        if total <= best:
            break  # descending order: nothing better remains
        if any((mask & bad) == bad for bad in infeasible_masks):
            continue
        chosen = [cand[j] for j in range(len(cand)) if mask >> j & 1]
        if pattern_feasible(mp, chosen):
            best = total
        else:
            infeasible_masks.append(mask)
    return best / mp.weight_denom


def rk4_step(deriv, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = deriv(x)
    k2 = deriv(x + 0.5 * dt * k1)
    k3 = deriv(x + 0.5 * dt * k2)
    k4 = deriv(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def box_polytope(dim: int, half: float) -> Polytope:
    f = np.vstack([np.eye(dim), -np.eye(dim)])
    return Polytope(f=f, h=np.full(2 * dim, half))


def random_reach_avoid_instance(rng: np.random.Generator, k_max: int = 8,
                                n_x_max: int = 2, horizon_max: int = 3):
    """A small random reach-avoid problem with its scenario MILP.

    Sized so the number of satisfiable scenarios is usually strictly
    between 0 and K, which keeps oracle comparisons informative.

    Returns (stacked, f, h, x0, scenarios, box, milp).
    """
    n_x = int(rng.integers(1, n_x_max + 1))
    n_u = int(rng.integers(1, 3))
    horizon = int(rng.integers(1, horizon_max + 1))
    k = int(rng.integers(1, k_max + 1))
    sys = LtiSystem(a=rng.normal(scale=0.6, size=(n_x, n_x)),
                    b=rng.normal(size=(n_x, n_u)))
    stacked = stack(sys, horizon)
    spec = ReachAvoidSpec(safe=box_polytope(n_x, float(rng.uniform(1.0, 2.0))),
                          target=box_polytope(n_x, float(rng.uniform(0.15, 0.6))),
                          horizon=horizon)
    f, h = build_trajectory_constraint(spec)
    noise = NoiseModel.gaussian_diag(np.zeros(n_x),
                                     rng.uniform(0.05, 0.4, size=n_x))
    ss = sample(noise, horizon, k, seed=int(rng.integers(0, 2 ** 31)))
    half = float(rng.uniform(0.2, 1.0))
    box = InputBox.repeat(np.full(n_u, -half), np.full(n_u, half), horizon)
    x0 = rng.normal(scale=0.4, size=n_x)
    mp = build_full(stacked, f, h, x0, ss, box)
    return stacked, f, h, x0, ss, box, mp


def cw_transition(w: float, t: float) -> np.ndarray:
    """Closed-form in-plane relative-orbit state transition matrix."""
    s, c = np.sin(w * t), np.cos(w * t)
    return np.array([
        [4 - 3 * c, 0.0, s / w, 2 * (1 - c) / w],
        [6 * (s - w * t), 1.0, -2 * (1 - c) / w, (4 * s - 3 * w * t) / w],
        [3 * w * s, 0.0, c, 2 * s],
        [-6 * w * (1 - c), 0.0, -2 * s, 4 * c - 3],
    ])
