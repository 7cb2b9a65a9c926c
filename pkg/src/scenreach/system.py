"""Discrete-time LTI dynamics and their horizon-stacked block form.

The stacked trajectory map is X = G_x x0 + G_u U + G_w W where X collects
the states x_1..x_N, U the inputs u_0..u_{N-1}, and W the additive
disturbances w_0..w_{N-1}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linops import as_matrix, as_vector

__all__ = ["LtiSystem", "StackedSystem", "load_system", "propagate",
           "save_system", "stack"]


@dataclass(frozen=True)
class LtiSystem:
    """x_{t+1} = A x_t + B u_t + w_t with state dim n_x and input dim n_u."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a)
        if a.shape[0] != a.shape[1]:
            raise ValueError("A must be square")
        b = as_matrix(self.b, rows=a.shape[0])
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_x(self) -> int:
        return self.a.shape[0]

    @property
    def n_u(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True)
class StackedSystem:
    """Block matrices of the N-step trajectory map.

    Block-row t (1-based) of g_x is A^t; g_u has block (t, s) = A^{t-s-1} B
    for s < t and zero otherwise; g_w has the same lower-triangular layout
    with B replaced by the identity.
    """

    g_x: np.ndarray
    g_u: np.ndarray
    g_w: np.ndarray
    horizon: int
    n_x: int
    n_u: int

    def trajectory(self, x0: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Stacked states x_1..x_N as one flat vector."""
        x0 = as_vector(x0, size=self.n_x)
        u = as_vector(u, size=self.horizon * self.n_u)
        w = as_vector(w, size=self.horizon * self.n_x)
        return self.g_x @ x0 + self.g_u @ u + self.g_w @ w


def stack(sys: LtiSystem, horizon: int) -> StackedSystem:
    """Build the stacked block matrices for an N-step horizon."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n_x, n_u = sys.n_x, sys.n_u
    n = horizon

    # Powers of A up to A^N; a_pow[t] == A^t.
    a_pow = [np.eye(n_x)]
    for _ in range(n):
        a_pow.append(sys.a @ a_pow[-1])

    g_x = np.vstack([a_pow[t] for t in range(1, n + 1)])
    g_u = np.zeros((n * n_x, n * n_u))
    g_w = np.zeros((n * n_x, n * n_x))
    for t in range(1, n + 1):
        for s in range(t):
            blk = a_pow[t - s - 1]
            g_u[(t - 1) * n_x:t * n_x, s * n_u:(s + 1) * n_u] = blk @ sys.b
            g_w[(t - 1) * n_x:t * n_x, s * n_x:(s + 1) * n_x] = blk
    return StackedSystem(g_x=g_x, g_u=g_u, g_w=g_w, horizon=n, n_x=n_x, n_u=n_u)


def propagate(sys: LtiSystem, x0, u, w) -> np.ndarray:
    """Roll the recursion forward, returning states x_1..x_N stacked flat.

    U and W may be flat vectors or (N, dim) arrays; their lengths determine
    the horizon and must agree.
    """
    x0 = as_vector(x0, size=sys.n_x)
    u = np.asarray(u, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if u.size % sys.n_u or w.size % sys.n_x:
        raise ValueError("input/disturbance length not a multiple of its dimension")
    n = u.size // sys.n_u
    if w.size != n * sys.n_x:
        raise ValueError(f"horizon mismatch: U implies {n}, W implies {w.size // sys.n_x}")
    if n < 1:
        raise ValueError("empty trajectory")

    out = np.empty(n * sys.n_x)
    x = x0
    for t in range(n):
        x = sys.a @ x + sys.b @ u[t * sys.n_u:(t + 1) * sys.n_u] + w[t * sys.n_x:(t + 1) * sys.n_x]
        out[t * sys.n_x:(t + 1) * sys.n_x] = x
    return out


def save_system(sys: LtiSystem, path) -> None:
    data = {"A": sys.a.tolist(), "B": sys.b.tolist()}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_system(path) -> LtiSystem:
    data = json.loads(Path(path).read_text())
    return LtiSystem(a=np.asarray(data["A"], dtype=float),
                     b=np.asarray(data["B"], dtype=float))
