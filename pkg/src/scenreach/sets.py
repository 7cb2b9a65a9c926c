"""Polytopic safe/target sets and the trajectory-level reach-avoid constraint.

A trajectory X = (x_1..x_N) satisfies the reach-avoid requirement when
x_t lies in the safe set for t = 1..N-1 and x_N lies in the target set.
Stacked, that is one block-diagonal system F X <= h with (N-1)*l_S + l_T
rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linops import as_matrix, as_vector

__all__ = ["InputBox", "Polytope", "ReachAvoidSpec",
           "build_trajectory_constraint", "contains", "load_spec", "save_spec"]


@dataclass(frozen=True)
class Polytope:
    """{x | f x <= h} with one row per half-space."""

    f: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        f = as_matrix(self.f)
        h = as_vector(self.h, size=f.shape[0])
        if np.any(np.all(f == 0.0, axis=1)):
            raise ValueError("polytope has an all-zero constraint row")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.f.shape[1]

    @property
    def n_rows(self) -> int:
        return self.f.shape[0]


def contains(p: Polytope, x) -> bool:
    """Exact non-strict membership test, no tolerance."""
    x = as_vector(x, size=p.dim)
    return bool(np.all(p.f @ x <= p.h))


@dataclass(frozen=True)
class InputBox:
    """Axis-aligned bounds for the full N*n_u input vector."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lo, allow_inf=True)
        hi = as_vector(self.hi, size=lo.shape[0], allow_inf=True)
        if np.any(lo > hi):
            raise ValueError("input box lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @staticmethod
    def repeat(lo_step, hi_step, horizon: int) -> "InputBox":
        """Tile one per-step box over an N-step horizon."""
        lo_step = as_vector(lo_step, allow_inf=True)
        hi_step = as_vector(hi_step, allow_inf=True)
        return InputBox(lo=np.tile(lo_step, horizon), hi=np.tile(hi_step, horizon))

    @property
    def size(self) -> int:
        return self.lo.shape[0]


@dataclass(frozen=True)
class ReachAvoidSpec:
    """Safe polytope for steps 1..N-1, target polytope for step N."""

    safe: Polytope
    target: Polytope
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.safe.dim != self.target.dim:
            raise ValueError("safe and target sets must share a dimension")

    @property
    def n_x(self) -> int:
        return self.safe.dim

    @property
    def n_rows(self) -> int:
        return (self.horizon - 1) * self.safe.n_rows + self.target.n_rows


def build_trajectory_constraint(spec: ReachAvoidSpec) -> tuple[np.ndarray, np.ndarray]:
    """Assemble (F, h) so that F X <= h iff the trajectory is reach-avoid.

    F is block-diagonal over time steps: the safe rows on steps 1..N-1 and
    the target rows on step N.
    """
    n, n_x = spec.horizon, spec.n_x
    l_s, l_t = spec.safe.n_rows, spec.target.n_rows
    rows = (n - 1) * l_s + l_t
    f = np.zeros((rows, n * n_x))
    h = np.empty(rows)
    for t in range(n - 1):
        f[t * l_s:(t + 1) * l_s, t * n_x:(t + 1) * n_x] = spec.safe.f
        h[t * l_s:(t + 1) * l_s] = spec.safe.h
    f[(n - 1) * l_s:, (n - 1) * n_x:] = spec.target.f
    h[(n - 1) * l_s:] = spec.target.h
    return f, h


def _polytope_to_json(p: Polytope) -> dict:
    return {"f": p.f.tolist(), "h": p.h.tolist()}


def _polytope_from_json(d: dict) -> Polytope:
    return Polytope(f=np.asarray(d["f"], dtype=float),
                    h=np.asarray(d["h"], dtype=float))


def save_spec(spec: ReachAvoidSpec, box: InputBox, path) -> None:
    data = {
        "safe": _polytope_to_json(spec.safe),
        "target": _polytope_to_json(spec.target),
        "N": spec.horizon,
        "input_box": {"lo": box.lo.tolist(), "hi": box.hi.tolist()},
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_spec(path) -> tuple[ReachAvoidSpec, InputBox]:
    data = json.loads(Path(path).read_text())
    spec = ReachAvoidSpec(safe=_polytope_from_json(data["safe"]),
                          target=_polytope_from_json(data["target"]),
                          horizon=int(data["N"]))
    ib = data["input_box"]
    box = InputBox(lo=np.asarray(ib["lo"], dtype=float),
                   hi=np.asarray(ib["hi"], dtype=float))
    return spec, box
