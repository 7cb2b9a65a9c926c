"""Pipeline orchestration: offline artifact preparation (sample, predict,
partition, buffer), online verification for a given initial state, and
the certified probability reconstruction.

The offline product is independent of the initial state: the partition is
built on prediction-set points, and buffers depend only on the constraint
matrix and the cells. Online, for one x0, the partitioned MILP yields an
input sequence whose exact success fraction over the full scenario set is
the reported estimate, sandwiched between the partitioned and the full
sampled optima.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .milp import SolveResult, build_full, build_partitioned, solve_milp
from .partition import PartitionModel, WssCurve, compute_buffers, kmeans, knee, wss_curve
from .scenarios import NoiseModel, PredictionSet, ScenarioSet, noise_from_json, predict, sample
from .sets import InputBox, ReachAvoidSpec, build_trajectory_constraint, contains
from .system import LtiSystem, StackedSystem, stack

__all__ = ["KhatPolicy", "OfflineArtifact", "VerificationReport",
           "evaluate_policy", "hash_artifact", "load_artifact",
           "offline_prepare", "save_artifact", "solve_full", "verify"]

ARTIFACT_VERSION = 1
DEFAULT_WSS_GRID_CAP = 100


@dataclass(frozen=True)
class KhatPolicy:
    """How to pick the number of cells: a fixed count, the knee of the
    WSS curve, or the largest grid value whose measured calibration solve
    fits a wall-clock budget."""

    kind: str                 # "fixed" | "knee" | "budget"
    value: float | int = 0
    calibration_x0: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "knee", "budget"):
            raise ValueError(f"unknown khat policy {self.kind!r}")
        if self.kind == "fixed" and int(self.value) < 1:
            raise ValueError("fixed policy needs a positive cell count")
        if self.kind == "budget":
            if float(self.value) <= 0:
                raise ValueError("budget policy needs a positive time budget")
            if self.calibration_x0 is None:
                raise ValueError("budget policy needs a calibration initial state")

    @staticmethod
    def fixed(khat: int) -> "KhatPolicy":
        return KhatPolicy(kind="fixed", value=int(khat))

    @staticmethod
    def knee() -> "KhatPolicy":
        return KhatPolicy(kind="knee")

    @staticmethod
    def budget(seconds: float, calibration_x0) -> "KhatPolicy":
        return KhatPolicy(kind="budget", value=float(seconds),
                          calibration_x0=np.asarray(calibration_x0, dtype=float))


@dataclass(frozen=True)
class OfflineArtifact:
    """Everything the online phase needs, none of it depending on x0."""

    system: LtiSystem
    stacked: StackedSystem
    spec: ReachAvoidSpec
    box: InputBox
    noise: NoiseModel
    scenarios: ScenarioSet
    predictions: PredictionSet
    partition: PartitionModel
    khat: int
    f: np.ndarray
    h: np.ndarray
    curve: WssCurve | None
    metadata: dict


@dataclass(frozen=True)
class VerificationReport:
    x0: np.ndarray
    p_hat: float
    p_khat_star: float
    u_opt: np.ndarray | None
    success_flags: np.ndarray
    wall_time: float
    solver_optimal: bool
    solver_bound: float
    nodes_explored: int
    lp_calls: int


def _khat_grid(count: int) -> list[int]:
    return list(range(1, min(DEFAULT_WSS_GRID_CAP, count) + 1))


def offline_prepare(system: LtiSystem, spec: ReachAvoidSpec, box: InputBox,
                    noise: NoiseModel, count: int, policy: KhatPolicy,
                    seed: int, restarts: int = 10,
                    khat_grid: list[int] | None = None,
                    timings: bool = False,
                    node_limit: int = 10 ** 6,
                    force_curve: bool = False) -> OfflineArtifact:
    """Sample scenarios, map them through the disturbance block, cluster,
    and buffer. The WSS curve is computed only when the policy needs it
    or force_curve asks for it."""
    stacked = stack(system, spec.horizon)
    scen = sample(noise, spec.horizon, count, seed)
    preds = predict(scen, stacked.g_w)
    f, h = build_trajectory_constraint(spec)

    curve = None
    grid = khat_grid if khat_grid is not None else _khat_grid(count)
    if policy.kind != "fixed" or force_curve:
        curve = wss_curve(preds.phi, grid, restarts=restarts, seed=seed,
                          timings=timings)
    if policy.kind == "fixed":
        khat = int(policy.value)
        if khat > count:
            raise ValueError("cell count cannot exceed the scenario count")
    elif policy.kind == "knee":
        khat = knee(curve)
    else:
        khat = _calibrate_budget(stacked, f, h, box, preds, grid,
                                 float(policy.value), policy.calibration_x0,
                                 restarts, seed, node_limit)

    model = kmeans(preds.phi, khat, restarts=restarts, seed=seed)
    model = replace(model, buffers=compute_buffers(preds.phi, model, f))
    metadata = {
        "version": ARTIFACT_VERSION,
        "seed": seed,
        "khat_policy": policy.kind,
        "restarts": restarts,
        "K": count,
    }
    return OfflineArtifact(system=system, stacked=stacked, spec=spec, box=box,
                           noise=noise, scenarios=scen, predictions=preds,
                           partition=model, khat=khat, f=f, h=h, curve=curve,
                           metadata=metadata)


def _calibrate_budget(stacked, f, h, box, preds, grid, seconds, x0,
                      restarts, seed, node_limit) -> int:
    """Largest grid cell count whose measured calibration solve fits the
    budget. Counts are tried in increasing order; the first overrun stops
    the scan."""
    best = grid[0]
    for khat in grid:
        model = kmeans(preds.phi, khat, restarts=restarts, seed=seed)
        model = replace(model, buffers=compute_buffers(preds.phi, model, f))
        problem = build_partitioned(stacked, f, h, x0, model, box)
        t0 = time.perf_counter()
        solve_milp(problem, node_limit=node_limit)
        if time.perf_counter() - t0 > seconds:
            break
        best = khat
    return best


def evaluate_policy(artifact: OfflineArtifact, x0, u) -> tuple[float, np.ndarray]:
    """Exact success fraction of the input sequence over all K scenarios.

    Membership is tolerance-free: scenario i succeeds iff every row of
    F X^(i) <= h holds with non-strict inequality.
    """
    x0 = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != artifact.stacked.horizon * artifact.stacked.n_u:
        raise ValueError("input length does not match the stacked horizon")
    if np.any(u < artifact.box.lo - 1e-12) or np.any(u > artifact.box.hi + 1e-12):
        raise ValueError("input sequence leaves the input box")
    base = artifact.f @ (artifact.stacked.g_x @ x0 + artifact.stacked.g_u @ u)
    lhs = base[None, :] + artifact.predictions.phi @ artifact.f.T
    flags = np.all(lhs <= artifact.h[None, :], axis=1)
    return float(flags.mean()), flags


def verify(artifact: OfflineArtifact, x0, gap_tol: float = 1e-6,
           node_limit: int = 10 ** 6) -> VerificationReport:
    """Online phase for one initial state.

    Outside the safe set the probability is zero with no solve. Otherwise
    the partitioned MILP is solved and its input sequence is re-scored
    exactly on the full scenario set.
    """
    x0 = np.asarray(x0, dtype=float)
    start = time.perf_counter()
    if not contains(artifact.spec.safe, x0):
        return VerificationReport(
            x0=x0, p_hat=0.0, p_khat_star=0.0, u_opt=None,
            success_flags=np.zeros(artifact.scenarios.count, dtype=bool),
            wall_time=time.perf_counter() - start,
            solver_optimal=True, solver_bound=0.0,
            nodes_explored=0, lp_calls=0)
    problem = build_partitioned(artifact.stacked, artifact.f, artifact.h, x0,
                                artifact.partition, artifact.box)
    res = solve_milp(problem, gap_tol=gap_tol, node_limit=node_limit)
    p_hat, flags = evaluate_policy(artifact, x0, res.u_opt)
    return VerificationReport(
        x0=x0, p_hat=p_hat, p_khat_star=res.p_value, u_opt=res.u_opt,
        success_flags=flags, wall_time=time.perf_counter() - start,
        solver_optimal=res.optimal, solver_bound=res.bound,
        nodes_explored=res.nodes_explored, lp_calls=res.lp_calls)


def solve_full(artifact: OfflineArtifact, x0, gap_tol: float = 1e-6,
               node_limit: int = 10 ** 6) -> SolveResult:
    """Exact sampled optimum over all K scenarios (small-K / oracle use)."""
    x0 = np.asarray(x0, dtype=float)
    problem = build_full(artifact.stacked, artifact.f, artifact.h, x0,
                         artifact.scenarios, artifact.box)
    return solve_milp(problem, gap_tol=gap_tol, node_limit=node_limit)


def _array(a: np.ndarray) -> list:
    return np.asarray(a).tolist()


def artifact_to_json(artifact: OfflineArtifact) -> dict:
    part = artifact.partition
    return {
        "version": ARTIFACT_VERSION,
        "metadata": artifact.metadata,
        "system": {"A": _array(artifact.system.a), "B": _array(artifact.system.b)},
        "spec": {
            "safe": {"f": _array(artifact.spec.safe.f), "h": _array(artifact.spec.safe.h)},
            "target": {"f": _array(artifact.spec.target.f), "h": _array(artifact.spec.target.h)},
            "N": artifact.spec.horizon,
        },
        "box": {"lo": _array(artifact.box.lo), "hi": _array(artifact.box.hi)},
        "noise": json.loads(json.dumps({
            "kind": artifact.noise.kind,
            "mean": _array(artifact.noise.mean),
            **({"table": _array(artifact.noise.table)}
               if artifact.noise.kind == "custom_table"
               else {"covariance": _array(artifact.noise.covariance)}),
        })),
        "scenarios": {
            "W": _array(artifact.scenarios.w),
            "seed": artifact.scenarios.rng_seed,
            "N": artifact.scenarios.horizon,
            "n_x": artifact.scenarios.n_x,
        },
        "khat": artifact.khat,
        "partition": {
            "seeds": _array(part.seeds),
            "assignment": _array(part.assignment),
            "alpha": _array(part.alpha),
            "wss": part.wss,
            "buffers": _array(part.buffers) if part.buffers is not None else None,
        },
        "curve": None if artifact.curve is None else {
            "khat": _array(artifact.curve.khat_values),
            "wss": _array(artifact.curve.wss_values),
            "seconds": _array(artifact.curve.seconds),
        },
    }


def artifact_from_json(data: dict) -> OfflineArtifact:
    if int(data.get("version", -1)) != ARTIFACT_VERSION:
        raise ValueError(f"unsupported artifact version {data.get('version')!r}")
    from .sets import Polytope

    system = LtiSystem(a=np.asarray(data["system"]["A"], dtype=float),
                       b=np.asarray(data["system"]["B"], dtype=float))
    spec = ReachAvoidSpec(
        safe=Polytope(f=np.asarray(data["spec"]["safe"]["f"], dtype=float),
                      h=np.asarray(data["spec"]["safe"]["h"], dtype=float)),
        target=Polytope(f=np.asarray(data["spec"]["target"]["f"], dtype=float),
                        h=np.asarray(data["spec"]["target"]["h"], dtype=float)),
        horizon=int(data["spec"]["N"]))
    box = InputBox(lo=np.asarray(data["box"]["lo"], dtype=float),
                   hi=np.asarray(data["box"]["hi"], dtype=float))
    noise = noise_from_json(data["noise"])
    scen = ScenarioSet(w=np.asarray(data["scenarios"]["W"], dtype=float),
                       rng_seed=int(data["scenarios"]["seed"]),
                       horizon=int(data["scenarios"]["N"]),
                       n_x=int(data["scenarios"]["n_x"]))
    stacked = stack(system, spec.horizon)
    preds = predict(scen, stacked.g_w)
    pd = data["partition"]
    part = PartitionModel(
        seeds=np.asarray(pd["seeds"], dtype=float),
        assignment=np.asarray(pd["assignment"], dtype=np.int64),
        alpha=np.asarray(pd["alpha"], dtype=np.int64),
        wss=float(pd["wss"]),
        buffers=None if pd["buffers"] is None else np.asarray(pd["buffers"], dtype=float))
    f, h = build_trajectory_constraint(spec)
    curve = None
    if data.get("curve") is not None:
        cd = data["curve"]
        curve = WssCurve(khat_values=np.asarray(cd["khat"], dtype=np.int64),
                         wss_values=np.asarray(cd["wss"], dtype=float),
                         seconds=np.asarray(cd["seconds"], dtype=float))
    return OfflineArtifact(system=system, stacked=stacked, spec=spec, box=box,
                           noise=noise, scenarios=scen, predictions=preds,
                           partition=part, khat=int(data["khat"]), f=f, h=h,
                           curve=curve, metadata=dict(data["metadata"]))


def save_artifact(artifact: OfflineArtifact, path) -> None:
    Path(path).write_text(json.dumps(artifact_to_json(artifact), indent=1) + "\n")


def load_artifact(path) -> OfflineArtifact:
    return artifact_from_json(json.loads(Path(path).read_text()))


def hash_artifact(artifact: OfflineArtifact) -> str:
    """Stable content hash of the serialized artifact."""
    payload = json.dumps(artifact_to_json(artifact), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()
