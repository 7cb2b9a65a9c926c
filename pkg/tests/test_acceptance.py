"""Acceptance suite: nine end-to-end checks of the verification pipeline.

Each check is one test (one pass/fail line under pytest -v) asserting its
stated tolerance and runtime budget inline. The checks are ordered: exact
sample-count values, solver-vs-enumeration equality, the probability
sandwich, buffer soundness, partition translation invariance, the
rendezvous benchmark reproduction, the WSS curve trend, a statistical
validation of the sample bound, and CLI byte determinism.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest

from helpers import box_polytope, milp_oracle, random_reach_avoid_instance
from scenreach.cli import main
from scenreach.milp import build_full, build_partitioned, solve_milp
from scenreach.partition import compute_buffers, kmeans, wss_curve
from scenreach.rendezvous import (CwhConfig, build_cwh_system,
                                  build_rendezvous_noise, build_rendezvous_spec)
from scenreach.scenarios import (HoeffdingQuery, NoiseModel,
                                 required_scenarios, sample, predict)
from scenreach.sets import (InputBox, Polytope, ReachAvoidSpec,
                            build_trajectory_constraint)
from scenreach.system import LtiSystem, stack


def exact_fraction(stacked, f, h, x0, phi, u) -> float:
    """Tolerance-free success fraction of input u over all prediction rows."""
    base = f @ (stacked.g_x @ x0 + stacked.g_u @ u)
    return float(np.all(base[None, :] + phi @ f.T <= h[None, :], axis=1).mean())


def random_instance_k50(rng, trial):
    """Random reach-avoid problem with a 50-scenario sample."""
    n_x = int(rng.integers(1, 3))
    n_u = int(rng.integers(1, 3))
    horizon = int(rng.integers(1, 4))
    sys_ = LtiSystem(a=rng.normal(scale=0.6, size=(n_x, n_x)),
                     b=rng.normal(size=(n_x, n_u)))
    spec = ReachAvoidSpec(safe=box_polytope(n_x, float(rng.uniform(1.2, 2.5))),
                          target=box_polytope(n_x, float(rng.uniform(0.2, 0.7))),
                          horizon=horizon)
    f, h = build_trajectory_constraint(spec)
    box = InputBox.repeat(np.full(n_u, -0.6), np.full(n_u, 0.6), horizon)
    noise = NoiseModel.gaussian_diag(np.zeros(n_x),
                                     rng.uniform(0.05, 0.35, size=n_x))
    stacked = stack(sys_, horizon)
    ss = sample(noise, horizon, 50, seed=trial)
    phi = predict(ss, stacked.g_w).phi
    x0 = rng.normal(scale=0.3, size=n_x)
    return stacked, f, h, box, ss, phi, x0


def test_c1_sample_count_formula_exact():
    t0 = time.perf_counter()
    k1 = required_scenarios(HoeffdingQuery(0.05, 0.01))
    k2 = required_scenarios(HoeffdingQuery(0.01, 0.01))
    elapsed = time.perf_counter() - t0
    assert k1 == 922
    assert k2 == 23026
    assert elapsed < 1e-3
    print(f"PASS 1/9 sample counts exact: (0.05,0.01)->{k1}, "
          f"(0.01,0.01)->{k2} in {elapsed * 1e6:.0f}us")


def test_c2_solver_matches_exhaustive_enumeration():
    rng = np.random.default_rng(20240814)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        *_, mp = random_reach_avoid_instance(rng, k_max=12, n_x_max=2,
                                             horizon_max=3)
        res = solve_milp(mp)
        assert res.optimal
        gap = abs(res.p_value - milp_oracle(mp))
        worst = max(worst, gap)
        assert gap <= 1e-6
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    print(f"PASS 2/9 solver equals enumeration on 50 instances "
          f"(worst gap {worst:.2e}) in {elapsed:.1f}s")


def test_c3_probability_sandwich_and_singleton_equality():
    rng = np.random.default_rng(314)
    t0 = time.perf_counter()
    for trial in range(30):
        stacked, f, h, box, ss, phi, x0 = random_instance_k50(rng, trial)
        full = solve_milp(build_full(stacked, f, h, x0, ss, box))
        assert full.optimal
        for khat in (5, 10, 25, 50):
            model = kmeans(phi, khat, restarts=5, seed=trial)
            model = replace(model, buffers=compute_buffers(phi, model, f))
            res = solve_milp(build_partitioned(stacked, f, h, x0, model, box))
            assert res.optimal
            p_hat = exact_fraction(stacked, f, h, x0, phi, res.u_opt)
            assert res.p_value <= p_hat + 1e-6
            assert p_hat <= full.p_value + 1e-6
            if khat == 50:
                # Singleton cells carry zero buffers: same optimum exactly.
                assert res.p_value == full.p_value
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    print(f"PASS 3/9 sandwich held on 30 instances x 4 cell counts "
          f"in {elapsed:.1f}s")


def test_c4_buffered_seed_feasibility_transfers_to_members():
    rng = np.random.default_rng(41)
    t0 = time.perf_counter()
    violations = 0
    triggers = 0
    for trial in range(20):
        stacked, f, h, box, ss, phi, _ = random_instance_k50(rng, trial)
        khat = int(rng.integers(2, 9))
        model = kmeans(phi, khat, restarts=3, seed=trial)
        buffers = compute_buffers(phi, model, f)
        seed_img = model.seeds @ f.T
        member_img = phi @ f.T
        for _ in range(100):
            x0 = rng.normal(scale=0.3, size=stacked.n_x)
            u = rng.uniform(box.lo, box.hi)
            base = f @ (stacked.g_x @ x0 + stacked.g_u @ u)
            ok_seed = np.all(base[None, :] + seed_img <= h[None, :] - buffers,
                             axis=1)
            ok_member = np.all(base[None, :] + member_img <= h[None, :] + 1e-9,
                               axis=1)
            covered = ok_seed[model.assignment]
            triggers += int(covered.sum())
            violations += int(np.sum(covered & ~ok_member))
    elapsed = time.perf_counter() - t0
    assert triggers > 0  # the implication was actually exercised
    assert violations == 0
    assert elapsed < 60.0
    print(f"PASS 4/9 buffer transfer: 0 violations over {triggers} covered "
          f"members in {elapsed:.1f}s")


def test_c5_partition_translation_invariance():
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()
    worst = 0.0
    for case in range(20):
        n = int(rng.integers(20, 80))
        d = int(rng.integers(1, 6))
        khat = int(rng.integers(2, 9))
        points = rng.normal(scale=rng.uniform(0.5, 3.0), size=(n, d))
        shift = rng.uniform(-50.0, 50.0, size=d)
        a = kmeans(points, khat, restarts=5, seed=case)
        b = kmeans(points + shift, khat, restarts=5, seed=case)
        assert np.array_equal(a.assignment, b.assignment)
        err = float(np.abs(b.seeds - (a.seeds + shift)).max())
        worst = max(worst, err)
        assert err < 1e-9
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    print(f"PASS 5/9 translation invariance on 20 cases "
          f"(worst seed error {worst:.2e}) in {elapsed:.1f}s")


def test_c6_rendezvous_probability_reproduction():
    cfg = CwhConfig()
    system = build_cwh_system(cfg)
    spec, box = build_rendezvous_spec(cfg)
    stacked = stack(system, cfg.horizon)
    f, h = build_trajectory_constraint(spec)
    noise = build_rendezvous_noise(cfg)
    x0 = np.asarray(cfg.x0)

    windows = {20: (0.78, 0.88), 40: (0.80, 0.90), 100: (0.81, 0.91)}
    budgets = {20: 10 ** 6, 40: 10 ** 6, 100: 600}
    p_hats = {k: [] for k in windows}
    t0 = time.perf_counter()
    for trial in range(10):
        ss = sample(noise, cfg.horizon, 2000, seed=1000 + trial)
        phi = predict(ss, stacked.g_w).phi
        for khat in (20, 40, 100):
            model = kmeans(phi, khat, restarts=10, seed=trial)
            model = replace(model, buffers=compute_buffers(phi, model, f))
            problem = build_partitioned(stacked, f, h, x0, model, box)
            res = solve_milp(problem, node_limit=budgets[khat])
            if khat <= 40:
                assert res.optimal
            p_hat = exact_fraction(stacked, f, h, x0, phi, res.u_opt)
            assert res.p_value <= p_hat + 1e-9  # certified lower bound
            p_hats[khat].append(p_hat)
    elapsed = time.perf_counter() - t0

    means = {k: float(np.mean(v)) for k, v in p_hats.items()}
    for khat, (lo, hi) in windows.items():
        assert lo <= means[khat] <= hi, (khat, means[khat])
    assert means[40] >= means[20] - 0.02
    assert means[100] >= means[40] - 0.02
    print(f"PASS 6/9 rendezvous means "
          f"20->{means[20]:.4f} 40->{means[40]:.4f} 100->{means[100]:.4f} "
          f"over 10 trials in {elapsed:.0f}s")


def test_c7_wss_curve_monotone_trend():
    cfg = CwhConfig()
    system = build_cwh_system(cfg)
    spec, _ = build_rendezvous_spec(cfg)
    stacked = stack(system, cfg.horizon)
    noise = build_rendezvous_noise(cfg)
    ss = sample(noise, cfg.horizon, 2000, seed=1000)
    phi = predict(ss, stacked.g_w).phi

    t0 = time.perf_counter()
    curve = wss_curve(phi, range(1, 101), restarts=10, seed=0)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    w = curve.wss_values
    upticks = int(np.sum(w[1:] > w[:-1] * 1.01))
    assert upticks == 0, f"{upticks} upticks above 1%"

    subset = kmeans(phi[:100], 100, restarts=10, seed=0)
    assert subset.wss == 0.0
    print(f"PASS 7/9 WSS curve nonincreasing within 1% over 1..100 "
          f"(zero at 100 cells on 100 points) in {elapsed:.0f}s")


def test_c8_sample_bound_statistical_validity():
    from scipy.stats import norm

    delta, beta = 0.1, 0.1
    k = required_scenarios(HoeffdingQuery(delta, beta))
    assert k == 116

    # 1-D single-step instance: x_1 = u + w, w ~ N(0, sigma^2), target
    # |x_1| <= tau, u in [-0.01, 0.01]. By symmetry and unimodality the
    # best input is u = 0, so the true optimum is 2 Phi(tau/sigma) - 1.
    sigma = 0.1
    tau = sigma * float(norm.ppf(0.9))
    p_true = float(norm.cdf(tau / sigma) - norm.cdf(-tau / sigma))
    sys_ = LtiSystem(a=[[1.0]], b=[[1.0]])
    stacked = stack(sys_, 1)
    spec = ReachAvoidSpec(safe=Polytope(f=[[1.0], [-1.0]], h=[10.0, 10.0]),
                          target=Polytope(f=[[1.0], [-1.0]], h=[tau, tau]),
                          horizon=1)
    f, h = build_trajectory_constraint(spec)
    box = InputBox(lo=[-0.01], hi=[0.01])
    noise = NoiseModel.gaussian_diag([0.0], [sigma ** 2])

    t0 = time.perf_counter()
    overshoots = 0
    trials = 200
    for trial in range(trials):
        ss = sample(noise, 1, k, seed=5000 + trial)
        res = solve_milp(build_full(stacked, f, h, [0.0], ss, box))
        assert res.optimal
        if trial < 2:
            # Dense input sweep cross-check of the sampled optimum.
            us = np.linspace(-0.01, 0.01, 20001)
            w = ss.w[:, 0]
            best = max(int(np.sum(np.abs(u + w) <= tau)) for u in us)
            assert res.p_value == best / k
        if res.p_value - p_true >= delta:
            overshoots += 1
    elapsed = time.perf_counter() - t0
    freq = overshoots / trials
    limit = beta + 3.0 * np.sqrt(beta / trials)
    assert freq <= limit
    assert elapsed < 300.0
    print(f"PASS 8/9 overshoot frequency {freq:.3f} <= {limit:.3f} "
          f"over {trials} trials (K={k}) in {elapsed:.0f}s")


def test_c9_cli_byte_determinism(tmp_path, capsys):
    from scenreach.scenarios import save_noise
    from scenreach.sets import save_spec
    from scenreach.system import save_system

    sys_ = LtiSystem(a=[[0.9, 0.2], [0.0, 0.8]], b=[[0.5, 0.0], [0.0, 0.5]])
    spec = ReachAvoidSpec(safe=box_polytope(2, 2.0),
                          target=box_polytope(2, 0.4), horizon=2)
    box = InputBox.repeat([-1.0, -1.0], [1.0, 1.0], 2)
    noise = NoiseModel.gaussian_diag([0.0, 0.0], [0.25, 0.25])
    save_system(sys_, tmp_path / "system.json")
    save_spec(spec, box, tmp_path / "spec.json")
    save_noise(noise, tmp_path / "noise.json")
    files = ["--system", str(tmp_path / "system.json"),
             "--spec", str(tmp_path / "spec.json"),
             "--noise", str(tmp_path / "noise.json")]

    assert main(["sample-size", "--delta", "0.1", "--beta", "0.1"]) == 0
    out1 = capsys.readouterr().out
    assert main(["sample-size", "--delta", "0.1", "--beta", "0.1"]) == 0
    assert capsys.readouterr().out == out1

    checked = []
    for run in ("a", "b"):
        prep = tmp_path / f"prep_{run}"
        assert main(["prepare", *files, "--out", str(prep), "--K", "12",
                     "--khat", "3", "--restarts", "3", "--seed", "11"]) == 0
        assert main(["verify", "--artifact", str(prep / "artifact.json"),
                     "--x0", "0.3,-0.2", "--out", str(tmp_path / f"ver_{run}")]) == 0
        assert main(["sweep", *files, "--out", str(tmp_path / f"sw_{run}"),
                     "--K", "8", "--khat", "2,4", "--trials", "2",
                     "--restarts", "2", "--seed", "12", "--x0", "0.1,0.1"]) == 0
    for rel in ("prep_a/artifact.json", "prep_a/wss_curve.csv",
                "ver_a/report.json", "ver_a/report.csv", "sw_a/sweep.csv"):
        other = rel.replace("_a/", "_b/")
        assert ((tmp_path / rel).read_bytes()
                == (tmp_path / other).read_bytes()), rel
        checked.append(rel.split("/")[1])
    print(f"PASS 9/9 byte-identical reruns for every command: "
          f"{', '.join(checked)}")
