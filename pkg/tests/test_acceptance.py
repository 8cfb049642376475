"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The sweep-based criteria (6, 8, 9) share one module-scoped sweep. Runtime
limits are measured on the run itself, single-threaded.
"""
import json
import time

import numpy as np
import pytest

from inls_lab import classify, cli, diagnostics as D
from inls_lab.evolve import EvolutionConfig, run
from inls_lab.exponents import (ExponentError, ModelParams, exponent_table, intercritical_bounds,
                                intercritical_check)
from inls_lab.grid import build_grid
from inls_lab.groundstate import (NoConvergence, pohozaev_residuals, renormalization_oracle,
                                  solve_ground_state)

pytestmark = pytest.mark.slow

P312 = ModelParams.create(3, 1, 2)
SCALES = (0.3, 0.5, 0.7, 0.9, 1.2, 2.0, 3.0)


def random_triples(n, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        N = rng.uniform(2.2, 6.0)
        b = rng.uniform(0, min(N / 2, 2)) * rng.integers(0, 2)
        lo, hi = intercritical_bounds(N, b)
        p = rng.uniform(lo, hi)
        if lo < p < hi:
            out.append((N, b, p))
    return out


# ---------------------------------------------------------------- 1

def test_exponent_calculus(report):
    triples = random_triples(200)
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst, agree = 0.0, True
    for N, b, p in triples:
        P = ModelParams.create(N, b, p)
        worst = max(worst, max(abs(row[4]) for row in exponent_table(P)))
        agree &= intercritical_check(P) == (0 < P.s_c < 1)
    # outside the range as well: the check must still agree with s_c
    for N, b, p in triples:
        q = rng.uniform(1.01, 2 * p)
        P = ModelParams(N, b, q, 0.0, 0.05)
        agree &= intercritical_check(P) == (0 < P.s_c < 1)
    dt = time.perf_counter() - t0
    report(1, "exponent calculus", worst < 1e-12 and agree and dt < 1.0,
           f"max defect {worst:.1e}, s_c agreement {agree}, {dt:.2f} s")


# ---------------------------------------------------------------- 2

GS_TRIPLES = [(3, 0, 3), (3, 1, 2), (4, 1, 2.2), (2.5, 0.5, 3)]


def test_ground_states(report):
    t0 = time.perf_counter()
    rows, ok = [], True
    for N, b, p in GS_TRIPLES:
        P = ModelParams.create(N, b, p)
        g = build_grid(2 ** 17, 20.0, N)
        try:
            gs = solve_ground_state(P, g, strict=False)
        except (NoConvergence, ExponentError) as e:
            rows.append(f"({N},{b},{p}) {type(e).__name__}")
            ok = False
            continue
        r1, r2 = pohozaev_residuals(gs)
        v, _ = renormalization_oracle(g, P)
        orc = float(np.max(np.abs(v - gs.Q.values)))
        good = gs.residual < 1e-8 and max(abs(r1), abs(r2)) < 1e-6 and gs.energy > 0 and orc < 1e-4
        ok &= good
        rows.append(f"({N},{b},{p}) res {gs.residual:.1e} poh {max(abs(r1), abs(r2)):.1e} "
                    f"E {gs.energy:.4f} oracle {orc:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    report(2, "ground states", ok, "; ".join(rows) + f"; {dt:.1f} s")


# ---------------------------------------------------------------- 3, 4

@pytest.fixture(scope="module")
def conservation_runs():
    g = build_grid(8192, 40.0, 3.0)
    gs = solve_ground_state(P312, g)
    out = {}
    for dt in (1e-3, 5e-4):
        t0 = time.perf_counter()
        cfg = EvolutionConfig(dt=dt, t_final=10.0, snapshot_stride=int(round(0.01 / dt)),
                              virial_radii=(10.0,), flux_radii=(10.0, 20.0))
        out[dt] = (run(g, 0.5 * gs.Q.values, P312, cfg), time.perf_counter() - t0)
    return g, gs, out


def _drifts(tr):
    """(max mass drift, end-of-run energy drift, max energy excursion), all relative."""
    M, E = np.asarray(tr.mass), np.asarray(tr.energy)
    dE = np.abs(E - E[0]) / abs(E[0])
    return np.max(np.abs(M - M[0])) / M[0], dE[-1], np.max(dE)


def test_conservation(report, conservation_runs):
    _, _, runs = conservation_runs
    (ra, ta), (rb, tb) = runs[1e-3], runs[5e-4]
    ma, ea, xa = _drifts(ra)
    mb, eb, xb = _drifts(rb)
    ratio = ea / eb
    ok = ra.termination == "horizon" and ma < 1e-10 and ea < 1e-5 and 3 <= ratio <= 5 and ta + tb < 120
    report(3, "conservation", ok,
           f"mass drift {ma:.1e}, energy drift {ea:.2e} (dt/2: {eb:.2e}, ratio {ratio:.2f}), "
           f"max energy excursion {xa:.1e} in the initial layer (dt/2: {xb:.1e}), {ta + tb:.0f} s")


def test_virial_identity(report, conservation_runs):
    _, _, runs = conservation_runs
    (ra, ta), (rb, tb) = runs[1e-3], runs[5e-4]
    da = D.virial_identity_check(ra, 10.0)
    db = D.virial_identity_check(rb, 10.0)
    ua, ub = D.boundary_free_time(ra, 10.0), D.boundary_free_time(rb, 10.0)
    until = min(ua, ub)
    wa = D.virial_identity_check(ra, 10.0, skip=0.25, until=until)
    wb = D.virial_identity_check(rb, 10.0, skip=0.25, until=until)

    t0 = time.perf_counter()
    g = build_grid(2 ** 17, 16.0, 3.0)
    gs = solve_ground_state(P312, g)
    sw = run(g, gs.Q.values, P312, EvolutionConfig(dt=1e-3, t_final=0.1, snapshot_stride=10,
                                                    flux_radii=()))
    G = gs.grad_norm ** 2
    z = float(np.max(np.abs(sw.Z[10.0]))) / G
    rhs = float(np.max(np.abs(sw.dZdt_rhs[10.0]))) / G
    t_sw = time.perf_counter() - t0

    whole = da < 1e-3 and 3 <= da / db <= 5
    standing = z < 1e-6 and rhs < 1e-6
    report(4, "virial identity", whole and standing and ta + tb + t_sw < 120,
           f"whole run defect {da:.1e} (dt/2: {db:.1e}, ratio {da / db:.2f}); "
           f"wall-free window [0.25, {until:.2f}] {wa:.1e} (dt/2: {wb:.1e}); "
           f"standing wave |Z| {z:.1e}, |rhs| {rhs:.1e} of ||grad Q||^2")


# ---------------------------------------------------------------- 5

def test_commutator_and_flux(report, conservation_runs, sweep):
    g, gs, runs = conservation_runs
    tr = runs[1e-3][0]
    cut = D.build_cutoff(10.0, g)
    comm = max(D.commutator_defect(g, u, cut) for u in (0.5 * gs.Q.values, tr.final.values))
    flux = max(D.mass_flux_check(tr, R) for R in (10.0, 20.0))
    half = sweep["rows"][0.5].trajectory
    scaled = [D.flux_bound(half, R) for R in (10.0, 20.0, 40.0)]
    spread = max(scaled) / min(scaled)
    ok = comm < 1e-6 and flux < 1e-3 and spread <= 1.5
    report(5, "commutator and mass flux", ok,
           f"commutator {comm:.1e}, flux defect {flux:.1e}, R*flux/M over R=10,20,40 "
           f"{', '.join(f'{s:.3f}' for s in scaled)} (spread {spread:.3f})")


# ---------------------------------------------------------------- 6-9

@pytest.fixture(scope="module")
def sweep():
    g = build_grid(16384, 160.0, 3.0)
    gs = solve_ground_state(P312, g)
    cfg = EvolutionConfig(dt=2e-3, t_final=40.0, snapshot_stride=25, sponge_on=True,
                          virial_radii=(), flux_radii=(10.0, 20.0, 40.0))
    crit = classify.Criteria(sample_times=(10.0, 20.0, 30.0, 40.0))
    t0 = time.perf_counter()
    rows = classify.threshold_sweep(gs, SCALES, P312, cfg, crit, keep_trajectories=True)
    return {"rows": {r.c: r for r in rows}, "time": time.perf_counter() - t0}


def test_morawetz(report, sweep):
    tr = sweep["rows"][0.5].trajectory
    R = 10.0
    vals = {T: D.morawetz_average(tr, R, T, P312) for T in (10.0, 20.0, 40.0)}
    ratios = np.array([a / b for a, b in vals.values()])
    C = float(np.exp(np.mean(np.log(ratios))))  # single fitted constant
    halved = vals[40.0][0] <= 0.5 * vals[10.0][0]
    bounded = all(a <= 10 * C * b for a, b in vals.values()) and ratios.max() / ratios.min() <= 10
    report(6, "Morawetz", halved and bounded,
           "averages " + ", ".join(f"T={T:.0f}: {a:.2e}" for T, (a, _) in vals.items())
           + f"; fitted constant {C:.2e}, ratio spread {ratios.max() / ratios.min():.2f}")


def test_dispersive_decay(report):
    t0 = time.perf_counter()
    fits = [cli.decay_fit(N, 16384, 320.0, 0.01, 2.0, 20.0) for N in (3.0, 2.5)]
    dt = time.perf_counter() - t0
    ok = all(f["pass"] for f in fits) and dt < 60
    report(7, "dispersive decay", ok,
           ", ".join(f"N={f['N']}: slope {f['slope']:.4f} ({100 * f['relative_error']:.1f}%)"
                     for f in fits) + f"; {dt:.0f} s")


def test_threshold_dichotomy(report, sweep):
    rows = sweep["rows"]
    below = [rows[c] for c in SCALES if c < 1]
    ok = (all(r.verdict == "ScatteringConsistent" for r in below)
          and not any(r.verdict == "BlowUp" for r in below)
          and all(r.below_me and r.below_grad for r in below)
          and rows[3.0].verdict == "BlowUp" and sweep["time"] < 600)
    report(8, "threshold dichotomy", ok,
           ", ".join(f"c={c:g}: {rows[c].verdict}" for c in SCALES) + f"; {sweep['time']:.0f} s")


def test_energy_evacuation(report, sweep):
    tr = sweep["rows"][0.5].trajectory
    scan = classify.energy_evacuation_scan(tr, P312)
    ok = classify.non_increasing_tail(scan, 3)
    report(9, "energy evacuation", ok,
           ", ".join(f"T={e.T:.0f} R={e.R:.3f}: {e.ball_integral:.2e}" for e in scan))


# ---------------------------------------------------------------- 10

def test_determinism(report, tmp_path):
    cfg = {"model": {"N": 3, "b": 1, "p": 2}, "grid": {"n": 2048, "r_max": 40},
           "evolve": {"dt": 5e-3, "t_final": 2.0, "snapshot_stride": 10}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    bodies = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["evolve", "--config", str(path), "--out", str(out)]) == 0
        bodies.append(tuple((out / f).read_bytes() for f in ("run_trajectory.csv", "run_final_field.csv")))
    same = bodies[0] == bodies[1]
    report(10, "determinism", same, f"trajectory and final-field CSV bodies identical: {same}")
