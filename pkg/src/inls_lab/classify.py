"""Scattering / blow-up verdicts, threshold sweeps and energy evacuation.

A run is labelled ScatteringConsistent only when three pieces of evidence
agree: the gradient stays bounded, the local mass in B(0, R_crit) drops below
eps^2 at some snapshot, and the inverse-flow Cauchy differences of the
pulled-back states decrease. BlowUp is reserved for runs stopped by the
gradient-growth detector. Everything else is Undetermined.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import threshold_position
from .evolve import EvolutionConfig, TrajectoryRecord, linear_propagate, run
from .exponents import ModelParams
from .grid import RadialField, RadialGrid

LABELS = ("ScatteringConsistent", "BlowUp", "Undetermined")
SWEEP_COLUMNS = ("c", "below_me", "below_grad", "verdict", "peak_grad_ratio", "final_local_mass")


@dataclass
class Criteria:
    R_crit: float = 10.0
    epsilon_sq_fraction: float = 0.01   # eps^2 as a fraction of M[u0]
    h1_growth_limit: float = 2.0        # bounded H^1: max ||grad u|| / ||grad u0||
    sample_times: tuple | None = None   # None: every stored field with t > 0
    observation_radius: float | None = None


@dataclass
class Verdict:
    label: str
    local_mass_tail: float
    cauchy_diffs: list
    growth_factor: float
    u_plus_estimate: RadialField | None = None
    reasons: list = field(default_factory=list)

    @property
    def evidence(self) -> dict:
        return {"local_mass_tail": self.local_mass_tail,
                "cauchy_diffs": list(self.cauchy_diffs),
                "growth_factor": self.growth_factor}


def _h1_within(grid: RadialGrid, w: np.ndarray, R: float | None) -> float:
    """H^1 norm of w over the first nodes inside r <= R (whole grid if R is None)."""
    k = grid.n if R is None else grid.index_within(R)
    d = np.append(w[1:], 0.0) - w
    m = np.dot(grid.weights[:k], np.abs(w[:k]) ** 2)
    g = grid.omega_N * np.dot(grid.faces[:k], np.abs(d[:k]) ** 2) / grid.dr
    return float(math.sqrt(m + g))


def default_observation_radius(traj: TrajectoryRecord) -> float | None:
    """r_max/4 when the run used a sponge, otherwise the whole grid."""
    return traj.grid.r_max / 4 if traj.cfg.sponge_on else None


def scattering_state_estimate(traj: TrajectoryRecord, sample_times=None,
                              observation_radius: float | None = None):
    """Pull snapshots back by the free flow: v_k = e^{-i t_k Delta} u(t_k).

    Returns (u_plus, cauchy_diffs) with u_plus = v_K for the last sample and
    diffs[k] = ||v_{k+1} - v_k||_{H^1}. Since the discrete free flow is an
    H^1 isometry, each difference is evaluated as
    ||e^{-i(t_{k+1}-t_k)Delta} u(t_{k+1}) - u(t_k)||, which needs only a short
    pullback. The pullbacks use the run's dt so that the discrete free flow is
    the one embedded in the integrator.

    With a sponge the absorbed radiation is missing from the later snapshot,
    so the difference is measured on the ball r <= observation_radius
    (r_max/4 by default) that the outgoing waves leave long before they reach
    the layer.
    """
    ts = sorted(traj.fields) if sample_times is None else sorted(float(t) for t in sample_times)
    ts = [t for t in ts if t > 0]
    if len(ts) < 3:
        raise ValueError(f"need at least three sample times inside the run, got {ts}")
    if observation_radius is None:
        observation_radius = default_observation_radius(traj)
    g, dt = traj.grid, traj.cfg.dt
    fields = [traj.field_at(t) for t in ts]
    diffs = []
    for (a, ua), (b, ub) in zip(zip(ts, fields), zip(ts[1:], fields[1:])):
        w = linear_propagate(g, ub, -(b - a), dt_max=dt) - ua
        diffs.append(_h1_within(g, w, observation_radius))
    u_plus = linear_propagate(g, fields[-1], -ts[-1], dt_max=dt)
    return RadialField(g, u_plus), diffs


def _strictly_decreasing(x) -> bool:
    return len(x) >= 2 and all(b < a for a, b in zip(x, x[1:]))


def classify_trajectory(traj: TrajectoryRecord, criteria: Criteria | None = None) -> Verdict:
    """Apply the verdict rules to a finished trajectory."""
    c = criteria or Criteria()
    g0 = traj.grad_norm[0]
    growth = max(traj.grad_norm) / g0 if g0 > 0 else 1.0
    if c.R_crit not in traj.local_mass:
        raise ValueError(f"trajectory has no local mass recorded at R = {c.R_crit}")
    M0 = traj.mass[0]
    lm = np.asarray(traj.local_mass[c.R_crit])
    frac = lm / M0 if M0 > 0 else np.zeros_like(lm)
    tail = float(frac[-1])
    if traj.termination == "blowup-stop":
        return Verdict("BlowUp", tail, [], growth, reasons=["gradient growth stop"])
    reasons = []
    bounded = traj.termination == "horizon" and growth <= c.h1_growth_limit
    if not bounded:
        reasons.append(f"H1 not bounded (termination {traj.termination}, growth {growth:.3g})")
    small = bool(np.any(frac <= c.epsilon_sq_fraction))
    if not small:
        reasons.append(f"local mass fraction stays above {c.epsilon_sq_fraction}")
    diffs, u_plus = [], None
    try:
        u_plus, diffs = scattering_state_estimate(traj, c.sample_times, c.observation_radius)
    except (ValueError, KeyError) as exc:
        reasons.append(f"no Cauchy test: {exc}")
    decreasing = _strictly_decreasing(diffs[-3:])
    if diffs and not decreasing:
        reasons.append("Cauchy differences not decreasing")
    if bounded and small and decreasing:
        return Verdict("ScatteringConsistent", tail, diffs, growth, u_plus)
    return Verdict("Undetermined", tail, diffs, growth, reasons=reasons)


# ---------------------------------------------------------------- evacuation

def evacuation_radius(T: float, params: ModelParams) -> float:
    """R = T^{N/(3N-2+b)}."""
    N, b = params.N, params.b
    return float(T ** (N / (3 * N - 2 + b)))


@dataclass
class EvacuationEntry:
    T: float
    R: float
    ball_integral: float
    valid: bool


def energy_evacuation_scan(traj: TrajectoryRecord, params: ModelParams,
                           T_list=(5.0, 10.0, 20.0, 40.0)) -> list[EvacuationEntry]:
    """min over t in [T_{n-1}, T_n] of int_{r <= R_n}|u(t)|^{p+1} with R_n = T_n^{N/(3N-2+b)}.

    The ball integrals are read from the snapshots, so every R_n must be in
    the run's ball_radii (sweep_config adds them). T_0 = 0 for the first entry.
    Entries with R_n > r_max, or whose window holds no snapshot, are invalid.
    """
    t = np.asarray(traj.times)
    out, lo = [], 0.0
    for T in T_list:
        R = evacuation_radius(T, params)
        key = next((k for k in traj.ball_power if math.isclose(k, R, rel_tol=1e-12)), None)
        if key is None:
            raise ValueError(f"ball integral at R = {R} was not recorded")
        m = (t >= lo - 1e-9) & (t <= T + 1e-9)
        ok = R <= traj.grid.r_max and bool(m.any()) and t[-1] >= T - 1e-9
        val = float(np.min(np.asarray(traj.ball_power[key])[m])) if m.any() else math.nan
        out.append(EvacuationEntry(float(T), R, val, ok))
        lo = T
    return out


def non_increasing_tail(entries: list[EvacuationEntry], k: int = 3) -> bool:
    tail = entries[-k:]
    return all(e.valid for e in tail) and all(b.ball_integral <= a.ball_integral
                                              for a, b in zip(tail, tail[1:]))


# ---------------------------------------------------------------- sweeps

def sweep_config(cfg: EvolutionConfig, params: ModelParams, criteria: Criteria,
                 sample_times=None, T_list=(5.0, 10.0, 20.0, 40.0)) -> EvolutionConfig:
    """Copy of cfg that records what the classifier and the evacuation scan need."""
    if sample_times is None:
        sample_times = criteria.sample_times
    if sample_times is None:
        sample_times = tuple(cfg.t_final * k / 4 for k in (1, 2, 3, 4))
    radii = [evacuation_radius(T, params) for T in T_list if T <= cfg.t_final]
    return replace(
        cfg,
        local_radii=tuple(dict.fromkeys((criteria.R_crit, *cfg.local_radii))),
        ball_radii=tuple(dict.fromkeys((*cfg.ball_radii, *radii))),
        field_times=tuple(sorted(set(cfg.field_times) | set(sample_times))),
    )


@dataclass
class SweepRow:
    c: float
    below_me: bool
    below_grad: bool
    verdict: str
    peak_grad_ratio: float
    final_local_mass: float
    error: str = ""
    details: Verdict | None = None
    trajectory: TrajectoryRecord | None = None

    def as_tuple(self):
        return (self.c, self.below_me, self.below_grad, self.verdict,
                self.peak_grad_ratio, self.final_local_mass)


def _sweep_row(c, gs, params, cfg, criteria, keep) -> SweepRow:
    grid = gs.grid
    u0 = c * gs.Q.values
    th = threshold_position(grid, u0, gs, params)
    try:
        traj = run(grid, u0, params, cfg)
        v = classify_trajectory(traj, criteria)
    except Exception as exc:  # recorded per row; the sweep goes on
        return SweepRow(c, th.below_me, th.below_grad, "Undetermined", math.nan, math.nan,
                        error=f"{type(exc).__name__}: {exc}")
    return SweepRow(c, th.below_me, th.below_grad, v.label, v.growth_factor,
                    v.local_mass_tail, details=v, trajectory=traj if keep else None)


def threshold_sweep(gs, scales, params: ModelParams, cfg: EvolutionConfig,
                    criteria: Criteria | None = None, threads: int = 1,
                    keep_trajectories: bool = False) -> list[SweepRow]:
    """Run u0 = c Q for each c and classify. Rows come back sorted by c.

    below_me / below_grad are the two threshold conditions evaluated at t = 0
    (strict inequalities, so c = 1 is not below). final_local_mass is the
    local mass at R_crit at the last snapshot as a fraction of M[u0].
    """
    criteria = criteria or Criteria()
    cfg = sweep_config(cfg, params, criteria)
    scales = sorted(float(c) for c in scales)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(lambda c: _sweep_row(c, gs, params, cfg, criteria, keep_trajectories),
                               scales))
    else:
        rows = [_sweep_row(c, gs, params, cfg, criteria, keep_trajectories) for c in scales]
    return sorted(rows, key=lambda r: r.c)

