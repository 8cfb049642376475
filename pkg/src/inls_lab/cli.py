"""Command line entry point: ``inls-lab <subcommand> [--config PATH] [--out DIR] [--threads K]``.

Subcommands: ground, evolve, sweep, check, decay. Exit status 0 on success,
1 on a computation error (or a failed check), 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import classify, diagnostics, evolve, exponents, groundstate
from .config import ConfigError, RunConfig, default_config, parse_config
from .grid import build_grid

log = logging.getLogger("inls_lab")

SUBCOMMANDS = ("ground", "evolve", "sweep", "check", "decay")
TRAJECTORY_COLUMNS = ("t", "mass", "energy", "grad_norm", "local_mass", "Z", "dZdt_rhs", "sup_norm")
SEED_ENV = "INLS_LAB_SEED"  # reserved, currently unused


class _Outputs:
    """Temp-then-rename writer that removes everything it wrote on failure."""

    def __init__(self, directory: Path, prefix: str):
        self.dir, self.prefix = directory, prefix
        self.written: list[Path] = []

    def path(self, suffix: str) -> Path:
        return self.dir / f"{self.prefix}_{suffix}"

    def _write(self, suffix: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        dst = self.path(suffix)
        tmp = dst.with_name(dst.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, dst)
        self.written.append(dst)
        return dst

    def csv(self, suffix: str, header, rows) -> Path:
        lines = [",".join(header)]
        lines += [",".join(_cell(x) for x in row) for row in rows]
        return self._write(suffix, "\n".join(lines) + "\n")

    def json(self, suffix: str, obj) -> Path:
        return self._write(suffix, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

    def discard(self):
        for p in self.written:
            p.unlink(missing_ok=True)
        self.written.clear()


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    return "%.16e" % float(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


# ---------------------------------------------------------------- helpers

def _grid(cfg: RunConfig):
    return build_grid(cfg.grid.n, cfg.grid.r_max, cfg.model.N)


def _initial(cfg: RunConfig, grid, gs=None):
    i = cfg.init
    r = grid.nodes
    if i.family == "groundstate-scaled":
        gs = gs or groundstate.solve_ground_state(cfg.params, grid)
        return i.scale * gs.Q.values, gs
    if i.family == "gaussian":
        return i.scale * np.exp(-r ** 2 / (2 * i.width ** 2)), gs
    data = np.loadtxt(i.path, delimiter=",", skiprows=1, ndmin=2)
    re = np.interp(r, data[:, 0], data[:, 1], right=0.0)
    im = np.interp(r, data[:, 0], data[:, 2], right=0.0) if data.shape[1] > 2 else 0.0
    return i.scale * (re + 1j * im), gs


def _evolution_config(cfg: RunConfig, **kw) -> evolve.EvolutionConfig:
    R = cfg.criteria.R_crit
    base = dict(dt=cfg.evolve.dt, t_final=cfg.evolve.t_final,
                snapshot_stride=cfg.evolve.snapshot_stride, sponge_on=cfg.grid.sponge_on,
                local_radii=(R,), virial_radii=(R,), flux_radii=(R,), ball_radii=(R,))
    base.update(kw)
    return evolve.EvolutionConfig(**base)


def _criteria(cfg: RunConfig) -> classify.Criteria:
    return classify.Criteria(R_crit=cfg.criteria.R_crit,
                             epsilon_sq_fraction=cfg.criteria.epsilon_sq_fraction)


# ---------------------------------------------------------------- subcommands

def cmd_ground(cfg: RunConfig, out: _Outputs, threads: int) -> int:
    grid = _grid(cfg)
    gs = groundstate.solve_ground_state(cfg.params, grid)
    out.csv("ground.csv", ("r", "Q"), zip(grid.nodes, gs.Q.values))
    rec = {k: v for k, v in gs.summary().items() if k != "shoot_value"}
    rec["pohozaev"] = list(groundstate.pohozaev_residuals(gs))
    rec["config"] = cfg.echo()
    out.json("ground.json", rec)
    return 0


def cmd_evolve(cfg: RunConfig, out: _Outputs, threads: int) -> int:
    grid = _grid(cfg)
    u0, _ = _initial(cfg, grid)
    traj = evolve.run(grid, u0, cfg.params, _evolution_config(cfg))
    s = traj.series()
    out.csv("trajectory.csv", TRAJECTORY_COLUMNS, zip(*(s[k] for k in TRAJECTORY_COLUMNS)))
    u = traj.final.values
    out.csv("final_field.csv", ("r", "re_u", "im_u"), zip(grid.nodes, u.real, u.imag))
    M, E = np.asarray(traj.mass), np.asarray(traj.energy)
    out.json("summary.json", {
        "termination": traj.termination, "steps": traj.steps, "t_end": traj.times[-1],
        "mass_drift": float(abs(M[-1] - M[0]) / M[0]) if M[0] else 0.0,
        "energy_drift": float(abs(E[-1] - E[0]) / abs(E[0])) if E[0] else 0.0,
        "peak_grad_ratio": max(traj.grad_norm) / traj.grad_norm[0] if traj.grad_norm[0] else 1.0,
        "config": cfg.echo(),
    })
    return 0


def cmd_sweep(cfg: RunConfig, out: _Outputs, threads: int) -> int:
    grid = _grid(cfg)
    gs = groundstate.solve_ground_state(cfg.params, grid)
    ecfg = _evolution_config(cfg, virial_radii=(), flux_radii=())
    rows = classify.threshold_sweep(gs, cfg.sweep.scales, cfg.params, ecfg,
                                    _criteria(cfg), threads=threads)
    out.csv("sweep.csv", classify.SWEEP_COLUMNS, (r.as_tuple() for r in rows))
    for r in rows:
        if r.error:
            log.warning("row c=%g failed: %s", r.c, r.error)
    return 0


def _check(value, tol, ok=None) -> dict:
    value = float(value)
    return {"value": value, "tolerance": tol,
            "pass": bool(ok if ok is not None else (math.isfinite(value) and value < tol))}


def run_checks(cfg: RunConfig) -> dict:
    """Identity and inequality suite on the configured model and initial data.

    Short run of length min(t_final, 2) for the dynamic identities.
    """
    P = cfg.params
    grid = _grid(cfg)
    R = cfg.criteria.R_crit
    res = {}
    table = exponents.exponent_table(P)
    res["exponent_defect"] = _check(max(abs(row[4]) for row in table), 1e-12)
    res["intercritical"] = _check(P.s_c, 1.0, ok=exponents.intercritical_check(P) == (0 < P.s_c < 1))
    gs = groundstate.solve_ground_state(P, grid)
    res["ground_residual"] = _check(gs.residual, 1e-8)
    res["ground_energy_positive"] = _check(gs.energy, 0.0, ok=gs.energy > 0)
    r1, _ = groundstate.pohozaev_residuals(gs)
    res["pohozaev_i"] = _check(abs(r1), 1e-6)
    u0, _ = _initial(cfg, grid, gs)
    cut = diagnostics.build_cutoff(R, grid)
    res["commutator"] = _check(diagnostics.commutator_defect(grid, u0, cut), 1e-6)
    rep = diagnostics.inequality_suite(grid, u0, P, gs, R_cut=R)
    # R^{N-1}|f(R)|^2 <= ||f||_{H^1}^2 / omega_N for radial f
    res["strauss_ratio"] = _check(rep.strauss_max, grid.omega_N ** -0.5,
                                  ok=rep.strauss_max <= grid.omega_N ** -0.5)
    res["coercivity_margin"] = _check(rep.coercivity_delta_prime, 0.0,
                                      ok=rep.coercivity_delta_prime > 0 or not rep.grad_ratio < 1)
    T = min(cfg.evolve.t_final, 2.0)
    ecfg = _evolution_config(cfg, t_final=T, snapshot_stride=max(1, int(round(0.01 / cfg.evolve.dt))))
    traj = evolve.run(grid, u0, P, ecfg)
    M, E = np.asarray(traj.mass), np.asarray(traj.energy)
    res["mass_drift"] = _check(abs(M[-1] - M[0]) / M[0], 1e-10)
    res["energy_drift"] = _check(abs(E[-1] - E[0]) / abs(E[0]), 1e-5)
    # whole-space identity: after the initial layer, before radiation reaches the wall
    until = diagnostics.boundary_free_time(traj, R)
    res["virial_identity"] = _check(
        diagnostics.virial_identity_check(traj, R, skip=min(0.25, until / 2), until=until), 1e-3)
    res["mass_flux"] = _check(diagnostics.mass_flux_check(traj, R), 1e-3)
    bound = (math.pi ** (grid.N / 2) / math.gamma(grid.N / 2 + 1)) ** ((P.p - 1) / (P.p + 1))
    h = max(diagnostics.holder_ratio(grid, f, R, P.p) for f in (u0, traj.final.values))
    res["holder"] = _check(h, bound, ok=h <= bound * (1 + 1e-12))
    return res


def exponent_report(cfg: RunConfig) -> str:
    P = cfg.params
    lines = [f"N={P.N:g} b={P.b:g} p={P.p:g} s_c={P.s_c:.6g} theta={P.theta:g} delta={P.delta:g}",
             f"{'pair':<16}{'q':>14}{'r':>14}{'s':>10}{'defect':>12}"]
    for name, q, r, s_, d in exponents.exponent_table(P):
        lines.append(f"{name:<16}{q:>14.8g}{r:>14.8g}{s_:>10.4g}{d:>12.2e}")
    alpha, gamma = exponents.scattering_constants(P)
    lines.append(f"alpha={alpha:.8g} gamma={gamma:.8g}")
    return "\n".join(lines) + "\n"


def cmd_check(cfg: RunConfig, out: _Outputs, threads: int, target: str | None = None) -> int:
    if target == "exponents":
        text = exponent_report(cfg)
        out._write("exponents.txt", text)
        sys.stdout.write(text)
        return 0
    if target is not None:
        raise ConfigError(f"unknown check target {target!r}; expected 'exponents'")
    res = run_checks(cfg)
    out.json("check.json", {"checks": res, "config": cfg.echo()})
    bad = [k for k, v in res.items() if not v["pass"]]
    for k in bad:
        log.warning("check %s failed: value %.3e, tolerance %.1e", k, res[k]["value"], res[k]["tolerance"])
    return 1 if bad else 0


def decay_fit(N: float, n: int, r_max: float, dt: float, t_start: float, t_end: float,
              samples: int = 12) -> dict:
    """Log-log slope of sup|e^{it Delta} e^{-r^2/2}| over [t_start, t_end]."""
    grid = build_grid(n, r_max, N)
    ts = np.geomspace(t_start, t_end, samples)
    u = evolve.linear_propagate(grid, np.exp(-grid.nodes ** 2 / 2), ts[0], dt_max=dt)
    sup = [np.max(np.abs(u))]
    for a, b in zip(ts, ts[1:]):
        u = evolve.linear_propagate(grid, u, b - a, dt_max=dt)
        sup.append(np.max(np.abs(u)))
    slope = float(np.polyfit(np.log(ts), np.log(sup), 1)[0])
    target = -N / 2
    rel = abs(slope - target) / abs(target)
    return {"N": N, "slope": slope, "target": target, "relative_error": rel, "pass": rel < 0.1,
            "times": ts.tolist(), "sup_norm": [float(x) for x in sup]}


def cmd_decay(cfg: RunConfig, out: _Outputs, threads: int) -> int:
    d = cfg.decay
    fits = [decay_fit(N, d.n, d.r_max, d.dt, d.t_start, d.t_end) for N in d.dims]
    out.json("decay.json", {"fits": fits, "config": cfg.echo()})
    return 0 if all(f["pass"] for f in fits) else 1


_DISPATCH = {"ground": cmd_ground, "evolve": cmd_evolve, "sweep": cmd_sweep,
             "check": cmd_check, "decay": cmd_decay}


def dispatch(subcommand: str, cfg: RunConfig, out_dir=None, threads: int = 1,
             target: str | None = None) -> int:
    if subcommand not in _DISPATCH:
        log.error("unknown subcommand %r; expected one of %s", subcommand, ", ".join(SUBCOMMANDS))
        return 2
    out = _Outputs(Path(out_dir or cfg.output.directory), cfg.output.prefix)
    try:
        if subcommand == "check":
            return cmd_check(cfg, out, threads, target)
        if target is not None:
            raise ConfigError(f"{subcommand} takes no target")
        return _DISPATCH[subcommand](cfg, out, threads)
    except ConfigError as exc:
        out.discard()
        log.error("configuration error: %s", exc)
        return 2
    except Exception as exc:
        out.discard()
        log.error("%s failed: %s: %s", subcommand, type(exc).__name__, exc)
        return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="inls-lab", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", help=" | ".join(SUBCOMMANDS))
    ap.add_argument("target", nargs="?", help="check only: 'exponents' prints the exponent table")
    ap.add_argument("--config", help="JSON run configuration (defaults: N=3, b=1, p=2)")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--threads", type=int, default=1, help="concurrent sweep rows")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    if args.subcommand not in SUBCOMMANDS:
        log.error("unknown subcommand %r; expected one of %s", args.subcommand, ", ".join(SUBCOMMANDS))
        return 2
    try:
        cfg = parse_config(args.config) if args.config else default_config()
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    if args.threads < 1:
        log.error("--threads must be positive")
        return 2
    return dispatch(args.subcommand, cfg, args.out, args.threads, args.target)


if __name__ == "__main__":
    sys.exit(main())
