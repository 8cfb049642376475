"""Ground state of  Delta phi - phi + r^{-b} phi^p = 0.

The amplitude phi(0) is found by shooting on the radial ODE, vectorized over
a batch of trial amplitudes (multisection). The shot profile is moved onto the
grid and polished by Newton's method on the discrete equation, so the
returned profile solves the same discrete problem the evolution uses.

A fixed-point renormalization iteration is provided as an independent
oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .exponents import ExponentError, ModelParams, intercritical_check
from .grid import RadialField, RadialGrid, grad_norm_sq, integrate, radial_laplacian


class NoConvergence(RuntimeError):
    pass


class ResolutionTooCoarse(RuntimeError):
    pass


@dataclass
class GroundState:
    Q: RadialField
    mass: float
    energy: float
    grad_norm: float
    me_threshold: float
    grad_threshold: float
    shoot_value: float
    residual: float
    params: ModelParams

    @property
    def grid(self) -> RadialGrid:
        return self.Q.grid

    def summary(self) -> dict:
        p = self.params
        return {
            "N": p.N, "b": p.b, "p": p.p, "s_c": p.s_c,
            "mass": self.mass, "energy": self.energy, "grad_norm": self.grad_norm,
            "me_threshold": self.me_threshold, "grad_threshold": self.grad_threshold,
            "shoot_value": self.shoot_value, "residual": self.residual,
        }


def series_start(a, r0, N, b, p):
    """Two-term expansion of the regular solution near the origin.

    phi ~ a (1 - a^{p-1} r^{2-b}/((2-b)(N-b)) + r^2/(2N)).
    """
    c1 = a ** (p - 1) / ((2 - b) * (N - b))
    phi = a * (1 - c1 * r0 ** (2 - b) + r0 ** 2 / (2 * N))
    dphi = a * (-(2 - b) * c1 * r0 ** (1 - b) + r0 / N)
    return phi, dphi


def _ode_mesh(r0: float, r_end: float, h_max: float) -> np.ndarray:
    # geometric near the origin (explicit RK4 needs h << r there), uniform after
    pts = [r0]
    r = r0
    while r < r_end:
        r = r + min(0.25 * r, h_max)
        pts.append(r)
    return np.array(pts)


def _shoot_batch(amps, mesh, N, b, p):
    """RK4 for a batch of amplitudes.

    Returns (outcome, profiles): outcome is -1 where the profile crossed zero,
    +1 where it turned upward, 0 if neither happened on the mesh. Profiles
    are frozen (NaN) after the event.
    """
    amps = np.asarray(amps, dtype=float)
    phi, dphi = series_start(amps, mesh[0], N, b, p)
    out = np.zeros(amps.size, dtype=int)
    prof = np.full((mesh.size, amps.size), np.nan)
    prof[0] = phi

    def f(r, y, dy):
        return dy, y - r ** (-b) * np.abs(y) ** (p - 1) * y - (N - 1) / r * dy

    alive = np.ones(amps.size, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        _rk4_march(f, mesh, phi, dphi, alive, out, prof)
    return out, prof


def _rk4_march(f, mesh, phi, dphi, alive, out, prof):
    for k in range(mesh.size - 1):
        r, h = mesh[k], mesh[k + 1] - mesh[k]
        a1, b1 = f(r, phi, dphi)
        a2, b2 = f(r + h / 2, phi + h / 2 * a1, dphi + h / 2 * b1)
        a3, b3 = f(r + h / 2, phi + h / 2 * a2, dphi + h / 2 * b2)
        a4, b4 = f(r + h, phi + h * a3, dphi + h * b3)
        phi = phi + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        dphi = dphi + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        down = alive & (phi < 0)
        up = alive & ~down & (dphi > 0)
        out[down] = -1
        out[up] = 1
        alive &= ~(down | up)
        prof[k + 1, alive] = phi[alive]
        if not alive.any():
            break


def shoot(params: ModelParams, r0: float, r_end: float, h_max: float = 0.01,
          rtol: float = 1e-12, batch: int = 32):
    """Bracket and refine the ground-state amplitude.

    Returns (amplitude, mesh, profile) where the profile is the lower
    bracket's trajectory, trusted up to the radius where the two bracketing
    trajectories separate.

    Raises:
        NoConvergence: if no sign change is found for amplitudes in [1e-3, 1e3].
    """
    N, b, p = params.N, params.b, params.p
    mesh = _ode_mesh(r0, r_end, h_max)
    amps = np.geomspace(1e-3, 1e3, batch * 2 + 1)
    out, _ = _shoot_batch(amps, mesh, N, b, p)
    cross = np.nonzero(out == -1)[0]
    if cross.size == 0 or cross[0] == 0:
        raise NoConvergence("no bracketing amplitude in [1e-3, 1e3]")
    lo, hi = amps[cross[0] - 1], amps[cross[0]]
    while hi - lo > rtol * hi:
        trial = np.linspace(lo, hi, batch + 2)[1:-1]
        out, _ = _shoot_batch(trial, mesh, N, b, p)
        k = np.nonzero(out == -1)[0]
        new_hi = trial[k[0]] if k.size else hi
        below = trial[trial < new_hi]
        new_lo = below[-1] if below.size else lo
        if (new_lo, new_hi) == (lo, hi):
            break
        lo, hi = new_lo, new_hi
    _, prof = _shoot_batch(np.array([lo, hi]), mesh, N, b, p)
    a_lo, a_hi = prof[:, 0], prof[:, 1]
    sep = ~(np.abs(a_lo - a_hi) <= 1e-3 * np.abs(a_lo))
    k_cut = int(np.argmax(sep)) if sep.any() else mesh.size
    k_cut = max(k_cut - 1, 2)
    return lo, mesh[:k_cut], a_lo[:k_cut]


def _profile_on_grid(grid: RadialGrid, mesh, prof, N) -> np.ndarray:
    r = grid.nodes
    cut = mesh[-1]
    spline = CubicSpline(mesh, prof)
    u = np.empty(grid.n)
    inside = r <= cut
    u[inside] = spline(r[inside])
    # decaying tail e^{-r} r^{-(N-1)/2} matched at the last trusted radius
    rr = r[~inside]
    u[~inside] = prof[-1] * (cut / rr) ** ((N - 1) / 2) * np.exp(-(rr - cut))
    return u


def _residual(grid, u, V, p):
    return radial_laplacian(grid, u) - u + V * np.abs(u) ** (p - 1) * u


def newton_polish(grid: RadialGrid, params: ModelParams, u: np.ndarray,
                  rtol: float = 1e-13, maxit: int = 50):
    """Newton iteration on the discrete ground-state equation.

    Returns (u, relative L^2 residual, iterations).
    """
    p = params.p
    V = grid.nodes ** (-params.b)
    sub, diag, sup = grid.bands()
    ab = np.zeros((3, grid.n))
    ab[0, 1:] = sup
    ab[2, :-1] = sub
    res = math.inf
    for it in range(maxit):
        F = _residual(grid, u, V, p)
        res = math.sqrt(integrate(grid, F ** 2) / integrate(grid, u ** 2))
        if res < rtol:
            return u, res, it
        ab[1] = diag - 1 + p * V * np.abs(u) ** (p - 1)
        step = solve_banded((1, 1), ab, F)
        u = u - step
        if not np.all(np.isfinite(u)):
            break
        if np.max(np.abs(step)) < 1e-15 * np.max(np.abs(u)):
            F = _residual(grid, u, V, p)
            return u, math.sqrt(integrate(grid, F ** 2) / integrate(grid, u ** 2)), it + 1
    return u, res, maxit


def renormalization_oracle(grid: RadialGrid, params: ModelParams, tol: float = 1e-13,
                           maxit: int = 5000):
    """Fixed-point renormalization: u <- M^{p/(p-1)} (1 - L)^{-1}[r^{-b} u^p].

    M = <(1-L)u, u> / <r^{-b}u^p, u> is the stabilizing factor. Starts from a
    Gaussian and returns (u, iterations).
    """
    p = params.p
    V = grid.nodes ** (-params.b)
    sub, diag, sup = grid.bands()
    ab = np.zeros((3, grid.n))
    ab[0, 1:] = -sup
    ab[1] = 1 - diag
    ab[2, :-1] = -sub
    u = 2 * np.exp(-grid.nodes ** 2 / 2)
    for it in range(maxit):
        nl = V * np.abs(u) ** (p - 1) * u
        M = integrate(grid, (u - radial_laplacian(grid, u)) * u) / integrate(grid, nl * u)
        un = M ** (p / (p - 1)) * solve_banded((1, 1), ab, nl)
        d = np.max(np.abs(un - u))
        u = un
        if d < tol * np.max(np.abs(u)):
            return u, it + 1
    raise NoConvergence(f"renormalization iteration did not converge in {maxit} steps")


def threshold_constants(gs: GroundState, params: ModelParams | None = None) -> tuple[float, float]:
    """(M[Q]^{(1-s_c)/s_c} E[Q],  ||Q||^{(1-s_c)/s_c} ||grad Q||)."""
    params = params or gs.params
    e = (1 - params.s_c) / params.s_c
    return gs.mass ** e * gs.energy, math.sqrt(gs.mass) ** e * gs.grad_norm


def solve_ground_state(params: ModelParams, grid: RadialGrid, tol: float = 1e-8,
                       strict: bool = True) -> GroundState:
    """Compute Q on ``grid`` with relative L^2 residual at most ``tol``.

    Args:
        strict: reject parameters outside the intercritical range. With
            strict=False the solver still runs, which is useful to look at
            what goes wrong there.

    Raises:
        ExponentError: non-intercritical params with strict=True.
        NoConvergence: shooting bracket not found.
        ResolutionTooCoarse: Newton cannot bring the residual under tol, or
            the polished profile is not positive and decaying.
    """
    if strict and not intercritical_check(params):
        raise ExponentError(f"(N, b, p) = ({params.N}, {params.b}, {params.p}) is not intercritical")
    if grid.N != params.N:
        raise ValueError("grid dimension does not match params")
    N, b, p = params.N, params.b, params.p
    amp, mesh, prof = shoot(params, grid.nodes[0], grid.r_max)
    u0 = _profile_on_grid(grid, mesh, prof, N)
    u, res, _ = newton_polish(grid, params, u0)
    if not (res <= tol) or not np.all(np.isfinite(u)):
        raise ResolutionTooCoarse(f"residual {res:.3e} above tolerance {tol:.1e} at n = {grid.n}")
    if np.min(u) <= 0:
        raise ResolutionTooCoarse("polished profile is not positive; domain too small?")
    V = grid.nodes ** (-b)
    mass = integrate(grid, u ** 2)
    G = grad_norm_sq(grid, u)
    P = integrate(grid, V * u ** (p + 1))
    gs = GroundState(
        Q=RadialField(grid, u), mass=mass, energy=0.5 * G - P / (p + 1),
        grad_norm=math.sqrt(G), me_threshold=0.0, grad_threshold=0.0,
        shoot_value=float(amp), residual=res, params=params,
    )
    if 0 < params.s_c < 1:
        gs.me_threshold, gs.grad_threshold = threshold_constants(gs, params)
    else:
        gs.me_threshold = gs.grad_threshold = math.nan
    return gs


def pohozaev_residuals(gs: GroundState, params: ModelParams | None = None) -> tuple[float, float]:
    """Normalized residuals of the two integral identities satisfied by Q.

    (i)  G + M - P = 0
    (ii) (N-2)/2 G + N/2 M - (N-b)/(p+1) P = 0
    with G = int|grad Q|^2, M = int Q^2, P = int r^{-b} Q^{p+1}; both are
    divided by P.
    """
    params = params or gs.params
    N, b, p = params.N, params.b, params.p
    grid, u = gs.grid, gs.Q.values
    G = grad_norm_sq(grid, u)
    M = integrate(grid, np.abs(u) ** 2)
    P = integrate(grid, grid.nodes ** (-b) * np.abs(u) ** (p + 1))
    r1 = (G + M - P) / P
    r2 = ((N - 2) / 2 * G + N / 2 * M - (N - b) / (p + 1) * P) / P
    return r1, r2
