"""Functionals, identities and inequalities evaluated on radial fields.

Conventions: fields are sampled on a RadialGrid; ``u`` may be a RadialField
or a plain array. Radial derivatives use central differences (even
reflection at the origin, zero ghost at the edge) except for the Dirichlet
form, which uses the face differences of the discrete Laplacian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .exponents import ModelParams
from .grid import (RadialGrid, _vals, ball_integrate, grad_norm_sq, integrate,
                   radial_derivative, sup_beyond)


# septic smoothstep on [0, 1]: value 0 -> 1, first three derivatives vanish at both ends
_SMOOTH = Polynomial([0, 0, 0, 0, 35, -84, 70, -20])
# bump 140 t^3 (1-t)^3, unit integral on [0, 1]
_BUMP = Polynomial([0, 0, 0, 140]) * Polynomial([1, -1]) ** 3


def conserved_quantities(grid: RadialGrid, u, params: ModelParams) -> tuple[float, float]:
    """(M, E) with E = 1/2 int|grad u|^2 - 1/(p+1) int r^{-b}|u|^{p+1}."""
    v = _vals(grid, u)
    p = params.p
    M = integrate(grid, np.abs(v) ** 2)
    P = integrate(grid, grid.nodes ** (-params.b) * np.abs(v) ** (p + 1))
    return M, 0.5 * grad_norm_sq(grid, v) - P / (p + 1)


def local_mass(grid: RadialGrid, u, R: float) -> float:
    """int_{r <= R} |u|^2 over the nodes inside the ball."""
    if R <= 0:
        return 0.0
    return ball_integrate(grid, np.abs(_vals(grid, u)) ** 2, R)


def ball_power(grid: RadialGrid, u, R: float, p: float) -> float:
    """int_{r <= R} |u|^{p+1}."""
    return ball_integrate(grid, np.abs(_vals(grid, u)) ** (p + 1), R)


@dataclass
class ThresholdReport:
    me_ratio: float
    grad_ratio: float
    below: bool
    below_me: bool
    below_grad: bool


def threshold_position(grid: RadialGrid, u, gs, params: ModelParams) -> ThresholdReport:
    """Compare M^{(1-s_c)/s_c}E and ||u||^{(1-s_c)/s_c}||grad u|| with their values at Q."""
    e = (1 - params.s_c) / params.s_c
    M, E = conserved_quantities(grid, u, params)
    me = M ** e * E / gs.me_threshold
    gr = math.sqrt(M) ** e * math.sqrt(grad_norm_sq(grid, u)) / gs.grad_threshold
    return ThresholdReport(me, gr, me < 1 and gr < 1, me < 1, gr < 1)


# ---------------------------------------------------------------- weights

@dataclass
class VirialWeight:
    """Radial weight with a = r^2 near the origin and a = 2Rr - const far out.

    Samples of a and its radial derivatives live on the grid nodes; ``a2_faces``
    is a'' at the cell faces (used in the Hessian term).
    """

    R: float
    rho: float
    r_in: float
    a: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    lap: np.ndarray
    bilap: np.ndarray
    a2_faces: np.ndarray
    a_at_R: float
    a2_max: float
    a1_wall: float = 0.0


def _weight_pieces(R: float, rho: float):
    r_in = R / 2 - rho
    L = R - r_in
    t = Polynomial([-r_in / L, 1 / L])  # t(r) on the transition shell
    a2 = 2 * ((1 - _SMOOTH) + 0.5 * _BUMP)(t)
    a1 = a2.integ(lbnd=r_in, k=2 * r_in)
    a0 = a1.integ(lbnd=r_in, k=r_in ** 2)
    return r_in, a0, a1, a2


def _eval_weight(r, R, rho):
    r_in, a0, a1, a2 = _weight_pieces(R, rho)
    a_R = a0(R)
    inner = r <= r_in
    outer = r >= R
    mid = ~(inner | outer)
    out = [np.zeros_like(r) for _ in range(5)]
    a3, a4 = a2.deriv(), a2.deriv(2)
    out[0][inner] = r[inner] ** 2
    out[1][inner] = 2 * r[inner]
    out[2][inner] = 2.0
    rm = r[mid]
    for k, poly in enumerate((a0, a1, a2, a3, a4)):
        out[k][mid] = poly(rm)
    out[0][outer] = a_R + 2 * R * (r[outer] - R)
    out[1][outer] = 2 * R
    return out, a_R


def build_virial_weight(R: float, grid: RadialGrid, rho: float | None = None) -> VirialWeight:
    """Smooth weight with a'' = 2 on [0, R/2 - rho], a'' = 0 beyond R.

    On the shell [R/2 - rho, R] a'' = 2[(1 - S(t)) + B(t)/2] with S the septic
    smoothstep and B a unit-mass bump, which makes a'(R) = 2R exactly,
    keeps a'' >= 0 and joins C^2, so a'''' is continuous.
    """
    rho = R / 20 if rho is None else rho
    if not R / 2 > 5 * grid.dr:
        raise ValueError(f"R = {R} too small for dr = {grid.dr}")
    if not 0 < rho < R / 4:
        raise ValueError("rho must lie in (0, R/4)")
    r = grid.nodes
    N = grid.N
    (a, a1, a2, a3, a4), a_R = _eval_weight(r, R, rho)
    lap = a2 + (N - 1) * a1 / r
    bilap = a4 + 2 * (N - 1) * a3 / r + (N - 1) * (N - 3) * (a2 / r ** 2 - a1 / r ** 3)
    rf = (np.arange(grid.n) + 1.0) * grid.dr
    a2f = _eval_weight(rf, R, rho)[0][2]
    ts = np.linspace(0.0, 1.0, 2001)
    a2_max = float(np.max(2 * ((1 - _SMOOTH(ts)) + 0.5 * _BUMP(ts))))
    a1_wall = float(_eval_weight(np.array([grid.r_max]), R, rho)[0][1][0])
    return VirialWeight(R, rho, R / 2 - rho, a, a1, a2, a3, a4, lap, bilap, a2f, a_R, a2_max,
                        a1_wall)


@dataclass
class CutoffProfile:
    """phi = 1 on r <= R/2, 0 on r >= R/2 + R/A, septic smoothstep between."""

    R: float
    A: float
    phi: np.ndarray
    dphi: np.ndarray
    lap: np.ndarray
    phi_faces: np.ndarray

    @property
    def phi_lap_sup(self) -> float:
        return float(np.max(np.abs(self.phi * self.lap)))


def _cutoff_eval(r, R, A):
    w = R / A
    t = np.clip((r - R / 2) / w, 0.0, 1.0)
    S1, S2 = _SMOOTH.deriv(), _SMOOTH.deriv(2)
    return 1 - _SMOOTH(t), -S1(t) / w, -S2(t) / w ** 2


def build_cutoff(R: float, grid: RadialGrid, A: float = 2.0) -> CutoffProfile:
    if R <= 0 or A <= 0:
        raise ValueError("R and A must be positive")
    r = grid.nodes
    phi, d1, d2 = _cutoff_eval(r, R, A)
    rf = (np.arange(grid.n) + 1.0) * grid.dr
    return CutoffProfile(R, A, phi, d1, d2 + (grid.N - 1) * d1 / r, _cutoff_eval(rf, R, A)[0])


# ---------------------------------------------------------------- virial

def virial_Z(grid: RadialGrid, u, w: VirialWeight) -> float:
    """Z = 2 Im int conj(u) u_r a'."""
    v = _vals(grid, u)
    return 2 * integrate(grid, np.imag(np.conj(v) * radial_derivative(grid, v)) * w.a1)


def _face_hessian(grid, v, a2_faces):
    d = np.append(v[1:], 0.0) - v
    return float(grid.omega_N * np.sum(grid.faces * a2_faces * np.abs(d) ** 2) / grid.dr)


def virial_rhs(grid: RadialGrid, u, w: VirialWeight, params: ModelParams) -> float:
    """Right side of the virial identity for radial u and weight a.

    (4/(p+1) - 2) int r^{-b}|u|^{p+1} Delta a - 4b/(p+1) int r^{-b-1} a' |u|^{p+1}
    - int |u|^2 Delta Delta a + 4 int a'' |u_r|^2.
    """
    v = _vals(grid, u)
    p, b = params.p, params.b
    r = grid.nodes
    up = np.abs(v) ** (p + 1)
    t1 = (4 / (p + 1) - 2) * integrate(grid, r ** (-b) * up * w.lap)
    t2 = -4 * b / (p + 1) * integrate(grid, r ** (-b - 1) * w.a1 * up)
    t3 = -integrate(grid, np.abs(v) ** 2 * w.bilap)
    t4 = 4 * _face_hessian(grid, v, w.a2_faces)
    return t1 + t2 + t3 + t4


def wall_flux(grid: RadialGrid, u, w: VirialWeight) -> float:
    """Momentum exchanged with the Dirichlet wall at r_max.

    On the bounded domain dZ/dt picks up -2 a'(r_max) |u_r(r_max)|^2 |S^{N-1}| r_max^{N-1}
    from the integration by parts; u_r at the wall is the face difference
    against the zero ghost value. It vanishes on all of R^N.
    """
    v = _vals(grid, u)
    return float(-2 * w.a1_wall * grid.omega_N * grid.faces[-1] * abs(v[-1] / grid.dr) ** 2)


def quadratic_bracket(grid: RadialGrid, u, params: ModelParams) -> float:
    """8[int|grad u|^2 + ((N-b)/(p+1) - N/2) int r^{-b}|u|^{p+1}]."""
    v = _vals(grid, u)
    N, b, p = params.N, params.b, params.p
    P = integrate(grid, grid.nodes ** (-b) * np.abs(v) ** (p + 1))
    return 8 * (grad_norm_sq(grid, v) + ((N - b) / (p + 1) - N / 2) * P)


def _centered(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return (y[2:] - y[:-2]) / (t[2:] - t[:-2])


def boundary_free_time(traj, key: float | None = None, tol: float = 1e-8) -> float:
    """Last snapshot time before the wall term exceeds tol * ||grad u||^2."""
    key = traj.virial_radii[0] if key is None else key
    t = np.asarray(traj.times)
    w = np.abs(np.asarray(traj.wall[key])) / np.maximum(np.asarray(traj.grad_norm) ** 2, 1e-300)
    hit = np.nonzero(w > tol)[0]
    if not hit.size:
        return float(t[-1])
    return float(t[max(hit[0] - 1, 0)])


def virial_identity_check(traj, key: float | None = None, skip: float = 0.0,
                          include_wall: bool = True, until: float | None = None) -> float:
    """Max relative defect between centered d/dt Z and the virial right side.

    Uses the Z and dZdt_rhs series recorded at snapshots for weight radius
    ``key`` (the first configured radius by default). Each defect is divided by
    max(|rhs|, ||grad u||^2). Only snapshots with skip <= t <= until count.
    With include_wall the recorded wall term of the bounded domain is added to
    the right side; without it the check is against the whole-space identity.
    """
    key = traj.virial_radii[0] if key is None else key
    t = np.asarray(traj.times)
    Z = np.asarray(traj.Z[key])
    rhs = np.asarray(traj.dZdt_rhs[key])[1:-1]
    if include_wall:
        rhs = rhs + np.asarray(traj.wall[key])[1:-1]
    g2 = np.asarray(traj.grad_norm)[1:-1] ** 2
    d = np.abs(_centered(t, Z) - rhs) / np.maximum(np.abs(rhs), g2)
    tc = t[1:-1]
    keep = tc >= skip
    if until is not None:
        keep &= tc <= until
    d = d[keep]
    return float(np.max(d)) if d.size else 0.0


def mass_flux(grid: RadialGrid, u, cut: CutoffProfile) -> tuple[float, float]:
    """(int eta|u|^2, 2 Im int eta' u_r conj(u))."""
    v = _vals(grid, u)
    m = integrate(grid, cut.phi * np.abs(v) ** 2)
    f = 2 * integrate(grid, cut.dphi * np.imag(radial_derivative(grid, v) * np.conj(v)))
    return m, f


def mass_flux_check(traj, R: float | None = None, skip: float = 0.0) -> float:
    """Max |d/dt int eta_R|u|^2 - flux| normalized by M[u0]/R."""
    R = traj.flux_radii[0] if R is None else R
    t = np.asarray(traj.times)
    m = np.asarray(traj.eta_mass[R])
    f = np.asarray(traj.flux[R])[1:-1]
    d = np.abs(_centered(t, m) - f)
    d = d[t[1:-1] >= skip]
    return float(np.max(d) / (traj.mass[0] / R)) if d.size else 0.0


def flux_bound(traj, R: float | None = None) -> float:
    """max_t |d/dt int eta_R |u|^2| measured from the recorded flux, scaled by R/M."""
    R = traj.flux_radii[0] if R is None else R
    return float(np.max(np.abs(traj.flux[R])) * R / traj.mass[0])


def morawetz_average(traj, R: float, T: float, params: ModelParams) -> tuple[float, float]:
    """((1/T) int_0^T int_{r<=R}|u|^{p+1} dt, R^{b+1}/T + R^{-(2-b)(N-1)/N}).

    Trapezoid rule over the recorded snapshots with t <= T; the ball integral
    must have been recorded for radius R.
    """
    t = np.asarray(traj.times)
    y = np.asarray(traj.ball_power[R])
    k = t <= T + 1e-12
    if t[k][-1] < T - 1e-9:
        raise ValueError(f"trajectory ends at {t[k][-1]} < T = {T}")
    avg = float(np.trapezoid(y[k], t[k]) / T) if T > 0 else 0.0
    N, b = params.N, params.b
    return avg, R ** (b + 1) / T + R ** (-(2 - b) * (N - 1) / N)


# ---------------------------------------------------------------- inequalities

def commutator_defect(grid: RadialGrid, u, cut: CutoffProfile) -> float:
    """|int|grad(phi u)|^2 - int phi^2|grad u|^2 + int phi Delta(phi)|u|^2|.

    The identity is exact; phi and Delta phi are taken from their closed
    forms so the defect measures discretization error only.
    """
    v = _vals(grid, u)
    d = np.append(v[1:], 0.0) - v
    lhs = grad_norm_sq(grid, cut.phi * v)
    mid = grid.omega_N * np.sum(grid.faces * cut.phi_faces ** 2 * np.abs(d) ** 2) / grid.dr
    last = integrate(grid, cut.phi * cut.lap * np.abs(v) ** 2)
    return abs(lhs - mid + last)


@dataclass
class InequalityReport:
    strauss: dict
    strauss_max: float
    radial_gn: dict
    radial_gn_max: float
    commutator: float
    coercivity_bracket: float
    coercivity_delta_prime: float
    grad_ratio: float | None


def inequality_suite(grid: RadialGrid, u, params: ModelParams, gs=None, R_cut: float = 10.0,
                     radii=None) -> InequalityReport:
    """Radial decay ratios, the commutator defect and the coercivity margin.

    strauss[R] = ||u||_{L^inf(r>=R)} R^{(N-1)/2} / ||u||_{H^1}
    radial_gn[R] = int_{r>=R}|u|^{p+1} R^{(N-1)(p-1)/2} / ||u||_{H^1}^{p+1}
    coercivity_delta_prime is the largest d' with
    int|grad u|^2 + ((N-b)/(p+1) - N/2) int r^{-b}|u|^{p+1} >= d' int r^{-b}|u|^{p+1}.
    """
    v = _vals(grid, u)
    N, b, p = params.N, params.b, params.p
    if radii is None:
        radii = [2.0 ** k for k in range(int(math.log2(grid.r_max / 2)) + 1)]
    h1 = math.sqrt(integrate(grid, np.abs(v) ** 2) + grad_norm_sq(grid, v))
    st, gn = {}, {}
    for R in radii:
        if h1 == 0:
            st[R] = gn[R] = 0.0
            continue
        st[R] = sup_beyond(grid, v, R) * R ** ((N - 1) / 2) / h1
        k = int(np.searchsorted(grid.nodes, R, side="left"))
        tail = float(np.dot(grid.weights[k:], np.abs(v[k:]) ** (p + 1)))
        gn[R] = tail * R ** ((N - 1) * (p - 1) / 2) / h1 ** (p + 1)
    P = integrate(grid, grid.nodes ** (-b) * np.abs(v) ** (p + 1))
    bracket = grad_norm_sq(grid, v) + ((N - b) / (p + 1) - N / 2) * P
    dprime = bracket / P if P > 0 else math.inf
    gr = None
    if gs is not None:
        gr = threshold_position(grid, v, gs, params).grad_ratio
    return InequalityReport(st, max(st.values()), gn, max(gn.values()),
                            commutator_defect(grid, v, build_cutoff(R_cut, grid)),
                            bracket, dprime, gr)


def holder_ratio(grid: RadialGrid, u, R: float, p: float) -> float:
    """local_mass / (R^{N(p-1)/(p+1)} (int_{r<=R}|u|^{p+1})^{2/(p+1)}), at most the
    ball-volume constant by Hoelder."""
    num = local_mass(grid, u, R)
    den = R ** (grid.N * (p - 1) / (p + 1)) * ball_power(grid, u, R, p) ** (2 / (p + 1))
    return num / den if den > 0 else 0.0
