import math

import numpy as np
import pytest

from inls_lab import diagnostics as D
from inls_lab.evolve import EvolutionConfig, run
from inls_lab.exponents import ModelParams
from inls_lab.grid import build_grid, grad_norm_sq, integrate
from inls_lab.groundstate import solve_ground_state

P312 = ModelParams.create(3, 1, 2)


@pytest.fixture(scope="module")
def g8k():
    return build_grid(8192, 40.0, 3.0)


@pytest.fixture(scope="module")
def gs8k(g8k):
    return solve_ground_state(P312, g8k)


def test_conserved_quantities_gaussian_b0():
    g = build_grid(4096, 20.0, 3.0)
    u = np.exp(-g.r ** 2 / 2)
    P = ModelParams.create(3, 0, 3)
    M, E = D.conserved_quantities(g, u, P)
    assert M == pytest.approx(math.pi ** 1.5, rel=1e-12)
    # 1/2 * (3/2) pi^{3/2} - 1/4 (pi/2)^{3/2}
    assert E == pytest.approx(0.75 * math.pi ** 1.5 - 0.25 * (math.pi / 2) ** 1.5, rel=2e-4)


@pytest.mark.parametrize("R", [10.0, 20.0])
def test_virial_weight_shape(g8k, R):
    w = D.build_virial_weight(R, g8k)
    r, N = g8k.r, g8k.N
    inner = r <= R / 2 - w.rho
    outer = r >= R
    assert np.allclose(w.a[inner], r[inner] ** 2)
    assert np.allclose(w.lap[inner], 2 * N)
    assert np.allclose(w.bilap[inner], 0.0, atol=1e-12)
    assert np.allclose(w.a1[outer], 2 * R)
    assert np.allclose(w.lap[outer], 2 * (N - 1) * R / r[outer])
    assert np.all(w.a1 >= 0) and np.all(w.a2 >= -1e-14)
    assert w.rho == pytest.approx(R / 20)
    # a(R) = R^2 (1 + O(rho/R)) with a fixed constant
    assert w.a_at_R / R ** 2 == pytest.approx(1.0672, abs=1e-4)


def test_virial_weight_too_small(g8k):
    with pytest.raises(ValueError):
        D.build_virial_weight(0.04, g8k)


def test_Z_real_field_zero(g8k, gs8k):
    w = D.build_virial_weight(10.0, g8k)
    assert D.virial_Z(g8k, gs8k.Q.values, w) == 0.0


def test_Z_gaussian_with_phase():
    g = build_grid(8192, 40.0, 3.0)
    u = np.exp(-g.r ** 2 / 2) * np.exp(1j * g.r ** 2 / 4)
    w = D.build_virial_weight(39.0, g)
    assert D.virial_Z(g, u, w) == pytest.approx(3 * math.pi ** 1.5, rel=1e-5)


def test_rhs_equals_bracket_in_quadratic_regime():
    g = build_grid(4096, 40.0, 3.0)
    u = np.exp(-g.r ** 2 / 2) * (1 + 0.2j * g.r)
    w = D.build_virial_weight(39.0, g)
    a = D.virial_rhs(g, u, w, P312)
    b = D.quadratic_bracket(g, u, P312)
    assert a == pytest.approx(b, rel=1e-10)


def test_rhs_zero_field(g8k):
    w = D.build_virial_weight(10.0, g8k)
    assert D.virial_rhs(g8k, np.zeros(g8k.n), w, P312) == 0.0


def test_commutator_supported_inside(g8k):
    u = np.exp(-g8k.r ** 2 / 2)
    cut = D.build_cutoff(20.0, g8k)
    assert D.commutator_defect(g8k, u, cut) < 1e-12


def test_commutator_second_order():
    vals = []
    for n in (4096, 8192):
        g = build_grid(n, 40.0, 3.0)
        u = np.exp(-(g.r - 7.0) ** 2)  # centred on the transition shell [R/2, R]
        vals.append(D.commutator_defect(g, u, D.build_cutoff(10.0, g)))
    assert vals[0] / vals[1] == pytest.approx(4.0, rel=0.25)


def test_inequality_suite(g8k, gs8k):
    rep = D.inequality_suite(g8k, 0.5 * gs8k.Q.values, P312, gs8k)
    assert rep.coercivity_delta_prime > 0
    assert rep.grad_ratio == pytest.approx(0.5 ** 2, rel=1e-12)  # ||u||^1 ||grad u|| scales as c^2
    assert rep.strauss_max <= g8k.omega_N ** -0.5
    assert rep.commutator < 1e-6


def test_strauss_uniform_for_gaussian(g8k):
    u = np.exp(-g8k.r ** 2 / 2)
    rep = D.inequality_suite(g8k, u, P312, radii=[1.0, 2.0, 4.0, 8.0])
    assert all(np.isfinite(v) for v in rep.strauss.values())
    assert rep.strauss_max <= g8k.omega_N ** -0.5


def test_threshold_position(g8k, gs8k):
    at = D.threshold_position(g8k, gs8k.Q.values, gs8k, P312)
    assert at.me_ratio == pytest.approx(1.0, rel=1e-12)
    assert at.grad_ratio == pytest.approx(1.0, rel=1e-12)
    assert not at.below
    half = D.threshold_position(g8k, 0.5 * gs8k.Q.values, gs8k, P312)
    assert half.below_me and half.below_grad


def test_holder_bound(g8k, gs8k):
    p = P312.p
    bound = (4 / 3 * math.pi) ** ((p - 1) / (p + 1))
    for c in (0.5, 1.0, 3.0):
        for R in (1.0, 5.0, 10.0):
            assert D.holder_ratio(g8k, c * gs8k.Q.values, R, p) <= bound


def test_local_mass_monotone(g8k, gs8k):
    u = gs8k.Q.values
    vals = [D.local_mass(g8k, u, R) for R in (0.5, 1.0, 2.0, 5.0, 39.9)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(integrate(g8k, u ** 2), rel=1e-10)


def test_morawetz_zero():
    g = build_grid(512, 40.0, 3.0)
    rec = run(g, np.zeros(g.n), P312, EvolutionConfig(dt=0.01, t_final=1.0, snapshot_stride=10))
    avg, bound = D.morawetz_average(rec, 10.0, 1.0, P312)
    assert avg == 0.0
    assert bound == pytest.approx(10 ** 2 + 10 ** (-2 / 3))


@pytest.fixture(scope="module")
def short_run(g8k, gs8k):
    cfg = EvolutionConfig(dt=1e-3, t_final=0.6, snapshot_stride=10)
    return run(g8k, 0.5 * gs8k.Q.values, P312, cfg)


def test_mass_flux_identity(short_run):
    assert D.mass_flux_check(short_run, 10.0) < 1e-3


def test_virial_identity_wall_free_window(short_run):
    until = D.boundary_free_time(short_run, 10.0)
    assert until > 0.4
    assert D.virial_identity_check(short_run, 10.0, skip=0.25, until=until) < 1e-3


def test_standing_wave_virial():
    # the rhs vanishes for Q up to a discretisation residual that is second order in dr
    vals = []
    for n in (8192, 16384):
        g = build_grid(n, 40.0, 3.0)
        Q = solve_ground_state(P312, g).Q.values
        vals.append(abs(D.virial_rhs(g, Q, D.build_virial_weight(10.0, g), P312)) / grad_norm_sq(g, Q))
    assert vals[1] < 1e-3
    assert vals[0] / vals[1] == pytest.approx(4.0, rel=0.1)
