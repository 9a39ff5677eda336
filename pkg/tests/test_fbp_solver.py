import math

import numpy as np
import pytest

from pmflow.errors import DomainError
from pmflow.fbp_solver import (
    assemble_interior,
    background_shock_graph,
    exact_normal_solution,
    manufactured_solution,
    mms_solve,
    reconstruct_phi,
    shock_bc_residual,
    solve_fbp,
    solve_interior,
    update_shock,
)
from pmflow.geometry_map import MappedDomain, ShockGraph
from pmflow.selfsim_states import beta_sonic

GAMMA = 1.4
V_INF = 0.5


# -- normal reflection: the one closed-form solution ---------------------------


def test_normal_solution_interior_residual_vanishes():
    fieldobj = exact_normal_solution(GAMMA, V_INF, ns=32, nt=16)
    res = assemble_interior(fieldobj)
    assert np.max(np.abs(res[1:-1, :])) < 1e-12


def test_normal_solution_is_update_shock_fixed_point():
    fieldobj = exact_normal_solution(GAMMA, V_INF, ns=32, nt=16)
    new, info = update_shock(fieldobj)
    assert info["clamped"] == 0
    assert info["move"] < 1e-10
    assert np.max(np.abs(new.g_values - fieldobj.shock.g_values)) < 1e-10


def test_normal_solution_gradient_jump_residual():
    fieldobj = exact_normal_solution(GAMMA, V_INF, ns=32, nt=16)
    for node in (8, 16, 24):
        assert abs(shock_bc_residual(fieldobj, fieldobj.shock, node)) < 1e-12


def test_normal_shock_sits_at_exact_height():
    # downstream of the normal reflection the shock is the horizontal line
    # xi2 = eta_N and the state is uniform with sound speed c_N
    fieldobj = exact_normal_solution(GAMMA, V_INF, ns=32, nt=16)
    geo = fieldobj.domain.geo
    state = reconstruct_phi(fieldobj)
    assert np.max(np.abs(state["shock_xi"][:, 1] - geo.eta_N)) < 1e-10
    rho_n = (geo.c_N**2) ** (1.0 / (GAMMA - 1.0))
    assert np.max(np.abs(state["rho"] - rho_n)) < 1e-10
    assert np.all(state["mach"][:, :-1] < 1.0 + 1e-12)


def test_background_graph_endpoints_are_sonic_angles():
    domain = MappedDomain(GAMMA, V_INF, 0.35)
    geo = domain.geo
    s = np.linspace(-1.0, 1.0, 25)
    bg = background_shock_graph(domain, s)
    assert bg.g_values[0] == pytest.approx(math.asin(geo.eta_O / geo.c_O),
                                           abs=1e-14)
    assert bg.g_values[-1] == pytest.approx(math.asin(geo.eta_N / geo.c_N),
                                            abs=1e-14)


def test_background_graph_roots_the_exact_indicator():
    domain = MappedDomain(GAMMA, V_INF, 0.35)
    s = np.linspace(-1.0, 1.0, 25)
    bg = background_shock_graph(domain, s)
    sp = domain.from_square_s(s[1:-1])
    w = domain.w_inf(sp, bg.g_values[1:-1])
    assert np.max(np.abs(w)) < 1e-10


# -- driver ---------------------------------------------------------------------


def test_zero_angle_solve_is_exact_and_fast():
    sol, rep = solve_fbp(GAMMA, V_INF, 0.0, ns=32, nt=16)
    assert rep.converged
    assert np.all(sol.u == 0.0)
    assert rep.interior_residual < 1e-12


def test_solve_rejects_angles_at_detachment():
    with pytest.raises(DomainError):
        solve_fbp(GAMMA, V_INF, 2.0, ns=16, nt=8)
    with pytest.raises(DomainError):
        solve_fbp(GAMMA, V_INF, -0.1, ns=16, nt=8)


def test_small_angle_solution_scales_quadratically():
    # the normal reflection sits on a smooth branch; the leading deviation
    # of the perturbation potential is O(beta^2)
    sols = {}
    for beta in (0.025, 0.05):
        sol, rep = solve_fbp(GAMMA, V_INF, beta, ns=32, nt=16)
        assert rep.converged
        sols[beta] = np.max(np.abs(sol.u))
    assert sols[0.05] > 0.0
    ratio = sols[0.05] / sols[0.025]
    assert 3.0 < ratio < 5.5


def test_converged_solution_is_joint_fixed_point():
    sol, rep = solve_fbp(GAMMA, V_INF, 0.25, ns=48, nt=24)
    assert rep.converged
    res = assemble_interior(sol)
    assert np.max(np.abs(res)) < 1e-8
    _, info = update_shock(sol)
    assert info["move"] < 1e-7
    assert info["margin_min"] > 0.0


def test_solver_is_deterministic():
    sol_a, _ = solve_fbp(GAMMA, V_INF, 0.15, ns=32, nt=16)
    sol_b, _ = solve_fbp(GAMMA, V_INF, 0.15, ns=32, nt=16)
    assert np.array_equal(sol_a.u, sol_b.u)
    assert np.array_equal(sol_a.shock.g_values, sol_b.shock.g_values)


def test_alternation_contracts_near_normal_reflection():
    # one frozen-graph solve plus one re-rooting pulls a perturbed graph
    # back toward the closed-form one
    fieldobj = exact_normal_solution(GAMMA, V_INF, ns=32, nt=16)
    g0 = fieldobj.shock.g_values
    bump = 1e-3 * np.sin(np.pi * 0.5 * (fieldobj.s + 1.0)) ** 2
    bump[0] = bump[-1] = 0.0
    pert = ShockGraph(fieldobj.s, g0 + bump)
    solved = solve_interior(pert, 0.0, fieldobj)
    new, info = update_shock(solved)
    err0 = np.max(np.abs(pert.g_values - g0))
    err1 = np.max(np.abs(new.g_values - g0))
    assert err1 < 0.8 * err0


def test_shock_graph_detaches_from_wall_above_sonic_angle():
    # below the sonic angle the left endpoint is pinned at the oblique
    # sonic ordinate, above it the graph meets the wall
    domain = MappedDomain(GAMMA, V_INF, beta_sonic(GAMMA, V_INF) + 1e-3)
    s = np.linspace(-1.0, 1.0, 17)
    bg = background_shock_graph(domain, s)
    assert bg.g_values[0] == 0.0


# -- manufactured solutions -------------------------------------------------------


def test_manufactured_forcing_matches_residual():
    fieldobj = exact_normal_solution(GAMMA, V_INF, ns=48, nt=24)
    solved, w_nodes = mms_solve(GAMMA, V_INF, 48, 24)
    assert solved.newton_info["residual"] < 1e-10
    err = np.abs(solved.u - w_nodes)
    assert np.max(err) < 5e-4


def test_manufactured_solution_requires_zero_angle():
    domain = MappedDomain(GAMMA, V_INF, 0.2)
    with pytest.raises(DomainError):
        manufactured_solution(domain)


def test_manufactured_convergence_is_second_order():
    errs = {}
    for ns, nt in ((32, 16), (64, 32)):
        solved, w_nodes = mms_solve(GAMMA, V_INF, ns, nt)
        mask = np.abs(solved.s) <= 0.75
        err = np.abs(solved.u - w_nodes)[mask, 1:-1]
        errs[ns] = np.max(err)
    order = math.log2(errs[32] / errs[64])
    assert order > 1.8
