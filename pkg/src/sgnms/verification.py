"""Structure-verification battery.

Each check measures one mathematical claim of the formulation against an
independent oracle (finite differences, rank computation, exact traveling
data, the negative control) and reports the measured metric with its
threshold.  The CLI ``verify`` command and the acceptance suite both run
these; thresholds live here so there is exactly one place they are pinned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DiffOperator, Grid1D, Params
from .diagnostics import (
    conservation_residuals,
    energy_identity_residual,
    expanded_E_residual,
    impulse_identity_residual,
    momentum_identity_residual,
)
from .integrators import (
    BoxSchemeConfig,
    TangentPair,
    box_step_info,
    discrete_twoform_residual,
    euler_box_step_info,
    tangent_box_step,
)
from .scenarios import certification_grid, solitary_wave, traveling_zstate
from .structure import (
    H,
    PHI,
    Q,
    R,
    S,
    U,
    V,
    build_K,
    build_M,
    el_residuals,
    grad_S,
    hamiltonian_S,
    hess_S,
    lift,
    ms_residual,
    traveling_z_t,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""


def _result(name, value, threshold, note=""):
    return CheckResult(name, float(value), float(threshold), bool(value <= threshold), note)


def random_states(rng, count):
    """Random 8-component states: components in [-2, 2], depth in [0.1, 3]."""
    z = rng.uniform(-2.0, 2.0, size=(8, count))
    z[H] = rng.uniform(0.1, 3.0, size=count)
    return z


def check_skew_forms():
    M = build_M()
    K = build_K()
    results = [
        _result("M skew-symmetry", np.abs(M.matrix + M.matrix.T).max(), 0.0),
        _result("K skew-symmetry", np.abs(K.matrix + K.matrix.T).max(), 0.0),
        _result("M rank", abs(np.linalg.matrix_rank(M.matrix) - 2), 0.0, "rank must be 2"),
        _result("K rank", abs(np.linalg.matrix_rank(K.matrix) - 4), 0.0, "rank must be 4"),
    ]
    return results


def gradient_fd_error(params: Params, rng, count=1000):
    """Max scaled deviation between grad_S and central differences of S."""
    z = random_states(rng, count)
    grad = grad_S(z, params)
    worst = 0.0
    for comp in range(8):
        eps = 1e-6 * (1.0 + np.abs(z[comp]))
        zp = z.copy()
        zp[comp] = z[comp] + eps
        zm = z.copy()
        zm[comp] = z[comp] - eps
        fd = (hamiltonian_S(zp, params) - hamiltonian_S(zm, params)) / (2.0 * eps)
        scale = np.maximum(1.0, np.abs(grad[comp]))
        worst = max(worst, float(np.abs((fd - grad[comp]) / scale).max()))
    return worst


def hessian_fd_error(params: Params, rng, count=1000):
    z = random_states(rng, count)
    Hs = hess_S(z, params)  # (count, 8, 8)
    worst = 0.0
    for comp in range(8):
        eps = 1e-6 * (1.0 + np.abs(z[comp]))
        zp = z.copy()
        zp[comp] = z[comp] + eps
        zm = z.copy()
        zm[comp] = z[comp] - eps
        fd = (grad_S(zp, params) - grad_S(zm, params)) / (2.0 * eps)  # (8, count)
        scale = np.maximum(1.0, np.abs(Hs[:, :, comp].T))
        worst = max(worst, float(np.abs((fd - Hs[:, :, comp].T) / scale).max()))
    return worst


def hessian_asymmetry(params: Params, rng, count=200):
    z = random_states(rng, count)
    Hs = hess_S(z, params)
    return float(np.abs(Hs - np.transpose(Hs, (0, 2, 1))).max())


def check_gradients(params: Params, seed: int):
    rng = np.random.default_rng(seed)
    return [
        _result("grad S vs FD of S", gradient_fd_error(params, rng), 1e-6,
                "1000 random states"),
        _result("hess S vs FD of grad S", hessian_fd_error(params, rng), 1e-6),
        _result("hess S symmetry", hessian_asymmetry(params, rng), 0.0),
    ]


def _certified_wave(params: Params, a=0.2, n=512):
    scenario = solitary_wave(1.0, a, params)
    grid = certification_grid(scenario, n)
    op = DiffOperator(grid, "fourier")
    return scenario, grid, op


def check_lift_identities(params: Params):
    scenario, grid, op = _certified_wave(params)
    zs = lift(scenario.build(grid), op)
    res = ms_residual(zs, np.zeros_like(zs.z), op, params)
    algebraic = max(np.abs(res[row]).max() for row in (U, V, S))
    derivative_rows = max(np.abs(res[row]).max() for row in (Q, R))
    return [
        _result("lift: algebraic rows", algebraic, 1e-12, "rows for u, v, s"),
        _result("lift: derivative rows", derivative_rows, 1e-8, "rows for q, r"),
    ]


def check_traveling_residual(params: Params):
    scenario, grid, op = _certified_wave(params)
    zs = lift(scenario.build(grid), op)
    z_t = traveling_z_t(zs, scenario.speed, op, params)
    sup = np.abs(ms_residual(zs, z_t, op, params)).max()
    # must decrease with resolution below the round-off plateau
    sups = []
    for n in (64, 128):
        g = Grid1D(grid.length, n)
        o = DiffOperator(g, "fourier")
        z = lift(scenario.build(g), o)
        sups.append(np.abs(ms_residual(z, traveling_z_t(z, scenario.speed, o, params),
                                       o, params)).max())
    decreasing = sups[1] < sups[0]
    return [
        _result("traveling MS residual (n=512)", sup, 1e-7),
        _result("traveling MS residual decreases", 0.0 if decreasing else 1.0, 0.0,
                f"sup {sups[0]:.2e} (n=64) -> {sups[1]:.2e} (n=128)"),
    ]


def check_appendix_equivalence(params: Params):
    """Euler-Lagrange residuals match the matching MS rows after substitution."""
    scenario, grid, op = _certified_wave(params)
    zs = lift(scenario.build(grid), op)
    c = scenario.speed
    z = zs.z
    z_t = traveling_z_t(zs, c, op, params)
    res_ms = ms_residual(zs, z_t, op, params)
    h, u, v = z[H], z[U], z[V]
    h_t, h_x = z_t[H], zs.z_x(op)[H]
    v_t, v_x = z_t[V], op(v)
    mu_x = op(u)
    phi_x = zs.phi_x(op)
    phi_t = z_t[PHI]
    r_u, r_v, r_mu, r_phi, r_h = el_residuals(
        h, u, v, u, zs.phi_total(), h_t, h_x, v_t, v_x, mu_x, phi_t, phi_x, params
    )
    pairs = [
        np.abs(r_v - (-3.0) * res_ms[4]).max(),   # impermeability vs p-row
        np.abs(r_mu - (-res_ms[Q])).max(),        # velocity/potential vs q-row
        np.abs(r_phi - (-res_ms[PHI])).max(),     # mass vs phi-row
        np.abs(r_h - (-res_ms[H])).max(),         # Bernoulli vs h-row
    ]
    return [
        _result("Euler-Lagrange trivial row", np.abs(r_u).max(), 0.0, "mu == u"),
        _result("Euler-Lagrange vs MS rows", max(pairs), 1e-10),
    ]


def check_section3_identities(params: Params):
    scenario, grid, op = _certified_wave(params)
    zs = lift(scenario.build(grid), op)
    z_t = traveling_z_t(zs, scenario.speed, op, params)
    results = [
        _result("impulse identity", np.abs(impulse_identity_residual(zs, op)).max(), 1e-8),
        _result("energy identity (cubic depth)",
                np.abs(energy_identity_residual(zs, op, params)).max(), 1e-8),
        _result("expanded E identity", np.abs(expanded_E_residual(zs, op, params)).max(), 1e-8),
        _result("momentum-flux identity",
                np.abs(momentum_identity_residual(zs, z_t, op, params)).max(), 1e-8),
    ]
    dt_snap = 1e-3
    window = [traveling_zstate(scenario, grid, op, params, t)
              for t in (-dt_snap, 0.0, dt_snap)]
    law_E, law_I = conservation_residuals(window, dt_snap, op, params)
    results.append(_result("tensor laws on exact data",
                           max(np.abs(law_E).max(), np.abs(law_I).max()), 1e-6,
                           "centred dt = 1e-3"))
    return results


def check_certification(params: Params):
    results = []
    for a in (0.1, 0.2, 0.4):
        scenario = solitary_wave(1.0, a, params)
        rep = scenario.certification
        results.append(_result(f"solitary certification a={a}",
                               max(rep.sup_mass, rep.sup_momentum), rep.threshold))
    degenerate = solitary_wave(1.0, 0.0, params, certify=False)
    g = Grid1D(40.0, 64)
    st = degenerate.build(g)
    flat = max(np.abs(st.h - 1.0).max(), np.abs(st.u).max())
    results.append(_result("solitary a=0 degenerates to still water", flat, 0.0,
                           f"c = {degenerate.speed:.6f}"))
    return results


def check_twoform(params: Params, seed: int, n=65, dt=0.05, steps=3):
    scenario = solitary_wave(1.0, 0.2, params, certify=False)
    grid = Grid1D(40.0, n)
    op = DiffOperator(grid, "fourier")
    cfg = BoxSchemeConfig(dt=dt)
    rng = np.random.default_rng(seed)
    pair = TangentPair(rng.standard_normal((8, n)), rng.standard_normal((8, n)))
    state = lift(scenario.build(grid), op)
    worst = 0.0
    for _ in range(steps):
        new, _rep = box_step_info(state, cfg, params)
        new_pair = tangent_box_step(state, new, pair, cfg, params)
        res = discrete_twoform_residual(state, new, pair, new_pair, grid, dt)
        worst = max(worst, float(np.abs(res).max()))
        state, pair = new, new_pair
    # negative control: the theta = 1 variant must visibly break the law
    state = lift(scenario.build(grid), op)
    pair = TangentPair(rng.standard_normal((8, n)), rng.standard_normal((8, n)))
    new, _rep = euler_box_step_info(state, cfg, params)
    new_pair = tangent_box_step(state, new, pair, cfg, params, theta=1.0)
    control = float(np.abs(discrete_twoform_residual(state, new, pair, new_pair, grid, dt)).max())
    return [
        _result("discrete two-form conservation", worst, 1e-9, f"{steps} box steps"),
        _result("two-form negative control", 0.0 if control >= 1e-4 else 1.0, 0.0,
                f"non-symplectic residual {control:.2e} (must be >= 1e-4)"),
    ]


def run_battery(params: Params, seed: int = 0):
    results = []
    results += check_skew_forms()
    results += check_gradients(params, seed)
    results += check_lift_identities(params)
    results += check_traveling_residual(params)
    results += check_appendix_equivalence(params)
    results += check_section3_identities(params)
    results += check_certification(params)
    results += check_twoform(params, seed)
    return results


def format_battery(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'measured':>12}  {'threshold':>10}  status"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        note = f"  ({r.note})" if r.note else ""
        lines.append(
            f"{r.name:<{width}}  {r.value:>12.3e}  {r.threshold:>10.1e}  {status}{note}"
        )
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
