"""Conventional non-symplectic solver in the (h, m) formulation.

m = u - (h^3 u_x)_x / (3 h) is the tangential momentum at the free surface;
its evolution is a pure conservation law, which sidesteps the u_t hidden
inside the vertical acceleration of the raw velocity equation.  Recovering u
from (h, m) means inverting the positive-definite operator

    u |-> h u - (h^3 u_x)_x / 3,

done directly (sparse LU of the cyclic banded system) for finite-difference
operators and by preconditioned conjugate gradients for the spectral one.
Time stepping is plain RK4.  This solver exists to cross-validate the
multi-symplectic integrators, so it deliberately shares no code with them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .core import DiffOperator, Grid1D, Params, PhysicalState
from .errors import DryStateError, GridMismatchError, InstabilityError, SolverBreakdownError

_BLOWUP = 1e6


@dataclass(frozen=True)
class HMState:
    """Depth and tangential-momentum density at one instant."""

    grid: Grid1D
    h: np.ndarray
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h", self.grid.check_field(self.h))
        object.__setattr__(self, "m", self.grid.check_field(self.m))
        if self.h.min() <= 0:
            raise DryStateError(f"min depth {self.h.min():.3e} is not positive")


def m_from_u(state: PhysicalState, op: DiffOperator) -> HMState:
    """m = u - (h^3 u_x)_x / (3 h)."""
    h, u = state.h, state.u
    m = u - op(h**3 * op(u)) / (3.0 * h)
    return HMState(state.grid, h.copy(), m, t=state.t)


def _operator_matrix(h: np.ndarray, op: DiffOperator) -> sparse.csc_matrix:
    """Sparse matrix of u -> h u - D(h^3 D u)/3 for fd stencils."""
    n = op.grid.n
    dx = op.grid.dx
    if op.kind == "fd2":
        offsets, weights = (-1, 1), (-0.5 / dx, 0.5 / dx)
    elif op.kind == "fd4":
        offsets = (-2, -1, 1, 2)
        weights = (1.0 / (12 * dx), -8.0 / (12 * dx), 8.0 / (12 * dx), -1.0 / (12 * dx))
    else:
        raise ValueError("matrix assembly is only for fd kinds")
    rows, cols, vals = [], [], []
    idx = np.arange(n)
    for o, w in zip(offsets, weights):
        rows.append(idx)
        cols.append((idx + o) % n)
        vals.append(np.full(n, w))
    D = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()
    return sparse.diags(h).tocsc() - D @ sparse.diags(h**3) @ D / 3.0


def u_from_hm(state: HMState, op: DiffOperator) -> np.ndarray:
    """Solve h m = h u - (h^3 u_x)_x / 3 for u on the periodic grid."""
    h, m = state.h, state.m
    rhs = h * m
    if op.kind in ("fd2", "fd4"):
        A = _operator_matrix(h, op)
        try:
            u = spla.splu(A).solve(rhs)
        except RuntimeError as exc:
            raise SolverBreakdownError(f"direct solve for u failed: {exc}")
        return u
    # spectral kind: matrix-free CG with a constant-coefficient preconditioner
    n = op.grid.n

    def matvec(u):
        return h * u - op(h**3 * op(u)) / 3.0

    hbar = float(h.mean())
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=op.grid.dx)
    symbol = hbar + hbar**3 * k * k / 3.0

    def precond(w):
        return np.fft.irfft(np.fft.rfft(w) / symbol, n=n)

    A = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    Mpre = spla.LinearOperator((n, n), matvec=precond, dtype=float)
    try:
        u, info = spla.cg(A, rhs, M=Mpre, rtol=1e-300, atol=1e-12, maxiter=1000)
    except TypeError:  # older scipy spelling
        u, info = spla.cg(A, rhs, M=Mpre, tol=1e-300, atol=1e-12, maxiter=1000)
    resid = float(np.linalg.norm(rhs - matvec(u)))
    if info != 0 and resid > 1e-10 * max(1.0, float(np.linalg.norm(rhs))):
        raise SolverBreakdownError(
            f"CG for u did not reach tolerance (info={info})", residual=resid
        )
    return u


def to_physical(state: HMState, op: DiffOperator) -> PhysicalState:
    return PhysicalState(state.grid, state.h.copy(), u_from_hm(state, op), t=state.t)


def classical_rhs(state: HMState, op: DiffOperator, params: Params):
    """Time derivatives (h_t, m_t) of the conservation-law form."""
    h = state.h
    u = u_from_hm(state, op)
    ux = op(u)
    h_t = -op(h * u)
    flux = (
        0.5 * u * u
        + params.g * h
        - 0.5 * h * h * ux * ux
        - u * op(h**3 * ux) / (3.0 * h)
    )
    m_t = -op(flux)
    return h_t, m_t


@dataclass
class ReferenceTrajectory:
    states: list
    state_steps: list


def default_dt(grid: Grid1D, params: Params, h_max: float, cfl: float = 0.25) -> float:
    """Engineering default for explicit stepping: cfl * dx / sqrt(g h_max)."""
    return cfl * grid.dx / np.sqrt(params.g * h_max)


def _check_stage(h, m, t):
    mag = max(float(np.abs(h).max()), float(np.abs(m).max()))
    if not np.isfinite(mag) or mag > _BLOWUP:
        raise InstabilityError(
            f"explicit step unstable near t={t:.6g}: max field magnitude {mag:.3e} "
            f"exceeds {_BLOWUP:.0e}; reduce dt"
        )
    if h.min() <= 0:
        raise InstabilityError(
            f"explicit step unstable near t={t:.6g}: depth reached {h.min():.3e}; "
            "reduce dt (wetting/drying is out of scope)"
        )


def rk4_step(state: HMState, dt: float, op: DiffOperator, params: Params) -> HMState:
    h, m, t = state.h, state.m, state.t

    def f(hh, mm):
        _check_stage(hh, mm, t)
        return classical_rhs(HMState(state.grid, hh, mm, t), op, params)

    k1h, k1m = f(h, m)
    k2h, k2m = f(h + 0.5 * dt * k1h, m + 0.5 * dt * k1m)
    k3h, k3m = f(h + 0.5 * dt * k2h, m + 0.5 * dt * k2m)
    k4h, k4m = f(h + dt * k3h, m + dt * k3m)
    hn = h + dt * (k1h + 2 * k2h + 2 * k3h + k4h) / 6.0
    mn = m + dt * (k1m + 2 * k2m + 2 * k3m + k4m) / 6.0
    _check_stage(hn, mn, t + dt)
    return HMState(state.grid, hn, mn, t=t + dt)


def rk4_run(initial: HMState, dt: float, t_end: float, op: DiffOperator, params: Params,
            callbacks=(), store_stride: int = 1) -> ReferenceTrajectory:
    """Fixed-step RK4 to t_end; aborts with a diagnostic if fields blow up."""
    if op.grid != initial.grid:
        raise GridMismatchError("operator and state live on different grids")
    span = t_end - initial.t
    n_steps_f = span / dt
    n_steps = int(round(n_steps_f))
    if n_steps < 1 or abs(n_steps_f - n_steps) > 1e-9 * max(1.0, abs(n_steps_f)):
        raise ValueError(f"t_end - t0 = {span} is not a positive integer multiple of dt = {dt}")
    traj = ReferenceTrajectory([initial], [0])
    state = initial
    for k in range(1, n_steps + 1):
        try:
            state = rk4_step(state, dt, op, params)
        except InstabilityError as exc:
            exc.step_index = k
            exc.time = state.t
            raise
        for fn in callbacks:
            fn(k, state)
        if k % store_stride == 0 or k == n_steps:
            traj.states.append(state)
            traj.state_steps.append(k)
    return traj
