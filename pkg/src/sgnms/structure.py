"""Multi-symplectic structure of the Serre-Green-Naghdi equations.

The first-order form is  M z_t + K z_x = grad S(z)  with the 8-component
state z = (h, phi, u, v, p, q, r, s), constant skew matrices M and K, and a
cubic polynomial S.  This module owns M, K, S with its first and second
derivatives, the lift from (h, u) to z and the projection back, and pointwise
residual evaluators for every equation of the model: the multi-symplectic
system itself, the (h, u) mass/momentum equations, the three derived
conservation laws, and the relaxed-Lagrangian Euler-Lagrange system.

Index convention: components are numbered 0..7 in code via the constants
H, PHI, U, V, P, Q, R, S below.  At points produced by ``lift`` the
identifications q = h*u, p = h*v, r = h*u*v, s = h_x hold, v is the vertical
velocity at the free surface and phi is a velocity-potential-like variable
defined through phi_x = u + s*v/3.

phi is special: it is defined only through its derivatives, and on a periodic
domain it generally contains a part that grows linearly in x (e.g. a uniform
stream has phi = U*x).  ZState therefore stores phi as a periodic field plus
a constant secular slope; the slope is constant in time because d/dt of the
domain-mean of phi_x is the mean of an x-derivative of periodic quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DiffOperator, Grid1D, Params, PhysicalState
from .errors import DryStateError, GridMismatchError

H, PHI, U, V, P, Q, R, S = range(8)

COMPONENT_NAMES = ("h", "phi", "u", "v", "p", "q", "r", "s")


class SkewForm:
    """Constant skew-symmetric 8x8 bilinear form given by sparse triples.

    Triples use 1-based indices (i, j, coeff); skew-symmetry is enforced at
    construction: each stored (i, j, c) implies (j, i, -c).
    """

    def __init__(self, entries):
        self.entries = tuple((int(i), int(j), float(c)) for i, j, c in entries)
        mat = np.zeros((8, 8))
        for i, j, c in self.entries:
            if i == j and c != 0.0:
                raise ValueError(f"diagonal entry ({i},{j}) must be zero")
            mat[i - 1, j - 1] += c
            mat[j - 1, i - 1] -= c
        self.matrix = mat
        if not np.array_equal(mat, -mat.T):
            raise ValueError("assembled matrix is not skew-symmetric")

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec


def build_M() -> SkewForm:
    """Time-direction structure matrix: couples (h, phi) and (h, p)."""
    return SkewForm([(1, 2, 1.0), (1, 5, 1.0 / 3.0)])


def build_K() -> SkewForm:
    """Space-direction structure matrix: couples (h, r) and (phi, q)."""
    return SkewForm([(1, 7, 1.0 / 3.0), (2, 6, -1.0)])


M_MAT = build_M().matrix
K_MAT = build_K().matrix


def hamiltonian_S(z: np.ndarray, params: Params):
    """Scalar generating function S(z); accepts a vector (8,) or fields (8, n)."""
    z = np.asarray(z, dtype=float)
    h, u, v, p, q, r, s = z[H], z[U], z[V], z[P], z[Q], z[R], z[S]
    if np.any(h <= 0):
        raise DryStateError("hamiltonian_S requires positive depth")
    return (
        (v * v / 6.0 - u * u / 2.0 - s * u * v / 3.0) * h
        - 0.5 * params.g * h * h
        + p * (u * s - v) / 3.0
        + q * (u + s * v / 3.0)
        - r * s / 3.0
    )


def grad_S(z: np.ndarray, params: Params) -> np.ndarray:
    """Gradient of S; same shape as z ((8,) or (8, n))."""
    z = np.asarray(z, dtype=float)
    h, u, v, p, q, r, s = z[H], z[U], z[V], z[P], z[Q], z[R], z[S]
    out = np.empty_like(z)
    out[H] = v * v / 6.0 - u * u / 2.0 - s * u * v / 3.0 - params.g * h
    out[PHI] = 0.0
    out[U] = -(u + s * v / 3.0) * h + p * s / 3.0 + q
    out[V] = (v / 3.0 - s * u / 3.0) * h - p / 3.0 + q * s / 3.0
    out[P] = (u * s - v) / 3.0
    out[Q] = u + s * v / 3.0
    out[R] = -s / 3.0
    out[S] = (p * u + q * v - r - h * u * v) / 3.0
    return out


def hess_S(z: np.ndarray, params: Params) -> np.ndarray:
    """Hessian of S.

    For a single state (8,) returns (8, 8); for fields (8, n) returns
    (n, 8, 8).  S is cubic so the entries are linear in z; assembly is
    explicitly symmetric.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zf = z[:, None] if single else z
    n = zf.shape[1]
    h, u, v, p, q, s = zf[H], zf[U], zf[V], zf[P], zf[Q], zf[S]
    out = np.zeros((n, 8, 8))

    def put(a, b, val):
        out[:, a, b] = val
        if a != b:
            out[:, b, a] = val

    put(H, H, -params.g)
    put(H, U, -u - s * v / 3.0)
    put(H, V, v / 3.0 - s * u / 3.0)
    put(H, S, -u * v / 3.0)
    put(U, U, -h)
    put(U, V, -s * h / 3.0)
    put(U, P, s / 3.0)
    put(U, Q, 1.0)
    put(U, S, (p - v * h) / 3.0)
    put(V, V, h / 3.0)
    put(V, P, -1.0 / 3.0)
    put(V, Q, s / 3.0)
    put(V, S, (q - u * h) / 3.0)
    put(P, S, u / 3.0)
    put(Q, S, v / 3.0)
    put(R, S, -1.0 / 3.0)
    return out[0] if single else out


def reduced_S(state: PhysicalState, op: DiffOperator, params: Params) -> np.ndarray:
    """S with the auxiliary variables eliminated: h u^2/2 - h^3 u_x^2/6 - g h^2/2.

    Purely diagnostic; it is neither an energy density nor a Lagrangian.
    """
    ux = op(state.u)
    return (
        0.5 * state.h * state.u**2
        - state.h**3 * ux**2 / 6.0
        - 0.5 * params.g * state.h**2
    )


@dataclass(frozen=True)
class ZState:
    """Eight periodic component fields plus the secular slope of phi.

    ``z`` has shape (8, n); row PHI holds only the periodic part of phi.
    The full potential is phi(x) = z[PHI] + phi_slope * x (the gauge is
    phi = 0 at the first grid point at construction time).
    """

    grid: Grid1D
    z: np.ndarray
    phi_slope: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.shape != (8, self.grid.n):
            raise GridMismatchError(
                f"z of shape {z.shape} does not fit grid with n={self.grid.n}"
            )
        object.__setattr__(self, "z", z)
        if z[H].min() <= 0:
            raise DryStateError(f"min depth {z[H].min():.3e} is not positive")

    @property
    def h(self):
        return self.z[H]

    @property
    def u(self):
        return self.z[U]

    @property
    def v(self):
        return self.z[V]

    def phi_total(self) -> np.ndarray:
        return self.z[PHI] + self.phi_slope * self.grid.x

    def phi_x(self, op: DiffOperator) -> np.ndarray:
        return op(self.z[PHI]) + self.phi_slope

    def z_x(self, op: DiffOperator) -> np.ndarray:
        """Spatial derivative of every component, secular slope included."""
        zx = op.rows(self.z)
        zx[PHI] += self.phi_slope
        return zx


def lift(state: PhysicalState, op: DiffOperator) -> ZState:
    """Build the 8-component state from (h, u).

    s = h_x, v = -h u_x (mass conservation substituted into the free-surface
    impermeability so only an instantaneous snapshot is needed), p = h v,
    q = h u, r = h u v, and phi is the periodic antiderivative of u + s v/3
    split into (periodic part, secular slope) with phi(x_0) = 0.
    """
    if op.grid != state.grid:
        raise GridMismatchError("operator and state live on different grids")
    h, u = state.h, state.u
    s = op(h)
    v = -h * op(u)
    z = np.empty((8, state.grid.n))
    z[H] = h
    z[U] = u
    z[V] = v
    z[P] = h * v
    z[Q] = h * u
    z[R] = h * u * v
    z[S] = s
    slope, per = op.antiderivative_split(u + s * v / 3.0)
    per = per - per[0]  # gauge: phi = 0 at x_0
    z[PHI] = per
    return ZState(state.grid, z, phi_slope=slope, t=state.t)


def project(zs: ZState) -> PhysicalState:
    """Drop the auxiliary components and return (h, u, t)."""
    return PhysicalState(zs.grid, zs.z[H].copy(), zs.z[U].copy(), t=zs.t)


def ms_residual(zs: ZState, z_t: np.ndarray, op: DiffOperator, params: Params) -> np.ndarray:
    """Pointwise residual M z_t + K z_x - grad S(z); shape (8, n).

    ``z_t`` is a caller-supplied (8, n) array of time derivatives (the
    secular slope of phi is constant in time, so all of z_t is periodic).
    """
    z_t = np.asarray(z_t, dtype=float)
    if z_t.shape != zs.z.shape:
        raise GridMismatchError(f"z_t shape {z_t.shape} != state shape {zs.z.shape}")
    zx = zs.z_x(op)
    return M_MAT @ z_t + K_MAT @ zx - grad_S(zs.z, params)


def traveling_phi_drift(zs: ZState, speed: float, op: DiffOperator, params: Params) -> float:
    """Uniform rate beta at which the potential of a traveling wave drifts.

    A profile moving at speed c satisfies f_t = -c f_x for every component
    except phi, whose time derivative carries a constant on top of the
    translation (already for still water phi_t = -g h0).  beta is recovered
    from the h-row balance of the multi-symplectic system; on an exact
    traveling solution the recovered field is constant in x, and its mean is
    returned.
    """
    zx = zs.z_x(op)
    z = zs.z
    rhs_h = (
        z[V] ** 2 / 6.0 - z[U] ** 2 / 2.0 - z[S] * z[U] * z[V] / 3.0 - params.g * z[H]
    )
    beta_field = rhs_h + speed * zx[P] / 3.0 - zx[R] / 3.0 + speed * zx[PHI]
    return float(beta_field.mean())


def traveling_z_t(zs: ZState, speed: float, op: DiffOperator, params: Params) -> np.ndarray:
    """Time derivative of an exactly translating solution: -c z_x + beta e_phi."""
    z_t = -speed * zs.z_x(op)
    z_t[PHI] += traveling_phi_drift(zs, speed, op, params)
    return z_t


def vertical_acceleration(h, u, u_xt, op: DiffOperator) -> np.ndarray:
    """gamma = h (u_x^2 - u_xt - u u_xx), the surface vertical acceleration."""
    ux = op(u)
    uxx = op(ux)
    return h * (ux * ux - u_xt - u * uxx)


def residual_mass(state: PhysicalState, h_t, op: DiffOperator) -> np.ndarray:
    """h_t + (h u)_x."""
    return state.grid.check_field(h_t) + op(state.h * state.u)


def residual_momentum(state: PhysicalState, u_t, u_xt, op: DiffOperator, params: Params) -> np.ndarray:
    """u_t + u u_x + g h_x + (1/3) h^-1 [h^2 gamma]_x."""
    h, u = state.h, state.u
    gam = vertical_acceleration(h, u, state.grid.check_field(u_xt), op)
    return (
        state.grid.check_field(u_t)
        + u * op(u)
        + params.g * op(h)
        + op(h * h * gam) / (3.0 * h)
    )


def residual_momentum_flux(state: PhysicalState, h_t, u_t, u_xt, op, params) -> np.ndarray:
    """d/dt[h u] + d/dx[h u^2 + g h^2/2 + h^2 gamma/3]."""
    h, u = state.h, state.u
    gam = vertical_acceleration(h, u, u_xt, op)
    flux = h * u * u + 0.5 * params.g * h * h + h * h * gam / 3.0
    return h_t * u + h * u_t + op(flux)


def residual_energy(state: PhysicalState, h_t, u_t, u_xt, op, params) -> np.ndarray:
    """Local energy law with density h u^2/2 + h^3 u_x^2/6 + g h^2/2."""
    h, u = state.h, state.u
    ux = op(u)
    gam = vertical_acceleration(h, u, u_xt, op)
    d_density = (
        0.5 * h_t * u * u
        + h * u * u_t
        + 0.5 * h * h * h_t * ux * ux
        + h**3 * ux * u_xt / 3.0
        + params.g * h * h_t
    )
    flux = (0.5 * u * u + h * h * ux * ux / 6.0 + params.g * h + h * gam / 3.0) * h * u
    return d_density + op(flux)


def tangential_density(state: PhysicalState, op: DiffOperator) -> np.ndarray:
    """u - (1/3) h^-1 (h^3 u_x)_x, the conserved free-surface momentum."""
    h, u = state.h, state.u
    return u - op(h**3 * op(u)) / (3.0 * h)


def residual_tangential(state: PhysicalState, h_t, u_t, u_xt, op, params) -> np.ndarray:
    """Local law for the tangential momentum at the free surface."""
    h, u = state.h, state.u
    ux = op(u)
    w = op(h**3 * ux)  # (h^3 u_x)_x
    dt_w = op(3.0 * h * h * h_t * ux + h**3 * u_xt)
    d_density = u_t - (dt_w / h - w * h_t / (h * h)) / 3.0
    flux = 0.5 * u * u + params.g * state.h - 0.5 * h * h * ux * ux - u * w / (3.0 * h)
    return d_density + op(flux)


def lagrangian_density(h, h_t, h_x, phi_bar, phi_bar_x, u_bar, v_tilde, mu_bar, mu_bar_x,
                       params: Params) -> np.ndarray:
    """Relaxed Lagrangian density with the impermeability constraint substituted.

    L = (h_t + mu h_x) phi - g h^2/2
        + h [mu u - u^2/2 + nu v/3 - v^2/6 + phi mu_x],  nu = h_t + mu h_x.
    """
    nu = h_t + mu_bar * h_x
    return (
        nu * phi_bar
        - 0.5 * params.g * h * h
        + h * (
            mu_bar * u_bar
            - 0.5 * u_bar * u_bar
            + nu * v_tilde / 3.0
            - v_tilde * v_tilde / 6.0
            + phi_bar * mu_bar_x
        )
    )


def el_residuals(h, u_bar, v_tilde, mu_bar, phi_bar,
                 h_t, h_x, v_t, v_x, mu_x, phi_t, phi_x,
                 params: Params):
    """The five Euler-Lagrange residuals of the relaxed Lagrangian.

    Returned in variation order (u_bar, v_tilde, mu_bar, phi_bar, h):
      r_u   = mu - u
      r_v   = h_t + mu h_x - v
      r_mu  = u + v h_x/3 - phi_x
      r_phi = h_t + (h mu)_x
      r_h   = mu u - u^2/2 - v^2/6 - mu phi_x - phi_t - g h
              - h (v_t + mu v_x + v mu_x)/3
    """
    r_u = mu_bar - u_bar
    r_v = h_t + mu_bar * h_x - v_tilde
    r_mu = u_bar + v_tilde * h_x / 3.0 - phi_x
    r_phi = h_t + h_x * mu_bar + h * mu_x
    r_h = (
        mu_bar * u_bar
        - 0.5 * u_bar * u_bar
        - v_tilde * v_tilde / 6.0
        - mu_bar * phi_x
        - phi_t
        - params.g * h
        - h * (v_t + mu_bar * v_x + v_tilde * mu_x) / 3.0
    )
    return r_u, r_v, r_mu, r_phi, r_h
