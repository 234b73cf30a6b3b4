"""Initial-condition library with residual-certified exact solutions.

The solitary wave formula is the classical sech^2 traveling solution of the
Serre system.  It is never trusted as-is: every construction runs a
certification pass that substitutes the traveling-wave time derivatives into
the mass and momentum residual evaluators on a fine spectral grid and refuses
to hand out the scenario if the residuals exceed the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import DiffOperator, Grid1D, Params, PhysicalState
from .errors import CertificationError
from .structure import residual_mass, residual_momentum

CERT_THRESHOLD = 1e-8
CERT_N = 512


@dataclass(frozen=True)
class CertificationReport:
    n: int
    length: float
    sup_mass: float
    sup_momentum: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.sup_mass <= self.threshold and self.sup_momentum <= self.threshold


@dataclass(frozen=True)
class Scenario:
    """Named initial-condition factory, optionally with an exact solution."""

    name: str
    parameters: dict
    speed: Optional[float]  # translation speed of the exact solution, if any
    builder: Callable[[Grid1D, float], PhysicalState]
    certification: Optional[CertificationReport] = None

    @property
    def has_exact(self) -> bool:
        return self.speed is not None

    def build(self, grid: Grid1D) -> PhysicalState:
        return self.builder(grid, 0.0)

    def exact(self, grid: Grid1D, t: float) -> PhysicalState:
        if not self.has_exact:
            raise ValueError(f"scenario {self.name!r} has no exact solution")
        return self.builder(grid, t)


def _wrapped_offset(grid: Grid1D, shift: float) -> np.ndarray:
    """Signed distance from the (moving) profile center, wrapped periodically."""
    L = grid.length
    return (grid.x - 0.5 * L - shift + 0.5 * L) % L - 0.5 * L


def still_water(h0: float) -> Scenario:
    if not h0 > 0:
        raise ValueError(f"rest depth must be positive, got {h0}")

    def builder(grid: Grid1D, t: float) -> PhysicalState:
        return PhysicalState(grid, np.full(grid.n, float(h0)), np.zeros(grid.n), t=t)

    return Scenario("still-water", {"h0": h0}, speed=0.0, builder=builder)


def uniform_stream(h0: float, U: float) -> Scenario:
    if not h0 > 0:
        raise ValueError(f"rest depth must be positive, got {h0}")

    def builder(grid: Grid1D, t: float) -> PhysicalState:
        return PhysicalState(grid, np.full(grid.n, float(h0)), np.full(grid.n, float(U)), t=t)

    return Scenario("uniform-stream", {"h0": h0, "U": U}, speed=float(U), builder=builder)


def gaussian_hump(h0: float, a: float, width: float) -> Scenario:
    """Smooth depth perturbation h0 + a exp(-d^2 / (2 width^2)) at rest."""
    if not h0 > 0:
        raise ValueError(f"rest depth must be positive, got {h0}")
    if not a > -h0:
        raise ValueError(f"amplitude {a} would dry out the rest depth {h0}")
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")

    def builder(grid: Grid1D, t: float) -> PhysicalState:
        d = _wrapped_offset(grid, 0.0)
        h = h0 + a * np.exp(-0.5 * (d / width) ** 2)
        return PhysicalState(grid, h, np.zeros(grid.n), t=t)

    return Scenario("gaussian-hump", {"h0": h0, "a": a, "width": width}, speed=None,
                    builder=builder)


def solitary_wave(h0: float, a: float, params: Params, certify: bool = True,
                  threshold: float = CERT_THRESHOLD, cert_n: int = CERT_N) -> Scenario:
    """Traveling sech^2 wave: h = h0 + a sech^2(kappa (x - c t)), u = c (1 - h0/h).

    c = sqrt(g (h0 + a)), kappa = sqrt(3 a) / (2 h0 sqrt(h0 + a)).  The a = 0
    limit degenerates cleanly to still water with c = sqrt(g h0).
    """
    if not h0 > 0:
        raise ValueError(f"rest depth must be positive, got {h0}")
    if a < 0:
        raise ValueError(f"solitary amplitude must be nonnegative, got {a}")
    g = params.g
    c = math.sqrt(g * (h0 + a))
    kappa = math.sqrt(3.0 * a) / (2.0 * h0 * math.sqrt(h0 + a))

    def builder(grid: Grid1D, t: float) -> PhysicalState:
        d = _wrapped_offset(grid, c * t)
        sech = 1.0 / np.cosh(kappa * d) if a > 0 else np.ones(grid.n)
        h = h0 + a * sech * sech
        u = c * (1.0 - h0 / h)
        return PhysicalState(grid, h, u, t=t)

    scenario = Scenario(
        "solitary-wave",
        {"h0": h0, "a": a, "c": c, "kappa": kappa},
        speed=c,
        builder=builder,
    )
    if certify:
        report = certify_traveling(scenario, params, n=cert_n, threshold=threshold)
        scenario = Scenario(scenario.name, scenario.parameters, scenario.speed,
                            scenario.builder, certification=report)
    return scenario


def certification_grid(scenario: Scenario, n: int = CERT_N) -> Grid1D:
    """Grid on which the scenario's exact solution is effectively periodic.

    The box is widened until the profile's tails sit below round-off, so
    spectral differentiation across the periodic seam does not pollute the
    residuals.
    """
    h0 = scenario.parameters.get("h0", 1.0)
    length = 40.0 * h0
    kappa = scenario.parameters.get("kappa", 0.0)
    a = scenario.parameters.get("a", 0.0)
    if kappa > 0 and a > 0:
        # tail amplitude ~ 4 a exp(-kappa L); push it below 1e-12
        length = max(length, (math.log(4.0 * a) + 28.0) / kappa)
    return Grid1D(length, n)


def certify_traveling(scenario: Scenario, params: Params, n: int = CERT_N,
                      threshold: float = CERT_THRESHOLD) -> CertificationReport:
    """Check the exact solution against the model's own equations.

    Substitutes d/dt = -c d/dx into the mass and momentum residuals on a fine
    spectral grid; raises CertificationError when either sup-norm exceeds the
    threshold.
    """
    if not scenario.has_exact:
        raise CertificationError(f"scenario {scenario.name!r} has no exact solution")
    grid = certification_grid(scenario, n)
    op = DiffOperator(grid, "fourier")
    state = scenario.build(grid)
    c = scenario.speed
    h_t = -c * op(state.h)
    u_x = op(state.u)
    u_t = -c * u_x
    u_xt = -c * op(u_x)
    sup_mass = float(np.abs(residual_mass(state, h_t, op)).max())
    sup_mom = float(np.abs(residual_momentum(state, u_t, u_xt, op, params)).max())
    report = CertificationReport(n, grid.length, sup_mass, sup_mom, threshold)
    if not report.passed:
        raise CertificationError(
            f"scenario {scenario.name!r} failed certification: "
            f"sup|mass residual| = {sup_mass:.3e}, sup|momentum residual| = {sup_mom:.3e}, "
            f"threshold {threshold:.1e} (formula or parameters are wrong)"
        )
    return report


def traveling_zstate(scenario: Scenario, grid: Grid1D, op: DiffOperator, params: Params,
                     t: float):
    """Exact lifted trajectory snapshot of a traveling scenario.

    The t = 0 lift is translated spectrally by c*t and the potential receives
    its uniform drift beta*t, so snapshots at different times share one
    continuous phi gauge (unlike independent lifts, which re-anchor phi).
    """
    from .core import shift_periodic
    from .structure import PHI, ZState, lift, traveling_phi_drift

    zs0 = lift(scenario.build(grid), op)
    c = scenario.speed
    beta = traveling_phi_drift(zs0, c, op, params)
    if t == 0.0:
        return zs0
    delta = c * t
    z = np.stack([shift_periodic(zs0.z[comp], grid, delta) for comp in range(8)])
    z[PHI] += beta * t - zs0.phi_slope * delta
    return ZState(grid, z, phi_slope=zs0.phi_slope, t=t)


def from_name(name: str, params: Params, **kwargs) -> Scenario:
    """CLI-facing constructor dispatch; unknown names raise ValueError."""
    if name == "still-water":
        return still_water(kwargs.get("h0", 1.0))
    if name == "uniform-stream":
        return uniform_stream(kwargs.get("h0", 1.0), kwargs.get("U", 0.0))
    if name == "gaussian-hump":
        return gaussian_hump(kwargs.get("h0", 1.0), kwargs.get("a", 0.1),
                             kwargs.get("width", 1.0))
    if name == "solitary-wave":
        return solitary_wave(kwargs.get("h0", 1.0), kwargs.get("a", 0.2), params)
    raise ValueError(f"unknown scenario {name!r}")
