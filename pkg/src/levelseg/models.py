"""Per-step right-hand sides and discrete energies of the three evolution
models: geodesic active contour, Chan-Vese with a weighted inside term, and
the modified Chan-Vese whose inside target is frozen at alpha * max(u0).

Intensities are expected in normalized [0, 1] units for end-to-end runs
(see imageio.normalize_field); the operations themselves are scale-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import (
    ScalarField,
    curvature,
    delta_eps,
    edge_detector,
    gradient,
    gradient_magnitude,
    heaviside_eps,
)

MODEL_NAMES = ("geodesic", "chan_vese", "modified")


@dataclass
class EvolveParams:
    """All model parameters.

    mu: length-penalty weight (>= 0)
    nu: area-penalty weight (any sign)
    lam: weight of the inside data term, Chan-Vese variant only (> 0)
    alpha: inside-target fraction of max intensity, modified model only
    eps: Heaviside/delta regularization width (> 0)
    dt: explicit time step; None selects the stability bound automatically
    max_iters: iteration cap
    stop_tol: relative energy-change threshold for the stopping rule
    reinit_every: reinitialize the level set every N steps (0 disables)
    reinit_sweeps: relaxation sweeps per reinitialization
    """

    mu: float = 5.0
    nu: float = 0.0
    lam: float = 1.0
    alpha: float = 0.7
    eps: float = 1.0
    dt: Optional[float] = None
    max_iters: int = 500
    stop_tol: float = 1e-5
    reinit_every: int = 25
    reinit_sweeps: int = 10

    def validate(self) -> None:
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if not (self.lam > 0):
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not (self.eps > 0):
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.dt is not None and not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.stop_tol < 0:
            raise ValueError(f"stop_tol must be >= 0, got {self.stop_tol}")
        if self.reinit_every < 0:
            raise ValueError(f"reinit_every must be >= 0, got {self.reinit_every}")
        if self.reinit_sweeps < 0:
            raise ValueError(f"reinit_sweeps must be >= 0, got {self.reinit_sweeps}")


@dataclass
class RegionStats:
    """Region constants of the current partition: c1 over {phi >= 0}, c2 over
    {phi < 0}, pixel counts, and the global intensity maximum used by the
    modified model's inside target. Empty regions fall back to the global
    mean and are flagged.
    """

    c1: float
    c2: float
    n_inside: int
    n_outside: int
    max_intensity: float
    empty_inside: bool = False
    empty_outside: bool = False


def region_averages(u0: ScalarField, phi: ScalarField) -> RegionStats:
    """Mean intensity inside {phi >= 0} and outside {phi < 0}.

    A transiently empty region gets the global mean instead of NaN so the
    evolution can continue; the flag records the degeneracy.
    """
    if u0.data.shape != phi.data.shape:
        raise ValueError(
            f"image and level set dimensions differ: {u0.data.shape} vs {phi.data.shape}"
        )
    u = u0.data
    inside = phi.data >= 0.0
    n_in = int(inside.sum())
    n_out = u.size - n_in
    global_mean = float(u.mean())
    c1 = float(u[inside].mean()) if n_in else global_mean
    c2 = float(u[~inside].mean()) if n_out else global_mean
    return RegionStats(
        c1=c1,
        c2=c2,
        n_inside=n_in,
        n_outside=n_out,
        max_intensity=float(u.max()),
        empty_inside=n_in == 0,
        empty_outside=n_out == 0,
    )


def _check_dims(u0: ScalarField, phi: ScalarField) -> None:
    if u0.data.shape != phi.data.shape:
        raise ValueError(
            f"image and level set dimensions differ: {u0.data.shape} vs {phi.data.shape}"
        )


def _region_rhs(u0, phi, inside_target, outside_const, lam, params) -> ScalarField:
    # shared core of both region models:
    #   delta_eps(phi) * (mu*kappa - nu - lam*(u0 - inside)^2 + (u0 - outside)^2)
    u = u0.data
    kappa = curvature(phi).data
    delta = delta_eps(phi.data, params.eps)
    din = u - inside_target
    dout = u - outside_const
    return phi.like(delta * (params.mu * kappa - params.nu - lam * din * din + dout * dout))


def chan_vese_rhs(u0: ScalarField, phi: ScalarField, stats: RegionStats,
                  params: EvolveParams) -> ScalarField:
    """Descent direction of the weighted Chan-Vese energy at fixed (c1, c2):
    delta_eps(phi) * (mu*kappa - nu - lam*(u0-c1)^2 + (u0-c2)^2).
    """
    _check_dims(u0, phi)
    return _region_rhs(u0, phi, stats.c1, stats.c2, params.lam, params)


def modified_rhs(u0: ScalarField, phi: ScalarField, stats: RegionStats,
                 params: EvolveParams) -> ScalarField:
    """Descent direction of the fixed-inside-target energy: the inside
    constant is pinned at alpha * max(u0) instead of the region average, so
    the contour is pulled toward high-intensity structure only.
    """
    _check_dims(u0, phi)
    target = params.alpha * stats.max_intensity
    return _region_rhs(u0, phi, target, stats.c2, 1.0, params)


def geodesic_rhs(u0: ScalarField, phi: ScalarField, params: EvolveParams) -> ScalarField:
    """Geodesic active-contour flow g*kappa*|grad phi| + <grad g, grad phi>.

    u0 is expected pre-smoothed (grid.gaussian_smooth) so the edge detector
    sees finite gradients on noisy imagery.
    """
    _check_dims(u0, phi)
    g = u0.like(edge_detector(gradient_magnitude(u0).data))
    gg = gradient(g)
    gp = gradient(phi)
    kappa = curvature(phi).data
    grad_mag = gp.magnitude()
    return phi.like(g.data * kappa * grad_mag + gg.dx * gp.dx + gg.dy * gp.dy)


def _region_energy(u0, phi, inside_target, outside_const, lam, params) -> float:
    u = u0.data
    h2 = phi.spacing * phi.spacing
    H = heaviside_eps(phi.data, params.eps)
    delta = delta_eps(phi.data, params.eps)
    grad_mag = gradient_magnitude(phi).data
    din = u - inside_target
    dout = u - outside_const
    total = (
        lam * din * din * H
        + dout * dout * (1.0 - H)
        + params.mu * delta * grad_mag
        + params.nu * H
    )
    return float(total.sum() * h2)


def energy_chan_vese(u0: ScalarField, phi: ScalarField, stats: RegionStats,
                     params: EvolveParams) -> float:
    """Discrete weighted Chan-Vese energy: data terms against (c1, c2) plus
    length (mu) and area (nu) penalties, cell area h^2.
    """
    _check_dims(u0, phi)
    return _region_energy(u0, phi, stats.c1, stats.c2, params.lam, params)


def energy_modified(u0: ScalarField, phi: ScalarField, stats: RegionStats,
                    params: EvolveParams) -> float:
    """Discrete energy of the modified model: inside constant frozen at
    alpha * max(u0), outside constant c2, no lambda weighting.
    """
    _check_dims(u0, phi)
    target = params.alpha * stats.max_intensity
    return _region_energy(u0, phi, target, stats.c2, 1.0, params)


def energy_geodesic(u0: ScalarField, phi: ScalarField, params: EvolveParams) -> float:
    """Discrete edge-weighted contour length sum(g * delta_eps(phi) * |grad phi|) h^2;
    the quantity the geodesic flow shortens. Used for trace/stopping only.
    """
    _check_dims(u0, phi)
    g = edge_detector(gradient_magnitude(u0).data)
    delta = delta_eps(phi.data, params.eps)
    grad_mag = gradient_magnitude(phi).data
    return float((g * delta * grad_mag).sum() * phi.spacing * phi.spacing)
