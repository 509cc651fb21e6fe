"""One-step maps: Euler-Maruyama and the structure-preserving splitting.

The structure-preserving (SP) step composes an implicit-midpoint advection
substep, x* = x + dt v((x + x*)/2), with an exact Brownian substep
x* + sigma sqrt(dt) W.  In 3D the advection is itself split into the two
planar Hamiltonian sub-fields, applied in fixed order v_1 then v_2
(first-order Lie-Trotter).  The advection part of the SP map has Jacobian
determinant identically 1; the Euler-Maruyama advection determinant is
1 + dt^2 det H(x) with H the stream-function Hessian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FixedPointDiverged
from .field import FieldRealization, SubField, velocity

SCHEME_SP = "sp"
SCHEME_EM = "em"

MIDPOINT_TIME_MID = "mid"
MIDPOINT_TIME_START = "start"


@dataclass(frozen=True)
class SchemeConfig:
    """Integrator choice plus step-size and implicit-solver knobs."""

    scheme: str
    dt: float
    d0: float = 0.0
    fp_tol: float = 1e-12
    fp_max_iters: int = 100
    midpoint_time: str = MIDPOINT_TIME_MID

    def __post_init__(self):
        if self.scheme not in (SCHEME_SP, SCHEME_EM):
            raise ConfigError(f"scheme must be 'sp' or 'em', got {self.scheme!r}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.d0 < 0:
            raise ConfigError(f"d0 must be >= 0, got {self.d0}")
        if self.fp_tol <= 0:
            raise ConfigError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.fp_max_iters < 1:
            raise ConfigError(f"fp_max_iters must be >= 1, got {self.fp_max_iters}")
        if self.midpoint_time not in (MIDPOINT_TIME_MID, MIDPOINT_TIME_START):
            raise ConfigError(
                f"midpoint_time must be 'mid' or 'start', got {self.midpoint_time!r}"
            )

    @property
    def sigma(self) -> float:
        """Noise amplitude sigma = sqrt(2 D0), never stored independently."""
        return math.sqrt(2.0 * self.d0)


def _velocity_fn(field_or_subfield):
    if isinstance(field_or_subfield, FieldRealization):
        fld = field_or_subfield
        return lambda x, t: velocity(fld, x, t)
    if isinstance(field_or_subfield, SubField):
        return field_or_subfield.velocity
    if callable(field_or_subfield):
        return field_or_subfield
    raise ConfigError(f"cannot evaluate velocities of {type(field_or_subfield)!r}")


def em_advect(field, x, t: float, dt: float) -> np.ndarray:
    """Explicit advection x + dt v(x, t) (the EM step without noise)."""
    x = np.asarray(x, dtype=float)
    return x + dt * _velocity_fn(field)(x, t)


def em_step(field, x, t: float, cfg: SchemeConfig, noise) -> np.ndarray:
    """Full Euler-Maruyama step with standard-Gaussian noise vector."""
    out = em_advect(field, x, t, cfg.dt)
    return out + cfg.sigma * math.sqrt(cfg.dt) * np.asarray(noise, dtype=float)


def sp_advect_planar(field_or_subfield, x, t: float, dt: float,
                     cfg: SchemeConfig) -> np.ndarray:
    """Implicit midpoint advection x* = x + dt v((x + x*)/2, t_eval).

    Solved by plain fixed-point iteration started from x + dt v(x); the
    iteration contracts when dt times the field's Lipschitz constant is
    below 2.  t_eval is t + dt/2 under the default 'mid' policy.  Raises
    FixedPointDiverged when the residual fails to reach cfg.fp_tol within
    cfg.fp_max_iters iterations.
    """
    vfn = _velocity_fn(field_or_subfield)
    x = np.asarray(x, dtype=float)
    if dt == 0.0:
        return x.copy()
    t_eval = t + 0.5 * dt if cfg.midpoint_time == MIDPOINT_TIME_MID else t
    y = x + dt * vfn(x, t_eval)
    for iteration in range(cfg.fp_max_iters):
        y_next = x + dt * vfn(0.5 * (x + y), t_eval)
        residual = float(np.max(np.abs(y_next - y)))
        y = y_next
        if residual <= cfg.fp_tol:
            return y
        if not residual < 1e10:  # diverging or NaN: bail out early
            raise FixedPointDiverged(residual, iteration + 1)
    raise FixedPointDiverged(residual, cfg.fp_max_iters)


def sp_advect(field: FieldRealization, x, t: float, dt: float,
              cfg: SchemeConfig) -> np.ndarray:
    """Volume-preserving advection: direct in 2D, v_1 then v_2 in 3D."""
    if field.dim == 2:
        return sp_advect_planar(field, x, t, dt, cfg)
    x1 = sp_advect_planar(SubField(field, 1), x, t, dt, cfg)
    return sp_advect_planar(SubField(field, 2), x1, t, dt, cfg)


def sp_step(field: FieldRealization, x, t: float, cfg: SchemeConfig, noise) -> np.ndarray:
    """Full structure-preserving step: implicit advection plus exact noise."""
    out = sp_advect(field, x, t, cfg.dt, cfg)
    return out + cfg.sigma * math.sqrt(cfg.dt) * np.asarray(noise, dtype=float)


def advection_map(field: FieldRealization, cfg: SchemeConfig, t: float = 0.0):
    """Noise-free one-step map x -> x' for Jacobian diagnostics."""
    if cfg.scheme == SCHEME_EM:
        return lambda x: em_advect(field, x, t, cfg.dt)
    return lambda x: sp_advect(field, x, t, cfg.dt, cfg)


def jacobian_det_fd(step, x, h: float = 1e-5) -> float:
    """Determinant of the central-finite-difference Jacobian of a map at x."""
    if h <= 0:
        raise ConfigError(f"FD step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    dim = x.shape[0]
    jac = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        jac[:, j] = (np.asarray(step(x + e)) - np.asarray(step(x - e))) / (2.0 * h)
    return float(np.linalg.det(jac))
