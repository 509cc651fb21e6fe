"""Frozen realizations of incompressible Gaussian random velocity fields.

A realization is a finite sum of random Fourier modes,

    v(x, t) = N^(-1/2) * sum_n [ u_n cos(k_n.x + theta_n t)
                                 + w_n sin(k_n.x + theta_n t) ],

with u_n = xi_n k_n^perp, w_n = zeta_n k_n^perp in 2D and u_n = xi_n x k_n,
w_n = zeta_n x k_n in 3D, so every mode is solenoidal by construction.  The
stored xi_n/zeta_n coefficients carry the spectrum's amplitude normalization:

* shell/Gauss families: xi_n is Gaussian with variance 2*int(E/k^2) in 2D
  (per component int(E/k^2) in 3D), paired with the E(k)/k^2 magnitude law,
  which reproduces the target covariance and makes the single-point
  component variance equal int E(k) dk in 2D;
* low-k families (e5/e6/e7): magnitudes follow E(k) itself and the Gaussian
  amplitude is scaled by 1/|k_n| (stream-function normalization), keeping
  the low-wavenumber energy that drives their anomalous transport;
* power laws: xi_n is standard Gaussian scaled by 1/|k_n|, matching the
  stream realization Psi = N^(-1/2) sum |k_i|^(-1) (xi_i sin - zeta_i cos).

Temporal decorrelation D(t) = exp(-theta0^2 t^2 / 2) is realized implicitly
by theta_n ~ N(0, theta0^2); it is never evaluated directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import ConfigError, DegenerateMode, WrongDimension
from .spectrum import (
    SpectrumSpec,
    inverse_square_energy,
    sample_wavevectors,
    total_energy,
)

#: modes with |k_2| below this fraction of |k| are resampled in 3D, since
#: the planar sub-field amplitudes divide by k_2.  The floor caps the
#: amplification at 50x, keeping dt * L/2 < 1 for the implicit sub-field
#: solves at the desk-scale step sizes; it excludes 2% of directions.
DEGENERATE_K2_FRACTION = 0.02
_MAX_RESAMPLES = 100

AMPLITUDE_STANDARD = "standard"
AMPLITUDE_POWERLAW_STREAM = "powerlaw-stream"


@dataclass(frozen=True)
class FieldRealization:
    """One frozen draw of the random velocity field (immutable, shareable)."""

    dim: int
    k: np.ndarray          # (N, dim) wavevectors
    xi: np.ndarray         # (N,) in 2D, (N, 3) in 3D
    zeta: np.ndarray       # like xi
    u: np.ndarray          # (N, dim) cosine amplitudes
    w: np.ndarray          # (N, dim) sine amplitudes
    theta: np.ndarray      # (N,) time frequencies
    theta0: float
    amplitude_kind: str
    sub_u: tuple | None = dataclass_field(default=None, repr=False)
    sub_w: tuple | None = dataclass_field(default=None, repr=False)

    @property
    def n_modes(self) -> int:
        return self.k.shape[0]


def _perp(k: np.ndarray) -> np.ndarray:
    """k_perp = (-k_2, k_1) for (N, 2) input."""
    return np.stack([-k[:, 1], k[:, 0]], axis=1)


def _sub_amplitudes(coef: np.ndarray, k: np.ndarray):
    """Planar sub-field amplitude pair (a_12, a_23) from a (N, 3) coefficient.

    a_12 is divergence-free in (x1, x2) with zero third component, a_23 in
    (x2, x3) with zero first component, and a_12 + a_23 = coef x k.
    """
    k1, k2, k3 = k[:, 0], k[:, 1], k[:, 2]
    c1, c2, c3 = coef[:, 0], coef[:, 1], coef[:, 2]
    ratio = c2 * k1 * k3 / k2
    zeros = np.zeros_like(k1)
    a12 = np.stack([c2 * k3 - c3 * k2, c3 * k1 - ratio, zeros], axis=1)
    a23 = np.stack([zeros, ratio - c1 * k3, c1 * k2 - c2 * k1], axis=1)
    return a12, a23


def _sample_nondegenerate(spec: SpectrumSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample wavevectors, resampling 3D draws with tiny second components."""
    k = sample_wavevectors(spec, n, rng)
    if spec.dim != 3:
        return k
    for _ in range(_MAX_RESAMPLES):
        norms = np.linalg.norm(k, axis=1)
        bad = np.abs(k[:, 1]) < DEGENERATE_K2_FRACTION * norms
        if not bad.any():
            return k
        k[bad] = sample_wavevectors(spec, int(bad.sum()), rng)
    raise DegenerateMode(
        f"could not draw {n} modes with |k_2| >= {DEGENERATE_K2_FRACTION}|k| "
        f"after {_MAX_RESAMPLES} resampling rounds"
    )


def generate(spec: SpectrumSpec, n_modes: int, theta0: float,
             rng: np.random.Generator) -> FieldRealization:
    """Draw one field realization with n_modes random Fourier modes."""
    if n_modes < 1:
        raise ConfigError(f"n_modes must be >= 1, got {n_modes}")
    if theta0 < 0:
        raise ConfigError(f"theta0 must be >= 0, got {theta0}")
    dim = spec.dim
    k = _sample_nondegenerate(spec, n_modes, rng)
    norms = np.linalg.norm(k, axis=1)

    shape = (n_modes,) if dim == 2 else (n_modes, 3)
    gx = rng.standard_normal(shape)
    gz = rng.standard_normal(shape)
    if spec.is_powerlaw:
        kind = AMPLITUDE_POWERLAW_STREAM
        scale = 1.0 / norms
    elif spec.family.value in ("e5", "e6", "e7"):
        kind = AMPLITUDE_STANDARD
        base = 2.0 * total_energy(spec) if dim == 2 else total_energy(spec)
        scale = math.sqrt(base) / norms
    else:
        kind = AMPLITUDE_STANDARD
        base = inverse_square_energy(spec)
        scale = math.sqrt(2.0 * base) if dim == 2 else math.sqrt(base)
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n_modes,))
    if dim == 2:
        xi = scale * gx
        zeta = scale * gz
        u = xi[:, None] * _perp(k)
        w = zeta[:, None] * _perp(k)
    else:
        xi = scale[:, None] * gx
        zeta = scale[:, None] * gz
        u = np.cross(xi, k)
        w = np.cross(zeta, k)

    theta = theta0 * rng.standard_normal(n_modes) if theta0 > 0 else np.zeros(n_modes)

    sub_u = sub_w = None
    if dim == 3:
        sub_u = _sub_amplitudes(xi, k)
        sub_w = _sub_amplitudes(zeta, k)
    return FieldRealization(dim=dim, k=k, xi=xi, zeta=zeta, u=u, w=w,
                            theta=theta, theta0=float(theta0),
                            amplitude_kind=kind, sub_u=sub_u, sub_w=sub_w)


def empty_field(dim: int) -> FieldRealization:
    """Zero-mode realization with v identically 0 (Brownian-only test hook)."""
    if dim not in (2, 3):
        raise ConfigError(f"dim must be 2 or 3, got {dim}")
    shape = (0,) if dim == 2 else (0, 3)
    z = np.zeros(shape)
    zk = np.zeros((0, dim))
    sub = (np.zeros((0, 3)), np.zeros((0, 3))) if dim == 3 else None
    return FieldRealization(dim=dim, k=zk, xi=z, zeta=z, u=zk.copy(), w=zk.copy(),
                            theta=np.zeros(0), theta0=0.0,
                            amplitude_kind=AMPLITUDE_STANDARD,
                            sub_u=sub, sub_w=sub)


def _phases(field: FieldRealization, x: np.ndarray, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ph = x @ field.k.T
    if t != 0.0 and field.theta0 > 0:
        ph = ph + field.theta * t
    return ph


def velocity(field: FieldRealization, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Velocity at position(s) x (shape (..., dim)) and time t."""
    x = np.asarray(x, dtype=float)
    if field.n_modes == 0:
        return np.zeros_like(x)
    ph = _phases(field, x, t)
    out = np.cos(ph) @ field.u + np.sin(ph) @ field.w
    return out / math.sqrt(field.n_modes)


def velocity_gradient(field: FieldRealization, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Exact Jacobian dv_i/dx_j at x, shape (..., dim, dim); trace is 0."""
    x = np.asarray(x, dtype=float)
    if field.n_modes == 0:
        return np.zeros(x.shape + (field.dim,))
    ph = _phases(field, x, t)
    grad = np.einsum("...n,ni,nj->...ij", -np.sin(ph), field.u, field.k)
    grad += np.einsum("...n,ni,nj->...ij", np.cos(ph), field.w, field.k)
    return grad / math.sqrt(field.n_modes)


def stream_function(field: FieldRealization, x: np.ndarray) -> np.ndarray:
    """Stream function Psi at the frozen phase t = 0 (2D only)."""
    return stream_function_at(field, x, 0.0)


def stream_function_at(field: FieldRealization, x: np.ndarray, t: float) -> np.ndarray:
    """Stream function evaluated at the frozen phase k.x + theta t (2D only)."""
    if field.dim != 2:
        raise WrongDimension("stream function is defined for 2D fields only")
    x = np.asarray(x, dtype=float)
    if field.n_modes == 0:
        return np.zeros(x.shape[:-1])
    ph = _phases(field, x, t)
    out = np.sin(ph) @ field.xi - np.cos(ph) @ field.zeta
    return out / math.sqrt(field.n_modes)


def stream_hessian(field: FieldRealization, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Hessian of the stream function at x, shape (..., 2, 2) (2D only)."""
    if field.dim != 2:
        raise WrongDimension("stream Hessian is defined for 2D fields only")
    x = np.asarray(x, dtype=float)
    if field.n_modes == 0:
        return np.zeros(x.shape[:-1] + (2, 2))
    ph = _phases(field, x, t)
    coef = -np.sin(ph) * field.xi + np.cos(ph) * field.zeta
    hess = np.einsum("...n,ni,nj->...ij", coef, field.k, field.k)
    return hess / math.sqrt(field.n_modes)


def sub_velocity(field: FieldRealization, j: int, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Planar Hamiltonian sub-field v_j of a 3D realization (j in {1, 2}).

    v_1 has zero third component and is divergence-free in (x1, x2); v_2 has
    zero first component and is divergence-free in (x2, x3).  The two sum to
    velocity(field, x, t) exactly.
    """
    if field.dim != 3:
        raise WrongDimension("sub-fields are defined for 3D fields only")
    if j not in (1, 2):
        raise ConfigError(f"sub-field index must be 1 or 2, got {j}")
    x = np.asarray(x, dtype=float)
    if field.n_modes == 0:
        return np.zeros_like(x)
    ph = _phases(field, x, t)
    out = np.cos(ph) @ field.sub_u[j - 1] + np.sin(ph) @ field.sub_w[j - 1]
    return out / math.sqrt(field.n_modes)


class SubField:
    """Callable planar sub-field view used by the implicit advection step."""

    def __init__(self, parent: FieldRealization, j: int):
        if parent.dim != 3:
            raise WrongDimension("sub-fields are defined for 3D fields only")
        self.parent = parent
        self.j = j
        self.dim = 3

    def velocity(self, x, t=0.0):
        return sub_velocity(self.parent, self.j, x, t)
