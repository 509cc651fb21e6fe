"""Energy spectrum families, wavevector sampling, and diffusion classification.

Each family defines an isotropic energy spectrum E(k).  Wavevectors for the
shell and Gaussian families follow the classical randomization recipe: the
shell families place |k| exactly at k0, while for the Gaussian families each
component is an independent Gaussian (std k0/sqrt(3) in 2D, k0/2 in 3D),
which makes the magnitude density proportional to E(k)/k^2.  The low-k
families (e5/e6/e7) and the power-law families concentrate energy at small
wavenumbers instead; their magnitudes are drawn against E(k) itself (tabled
inverse CDF) or the closed-form power-law density.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import (
    ConfigError,
    NonPositiveWavenumber,
    NotPowerLaw,
    QuadratureFailure,
    SingularSpectrum,
)


class Family(enum.Enum):
    SHELL_2D = "e1"
    GAUSS_2D = "e2"
    SHELL_3D = "e3"
    GAUSS_3D = "e4"
    LOWK_2D = "e5"
    LOWK_HALF_2D = "e6"
    LOWK_3D = "e7"
    POWERLAW_2D = "powerlaw2d"
    POWERLAW_3D = "powerlaw3d"


_DIM = {
    Family.SHELL_2D: 2,
    Family.GAUSS_2D: 2,
    Family.LOWK_2D: 2,
    Family.LOWK_HALF_2D: 2,
    Family.POWERLAW_2D: 2,
    Family.SHELL_3D: 3,
    Family.GAUSS_3D: 3,
    Family.LOWK_3D: 3,
    Family.POWERLAW_3D: 3,
}

_SHELLS = (Family.SHELL_2D, Family.SHELL_3D)
_LOWK = (Family.LOWK_2D, Family.LOWK_HALF_2D, Family.LOWK_3D)
_POWERLAWS = (Family.POWERLAW_2D, Family.POWERLAW_3D)

#: lower cutoff for power-law magnitudes, as a fraction of cutoff_L; the
#: density is integrable at 0 so the truncation bias is O(kmin^(2-2a))
POWERLAW_KMIN_FRACTION = 1e-6

#: inverse-CDF table extent for the low-k families, in units of k0
_TABLE_KMIN_FRACTION = 1e-6
_TABLE_KMAX_FACTOR = 12.0
_TABLE_POINTS = 4096


class Diffusion(enum.Enum):
    DIFFUSIVE = "diffusive"
    ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class SpectrumSpec:
    """One spectrum family plus its parameters.

    alpha and cutoff_L are required for the power-law families and must be
    absent otherwise.  k0 is the reference wavenumber (1/length).
    """

    family: Family
    k0: float = 1.0
    alpha: float | None = None
    cutoff_L: float | None = None

    def __post_init__(self):
        if self.k0 <= 0:
            raise ConfigError(f"k0 must be positive, got {self.k0}")
        if self.family in _POWERLAWS:
            if self.alpha is None:
                raise ConfigError(f"{self.family.value} requires alpha")
            if not 0.0 < self.alpha < 1.0:
                raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
            if self.cutoff_L is None:
                object.__setattr__(self, "cutoff_L", 1.0)
            if self.cutoff_L <= 0:
                raise ConfigError(f"cutoff_L must be positive, got {self.cutoff_L}")
        else:
            if self.alpha is not None:
                raise ConfigError(f"alpha is only valid for power-law families")
            if self.cutoff_L is not None:
                raise ConfigError(f"cutoff_L is only valid for power-law families")

    @property
    def dim(self) -> int:
        return _DIM[self.family]

    @property
    def is_shell(self) -> bool:
        return self.family in _SHELLS

    @property
    def is_powerlaw(self) -> bool:
        return self.family in _POWERLAWS

    @property
    def tag(self) -> str:
        return self.family.value


def spec_from_tag(tag: str, k0: float = 1.0, alpha: float | None = None,
                  cutoff_L: float | None = None) -> SpectrumSpec:
    """Build a SpectrumSpec from its CLI/config string tag ("e1".."e7", ...)."""
    try:
        family = Family(tag.lower())
    except ValueError:
        known = ", ".join(f.value for f in Family)
        raise ConfigError(f"unknown spectrum tag {tag!r}; known tags: {known}")
    if family in _POWERLAWS:
        return SpectrumSpec(family, k0=k0, alpha=alpha, cutoff_L=cutoff_L)
    if alpha is not None or cutoff_L is not None:
        raise ConfigError(f"alpha/cutoff_L are not accepted for {tag!r}")
    return SpectrumSpec(family, k0=k0)


def evaluate_density(spec: SpectrumSpec, k: float) -> float:
    """Pointwise E(k) for the continuous-density families.

    The power-law density is reported normalized to unit integral over
    (0, cutoff_L].  Dirac shells have no pointwise density.
    """
    if spec.is_shell:
        raise SingularSpectrum(f"{spec.tag} is a Dirac shell; no pointwise density")
    if k <= 0:
        raise NonPositiveWavenumber(f"k must be positive, got {k}")
    k0 = spec.k0
    f = spec.family
    if f is Family.GAUSS_2D:
        return 4.5 * k**3 * k0**-4 * math.exp(-1.5 * k**2 / k0**2)
    if f is Family.GAUSS_3D:
        return 16.0 * math.sqrt(2.0 / math.pi) * k**4 * k0**-5 * math.exp(-2.0 * k**2 / k0**2)
    if f is Family.LOWK_2D:
        return math.sqrt(6.0 / math.pi) / k0 * math.exp(-1.5 * k**2 / k0**2)
    if f is Family.LOWK_HALF_2D:
        c = 54.0**0.25 / math.gamma(0.75)
        return c * k0**-1.5 * k**0.5 * math.exp(-1.5 * k**2 / k0**2)
    if f is Family.LOWK_3D:
        return 6.0 * k0**-2 * k * math.exp(-2.0 * k**2 / k0**2)
    # power law: magnitude density ~ k^(1-2a) on (0, L], normalized
    L, a = spec.cutoff_L, spec.alpha
    if k > L:
        return 0.0
    beta = 2.0 - 2.0 * a
    return beta * k ** (1.0 - 2.0 * a) / L**beta


def total_energy(spec: SpectrumSpec) -> float:
    """Closed-form integral of E(k) dk (equals d/2 for the named presets)."""
    f = spec.family
    if f in (Family.SHELL_2D, Family.GAUSS_2D, Family.LOWK_2D, Family.LOWK_HALF_2D):
        return 1.0
    if f in (Family.SHELL_3D, Family.GAUSS_3D, Family.LOWK_3D):
        return 1.5
    return 1.0  # power-law density is normalized by construction


def inverse_square_energy(spec: SpectrumSpec) -> float:
    """Closed-form integral of E(k)/k^2 dk for the normal-diffusive families."""
    k0 = spec.k0
    table = {
        Family.SHELL_2D: 1.0,
        Family.GAUSS_2D: 1.5,
        Family.SHELL_3D: 1.5,
        Family.GAUSS_3D: 2.0,
    }
    if spec.family not in table:
        raise QuadratureFailure(f"integral of E/k^2 diverges for {spec.tag}")
    return table[spec.family] / k0**2


@lru_cache(maxsize=32)
def _lowk_inverse_cdf_table(family: Family, k0: float):
    """Precomputed (cdf, k) table for inverse-CDF sampling of e5/e6/e7."""
    spec = SpectrumSpec(family, k0=k0)
    grid = np.geomspace(_TABLE_KMIN_FRACTION * k0, _TABLE_KMAX_FACTOR * k0,
                        _TABLE_POINTS)
    dens = np.array([evaluate_density(spec, k) for k in grid])
    cdf = np.concatenate(([0.0], np.cumsum(np.diff(grid) * 0.5 * (dens[1:] + dens[:-1]))))
    cdf /= cdf[-1]
    return cdf, grid


def _uniform_directions(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    vecs = rng.standard_normal((n, dim))
    norms = np.linalg.norm(vecs, axis=1)
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        vecs[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(vecs, axis=1)
    return vecs / norms[:, None]


def sample_wavevectors(spec: SpectrumSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n wavevectors (n, dim) according to the family's law."""
    dim, k0 = spec.dim, spec.k0
    f = spec.family
    if spec.is_shell:
        return k0 * _uniform_directions(n, dim, rng)
    if f is Family.GAUSS_2D or f is Family.GAUSS_3D:
        std = k0 / math.sqrt(3.0) if f is Family.GAUSS_2D else k0 / 2.0
        vecs = std * rng.standard_normal((n, dim))
        norms = np.linalg.norm(vecs, axis=1)
        while np.any(norms < 1e-12 * k0):
            bad = norms < 1e-12 * k0
            vecs[bad] = std * rng.standard_normal((int(bad.sum()), dim))
            norms = np.linalg.norm(vecs, axis=1)
        return vecs
    if f in _LOWK:
        cdf, grid = _lowk_inverse_cdf_table(f, k0)
        mags = np.interp(rng.random(n), cdf, grid)
    else:  # power law: closed-form inverse CDF of k^(1-2a) on (kmin, L]
        L, a = spec.cutoff_L, spec.alpha
        beta = 2.0 - 2.0 * a
        kmin = POWERLAW_KMIN_FRACTION * L
        u = rng.random(n)
        mags = (kmin**beta + u * (L**beta - kmin**beta)) ** (1.0 / beta)
    return mags[:, None] * _uniform_directions(n, dim, rng)


def sample_wavevector(spec: SpectrumSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw a single wavevector (dim,)."""
    return sample_wavevectors(spec, 1, rng)[0]


def small_k_exponent(spec: SpectrumSpec) -> float:
    """Leading power p in E(k) ~ C k^p as k -> 0 (continuous families only)."""
    if spec.is_shell:
        raise SingularSpectrum(f"{spec.tag} has no small-k expansion")
    table = {
        Family.GAUSS_2D: 3.0,
        Family.GAUSS_3D: 4.0,
        Family.LOWK_2D: 0.0,
        Family.LOWK_HALF_2D: 0.5,
        Family.LOWK_3D: 1.0,
    }
    if spec.family in table:
        return table[spec.family]
    return 1.0 - 2.0 * spec.alpha


def classify_diffusion(spec: SpectrumSpec) -> Diffusion:
    """Decide normal vs anomalous diffusion from the sharp condition.

    The criterion is finiteness of the integral of E(k)/k^2 (the 2D sharp
    condition; the 3D iterated form reduces to the same integral after the
    inner Abel-regularized integral of sin(k r) over r contributes 1/k).
    Shells and power laws are decided analytically; the remaining families
    numerically, by watching partial integrals over shrinking inner cutoffs.
    """
    if spec.is_shell:
        return Diffusion.DIFFUSIVE  # delta(k - k0)/k^2 integrates to 1/k0^2
    if spec.is_powerlaw:
        # E(k)/k^2 ~ k^(-1-2a) near 0 diverges for every alpha in (0, 1)
        return Diffusion.ANOMALOUS

    def integrand(k):
        return evaluate_density(spec, k) / k**2

    def piece(a, b):
        val, err = integrate.quad(integrand, a, b, epsrel=1e-8, limit=200)
        if not np.isfinite(val) or err > max(1e-6 * abs(val), 1e-13):
            raise QuadratureFailure(
                f"quadrature on [{a:g}, {b:g}] did not converge for {spec.tag}")
        return val

    k0 = spec.k0
    first = piece(0.1 * k0, 40.0 * k0)
    decades = [piece(k0 * 10.0 ** -(j + 1), k0 * 10.0 ** -j) for j in range(1, 9)]
    partials = first + np.cumsum(decades)
    if partials[-1] > 1e3 * first:
        return Diffusion.ANOMALOUS  # power-type blow-up
    # Convergent integrals gain geometrically less per decade of cutoff;
    # log-divergent ones (e.g. e7) gain a constant amount per decade, which
    # the plain growth-factor test above cannot see.
    tail = np.asarray(decades[-3:])
    if np.all(tail < 1e-10 * partials[-1]):
        return Diffusion.DIFFUSIVE
    ratios = tail[1:] / tail[:-1]
    if np.all(ratios < 0.5):
        return Diffusion.DIFFUSIVE
    if np.all(ratios > 0.8):
        return Diffusion.ANOMALOUS
    raise QuadratureFailure(
        f"partial integrals for {spec.tag} neither settle nor diverge cleanly"
    )


def theoretical_exponent(spec: SpectrumSpec) -> float:
    """Super-diffusion scaling exponent mu = 2/(2 - alpha) for power laws."""
    if not spec.is_powerlaw:
        raise NotPowerLaw(f"{spec.tag} has no closed-form dispersion exponent")
    return 2.0 / (2.0 - spec.alpha)
