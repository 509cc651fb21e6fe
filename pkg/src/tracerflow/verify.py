"""Self-check suites behind the `verify` CLI subcommand.

These are runtime diagnostics (not the pytest suite): field fidelity
(divergence-free construction, analytic gradients, 3D decomposition) and
integrator structure (volume preservation of the implicit advection, the
Euler-Maruyama determinant law, reversibility of the midpoint substep).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import field as fd
from . import integrator as it
from .spectrum import spec_from_tag

_2D_TAGS = ("e1", "e2", "e5", "e6", "powerlaw2d")
_3D_TAGS = ("e3", "e4", "e7", "powerlaw3d")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _spec(tag):
    if tag.startswith("powerlaw"):
        return spec_from_tag(tag, alpha=0.5)
    return spec_from_tag(tag)


def check_divergence(rng, points_per_family: int = 25) -> CheckResult:
    worst = 0.0
    for tag in _2D_TAGS + _3D_TAGS:
        spec = _spec(tag)
        f = fd.generate(spec, 40, 0.5, rng)
        x = rng.standard_normal((points_per_family, spec.dim))
        grads = fd.velocity_gradient(f, x, 0.7)
        worst = max(worst, float(np.abs(np.trace(grads, axis1=1, axis2=2)).max()))
    return CheckResult("divergence-free", worst < 1e-10,
                       f"max |div v| = {worst:.3e} (tolerance 1e-10)")


def check_gradient(rng, h: float = 1e-6) -> CheckResult:
    worst = 0.0
    for tag in ("e2", "e3"):
        spec = _spec(tag)
        f = fd.generate(spec, 40, 0.0, rng)
        for _ in range(10):
            x = rng.standard_normal(spec.dim)
            g = fd.velocity_gradient(f, x)
            scale = max(1.0, float(np.abs(g).max()))
            for j in range(spec.dim):
                e = np.zeros(spec.dim)
                e[j] = h
                col = (fd.velocity(f, x + e) - fd.velocity(f, x - e)) / (2 * h)
                worst = max(worst, float(np.abs(col - g[:, j]).max()) / scale)
    return CheckResult("gradient-check", worst < 1e-6,
                       f"max relative FD mismatch = {worst:.3e} (tolerance 1e-6)")


def check_decomposition(rng, probes: int = 50) -> CheckResult:
    worst = 0.0
    for tag in _3D_TAGS:
        spec = _spec(tag)
        f = fd.generate(spec, 40, 0.5, rng)
        for _ in range(probes // len(_3D_TAGS) + 1):
            x = rng.standard_normal(3)
            t = float(rng.uniform(0, 2))
            v = fd.velocity(f, x, t)
            v1 = fd.sub_velocity(f, 1, x, t)
            v2 = fd.sub_velocity(f, 2, x, t)
            worst = max(worst, float(np.abs(v1 + v2 - v).max()))
            worst = max(worst, abs(float(v1[2])), abs(float(v2[0])))
    return CheckResult("decomposition", worst < 1e-12,
                       f"max |v1 + v2 - v| = {worst:.3e} (tolerance 1e-12)")


def check_volume_sp_2d(rng, dts=(0.05, 0.1, 0.2), probes: int = 100,
                       fp_tol: float = 1e-12, fp_max_iters: int = 100) -> CheckResult:
    worst = 0.0
    n_fields = max(1, probes // (5 * len(dts)))
    for _ in range(n_fields):
        tag = "e1" if rng.random() < 0.5 else "e2"
        f = fd.generate(_spec(tag), 40, 0.0, rng)
        for dt in dts:
            cfg = it.SchemeConfig("sp", dt=dt, fp_tol=fp_tol, fp_max_iters=fp_max_iters)
            for _ in range(5):
                x = rng.standard_normal(2)
                det = it.jacobian_det_fd(it.advection_map(f, cfg), x)
                worst = max(worst, abs(det - 1.0))
    return CheckResult("volume-sp-2d", worst < 1e-6,
                       f"max |det J - 1| = {worst:.3e} (tolerance 1e-6)")


def check_volume_sp_3d(rng, probes: int = 50, fp_tol: float = 1e-12,
                       fp_max_iters: int = 100) -> CheckResult:
    worst = 0.0
    for _ in range(max(1, probes // 10)):
        tag = "e3" if rng.random() < 0.5 else "e4"
        f = fd.generate(_spec(tag), 40, 0.0, rng)
        cfg = it.SchemeConfig("sp", dt=0.1, fp_tol=fp_tol, fp_max_iters=fp_max_iters)
        for _ in range(10):
            x = rng.standard_normal(3)
            det = it.jacobian_det_fd(it.advection_map(f, cfg), x)
            worst = max(worst, abs(det - 1.0))
    return CheckResult("volume-sp-3d", worst < 1e-6,
                       f"max |det J - 1| = {worst:.3e} (tolerance 1e-6)")


def check_volume_em_2d(rng, dt: float = 0.1, probes: int = 100) -> CheckResult:
    worst = 0.0
    cfg = it.SchemeConfig("em", dt=dt)
    for _ in range(max(1, probes // 20)):
        f = fd.generate(_spec("e1"), 40, 0.0, rng)
        for _ in range(20):
            x = rng.standard_normal(2)
            det = it.jacobian_det_fd(it.advection_map(f, cfg), x)
            predicted = 1.0 + dt**2 * float(np.linalg.det(fd.stream_hessian(f, x)))
            worst = max(worst, abs(det - predicted))
    return CheckResult("volume-em-2d", worst < 1e-6,
                       f"max |det J - (1 + dt^2 det H)| = {worst:.3e} (tolerance 1e-6)")


def check_reversibility(rng, dt: float = 0.1, fp_tol: float = 1e-12,
                        fp_max_iters: int = 100) -> CheckResult:
    worst = 0.0
    cfg = it.SchemeConfig("sp", dt=dt, fp_tol=fp_tol, fp_max_iters=fp_max_iters)
    for _ in range(5):
        f = fd.generate(_spec("e1"), 40, 0.5, rng)
        for _ in range(10):
            x = rng.standard_normal(2)
            t = float(rng.uniform(0, 2))
            fwd = it.sp_advect_planar(f, x, t, dt, cfg)
            back = it.sp_advect_planar(f, fwd, t + dt, -dt, cfg)
            worst = max(worst, float(np.abs(back - x).max()))
    return CheckResult("reversibility", worst < 10 * fp_tol,
                       f"max return error = {worst:.3e} (tolerance {10 * fp_tol:.0e})")


def run_all(seed: int = 1234, dt: float | None = None, fp_tol: float = 1e-12,
            fp_max_iters: int = 100) -> list[CheckResult]:
    """Run every suite; dt (when given) overrides the advection step sizes."""
    rng = np.random.default_rng(seed)
    dts = (0.05, 0.1, 0.2) if dt is None else (dt,)
    em_dt = 0.1 if dt is None else dt
    return [
        check_divergence(rng),
        check_gradient(rng),
        check_decomposition(rng),
        check_volume_sp_2d(rng, dts=dts, fp_tol=fp_tol, fp_max_iters=fp_max_iters),
        check_volume_sp_3d(rng, fp_tol=fp_tol, fp_max_iters=fp_max_iters),
        check_volume_em_2d(rng, dt=em_dt),
        check_reversibility(rng, dt=min(dts), fp_tol=fp_tol, fp_max_iters=fp_max_iters),
    ]
