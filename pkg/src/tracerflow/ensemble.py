"""Monte Carlo particle ensembles over random field realizations.

Each particle owns counter-based RNG substreams keyed by
(master_seed, particle_id, purpose), so per-particle field draws and
Brownian increments are independent, replayable, and independent of
scheduling.  Trajectories advance in fixed-size step blocks through the
numba kernels; per-particle positions at the record times are collected
and reduced in particle-id order with numpy's pairwise summation, which
makes the output bit-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import field as field_mod
from . import kernels
from .errors import ConfigError, StepFailure
from .integrator import SCHEME_SP, SchemeConfig
from .spectrum import SpectrumSpec

FIELD_PER_PARTICLE = "per-particle"
FIELD_SHARED = "shared"

PURPOSE_FIELD = 0
PURPOSE_NOISE = 1

DEFAULT_RECORD_POINTS = 64

_BLOCK_STEPS = kernels.RESYNC_STEPS


def substream(master_seed: int, particle: int, purpose: int) -> np.random.Generator:
    """Independent counter-based stream for (master_seed, particle, purpose)."""
    key = np.array([np.uint64(master_seed), np.uint64((particle << 1) | purpose)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one dispersion run."""

    scheme_cfg: SchemeConfig
    t_max: float
    n_particles: int
    n_modes: int
    spectrum: SpectrumSpec | None = None
    dim: int | None = None
    theta0: float = 0.0
    field_mode: str = FIELD_PER_PARTICLE
    record_times: tuple | None = None
    master_seed: int = 0
    track_stream: bool = False

    def __post_init__(self):
        if self.spectrum is not None:
            if self.dim is None:
                object.__setattr__(self, "dim", self.spectrum.dim)
            elif self.dim != self.spectrum.dim:
                raise ConfigError(
                    f"dim={self.dim} conflicts with {self.spectrum.tag} "
                    f"(dim {self.spectrum.dim})")
        else:
            if self.n_modes != 0:
                raise ConfigError("a spectrum is required when n_modes > 0")
            if self.dim not in (2, 3):
                raise ConfigError("dim must be 2 or 3 for spectrum-free runs")
        if self.dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {self.dim}")
        if self.t_max <= 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if self.n_particles < 2:
            raise ConfigError("n_particles must be >= 2 (standard errors need it)")
        if self.n_modes < 0:
            raise ConfigError(f"n_modes must be >= 0, got {self.n_modes}")
        if self.theta0 < 0:
            raise ConfigError(f"theta0 must be >= 0, got {self.theta0}")
        if self.field_mode not in (FIELD_PER_PARTICLE, FIELD_SHARED):
            raise ConfigError(f"unknown field_mode {self.field_mode!r}")
        if not 0 <= self.master_seed < 2**63:
            raise ConfigError("master_seed must be a non-negative 63-bit integer")
        if self.track_stream and self.dim != 2:
            raise ConfigError("track_stream requires a 2D run")
        if self.record_times is not None:
            times = tuple(float(t) for t in self.record_times)
            if any(t <= 0 or t > self.t_max + 1e-9 for t in times):
                raise ConfigError("record_times must lie in (0, t_max]")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigError("record_times must be strictly increasing")
            object.__setattr__(self, "record_times", times)

    def plan_steps(self):
        """Snap the schedule to the step grid.

        Returns (n_steps, record_steps, record_times); the last record always
        falls on the final step.
        """
        dt = self.scheme_cfg.dt
        n_steps = int(round(self.t_max / dt))
        if n_steps < 1 or abs(n_steps * dt - self.t_max) > 1e-6 * max(dt, self.t_max):
            raise ConfigError(
                f"t_max={self.t_max} is not a positive multiple of dt={dt}")
        if self.record_times is None:
            lo = max(dt, self.t_max / 1000.0)
            targets = np.geomspace(lo, self.t_max, DEFAULT_RECORD_POINTS)
        else:
            targets = np.asarray(self.record_times, dtype=float)
        steps = np.clip(np.rint(targets / dt).astype(np.int64), 1, n_steps)
        steps = np.unique(np.append(steps, n_steps))
        return n_steps, steps, steps * dt


@dataclass
class DispersionSeries:
    """Ensemble dispersion moments on the record-time grid."""

    times: np.ndarray            # (R,)
    second_moments: np.ndarray   # (R, dim, dim) of <dx_i dx_j>
    stderr: np.ndarray           # (R, dim) standard error of diagonal entries
    n_particles: int
    dim: int
    config_digest: str = ""
    mean_stream: np.ndarray | None = None
    stream_stderr: np.ndarray | None = None
    stream_initial: float | None = None
    stream_initial_stderr: float | None = None

    def moment_trace(self) -> np.ndarray:
        return np.trace(self.second_moments, axis1=1, axis2=2)


def config_digest(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(repr(cfg).encode()).hexdigest()[:12]


def _stack(fields, attr, sub=None):
    """Stack one per-mode attribute across realizations into (F, N, ...)."""
    rows = []
    for f in fields:
        arr = getattr(f, attr)
        if sub is not None:
            arr = arr[sub]
        rows.append(arr)
    return np.ascontiguousarray(np.stack(rows))


def _build_fields(cfg: ExperimentConfig):
    if cfg.n_modes == 0:
        return [field_mod.empty_field(cfg.dim)]
    if cfg.field_mode == FIELD_SHARED:
        rng = substream(cfg.master_seed, 0, PURPOSE_FIELD)
        return [field_mod.generate(cfg.spectrum, cfg.n_modes, cfg.theta0, rng)]
    return [
        field_mod.generate(cfg.spectrum, cfg.n_modes, cfg.theta0,
                           substream(cfg.master_seed, p, PURPOSE_FIELD))
        for p in range(cfg.n_particles)
    ]


def run(cfg: ExperimentConfig, workers: int | None = None) -> DispersionSeries:
    """Run the ensemble and accumulate dispersion statistics.

    The output depends only on cfg (including master_seed), never on the
    worker count or scheduling.
    """
    kernels.set_worker_threads(workers)
    n_steps, rec_steps, rec_times = cfg.plan_steps()
    scheme = cfg.scheme_cfg
    dt = scheme.dt
    dim = cfg.dim
    n_p = cfg.n_particles

    fields = _build_fields(cfg)
    n_modes = fields[0].n_modes
    kmat = _stack(fields, "k") if n_modes else np.zeros((1, 0, dim))
    umat = _stack(fields, "u") if n_modes else np.zeros((1, 0, dim))
    wmat = _stack(fields, "w") if n_modes else np.zeros((1, 0, dim))
    th = _stack(fields, "theta") if n_modes else np.zeros((1, 0))
    comp = lambda m, c: np.ascontiguousarray(m[:, :, c])

    pos = np.zeros((n_p, dim))
    cb = np.empty((n_p, n_modes))
    sb = np.empty((n_p, n_modes))
    status = np.zeros(n_p, dtype=np.int64)
    rec_pos = np.zeros((n_p, len(rec_steps), dim))
    rec_map = np.full(n_steps + 1, -1, dtype=np.int64)
    rec_map[rec_steps] = np.arange(len(rec_steps))

    sigma = scheme.sigma
    snoise = sigma * math.sqrt(dt)
    gens = None
    if sigma > 0:
        gens = [substream(cfg.master_seed, p, PURPOSE_NOISE) for p in range(n_p)]
    teval_off = 0.0
    if scheme.scheme == SCHEME_SP and scheme.midpoint_time == "mid":
        teval_off = 0.5 * dt
    is_sp = scheme.scheme == SCHEME_SP
    if dim == 2:
        mode_arrays = [comp(kmat, 0), comp(kmat, 1), comp(umat, 0), comp(umat, 1),
                       comp(wmat, 0), comp(wmat, 1), th]
    else:
        u1 = _stack(fields, "sub_u", sub=0) if n_modes else np.zeros((1, 0, 3))
        u2 = _stack(fields, "sub_u", sub=1) if n_modes else np.zeros((1, 0, 3))
        w1 = _stack(fields, "sub_w", sub=0) if n_modes else np.zeros((1, 0, 3))
        w2 = _stack(fields, "sub_w", sub=1) if n_modes else np.zeros((1, 0, 3))
        mode_arrays = [comp(kmat, 0), comp(kmat, 1), comp(kmat, 2),
                       comp(umat, 0), comp(umat, 1), comp(umat, 2),
                       comp(wmat, 0), comp(wmat, 1), comp(wmat, 2),
                       comp(u1, 0), comp(u1, 1), comp(w1, 0), comp(w1, 1),
                       comp(u2, 1), comp(u2, 2), comp(w2, 1), comp(w2, 2), th]

    kernel = kernels.evolve_2d if dim == 2 else kernels.evolve_3d
    for step0 in range(0, n_steps, _BLOCK_STEPS):
        nblock = min(_BLOCK_STEPS, n_steps - step0)
        if sigma > 0:
            noise = np.empty((n_p, nblock, dim))
            for p in range(n_p):
                noise[p] = gens[p].standard_normal((nblock, dim))
            nstride = 1
        else:
            noise = np.zeros((n_p, 1, dim))
            nstride = 0
        kernel(pos, cb, sb, *mode_arrays,
               noise, nstride, snoise, dt, teval_off, step0, nblock,
               rec_map, rec_pos, status, is_sp,
               scheme.fp_tol, scheme.fp_max_iters)
        if status.any():
            pid = int(np.argmax(status > 0))
            raise StepFailure(pid, status[pid] * dt,
                              "implicit midpoint solve diverged (reduce dt)")

    moments, stderr = _moments(rec_pos)
    series = DispersionSeries(times=rec_times, second_moments=moments,
                              stderr=stderr, n_particles=n_p, dim=dim,
                              config_digest=config_digest(cfg))
    if cfg.track_stream:
        _attach_stream(series, cfg, fields, kmat, th, rec_pos, rec_times)
    return series


def _moments(rec_pos: np.ndarray):
    """Pairwise-summed second moments and diagonal standard errors."""
    n_p, n_rec, dim = rec_pos.shape
    moments = np.empty((n_rec, dim, dim))
    stderr = np.empty((n_rec, dim))
    for i in range(dim):
        di2 = rec_pos[:, :, i] ** 2
        moments[:, i, i] = np.mean(di2, axis=0)
        stderr[:, i] = np.std(di2, axis=0, ddof=1) / math.sqrt(n_p)
        for j in range(i + 1, dim):
            mij = np.mean(rec_pos[:, :, i] * rec_pos[:, :, j], axis=0)
            moments[:, i, j] = mij
            moments[:, j, i] = mij
    return moments, stderr


def _attach_stream(series, cfg, fields, kmat, th, rec_pos, rec_times):
    n_modes = fields[0].n_modes
    n_p = rec_pos.shape[0]
    if n_modes == 0:
        zero = np.zeros(len(rec_times))
        series.mean_stream, series.stream_stderr = zero, zero.copy()
        series.stream_initial, series.stream_initial_stderr = 0.0, 0.0
        return
    xi = _stack(fields, "xi")
    zeta = _stack(fields, "zeta")
    rn = 1.0 / math.sqrt(n_modes)
    psi0 = -zeta.sum(axis=1) * rn  # all particles start at the origin
    if xi.shape[0] == 1:
        series.stream_initial = float(psi0[0])
        series.stream_initial_stderr = 0.0
    else:
        series.stream_initial = float(np.mean(psi0))
        series.stream_initial_stderr = float(np.std(psi0, ddof=1) / math.sqrt(n_p))
    means = np.empty(len(rec_times))
    errs = np.empty(len(rec_times))
    for r, t in enumerate(rec_times):
        ph = rec_pos[:, r, 0, None] * kmat[:, :, 0] + rec_pos[:, r, 1, None] * kmat[:, :, 1]
        ph = ph + th * t
        psi = (np.sin(ph) * xi - np.cos(ph) * zeta).sum(axis=1) * rn
        means[r] = np.mean(psi)
        errs[r] = np.std(psi, ddof=1) / math.sqrt(n_p)
    series.mean_stream = means
    series.stream_stderr = errs


def effective_diffusivity(series: DispersionSeries, i: int = 0, j: int = 0):
    """Curve D_ij(t) = <dx_i dx_j>/(2t) on the record grid.

    Returns (times, values, stderr); stderr is None for off-diagonal pairs.
    """
    if not (0 <= i < series.dim and 0 <= j < series.dim):
        raise ConfigError(f"component indices ({i}, {j}) out of range")
    denom = 2.0 * series.times
    values = series.second_moments[:, i, j] / denom
    err = series.stderr[:, i] / denom if i == j else None
    return series.times, values, err


# ---------------------------------------------------------------------------
# CSV contract: commented key = value preamble, then one row per record time.

def _csv_columns(dim: int, with_stream: bool):
    cols = ["t"] + [f"m{i+1}{i+1}" for i in range(dim)]
    pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    cols += [f"m{i+1}{j+1}" for i, j in pairs]
    cols += [f"se{i+1}{i+1}" for i in range(dim)]
    if with_stream:
        cols.append("mean_psi")
    return cols, pairs


def write_csv(series: DispersionSeries, path, preamble: dict | None = None):
    """Emit the dispersion series with a commented config preamble."""
    with_stream = series.mean_stream is not None
    cols, pairs = _csv_columns(series.dim, with_stream)
    lines = []
    for key, value in (preamble or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append(",".join(cols))
    for r in range(len(series.times)):
        row = [series.times[r]]
        row += [series.second_moments[r, i, i] for i in range(series.dim)]
        row += [series.second_moments[r, i, j] for i, j in pairs]
        row += [series.stderr[r, i] for i in range(series.dim)]
        if with_stream:
            row.append(series.mean_stream[r])
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Load a series written by write_csv; returns (series, preamble dict)."""
    preamble = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    preamble[key.strip()] = value.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ConfigError(f"{path} does not contain a dispersion series")
    data = np.asarray(rows)
    colidx = {name: k for k, name in enumerate(header)}
    dim = 3 if "m33" in colidx else 2
    expected, pairs = _csv_columns(dim, "mean_psi" in colidx)
    missing = [c for c in expected if c not in colidx]
    if missing:
        raise ConfigError(f"{path} is missing column(s) {', '.join(missing)}")
    times = data[:, colidx["t"]]
    n_rec = len(times)
    moments = np.zeros((n_rec, dim, dim))
    stderr = np.zeros((n_rec, dim))
    for i in range(dim):
        moments[:, i, i] = data[:, colidx[f"m{i+1}{i+1}"]]
        stderr[:, i] = data[:, colidx[f"se{i+1}{i+1}"]]
    for i, j in pairs:
        moments[:, i, j] = moments[:, j, i] = data[:, colidx[f"m{i+1}{j+1}"]]
    mean_stream = data[:, colidx["mean_psi"]] if "mean_psi" in colidx else None
    n_particles = int(preamble.get("particles", 0) or 0)
    series = DispersionSeries(times=times, second_moments=moments, stderr=stderr,
                              n_particles=n_particles, dim=dim,
                              config_digest=preamble.get("digest", ""),
                              mean_stream=mean_stream)
    if "psi0" in preamble:
        series.stream_initial = float(preamble["psi0"])
    if "psi0_se" in preamble:
        series.stream_initial_stderr = float(preamble["psi0_se"])
    return series, preamble
