"""Flat key=value run configuration: files, flag overrides, CSV preambles."""

from __future__ import annotations

from .ensemble import ExperimentConfig, config_digest
from .errors import ConfigError
from .integrator import SchemeConfig
from .spectrum import spec_from_tag

# every accepted key with (required, default); flags use the same names
CONFIG_KEYS = {
    "scheme": (True, None),
    "spectrum": (True, None),
    "alpha": (False, None),
    "k0": (False, 1.0),
    "cutoff-l": (False, None),
    "theta0": (False, 0.0),
    "d0": (False, 0.0),
    "dt": (True, None),
    "tmax": (True, None),
    "particles": (True, None),
    "modes": (True, None),
    "seed": (False, 0),
    "field-mode": (False, "per-particle"),
    "track-stream": (False, False),
    "fp-tol": (False, 1e-12),
    "fp-max-iters": (False, 100),
    "dim": (False, None),
    "out": (False, None),
}

_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")


def parse_config_file(path: str) -> dict:
    """Parse a flat key=value file; '#' starts a comment, blanks ignored."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip().lower().replace("_", "-")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def merge_config(*layers: dict) -> dict:
    """Later layers win; None values do not override."""
    merged = {}
    for layer in layers:
        for key, value in layer.items():
            if value is not None:
                merged[key] = value
    return merged


def _coerce_bool(key, value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _BOOL_TRUE:
        return True
    if text in _BOOL_FALSE:
        return False
    raise ConfigError(f"field {key!r}: expected a boolean, got {value!r}")


def _coerce(key, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r}: expected {kind.__name__}, got {value!r}")


def build_experiment(values: dict) -> ExperimentConfig:
    """Validate a merged key=value mapping and build the run configuration."""
    for key in values:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    resolved = {}
    for key, (required, default) in CONFIG_KEYS.items():
        if key in values:
            resolved[key] = values[key]
        elif required:
            raise ConfigError(f"missing required field {key!r}")
        else:
            resolved[key] = default

    scheme = str(resolved["scheme"]).lower()
    modes = _coerce("modes", resolved["modes"], int)
    alpha = None if resolved["alpha"] is None else _coerce("alpha", resolved["alpha"], float)
    cutoff = None if resolved["cutoff-l"] is None else _coerce("cutoff-l", resolved["cutoff-l"], float)
    spectrum_tag = str(resolved["spectrum"]).lower()
    if spectrum_tag == "none":
        spectrum = None
    else:
        spectrum = spec_from_tag(spectrum_tag, k0=_coerce("k0", resolved["k0"], float),
                                 alpha=alpha, cutoff_L=cutoff)
    dim = None if resolved["dim"] is None else _coerce("dim", resolved["dim"], int)
    scheme_cfg = SchemeConfig(
        scheme=scheme,
        dt=_coerce("dt", resolved["dt"], float),
        d0=_coerce("d0", resolved["d0"], float),
        fp_tol=_coerce("fp-tol", resolved["fp-tol"], float),
        fp_max_iters=_coerce("fp-max-iters", resolved["fp-max-iters"], int),
    )
    return ExperimentConfig(
        scheme_cfg=scheme_cfg,
        t_max=_coerce("tmax", resolved["tmax"], float),
        n_particles=_coerce("particles", resolved["particles"], int),
        n_modes=modes,
        spectrum=spectrum,
        dim=dim,
        theta0=_coerce("theta0", resolved["theta0"], float),
        field_mode=str(resolved["field-mode"]),
        master_seed=_coerce("seed", resolved["seed"], int),
        track_stream=_coerce_bool("track-stream", resolved["track-stream"]),
    )


def preamble_for(cfg: ExperimentConfig, preset: str | None = None) -> dict:
    """Canonical key=value echo of a run configuration for CSV preambles.

    Worker counts and timestamps are deliberately excluded: rerunning the
    same configuration must produce byte-identical files.
    """
    out = {}
    if preset:
        out["preset"] = preset
    out["scheme"] = cfg.scheme_cfg.scheme
    if cfg.spectrum is not None:
        out["spectrum"] = cfg.spectrum.tag
        out["k0"] = repr(cfg.spectrum.k0)
        if cfg.spectrum.alpha is not None:
            out["alpha"] = repr(cfg.spectrum.alpha)
            out["cutoff-l"] = repr(cfg.spectrum.cutoff_L)
    else:
        out["spectrum"] = "none"
        out["dim"] = cfg.dim
    out["theta0"] = repr(cfg.theta0)
    out["d0"] = repr(cfg.scheme_cfg.d0)
    out["dt"] = repr(cfg.scheme_cfg.dt)
    out["tmax"] = repr(cfg.t_max)
    out["particles"] = cfg.n_particles
    out["modes"] = cfg.n_modes
    out["seed"] = cfg.master_seed
    out["field-mode"] = cfg.field_mode
    out["track-stream"] = str(cfg.track_stream).lower()
    out["fp-tol"] = repr(cfg.scheme_cfg.fp_tol)
    out["fp-max-iters"] = cfg.scheme_cfg.fp_max_iters
    out["digest"] = config_digest(cfg)
    return out
