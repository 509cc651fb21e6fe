"""Named run presets reproducing the figure configurations at desk scale.

Desk-scale defaults (5,000 particles, 100 modes, dt 0.1) keep each preset
in the minutes range on a laptop; the full-scale statistics are reachable
through flag overrides (--particles, --modes, --dt).  A preset is a pure
function of its name: rerunning one with the same seed produces identical
CSV bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    runs: tuple  # of (label, values-dict); label suffixes the output file


def _p(name, description, *runs):
    return Preset(name=name, description=description, runs=tuple(runs))


_E1_TRAPPING = {
    "spectrum": "e1", "theta0": 0.0, "d0": 0.0,
    "particles": 5000, "modes": 100, "tmax": 1000.0, "seed": 101,
}

_E1_D0 = {
    "spectrum": "e1", "theta0": 0.0, "dt": 0.1,
    "particles": 5000, "modes": 100, "tmax": 500.0, "seed": 102,
}

_E1_TIMEDEP = {
    "spectrum": "e1", "theta0": 1.0, "scheme": "sp", "dt": 0.05,
    "particles": 5000, "modes": 100, "tmax": 240.0, "seed": 104,
}

_E3_TIMEDEP = {
    "spectrum": "e3", "theta0": 1.0, "scheme": "sp", "dt": 0.05,
    "particles": 4000, "modes": 100, "tmax": 240.0, "seed": 105,
}

_POWERLAW = {
    "spectrum": "powerlaw2d", "d0": 0.01, "dt": 0.1,
    "particles": 5000, "modes": 100, "tmax": 2000.0, "seed": 108,
}


PRESETS = {
    p.name: p for p in [
        _p("fig1-sp-dt0.1", "2D shell spectrum, theta0=0, D0=0, SP, dt=0.1 (trapping)",
           ("", {**_E1_TRAPPING, "scheme": "sp", "dt": 0.1})),
        _p("fig1-sp-dt0.02", "2D shell spectrum, theta0=0, D0=0, SP, dt=0.02",
           ("", {**_E1_TRAPPING, "scheme": "sp", "dt": 0.02})),
        _p("fig1-em-dt0.1", "2D shell spectrum, theta0=0, D0=0, EM, dt=0.1",
           ("", {**_E1_TRAPPING, "scheme": "em", "dt": 0.1})),
        _p("fig1-em-dt0.02", "2D shell spectrum, theta0=0, D0=0, EM, dt=0.02",
           ("", {**_E1_TRAPPING, "scheme": "em", "dt": 0.02})),
        _p("fig2-sp-d0-0.01", "2D shell spectrum, D0=0.01, SP",
           ("", {**_E1_D0, "scheme": "sp", "d0": 0.01})),
        _p("fig2-sp-d0-0.1", "2D shell spectrum, D0=0.1, SP",
           ("", {**_E1_D0, "scheme": "sp", "d0": 0.1})),
        _p("fig2-em-d0-0.01", "2D shell spectrum, D0=0.01, EM",
           ("", {**_E1_D0, "scheme": "em", "d0": 0.01})),
        _p("fig2-em-d0-0.1", "2D shell spectrum, D0=0.1, EM",
           ("", {**_E1_D0, "scheme": "em", "d0": 0.1})),
        _p("fig4-sp-d0-0.1", "2D shell spectrum, theta0=1, D0=0.1, SP (enhanced diffusion)",
           ("", {**_E1_TIMEDEP, "d0": 0.1})),
        _p("fig4-sp-d0-0.5", "2D shell spectrum, theta0=1, D0=0.5, SP",
           ("", {**_E1_TIMEDEP, "d0": 0.5})),
        _p("fig5-sp-d0-0.1", "3D shell spectrum, theta0=1, D0=0.1, SP",
           ("", {**_E3_TIMEDEP, "d0": 0.1})),
        _p("fig5-sp-d0-0.5", "3D shell spectrum, theta0=1, D0=0.5, SP",
           ("", {**_E3_TIMEDEP, "d0": 0.5})),
        _p("fig6-e5", "2D low-k spectrum e5, D0=0.1, SP (super-diffusion)",
           ("", {"spectrum": "e5", "scheme": "sp", "theta0": 0.0, "d0": 0.1,
                 "dt": 0.1, "particles": 5000, "modes": 100, "tmax": 600.0,
                 "seed": 106})),
        _p("fig7-e6", "2D low-k spectrum e6, D0=0.1, SP (super-diffusion)",
           ("", {"spectrum": "e6", "scheme": "sp", "theta0": 0.0, "d0": 0.1,
                 "dt": 0.1, "particles": 5000, "modes": 100, "tmax": 600.0,
                 "seed": 107})),
        _p("fig8-alpha0.25", "2D power-law alpha=0.25, both schemes",
           ("sp", {**_POWERLAW, "scheme": "sp", "alpha": 0.25}),
           ("em", {**_POWERLAW, "scheme": "em", "alpha": 0.25})),
        _p("fig8-alpha0.5", "2D power-law alpha=0.5, both schemes",
           ("sp", {**_POWERLAW, "scheme": "sp", "alpha": 0.5}),
           ("em", {**_POWERLAW, "scheme": "em", "alpha": 0.5})),
        _p("fig8-alpha0.75", "2D power-law alpha=0.75, both schemes",
           ("sp", {**_POWERLAW, "scheme": "sp", "alpha": 0.75}),
           ("em", {**_POWERLAW, "scheme": "em", "alpha": 0.75})),
        _p("fig9-e7", "3D low-k spectrum e7, D0=0.1, SP (super-diffusion)",
           ("", {"spectrum": "e7", "scheme": "sp", "theta0": 0.0, "d0": 0.1,
                 "dt": 0.1, "particles": 4000, "modes": 100, "tmax": 300.0,
                 "seed": 109})),
        _p("psi-decay", "shared-field 2D shell spectrum, sigma^2=0.4, SP, stream tracking",
           ("", {"spectrum": "e1", "scheme": "sp", "theta0": 0.0, "d0": 0.2,
                 "dt": 0.05, "particles": 20000, "modes": 100, "tmax": 20.0,
                 "field-mode": "shared", "track-stream": True, "seed": 110})),
        _p("brownian-smoke", "pure Brownian motion (no modes), quick smoke run",
           ("", {"spectrum": "none", "dim": 2, "scheme": "sp", "d0": 0.25,
                 "dt": 0.1, "particles": 2000, "modes": 0, "tmax": 50.0,
                 "seed": 111})),
    ]
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; known presets: {known}")
