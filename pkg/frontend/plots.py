#!/usr/bin/env python3
"""Regenerate figure analogs from dispersion CSVs.

Batch tool: it consumes the CSV files written by the simulator CLI (the
commented key = value preamble plus the t, m11, ... column contract) and
emits png/svg figures.  Three figure kinds are supported:

* diffusivity_curve   -- D11(t) = m11/(2t) against t, one curve per CSV
* loglog_dispersion   -- trace of the second moment on log-log axes with a
                         least-squares slope overlay per curve
* exponent_vs_alpha   -- fitted exponents against alpha for power-law runs,
                         with the theoretical curve 2/(2 - alpha) overlaid

Figures are specified either by a JSON spec file or by --preset fig1..fig9,
which maps to the conventional CSV filenames the simulator presets write.
Nothing is recomputed from the simulation: values are taken verbatim from
the CSVs; the slope fits are re-run locally and printed at full precision
(SLOPE,<label>,<value> lines) so they can be checked against the simulator's
`fit` subcommand.
"""

from __future__ import annotations

import argparse
import glob
import json
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("diffusivity_curve", "loglog_dispersion", "exponent_vs_alpha")


class SchemaError(Exception):
    pass


def read_series_csv(path):
    """Parse one dispersion CSV into (preamble dict, column dict)."""
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
        raise SchemaError(f"{path}: no dispersion table found")
    data = np.asarray(rows)
    cols = {name: data[:, i] for i, name in enumerate(header)}
    dim = 3 if "m33" in cols else 2
    required = ["t"] + [f"m{i}{i}" for i in range(1, dim + 1)] \
        + [f"se{i}{i}" for i in range(1, dim + 1)]
    for name in required:
        if name not in cols:
            raise SchemaError(f"{path}: missing required column {name!r}")
    return preamble, cols


def moment_trace(cols):
    dim = 3 if "m33" in cols else 2
    return sum(cols[f"m{i}{i}"] for i in range(1, dim + 1))


def ols_loglog(t, m, window=None):
    """Least-squares slope/intercept of log m against log t inside window.

    Defaults to the last decade [t_max/10, t_max]; must match the
    simulator's fit subcommand to within 1e-12.
    """
    t = np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    lo, hi = window
    mask = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if mask.sum() < 3:
        raise SchemaError(f"fewer than 3 points inside fit window [{lo:g}, {hi:g}]")
    if np.any(m[mask] <= 0):
        raise SchemaError("non-positive moments inside the fit window")
    x = np.log(t[mask])
    y = np.log(m[mask])
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = ym - slope * xm
    return slope, intercept, window


def render(spec, verbose=True):
    """Render one figure spec; returns the output path."""
    kind = spec.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"unknown figure kind {kind!r}; expected one of {KINDS}")
    inputs = spec.get("inputs", [])
    if not inputs:
        raise SchemaError("figure spec needs at least one input CSV")
    output = spec.get("output")
    if not output or os.path.splitext(output)[1] not in (".png", ".svg"):
        raise SchemaError("figure output must end in .png or .svg")

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    slopes = []
    if kind == "exponent_vs_alpha":
        points = {}
        for item in inputs:
            preamble, cols = read_series_csv(item["path"])
            if "alpha" not in preamble:
                raise SchemaError(f"{item['path']}: preamble lacks alpha")
            alpha = float(preamble["alpha"])
            scheme = preamble.get("scheme", "run")
            slope, _, _ = ols_loglog(cols["t"], moment_trace(cols))
            points.setdefault(scheme, []).append((alpha, slope))
            slopes.append((item.get("label") or f"{scheme}-a{alpha:g}", slope))
        for scheme, pts in sorted(points.items()):
            pts.sort()
            a = [p[0] for p in pts]
            mu = [p[1] for p in pts]
            ax.plot(a, mu, "o--", label=scheme)
        overlay = spec.get("reference_overlay", {"kind": "mu_alpha"})
        if overlay and overlay.get("kind") == "mu_alpha":
            a = np.linspace(0.05, 0.95, 200)
            ax.plot(a, 2.0 / (2.0 - a), "k-", lw=1, label="2/(2-alpha)")
        ax.set_xlabel("alpha")
        ax.set_ylabel("fitted exponent")
        ax.legend()
    else:
        for item in inputs:
            preamble, cols = read_series_csv(item["path"])
            label = item.get("label") or preamble.get("preset") \
                or os.path.basename(item["path"])
            t = cols["t"]
            if kind == "diffusivity_curve":
                ax.plot(t, cols["m11"] / (2.0 * t), label=label)
            else:
                m = moment_trace(cols)
                slope, intercept, window = ols_loglog(t, m)
                slopes.append((label, slope))
                ax.loglog(t, m, label=f"{label} (slope {slope:.3f})")
                tw = np.geomspace(window[0], window[1], 16)
                ax.loglog(tw, np.exp(intercept) * tw**slope, "k--", lw=1)
        if kind == "diffusivity_curve":
            ax.set_xscale("log")
            ax.set_ylabel("D11(t)")
        else:
            ax.set_ylabel("dispersion")
        ax.set_xlabel("t")
        ax.legend()
    overlay = spec.get("reference_overlay")
    if overlay and overlay.get("kind") == "constant" and kind != "exponent_vs_alpha":
        ax.axhline(float(overlay["value"]), color="k", ls=":", lw=1,
                   label=overlay.get("label"))
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(output, dpi=140)
    plt.close(fig)
    if verbose:
        for label, slope in slopes:
            print(f"SLOPE,{label},{slope:.17g}")
        print(f"wrote {output}")
    return output


def _preset_spec(name, data_dir):
    """Figure spec for fig1..fig9 from conventionally named CSVs."""
    path = lambda stem: os.path.join(data_dir, stem + ".csv")
    table = {
        "fig1": ("diffusivity_curve",
                 ["fig1-sp-dt0.1", "fig1-em-dt0.1"]),
        "fig2": ("diffusivity_curve",
                 ["fig2-sp-d0-0.01", "fig2-sp-d0-0.1",
                  "fig2-em-d0-0.01", "fig2-em-d0-0.1"]),
        "fig3": ("loglog_dispersion",
                 ["fig1-sp-dt0.1", "fig1-em-dt0.1"]),
        "fig4": ("diffusivity_curve",
                 ["fig4-sp-d0-0.1", "fig4-sp-d0-0.5"]),
        "fig5": ("diffusivity_curve",
                 ["fig5-sp-d0-0.1", "fig5-sp-d0-0.5"]),
        "fig6": ("loglog_dispersion", ["fig6-e5"]),
        "fig7": ("loglog_dispersion", ["fig7-e6"]),
        "fig9": ("loglog_dispersion", ["fig9-e7"]),
    }
    if name == "fig8":
        paths = sorted(glob.glob(os.path.join(data_dir, "fig8-alpha*-*.csv")))
        if not paths:
            raise SchemaError(f"no fig8-alpha*-{{sp,em}}.csv files in {data_dir}")
        return {"kind": "exponent_vs_alpha",
                "inputs": [{"path": p} for p in paths],
                "output": os.path.join(data_dir, "fig8.png"),
                "reference_overlay": {"kind": "mu_alpha"}}
    if name not in table:
        raise SchemaError(f"unknown preset {name!r}; expected fig1..fig9")
    kind, stems = table[name]
    missing = [s for s in stems if not os.path.exists(path(s))]
    if missing:
        raise SchemaError(
            f"preset {name} needs CSVs {', '.join(path(s) for s in missing)}; "
            f"generate them with the simulator presets of the same name")
    inputs = [{"path": path(s), "label": s} for s in stems]
    return {"kind": kind, "inputs": inputs,
            "output": os.path.join(data_dir, name + ".png")}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="regenerate figure analogs from dispersion CSVs")
    parser.add_argument("spec", nargs="?", help="JSON figure-spec file")
    parser.add_argument("--preset", help="named figure fig1..fig9")
    parser.add_argument("--data-dir", default=".",
                        help="directory holding the preset CSVs (default .)")
    parser.add_argument("--output", help="override the output image path")
    args = parser.parse_args(argv)
    if bool(args.spec) == bool(args.preset):
        parser.error("give exactly one of a spec file or --preset")
    try:
        if args.preset:
            spec = _preset_spec(args.preset, args.data_dir)
        else:
            with open(args.spec) as fh:
                spec = json.load(fh)
        if args.output:
            spec["output"] = args.output
        render(spec)
    except (SchemaError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
