"""Delimited output, JSON summaries and figure rendering for experiment runs.

CSV files are RFC-4180 (CRLF, minimal quoting) with floats written through
``repr`` so identical configurations reproduce byte-identical artifacts.
Every figure lands next to the delimited data it visualizes.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "check_row",
    "cost_curve_figure",
    "decay_figure",
    "margin_heatmap",
    "foliation_figure",
    "write_csv",
    "write_summary",
]


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def check_row(name, measured, threshold, passed, **details):
    return {
        "name": name,
        "measured": measured,
        "threshold": threshold,
        "verdict": "pass" if passed else "fail",
        "details": details,
    }


def write_summary(path, command, seed, checks, artifacts, config, columns=None, warnings=None):
    """Machine-readable run summary with one entry per executed check."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "checks": checks,
        "artifacts": sorted(artifacts),
        "config": config,
        "columns": columns or {},
        "warnings": warnings or [],
        "passed": all(c["verdict"] == "pass" for c in checks),
    }

    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))

    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
    return path


def decay_figure(path, reports, xlabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for rep in reports:
        if len(rep.sweep) != len(rep.measured):
            continue
        ax.semilogy(rep.sweep, np.maximum(rep.measured, 1e-300), "o-", label=rep.harness)
        xs = np.asarray(rep.sweep, dtype=float)
        ax.semilogy(xs, np.exp(rep.intercept + rep.slope * xs), "--", alpha=0.6)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("measured")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def cost_curve_figure(path, xs, series, xlabel, ylabel, logy=True, per_series_x=False):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plot = ax.semilogy if logy else ax.plot
    for label, ys in series.items():
        if per_series_x:
            plot(ys[0], ys[1], "o-", label=label)
        else:
            plot(xs, ys, "o-", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def margin_heatmap(path, pts, values, title):
    fig, ax = plt.subplots(figsize=(5.0, 4.4))
    sc = ax.scatter(pts[:, 0], pts[:, 1], c=values, s=4, cmap="viridis")
    fig.colorbar(sc, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def foliation_figure(path, fol, cover=None, slice_w: float = 0.0):
    """Section of the leaves (and ball cover) through the transverse slice."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if fol.domain.dim == 1:
        ts = np.linspace(-fol.domain.semiaxes[0], fol.domain.semiaxes[0], 400) \
            if hasattr(fol.domain, "semiaxes") else fol.domain.sample(400)[:, 0]
        base = np.stack([ts], axis=1)
    else:
        a = fol.domain.semiaxes[0]
        ts = np.linspace(-a, a, 400)
        base = np.stack([ts, np.full_like(ts, slice_w)], axis=1)
    for eps in np.linspace(0.0, 1.0, 6):
        ax.plot(ts, fol.G(base, eps), lw=1, alpha=0.8)
    if cover is not None:
        for lf in cover.leaves:
            for c, r in zip(lf.centers, lf.r):
                circ = plt.Circle((c[0], c[-1]), r, fill=False, color="red", lw=0.5, alpha=0.5)
                ax.add_patch(circ)
    ax.set_xlabel("first base coordinate")
    ax.set_ylabel("height")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
