"""CSV / SVG emission and the run manifest.

CSV floats are written with repr (shortest round-trip), so identical runs
produce byte-identical files and parsing recovers the exact values.  The
manifest is written atomically (temp file + rename) and lists every file
the run emitted.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402
from .errors import ConfigError  # noqa: E402


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(rows, header, path) -> str:
    """Write rows (sequences) under a header row; returns the path."""
    rows = list(rows)
    if not rows:
        raise ConfigError("refusing to write an empty CSV")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as e:
        raise ConfigError(f"cannot write CSV to {path}: {e}") from e
    return str(path)


def emit_svg(series, path, xlabel="t", ylabel="E", title=None,
             logy: bool = True) -> str:
    """Line plot of one or more (x, y, label) series; log y-axis by default
    (energy decays over many decades).  Nonpositive values are masked."""
    if not series:
        raise ConfigError("refusing to plot an empty series list")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for x, y, label in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        m = np.isfinite(y)
        if logy:
            m &= y > 0
        x, y = x[m], y[m]
        ax.plot(x, y, label=label, lw=1.2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg")
    except OSError as e:
        plt.close(fig)
        raise ConfigError(f"cannot write SVG to {path}: {e}") from e
    plt.close(fig)
    return str(path)


@dataclass
class RunManifest:
    """Summary document written at the end of every run (also on failure)."""

    config: dict
    experiment: str
    started: str = ""
    finished: str = ""
    code_version: str = __version__
    summary: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    failure: str | None = None

    def add_file(self, path):
        self.files.append(os.path.basename(str(path)))

    def write(self, out_dir) -> str:
        path = os.path.join(out_dir, "manifest.json")
        tmp = path + ".tmp"
        self.finished = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
        doc = {
            "experiment": self.experiment,
            "code_version": self.code_version,
            "started": self.started,
            "finished": self.finished,
            "config": self.config,
            "summary": self.summary,
            "flags": self.flags,
            "files": sorted(self.files),
            "failure": self.failure,
        }
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path


def new_manifest(config: dict, experiment: str) -> RunManifest:
    return RunManifest(config=config, experiment=experiment,
                       started=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()))
