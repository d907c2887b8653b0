"""Report bundles: CSV/JSON emission, run manifests, and figure rendering.

Numeric CSV cells carry the full working-precision decimal string plus a
rounded display column, so downstream consumers choose their own loss.
Reruns with the same config and seed reproduce the data files byte for
byte; only the manifest carries wall time.
"""

import csv
import json
import os
import time
from dataclasses import dataclass, field

from mpmath import mp, mpf

from .maps import is_exact, to_mpf

FULL_DIGITS_PER_BIT = 0.302


def format_full(value):
    """Full-precision decimal string of a numeric value."""
    if is_exact(value):
        return str(value)
    digits = int(mp.prec * FULL_DIGITS_PER_BIT) + 2
    return mp.nstr(to_mpf(value), digits, strip_zeros=True)


def format_display(value):
    if is_exact(value):
        return str(value)
    return mp.nstr(to_mpf(value), 6)


@dataclass
class ReportBundle:
    out_dir: str
    name: str
    seed: int
    precision_bits: int
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (columns, rows)
    column_docs: dict = field(default_factory=dict)
    started: float = field(default_factory=time.time)

    def add_table(self, name, columns, rows, docs=None):
        self.tables[name] = (columns, rows)
        if docs:
            self.column_docs[name] = docs

    def write(self):
        base = os.path.join(self.out_dir, self.name)
        os.makedirs(base, exist_ok=True)
        paths = {}
        for name, (columns, rows) in sorted(self.tables.items()):
            path = os.path.join(base, f"{name}.csv")
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow(row)
            paths[name] = path
        results_path = os.path.join(base, "results.json")
        with open(results_path, "w") as fh:
            json.dump(self.results, fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest = {
            "name": self.name,
            "seed": self.seed,
            "precision_bits": self.precision_bits,
            "tables": {n: self.column_docs.get(n, {}) for n in sorted(self.tables)},
            "wall_time_seconds": round(time.time() - self.started, 3),
        }
        with open(os.path.join(base, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return base


def numeric_row(values):
    """Interleave full-precision and display columns for numeric values."""
    out = []
    for v in values:
        out.append(format_full(v))
        out.append(format_display(v))
    return out


def numeric_columns(names):
    out = []
    for n in names:
        out.append(n)
        out.append(f"{n}_display")
    return out


# -- figures -------------------------------------------------------------------


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_decay_figure(records_by_map, log_lambda_by_map, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, records in records_by_map.items():
        ns = [n for n, _ in records]
        ys = [float(mp.log(to_mpf(m))) for _, m in records]
        ax.plot(ns, ys, "o-", label=name)
        slope = log_lambda_by_map[name]
        ref = [ys[0] + slope * (n - ns[0]) for n in ns]
        ax.plot(ns, ref, "--", alpha=0.6, label=f"{name} bound slope {slope:.3f}")
    ax.set_xlabel("depth n")
    ax.set_ylabel("log max interval length")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_profile_figure(profiles_by_depth, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, profile in profiles_by_depth.items():
        ps = [float(p) for p, _ in profile.s_curve]
        ss = [float(s) for _, s in profile.s_curve]
        ax.plot(ps, ss, label=f"{label} (grid {profile.grid})")
    ax.plot([0, 1], [0, 1], "k:", alpha=0.5, label="uniform")
    ax.set_xlabel("mass fraction p")
    ax.set_ylabel("minimal cell fraction s(p)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_distortion_figure(trace, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ns = [r.n for r in trace.rows]
    ax.plot(ns, [float(r.ratio) for r in trace.rows], "o-", label="distortion ratio")
    ax.plot(ns, [float(r.pi_target) for r in trace.rows], "s--", label="jump-product target")
    ax.axhline(1.0, color="k", linestyle=":", alpha=0.5)
    ax.set_xlabel("depth n")
    ax.set_ylabel("Dr_g / Dr_f")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_staircase_figure(table, path, samples=600):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    xs = [i / samples for i in range(samples + 1)]
    ys = [float(table.evaluate(mpf(x))) for x in xs]
    ax.plot(xs, ys, lw=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("h(x)")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
