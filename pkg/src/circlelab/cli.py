"""Command-line front end.

Exit codes: 0 ok, 2 configuration error, 3 invariant violation,
4 precision exhausted. Every subcommand writes a bundle directory with
CSV tables, results.json, and a manifest; `report` aggregates the
bundles written so far and renders figures next to the delimited output.
"""

import json
import os
import sys

import click
from mpmath import mp, mpf

from . import errors
from .canonical import golden_table
from .cells import classify_breaks, trace_distortion, verify_denjoy, verify_finzi
from .config import load_config
from .conjugacy import (
    build_conjugacy,
    profile_trend,
    singularity_profile,
)
from .contfrac import cf_expand, is_bounded_type, parse_rotation_spec
from .maps import to_mpf
from .orbits import analyze_orbits, break_equivalent, reduce_to_distinct_orbits, verify_rank
from .partition import build_partition, decay_profile
from .precision import default_precision_from_env, set_precision
from .report import (
    ReportBundle,
    format_display,
    format_full,
    numeric_columns,
    numeric_row,
    render_decay_figure,
    render_distortion_figure,
    render_profile_figure,
    render_staircase_figure,
)
from .rotation import certify_prefix, rotation_number

CONFIG_EXIT = 2
INVARIANT_EXIT = 3
PRECISION_EXIT = 4

_INVARIANT_ERRORS = (
    errors.InvariantViolation,
    errors.OrderMismatch,
    errors.AmbiguousMatch,
    errors.SupportCollision,
    errors.DepthTooShallow,
    errors.InconclusiveWindow,
    errors.BadParameters,
    errors.NonInvertiblePiece,
    errors.DegenerateTriple,
)
_PRECISION_ERRORS = (
    errors.PrecisionExhausted,
    errors.DepthUnreachable,
    errors.DepthBeyondPrecision,
    errors.RationalDetected,
    errors.RationalRotation,
)


class Lab:
    def __init__(self, config, out, precision):
        self.config = config
        if out:
            self.config.output_dir = out
        if precision:
            self.config.precision_bits = precision
        set_precision(self.config.precision_bits)

    def bundle(self, name):
        return ReportBundle(
            out_dir=self.config.output_dir,
            name=name,
            seed=self.config.seed,
            precision_bits=self.config.precision_bits,
        )

    def map_for(self, spec):
        return self.config.resolve_map(spec)


def _parse_window(text):
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 2
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",")]


@click.group()
@click.option("--config", "config_path", default=None, help="JSON config file")
@click.option("--out", default=None, help="Output directory override")
@click.option("--precision", type=int, default=None, help="Working precision in bits")
@click.pass_context
def main(ctx, config_path, out, precision):
    """Numerical laboratory for circle homeomorphisms with break points."""
    cfg = load_config(config_path) if config_path else load_config({})
    if precision is None:
        precision = default_precision_from_env() if "CIRCLELAB_PRECISION_BITS" in os.environ else None
    ctx.obj = Lab(cfg, out, precision)


@main.result_callback()
def _done(result, **kwargs):
    return result


@main.command()
@click.option("--map", "map_name", required=True)
@click.option("--depth", type=int, default=12)
@click.pass_obj
def rotno(lab, map_name, depth):
    """Certified rotation number and bounded-type check."""
    f = lab.map_for(map_name)
    alpha, table = rotation_number(f, depth)
    bounded = is_bounded_type(table, lab.config.bounded_type_bound)
    bundle = lab.bundle("rotno")
    bundle.results = {
        "map": str(map_name),
        "alpha": format_full(alpha),
        "alpha_display": format_display(alpha),
        "quotients": table.quotients,
        "bounded_type": bounded.is_bounded,
        "max_quotient": bounded.max_quotient,
        "depth": depth,
    }
    rows = [
        [n, table.quotients[n - 1], table.p[n], table.q[n]]
        for n in range(1, table.depth + 1)
    ]
    bundle.add_table(
        "convergents",
        ["n", "a_n", "p_n", "q_n"],
        rows,
        docs={"n": "index", "a_n": "partial quotient", "p_n": "numerator", "q_n": "denominator"},
    )
    path = bundle.write()
    click.echo(json.dumps(bundle.results))
    click.echo(f"bundle: {path}")


@main.command()
@click.option("--map", "map_name", required=True)
@click.option("--base", default="0")
@click.option("--depth", type=int, required=True)
@click.pass_obj
def partition(lab, map_name, base, depth):
    """Dynamical partition rows (n, i, level, left, right, length)."""
    f = lab.map_for(map_name)
    table = cf_expand(parse_rotation_spec(lab.config.rotation), max(depth + 1, 12))
    part = build_partition(f, table, mpf(base), depth)
    bundle = lab.bundle("partition")
    rows = []
    for itv in part.intervals:
        rows.append(
            [depth, itv.index, itv.level]
            + numeric_row([itv.left, itv.right, itv.length])
        )
    bundle.add_table(
        "intervals",
        ["n", "i", "level"] + numeric_columns(["left", "right", "length"]),
        rows,
    )
    bundle.results = {
        "map": str(map_name),
        "depth": depth,
        "count": len(part.intervals),
        "min_gap": format_full(part.min_gap),
        "max_length": format_full(part.max_length()),
    }
    path = bundle.write()
    click.echo(f"{len(part.intervals)} intervals; bundle: {path}")


@main.command()
@click.option("--map", "map_name", required=True)
@click.option("--levels", default="5:11:2", help="Depth window, start:stop[:step]")
@click.option("--samples", type=int, default=200)
@click.pass_obj
def verify(lab, map_name, levels, samples):
    """Distortion inequalities and decay margins; nonzero exit on violation."""
    f = lab.map_for(map_name)
    window = _parse_window(levels)
    table = cf_expand(parse_rotation_spec(lab.config.rotation), max(window) + 2)
    denjoy = verify_denjoy(f, table, window, samples=samples, seed=lab.config.seed)
    finzi = verify_finzi(f, table, max(window), samples=samples, seed=lab.config.seed)
    records, slope, log_lambda = decay_profile(f, table, mpf(0), window)
    bundle = lab.bundle("verify")
    rows = [
        ["denjoy", r["n"], r["q_n"]] + numeric_row([r["worst_abs_log"], r["bound"], r["margin"]])
        for r in denjoy
    ]
    rows.append(
        ["finzi", finzi["n"], table.q[finzi["n"]]]
        + numeric_row([finzi["worst_log_ratio"], finzi["bound"], finzi["margin"]])
    )
    bundle.add_table(
        "margins",
        ["check", "n", "q_n"] + numeric_columns(["worst", "bound", "margin"]),
        rows,
    )
    bundle.add_table(
        "decay",
        ["n"] + numeric_columns(["max_length"]),
        [[n] + numeric_row([m]) for n, m in records],
    )
    bundle.results = {
        "map": str(map_name),
        "levels": window,
        "decay_slope": slope,
        "log_lambda": log_lambda,
        "decay_ok": slope <= log_lambda + 0.05,
        "denjoy_ok": all(float(r["margin"]) >= 0 for r in denjoy),
        "finzi_ok": float(finzi["margin"]) >= 0,
        "decay_records": [[n, format_full(m)] for n, m in records],
    }
    path = bundle.write()
    click.echo(json.dumps({k: bundle.results[k] for k in ("decay_ok", "denjoy_ok", "finzi_ok")}))
    click.echo(f"bundle: {path}")
    if not (bundle.results["decay_ok"] and bundle.results["denjoy_ok"] and bundle.results["finzi_ok"]):
        raise errors.InvariantViolation("a verification margin went negative")


@main.command()
@click.option("--map", "map_name", required=True)
@click.option("--max-iter", type=int, default=64)
@click.option("--tol", default="1e-8")
@click.pass_obj
def orbits(lab, map_name, max_iter, tol):
    """Break connections, per-orbit jump products, trivial-product flag."""
    f = lab.map_for(map_name)
    report = analyze_orbits(f, max_iter, mpf(tol))
    bundle = lab.bundle("orbits")
    bundle.results = report.to_json_dict()
    rows = []
    for conn in report.connections:
        for off, b in conn.members:
            rows.append(
                numeric_row([conn.representative])
                + [off]
                + numeric_row([b.location_mpf, b.jump])
                + [str(conn.product), conn.is_singular()]
            )
    bundle.add_table(
        "connections",
        numeric_columns(["representative"]) + ["offset"]
        + numeric_columns(["location", "jump"]) + ["orbit_product", "singular"],
        rows,
    )
    path = bundle.write()
    click.echo(json.dumps({"d_property": report.d_property,
                           "singular_orbits": len(report.singular_connections)}))
    click.echo(f"bundle: {path}")


@main.command()
@click.option("--map", "map_name", required=True)
@click.option("--max-iter", type=int, default=64)
@click.option("--tol", default="1e-8")
@click.pass_obj
def reduce(lab, map_name, max_iter, tol):
    """Collapse break connections; emits conjugator chain and certificate."""
    f = lab.map_for(map_name)
    result = reduce_to_distinct_orbits(f, max_iter, mpf(tol))
    bundle = lab.bundle("reduce")
    bundle.results = {
        "map": str(map_name),
        "transfers": len(result.chain),
        "orbits": [
            {
                "representative": format_full(e["representative"]),
                "pi": str(e["pi"]),
                "final_location": format_full(e["final_location"]),
                "final_jump": format_full(e["final_jump"]),
                "transfers": e["transfers"],
            }
            for e in result.certificate["orbits"]
        ],
        "artifact_pairs": result.certificate["artifact_pairs"],
    }
    chain_rows = [
        numeric_row([adj.center, adj.radius, adj.target_jump])
        for adj in result.chain
    ]
    bundle.add_table(
        "conjugator_chain",
        numeric_columns(["center", "radius", "jump"]),
        chain_rows,
    )
    path = bundle.write()
    click.echo(json.dumps({"transfers": len(result.chain)}))
    click.echo(f"bundle: {path}")


@main.command()
@click.option("--map-f", required=True)
@click.option("--map-g", required=True)
@click.option("--depth", type=int, default=12, help="Table size is q_depth")
@click.option("--x0", default="0")
@click.option("--y0", default="0")
@click.option("--certify/--no-certify", default=True)
@click.pass_obj
def conjugate(lab, map_f, map_g, depth, x0, y0, certify):
    """Orbit-paired conjugacy table at N = q_depth samples."""
    f, g = lab.map_for(map_f), lab.map_for(map_g)
    alpha, table_f = rotation_number(f, depth)
    if certify:
        certify_prefix(g, table_f.quotients)
    count = table_f.q[depth]
    table = build_conjugacy(f, g, mpf(x0), mpf(y0), count)
    bundle = lab.bundle("conjugate")
    rows = [numeric_row([x, y]) for x, y in zip(table.xs, table.ys)]
    bundle.add_table("table", numeric_columns(["x", "y"]), rows)
    bundle.results = {
        "map_f": str(map_f),
        "map_g": str(map_g),
        "count": count,
        "depth": depth,
        "max_node_gap": format_full(table.max_node_gap()),
        "conjugacy_defect": format_full(table.conjugacy_defect(200)),
    }
    path = bundle.write()
    click.echo(json.dumps({"count": count}))
    click.echo(f"bundle: {path}")


@main.command()
@click.option("--map-f", required=True)
@click.option("--map-g", required=True)
@click.option("--grid", type=int, default=512)
@click.option("--depths", default="10,14,18", help="Table depths (q_d samples each)")
@click.option("--x0", default="0")
@click.option("--y0", default="0")
@click.pass_obj
def singularity(lab, map_f, map_g, grid, depths, x0, y0):
    """Concentration profiles of the conjugacy across table depths."""
    f, g = lab.map_for(map_f), lab.map_for(map_g)
    depth_list = _parse_window(depths)
    _, table_f = rotation_number(f, max(depth_list))
    bundle = lab.bundle("singularity")
    profiles = []
    curve_rows = []
    for d in depth_list:
        count = table_f.q[d]
        table = build_conjugacy(f, g, mpf(x0), mpf(y0), count)
        eff_grid = min(grid, count // 10)
        profile = singularity_profile(table, eff_grid)
        profiles.append(profile)
        for p, s in profile.s_curve:
            curve_rows.append([d, count, profile.grid] + numeric_row([p, s]))
    trend = profile_trend(profiles)
    bundle.add_table(
        "profiles",
        ["depth", "count", "grid"] + numeric_columns(["p", "s"]),
        curve_rows,
    )
    bundle.results = {
        "map_f": str(map_f),
        "map_g": str(map_g),
        "depths": depth_list,
        "scores": [
            {"depth": d, "grid": p.grid,
             "s05": format_full(p.s_at(0.5)), "s09": format_full(p.s_at(0.9)),
             "s099": format_full(p.s_at(0.99))}
            for d, p in zip(depth_list, profiles)
        ],
        "trend": trend,
        "s_curves": [
            {"depth": d, "grid": p.grid,
             "curve": [[float(x), float(s)] for x, s in p.s_curve]}
            for d, p in zip(depth_list, profiles)
        ],
    }
    path = bundle.write()
    click.echo(json.dumps(trend))
    click.echo(f"bundle: {path}")


@main.command()
@click.option("--map-f", required=True)
@click.option("--map-g", required=True)
@click.option("--conj", type=click.Choice(["identity", "oracle", "computed"]), default="oracle")
@click.option("--c", "c_index", type=int, default=0, help="Break index of f (by location)")
@click.option("--c1", "c1_index", type=int, default=None, help="Distinguished other break")
@click.option("--beta", default="0.01")
@click.option("--gamma", default="0.04")
@click.option("--window", default="9:13:2")
@click.option("--x0", default="0.25")
@click.option("--delta", default="0.12")
@click.option("--table-depth", type=int, default=14, help="Depth for a computed conjugacy")
@click.pass_obj
def distort(lab, map_f, map_g, conj, c_index, c1_index, beta, gamma, window, x0, delta,
            table_depth):
    """Ratio-distortion trace over derived cells along the depth window."""
    f, g = lab.map_for(map_f), lab.map_for(map_g)
    window_list = _parse_window(window)
    _, table_f = rotation_number(f, max(window_list) + 2)
    breaks = sorted(f.break_points(), key=lambda b: b.location_mpf)
    if not breaks:
        raise errors.InvariantViolation("map f has no break points to anchor a cell")
    c = breaks[c_index].location_mpf
    if conj == "identity":
        h = _IdentityConjugacy()
    elif conj == "oracle":
        h = getattr(f, "oracle_conjugacy", None)
        if h is None:
            raise errors.ConfigError("conj", "map f carries no oracle conjugacy")
    else:
        count = table_f.q[min(table_depth, table_f.depth)]
        h = build_conjugacy(f, g, mpf(0), mpf(0), count)
    trace = trace_distortion(
        f, table_f, g, h, mpf(x0), c, window_list, mpf(delta), mpf(beta), mpf(gamma)
    )
    bundle = lab.bundle("distort")
    rows = [
        [r.n, r.q_n]
        + numeric_row([r.dr_f, r.dr_g, r.ratio, r.pi_target])
        + [r.h_resolution_ok]
        for r in trace.rows
    ]
    bundle.add_table(
        "trace",
        ["n", "q_n"] + numeric_columns(["Dr_f", "Dr_g", "D_n", "Pi_target"]) + ["h_resolved"],
        rows,
        docs={"Dr_f": "ratio distortion of f^(q_n) on the derived cell",
              "Dr_g": "same for g on the h-image cell",
              "D_n": "Dr_g / Dr_f",
              "Pi_target": "jump-product target for the trace limit"},
    )
    bundle.results = {
        "map_f": str(map_f),
        "map_g": str(map_g),
        "conj": conj,
        "window": window_list,
        "beta": str(beta),
        "gamma": str(gamma),
        "pi_f": str(trace.pi_f),
        "pi_g": str(trace.pi_g),
        "pi_target": format_full(trace.pi_target),
        "gamma0": format_full(trace.rows[-1].gamma0),
        "rows": [
            {"n": r.n, "q_n": r.q_n, "D_n": format_full(r.ratio),
             "pi_target": format_full(r.pi_target)}
            for r in trace.rows
        ],
    }
    path = bundle.write()
    click.echo(json.dumps({"pi_target": format_display(trace.pi_target),
                           "final_D_n": format_display(trace.rows[-1].ratio)}))
    click.echo(f"bundle: {path}")


class _IdentityConjugacy:
    def evaluate(self, x):
        return to_mpf(x) % 1


@main.command()
@click.option("--q", type=int, required=True)
@click.option("--samples", type=int, default=None,
              help="Random fillings (exhaustive when omitted and feasible)")
@click.pass_obj
def rank(lab, q, samples):
    """Exact rank of the jump linear system over admissible fillings."""
    result = verify_rank(q, sample_count=samples, seed=lab.config.seed)
    bundle = lab.bundle("rank")
    bundle.results = result
    path = bundle.write()
    click.echo(json.dumps(result))
    click.echo(f"bundle: {path}")
    if not result["all_full_rank"]:
        raise errors.InvariantViolation("a filling dropped rank")


@main.command()
@click.pass_obj
def report(lab):
    """Aggregate prior bundles into a summary with rendered figures."""
    out = lab.config.output_dir
    summary = {"bundles": {}}
    for name in sorted(os.listdir(out) if os.path.isdir(out) else []):
        results_path = os.path.join(out, name, "results.json")
        if os.path.isfile(results_path):
            with open(results_path) as fh:
                summary["bundles"][name] = json.load(fh)
    figures = []
    verify_res = summary["bundles"].get("verify")
    if verify_res and "decay_records" in verify_res:
        records = [(int(n), mpf(m)) for n, m in verify_res["decay_records"]]
        path = os.path.join(out, "fig_decay.png")
        render_decay_figure({verify_res["map"]: records},
                            {verify_res["map"]: verify_res["log_lambda"]}, path)
        figures.append(path)
    sing = summary["bundles"].get("singularity")
    if sing and "s_curves" in sing:
        profiles = {}
        for entry in sing["s_curves"]:
            profiles[f"depth {entry['depth']}"] = _CurveOnly(entry["grid"], entry["curve"])
        path = os.path.join(out, "fig_profiles.png")
        render_profile_figure(profiles, path)
        figures.append(path)
    dist = summary["bundles"].get("distort")
    if dist and "rows" in dist:
        path = os.path.join(out, "fig_distortion.png")
        trace = _TraceOnly(dist["rows"])
        render_distortion_figure(trace, path)
        figures.append(path)
    conj = summary["bundles"].get("conjugate")
    if conj:
        table_csv = os.path.join(out, "conjugate", "table.csv")
        if os.path.isfile(table_csv):
            path = os.path.join(out, "fig_staircase.png")
            render_staircase_figure(_TableFromCsv(table_csv), path)
            figures.append(path)
    summary["figures"] = figures
    summary["verdicts"] = _corollary_verdicts(summary["bundles"])
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    click.echo(f"summary: {os.path.join(out, 'summary.json')}")
    for f in figures:
        click.echo(f"figure: {f}")


class _CurveOnly:
    def __init__(self, grid, curve):
        self.grid = grid
        self.s_curve = curve


class _TraceRowOnly:
    def __init__(self, d):
        self.n = d["n"]
        self.q_n = d["q_n"]
        self.ratio = mpf(d["D_n"])
        self.pi_target = mpf(d["pi_target"])


class _TraceOnly:
    def __init__(self, rows):
        self.rows = [_TraceRowOnly(r) for r in rows]


class _TableFromCsv:
    def __init__(self, path):
        import csv as _csv

        with open(path) as fh:
            reader = _csv.reader(fh)
            next(reader)
            pairs = [(mpf(row[0]), mpf(row[2])) for row in reader]
        pairs.sort(key=lambda t: t[0])
        self.xs = [p[0] for p in pairs]
        self.ys = [p[1] for p in pairs]

    def evaluate(self, x):
        from bisect import bisect_right

        from .precision import arc_length

        j = bisect_right(self.xs, to_mpf(x)) - 1
        if j < 0:
            j = len(self.xs) - 1
        x_lo, y_lo = self.xs[j], self.ys[j]
        x_hi = self.xs[(j + 1) % len(self.xs)]
        y_hi = self.ys[(j + 1) % len(self.ys)]
        span = arc_length(x_lo, x_hi)
        rise = arc_length(y_lo, y_hi)
        return (y_lo + arc_length(x_lo, to_mpf(x)) / span * rise) % 1


def _corollary_verdicts(bundles):
    verdicts = {}
    orbit_res = bundles.get("orbits")
    if orbit_res:
        verdicts["d_property"] = orbit_res.get("d_property")
        singular = [c for c in orbit_res.get("connections", []) if c.get("singular")]
        verdicts["singular_orbit_count"] = len(singular)
        verdicts["measure_prediction"] = (
            "equivalent_to_length" if orbit_res.get("d_property") else "singular"
        )
    sing = bundles.get("singularity")
    if sing:
        verdicts["profile_trend"] = sing.get("trend")
    dist = bundles.get("distort")
    if dist:
        verdicts["pi_target"] = dist.get("pi_target")
    return verdicts


def run():
    try:
        main(standalone_mode=False)
    except errors.ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(CONFIG_EXIT)
    except _PRECISION_ERRORS as err:
        click.echo(f"precision exhausted: {err}", err=True)
        sys.exit(PRECISION_EXIT)
    except _INVARIANT_ERRORS as err:
        click.echo(f"invariant violation: {err}", err=True)
        sys.exit(INVARIANT_EXIT)
    except click.ClickException as err:
        err.show()
        sys.exit(err.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)


if __name__ == "__main__":
    run()
