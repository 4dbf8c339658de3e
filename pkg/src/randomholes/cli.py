"""Configuration-driven command line for reproducible experiments.

Every analysis subcommand reads a JSON config, writes CSV files (with
the seed, sampler and config recorded in comment headers) plus rendered
figures into --out-dir, and prints a human-readable summary.  Exit code
0 means every check passed; config errors exit 2.

The `example` subcommand rebuilds the two discrete-hole worked examples
end to end and compares all computed quantities against their closed
forms.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import openstats, plotting, survival, thermo, transfer
from .config import ConfigError, ExperimentConfig, example_config


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _word_label(word):
    return "-".join(str(s) for s in word)


def _write_csv(path, comment_lines, header, rows):
    with open(path, "w", newline="") as f:
        for line in comment_lines:
            f.write(f"# {line}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _config_comments(cfg, extra=()):
    compact = json.dumps(cfg.data, sort_keys=True, separators=(",", ":"))
    lines = [f"seed={cfg.seed}", f"config={compact}"]
    lines.extend(extra)
    return lines


def _load_cfg(config, seed, level, samples):
    try:
        cfg = ExperimentConfig.from_file(config)
    except (OSError, json.JSONDecodeError, ConfigError) as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    if seed is not None:
        cfg.data["seed"] = seed
    if level is not None:
        cfg.data["level"] = level
    if samples is not None:
        cfg.data["mc"]["samples"] = samples
    return cfg


def _spectra(cfg):
    markov_map = cfg.build_map()
    phi = cfg.build_potential(markov_map)
    noise = cfg.build_noise()
    closed = transfer.dominant_spectrum(
        transfer.assemble_closed(markov_map, phi, cfg.level),
        tol=cfg.tolerances["spectral"])
    if noise is None:
        return markov_map, phi, None, closed, closed
    opened = transfer.dominant_spectrum(
        transfer.assemble_open(markov_map, phi, noise, cfg.level),
        tol=cfg.tolerances["spectral"])
    return markov_map, phi, noise, closed, opened


def common_options(fn):
    for deco in (
        click.option("--config", "config_path", required=True,
                     type=click.Path(exists=True, dir_okay=False),
                     help="JSON experiment config"),
        click.option("--out-dir", default="out", show_default=True,
                     type=click.Path(file_okay=False)),
        click.option("--seed", type=int, default=None,
                     help="override the config seed"),
        click.option("--level", type=int, default=None,
                     help="override the refinement level"),
        click.option("--samples", type=int, default=None,
                     help="override the Monte Carlo sample count"),
        click.option("--plot/--no-plot", default=True, show_default=True),
    ):
        fn = deco(fn)
    return fn


@click.group()
def main():
    """Transfer operators and survival statistics for Markov maps with
    randomly activated holes."""


@main.command()
@common_options
@click.option("--dump-matrix", is_flag=True,
              help="also write the operator entries as row,col,value")
def spectrum(config_path, out_dir, seed, level, samples, plot, dump_matrix):
    """Dominant spectral data of the closed and averaged open operators."""
    cfg = _load_cfg(config_path, seed, level, samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    markov_map, phi, noise, closed, opened = _spectra(cfg)
    op = opened.matrix
    alpha = transfer.conditionally_stationary(opened)

    click.echo(f"lambda        = {closed.eigenvalue!r}")
    click.echo(f"lambda_hat    = {opened.eigenvalue!r}")
    click.echo(f"escape rate   = {transfer.escape_rate(opened)!r}")
    click.echo(f"gap           = {opened.gap!r}")
    click.echo(f"residual      = {opened.residual!r}")
    click.echo(f"exact mode    = {op.exact}")
    if op.exact:
        resid = transfer.conformality_check(opened)
        click.echo(f"conformality  = {resid!r}")

    mu = transfer.equilibrium_measure(opened)
    rows = [
        (_word_label(w), iv[0], iv[1], r, nu, m, a)
        for w, iv, r, nu, m, a in zip(
            op.words, op.intervals, opened.rho, opened.nu, mu, alpha.density
        )
    ]
    _write_csv(out / "spectrum.csv", _config_comments(cfg, [
        f"lambda={closed.eigenvalue!r}",
        f"lambda_hat={opened.eigenvalue!r}",
        f"escape_rate={transfer.escape_rate(opened)!r}",
        f"gap={opened.gap!r}", f"residual={opened.residual!r}",
    ]), ["word", "lo", "hi", "rho", "nu", "mu", "alpha_density"], rows)
    if dump_matrix:
        _write_csv(out / "operator.csv", _config_comments(cfg),
                   ["row", "col", "value"],
                   [(int(i), int(j), v) for i, j, v in op.entry_triplets()])
    if plot:
        plotting.plot_spectrum(op.intervals, opened.rho, alpha.density,
                               out / "spectrum.png")
    ok = opened.residual <= 10 * cfg.tolerances["spectral"]
    sys.exit(0 if ok else 1)


@main.command("escape-rate")
@common_options
def escape_rate_cmd(config_path, out_dir, seed, level, samples, plot):
    """Escape rate -log(lambda_hat) of the random open system."""
    cfg = _load_cfg(config_path, seed, level, samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, _, _, closed, opened = _spectra(cfg)
    rate = transfer.escape_rate(opened)
    click.echo(f"lambda_hat  = {opened.eigenvalue!r}")
    click.echo(f"escape rate = {rate!r}")
    _write_csv(out / "escape_rate.csv", _config_comments(cfg),
               ["lambda", "lambda_hat", "escape_rate"],
               [(closed.eigenvalue, opened.eigenvalue, rate)])
    sys.exit(0)


@main.command("survive-mc")
@common_options
@click.option("--horizon", type=int, default=None)
@click.option("--workers", type=int, default=None)
def survive_mc(config_path, out_dir, seed, level, samples, plot, horizon,
               workers):
    """Monte Carlo survival times against the spectral closed forms."""
    cfg = _load_cfg(config_path, seed, level, samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mc = cfg.data["mc"]
    if horizon is not None:
        mc["horizon"] = horizon
    if workers is not None:
        mc["workers"] = workers
    markov_map, phi, noise, closed, opened = _spectra(cfg)
    if noise is None:
        click.echo("config error: survive-mc needs a noise section", err=True)
        sys.exit(2)
    law_spec = mc["initial_law"]
    gated = law_spec == "alpha_hat"
    if law_spec == "alpha_hat":
        law = transfer.conditionally_stationary(opened)
    elif law_spec == "lebesgue":
        law = "lebesgue"
    elif isinstance(law_spec, dict) and "point" in law_spec:
        law = ("point", float(law_spec["point"]))
    else:
        click.echo(f"config error: bad initial_law {law_spec!r}", err=True)
        sys.exit(2)

    run = openstats.simulate_tau(
        markov_map, noise, law, mc["samples"], cfg.seed,
        tau_max=mc["tau_max"], workers=mc["workers"],
        block_size=mc["block_size"])
    curve = run.survival_curve(mc["horizon"])
    slope = openstats.fit_log_slope(curve, 1, mc["horizon"])
    lam = opened.eigenvalue
    th_mean = lam / (1 - lam) if lam < 1 else math.inf
    th_var = lam / (1 - lam) ** 2 if lam < 1 else math.inf
    th_disp = 1 / (1 - lam) if lam < 1 else math.inf
    disp, disp_se = openstats.index_of_dispersion(run)
    z_mean = (run.mean - th_mean) / run.se_mean if run.se_mean else math.inf
    z_var = (run.variance - th_var) / run.se_variance if run.se_variance else math.inf
    z_disp = (disp - th_disp) / disp_se if disp_se else math.inf

    summary = [
        f"sampler={run.sampler_id}",
        f"n_samples={run.n_samples}", f"initial_law={law_spec}",
        f"lambda_hat={lam!r}",
        f"mean={run.mean!r}", f"theory_mean={th_mean!r}", f"z_mean={z_mean!r}",
        f"variance={run.variance!r}", f"theory_variance={th_var!r}",
        f"z_variance={z_var!r}",
        f"dispersion={disp!r}", f"theory_dispersion={th_disp!r}",
        f"z_dispersion={z_disp!r}",
        f"log_slope={slope!r}", f"log_lambda_hat={math.log(lam)!r}",
        f"overflow={run.overflow}", f"overflow_warning={run.overflow_warning}",
    ]
    for line in summary:
        click.echo(line)
    _write_csv(out / "survival_curve.csv", _config_comments(cfg, summary),
               ["n", "alive_fraction"],
               [(n, curve[n]) for n in range(len(curve))])
    last = int(np.max(np.nonzero(run.counts)[0])) if np.any(run.counts) else 0
    _write_csv(out / "tau_histogram.csv", _config_comments(cfg, summary[:4]),
               ["tau", "count"],
               [(t, int(run.counts[t])) for t in range(last + 1)]
               + [("overflow", run.overflow)])
    if plot:
        plotting.plot_survival(curve, lam, run.counts[: last + 1],
                               out / "survive_mc.png")
    z_max = cfg.tolerances["mc_z"]
    ok = (not gated) or all(abs(z) <= z_max for z in (z_mean, z_var, z_disp))
    sys.exit(0 if ok else 1)


@main.command("survival-set")
@common_options
@click.option("--dump-graph", is_flag=True)
def survival_set(config_path, out_dir, seed, level, samples, plot, dump_graph):
    """Symbolic survivor set: verdict, witness, node count, dimension."""
    cfg = _load_cfg(config_path, seed, level, samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    markov_map = cfg.build_map()
    noise = cfg.build_noise()
    sv = cfg.data["survival"]
    region_spec = sv["forbidden"]
    if region_spec == "max-hole" or region_spec == "certain-hole":
        if noise is None:
            click.echo("config error: survival.forbidden references the "
                       "noise model but no noise is configured", err=True)
            sys.exit(2)
        mx, certain = survival.hole_regions(noise, markov_map)
        region = mx if region_spec == "max-hole" else certain
    else:
        region = (float(region_spec[0]), float(region_spec[1]))
    n = int(sv["level"])
    graph = survival.build_avoidance_graph(markov_map, region, n)
    witness = survival.is_survivor_set_nonempty(graph)
    bowen = survival.bowen_dimension(markov_map, graph)
    slope, _ = survival.box_counting_estimate(markov_map, region, n,
                                              max(n + 4, 20))

    click.echo(f"forbidden     = {graph.forbidden}")
    click.echo(f"level         = {n}, nodes = {graph.n_nodes}, "
               f"edges = {len(graph.edges)}")
    click.echo(f"nonempty      = {witness.nonempty}")
    if witness.nonempty:
        click.echo(f"witness word  = {_word_label(witness.periodic_word)} "
                   "(periodic)")
    click.echo(f"dimension s*  = {bowen.dimension!r} "
               f"(bounds [{bowen.lower!r}, {bowen.upper!r}], "
               f"exact={bowen.exact}, empty={bowen.empty})")
    click.echo(f"box-count dim = {slope!r}")

    _write_csv(out / "survival_set.csv", _config_comments(cfg, [
        f"nonempty={witness.nonempty}",
        f"witness={_word_label(witness.periodic_word)}",
        f"dimension={bowen.dimension!r}", f"box_count={slope!r}",
    ]), ["word", "lo", "hi"],
        [(_word_label(c.symbols), c.lo, c.hi) for c in graph.nodes])
    if dump_graph:
        _write_csv(out / "survival_edges.csv", _config_comments(cfg),
                   ["src", "dst"],
                   [(_word_label(graph.nodes[s].symbols),
                     _word_label(graph.nodes[d].symbols))
                    for s, d in graph.edges])
    if plot:
        plotting.plot_survivor_nodes(graph.nodes, graph.forbidden,
                                     out / "survival_set.png")
    sys.exit(0)


@main.command("dimension-spectrum")
@common_options
def dimension_spectrum_cmd(config_path, out_dir, seed, level, samples, plot):
    """T(t), T'(t) and the dimension values T(t) + t T'(t) on the t-grid."""
    cfg = _load_cfg(config_path, seed, level, samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    markov_map = cfg.build_map()
    phi = cfg.build_potential(markov_map)
    noise = cfg.build_noise()
    if noise is None:
        click.echo("config error: dimension-spectrum needs a noise section",
                   err=True)
        sys.exit(2)
    try:
        psi = transfer.psi_potential(noise, markov_map)
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    ts = cfg.t_values()
    curve = thermo.dimension_spectrum(
        markov_map, phi, psi, ts, fd_step=cfg.data["fd_step"],
        level=cfg.level, tol=cfg.tolerances["pressure_root"] * 1e-2)
    worst = float(np.max(curve.residuals))
    click.echo(f"t grid        = [{ts[0]}, {ts[-1]}] ({len(ts)} points)")
    click.echo(f"max |pressure(t*phi + T(t)*psi)| = {worst!r}")
    _write_csv(out / "dimension_spectrum.csv", _config_comments(cfg, [
        f"max_pressure_residual={worst!r}",
    ]), ["t", "T", "T_prime", "dimension", "pressure_residual"],
        [(t, T, Tp, d, r) for t, T, Tp, d, r in
         zip(curve.ts, curve.T, curve.T_prime, curve.dims, curve.residuals)])
    if plot:
        plotting.plot_dimension_spectrum(curve, out / "dimension_spectrum.png")
    sys.exit(0 if worst < cfg.tolerances["pressure_root"] else 1)


@main.command("gibbs-check")
@common_options
def gibbs_check_cmd(config_path, out_dir, seed, level, samples, plot):
    """Gibbs comparability constants of the open equilibrium measure."""
    cfg = _load_cfg(config_path, seed, level, samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    markov_map, phi, noise, closed, opened = _spectra(cfg)
    measure = thermo.markov_measure(opened)
    weight = (transfer.weight_potential(noise, markov_map)
              if noise is not None else None)
    rep = thermo.gibbs_check(measure, markov_map, phi,
                             cfg.data["gibbs"]["n_max"], weight=weight)
    for n in sorted(rep.constants):
        click.echo(f"C_{n} = {rep.constants[n]!r}")
    if rep.violations:
        click.echo(f"violations: {len(rep.violations)} "
                   "(zero-mass cylinders with positive weight)")
    _write_csv(out / "gibbs.csv", _config_comments(cfg, [
        f"C={rep.constant!r}", f"violations={len(rep.violations)}",
    ]), ["n", "C_n"], sorted(rep.constants.items()))
    if plot:
        plotting.plot_gibbs(rep.constants, out / "gibbs.png")
    sys.exit(0 if rep.ok else 1)


@main.command()
@click.argument("name", type=click.Choice(["ex1", "ex2"]))
@click.option("--p", type=float, default=0.5, show_default=True,
              help="probability of the smaller/no hole")
@click.option("--out-dir", default="out", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--bounds-depth", type=int, default=8, show_default=True)
def example(name, p, out_dir, bounds_depth):
    """Reproduce a worked discrete-hole example and compare every quantity
    against its closed form."""
    if not 0 < p < 1:
        click.echo("config error: p must be in (0, 1)", err=True)
        sys.exit(2)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig.from_dict(example_config(name, p=p))
    markov_map = cfg.build_map()
    phi = cfg.build_potential(markov_map)
    noise = cfg.build_noise()
    opened = transfer.dominant_spectrum(
        transfer.assemble_open(markov_map, phi, noise, 1))
    alpha = transfer.conditionally_stationary(opened)
    measure = thermo.markov_measure(opened)

    checks = []

    def check(label, computed, expected, tol):
        computed = np.atleast_1d(np.asarray(computed, dtype=float))
        expected = np.atleast_1d(np.asarray(expected, dtype=float))
        err = float(np.max(np.abs(computed - expected)))
        checks.append((label, computed, expected, err, err <= tol))

    if name == "ex1":
        check("lambda_hat", opened.eigenvalue, (1 + p) / 2, 1e-12)
        check("nu_hat", opened.nu, [p / (p + 1), 1 / (p + 1)], 1e-10)
        check("rho_hat", opened.rho, [1.0, 1.0], 1e-10)
        check("q", measure.q, [p / (p + 1), 1 / (p + 1)], 1e-10)
        check("Q_rows", measure.Q,
              [[p / (p + 1), 1 / (p + 1)]] * 2, 1e-10)
        check("alpha_density", alpha.density,
              [2 * p / (p + 1), 2 / (p + 1)], 1e-10)
        ok_bounds, detail = thermo.cylinder_bounds_check(
            measure, markov_map, bounds_depth, p / (1 + p), 1 / (1 + p))
        checks.append(("cylinder_bounds", "see detail", detail or "ok",
                       0.0, ok_bounds))
    else:
        check("lambda_hat", opened.eigenvalue, (1 + p) / 3, 1e-12)
        check("nu_hat", opened.nu, [0.0, p / (p + 1), 1 / (p + 1)], 1e-10)
        check("q", measure.q, [0.0, p / (p + 1), 1 / (p + 1)], 1e-10)
        check("Q_live_rows", measure.Q[1:],
              [[0.0, p / (p + 1), 1 / (p + 1)]] * 2, 1e-10)
        check("alpha_density", alpha.density,
              [0.0, 3 * p / (p + 1), 3 / (p + 1)], 1e-10)
        worst = 0.0
        for n in range(1, bounds_depth + 1):
            for c in markov_map.refine(n):
                if 0 in c.symbols:
                    worst = max(worst, measure.measure_of_word(c.symbols))
        checks.append(("zero_mass_through_first_cell", worst, 0.0, worst,
                       worst == 0.0))

    width = max(len(c[0]) for c in checks)
    all_ok = True
    for label, computed, expected, err, ok in checks:
        all_ok &= ok
        status = "pass" if ok else "FAIL"
        click.echo(f"{label:<{width}}  err={err:.3e}  {status}")
    _write_csv(out / f"example_{name}.csv", [f"p={p!r}"],
               ["quantity", "max_abs_err", "pass"],
               [(label, err, ok) for label, _, _, err, ok in checks])
    click.echo("all checks passed" if all_ok else "SOME CHECKS FAILED")
    sys.exit(0 if all_ok else 1)


if __name__ == "__main__":
    main()
