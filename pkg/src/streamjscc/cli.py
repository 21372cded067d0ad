"""Command-line interface.

Subcommands: capacity, thresholds, curves, rate-sweep, anytime, zero-error.
Channels come from --bsc/--bec/--channel-json, sources from --source flags
or JSON, and whole invocations can be stored in a JSON config file passed
with --config.  Reports are CSV/JSON; --plot renders matplotlib figures
next to the delimited output.
"""

from __future__ import annotations

import json
import math
import os
import sys

import click
import numpy as np

from . import belief, channel, codes, harness, source, type_engine

DEFAULT_SEED_ENV = "STREAMJSCC_SEED"


def _default_seed() -> int:
    return int(os.environ.get(DEFAULT_SEED_ENV, "12345"))


def _parse_ks(text: str) -> list[int]:
    """'4..16', '4..16..4', or '4,8,12,16'."""
    if ".." in text:
        parts = [int(p) for p in text.split("..")]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(parts[0], parts[1] + 1, step))
    return [int(p) for p in text.split(",")]


def _load_config_defaults(ctx, param, value):
    if value:
        with open(value) as fh:
            ctx.default_map = json.load(fh)
    return value


_config_opt = click.option("--config", callback=_load_config_defaults,
                           expose_value=False, is_eager=True,
                           type=click.Path(exists=True),
                           help="JSON file with default values for the flags")


def channel_options(fn):
    fn = click.option("--bsc", type=float, default=None,
                      help="binary symmetric channel crossover probability")(fn)
    fn = click.option("--bec", type=float, default=None,
                      help="binary erasure channel erasure probability")(fn)
    fn = click.option("--channel-json", type=click.Path(exists=True), default=None,
                      help='JSON {"matrix": [[...]]}')(fn)
    return fn


def source_options(fn):
    fn = click.option("--source", "source_kind", default="iid-uniform",
                      show_default=True, help="iid-uniform or a JSON path")(fn)
    fn = click.option("--q", type=int, default=2, show_default=True)(fn)
    fn = click.option("--lambda", "lam", type=int, default=1, show_default=True,
                      help="arrival period (symbols arrive at 1, 1+lam, ...)")(fn)
    fn = click.option("--all-at-once", is_flag=True,
                      help="whole sequence available at t=1")(fn)
    return fn


def _build_channel(bsc, bec, channel_json) -> channel.Dmc:
    given = [v is not None for v in (bsc, bec, channel_json)]
    if sum(given) != 1:
        raise click.UsageError("give exactly one of --bsc, --bec, --channel-json")
    if bsc is not None:
        return channel.bsc(bsc)
    if bec is not None:
        return channel.bec(bec)
    return channel.from_json(channel_json)


def _build_source(source_kind, q, lam, all_at_once) -> source.SourceSpec:
    if source_kind != "iid-uniform":
        return source.from_json(source_kind)
    if all_at_once:
        return source.all_at_once(q)
    return source.iid_uniform(q, lam)


@click.group()
def main():
    """Feedback joint source-channel coding simulator."""


@main.command()
@_config_opt
@channel_options
def capacity(bsc, bec, channel_json):
    """Channel constants: C, P*_X, C1, extremes, class, symmetry."""
    dmc = _build_channel(bsc, bec, channel_json)
    click.echo(f"capacity_nats   {dmc.capacity_nats:.6f}")
    click.echo(f"cap_input_dist  {np.array2string(dmc.cap_input_dist, precision=6)}")
    click.echo(f"cap_output_dist {np.array2string(dmc.cap_output_dist, precision=6)}")
    c1 = "inf" if math.isinf(dmc.c1_nats) else f"{dmc.c1_nats:.6f}"
    click.echo(f"c1_nats         {c1}")
    click.echo(f"p_max/p_min     {dmc.p_max:.6f} / {dmc.p_min:.6f}")
    click.echo(f"class           {dmc.channel_class}")
    click.echo(f"symmetric       {dmc.symmetric}")


@main.command()
@_config_opt
@channel_options
@source_options
def thresholds(bsc, bec, channel_json, source_kind, q, lam, all_at_once):
    """Arrival-rate sufficiency checks for the two assumptions."""
    dmc = _build_channel(bsc, bec, channel_json)
    spec = _build_source(source_kind, q, lam, all_at_once)
    thr_b, thr_bp, ok_b, ok_bp = source.assumption_thresholds(spec, dmc)
    f = spec.arrival_rate
    click.echo(f"arrival rate f      {f:.6g}")
    click.echo(f"threshold (b)       {thr_b:.6f}  satisfied: {ok_b}")
    click.echo(f"threshold (b')      {thr_bp:.6f}  satisfied: {ok_bp}")


@main.command()
@_config_opt
@channel_options
@source_options
@click.option("--k", "ks_text", default="4..16..4", show_default=True)
@click.option("--eps", type=float, default=1e-6, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="CSV output path")
@click.option("--plot", is_flag=True, help="render a PNG next to the CSV")
def curves(bsc, bec, channel_json, source_kind, q, lam, all_at_once,
           ks_text, eps, out, plot):
    """Reliability curve and finite-k rate approximations."""
    dmc = _build_channel(bsc, bec, channel_json)
    spec = _build_source(source_kind, q, lam, all_at_once)
    E = codes.reliability_curve(dmc, spec)
    lines = ["k,eps,approx_rate,buffer_bound_rate"]
    for k in _parse_ks(ks_text):
        a = codes.approx_rate(dmc, spec, k, eps)
        b = codes.buffer_bound_rate(dmc, spec, k, eps)
        lines.append(f"{k},{eps:.6g},{a:.6g},{b:.6g}")
        click.echo(lines[-1])
    r_max = dmc.capacity_nats / spec.entropy_rate_nats
    if out:
        with open(out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        if plot:
            from . import figures
            grid = np.linspace(1e-6, r_max * (1 - 1e-9), 200)
            figures.plot_curves(grid, {"E(R)": [E(r) for r in grid]},
                                os.path.splitext(out)[0] + ".png")


@main.command(name="rate-sweep")
@_config_opt
@channel_options
@source_options
@click.option("--k", "ks_text", default="4..16..4", show_default=True)
@click.option("--eps", type=float, default=1e-6, show_default=True)
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--mode", "modes", multiple=True,
              type=click.Choice(["inst-sed", "inst-phase", "buffer"]),
              default=("inst-sed",), show_default=True)
@click.option("--engine", type=click.Choice(["exact", "type", "both"]),
              default="type", show_default=True)
@click.option("--seed", type=int, default=None, help=f"default from ${DEFAULT_SEED_ENV}")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="CSV output path")
@click.option("--json-out", type=click.Path(), default=None)
@click.option("--plot", is_flag=True, help="render a PNG next to the CSV")
@click.option("--dump-beliefs", type=click.Path(), default=None,
              help="write per-step belief dumps of one exact trial to JSON")
def rate_sweep(bsc, bec, channel_json, source_kind, q, lam, all_at_once,
               ks_text, eps, trials, modes, engine, seed, workers, out,
               json_out, plot, dump_beliefs):
    """Monte Carlo rate/error sweep over source lengths and modes."""
    dmc = _build_channel(bsc, bec, channel_json)
    spec = _build_source(source_kind, q, lam, all_at_once)
    ks = _parse_ks(ks_text)
    seed = _default_seed() if seed is None else seed
    if engine == "both":
        worst_post = worst_pi = 0.0
        for trial in range(trials):
            rng = harness.trial_rng(seed, 9, trial)
            res = harness.cosimulate_trial(dmc, spec, min(ks), eps, rng)
            worst_post = max(worst_post, res.max_posterior_gap)
            worst_pi = max(worst_pi, res.max_group_prior_gap)
        click.echo(f"max per-sequence posterior divergence {worst_post:.3e}")
        click.echo(f"max group prior divergence            {worst_pi:.3e}")
        return
    if dump_beliefs:
        _dump_one_trial(dmc, spec, min(ks), eps, seed, dump_beliefs)
    config = harness.ExperimentConfig(
        dmc=dmc, source=spec, modes=list(modes), ks=ks, eps=eps,
        trials=trials, master_seed=seed, engine=engine, workers=workers)
    report = harness.run_experiment(config)
    for line in harness.report_csv_lines(report):
        click.echo(line)
    if out:
        harness.emit_report(report, "csv", out)
        if plot:
            from . import figures
            figures.plot_rate_sweep(report, os.path.splitext(out)[0] + ".png")
    if json_out:
        harness.emit_report(report, "json", json_out)


def _dump_one_trial(dmc, spec, k, eps, seed, path):
    """Record the exact belief state after every step of a single trial."""
    rng = harness.trial_rng(seed, 8, 0)
    true_seq = source.sample_prefix(spec, k, rng)
    state = belief.initial_state(spec.q)
    true_idx = 0
    steps = []
    from .partition import sed_partition_binary
    for t in range(1, codes.default_horizon(dmc, k) + 1):
        prev = state.seq_len
        state = belief.evolve_prior(state, spec, t, max_len=k)
        for n in range(prev, state.seq_len):
            true_idx = true_idx * spec.q + int(true_seq[n])
        part = sed_partition_binary(state.probs)
        y = dmc.sample_output(int(part.assignment[true_idx]), rng)
        state = belief.bayes_update(state, part.assignment, dmc, y)
        steps.append({"t": t, "y": int(y), "beliefs": belief.dump(state)})
        if state.seq_len >= k and belief.stop_check(state, k, eps):
            break
    with open(path, "w") as fh:
        json.dump(steps, fh, indent=2)


@main.command()
@_config_opt
@channel_options
@source_options
@click.option("--k", "ks_text", default="4,8,12,16", show_default=True)
@click.option("--horizon", type=int, default=64, show_default=True)
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="CSV output path")
@click.option("--plot", is_flag=True)
def anytime(bsc, bec, channel_json, source_kind, q, lam, all_at_once,
            ks_text, horizon, trials, seed, workers, out, plot):
    """Anytime error decay and fitted exponential slope."""
    dmc = _build_channel(bsc, bec, channel_json)
    spec = _build_source(source_kind, q, lam, all_at_once)
    ks = _parse_ks(ks_text)
    seed = _default_seed() if seed is None else seed
    rows = harness.run_anytime_experiment(dmc, spec, ks, horizon, trials, seed,
                                          workers=workers)
    fit = None
    try:
        fit = harness.fit_anytime_slope(rows)
        click.echo(f"alpha    {fit.alpha:.4f}")
        click.echo(f"r^2      {fit.r_squared:.4f}")
        click.echo(f"points   {fit.points_used}")
    except Exception as exc:  # noqa: BLE001 - report and still emit the table
        click.echo(f"slope fit unavailable: {exc}", err=True)
    if out:
        lines = ["k,t,t_k,err_count,trials,err_rate"]
        for r in rows:
            lines.append(f"{r.k},{r.t},{r.t_k},{r.err_count},{r.trials},{r.err_rate:.6g}")
        with open(out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        if plot:
            from . import figures
            figures.plot_anytime(rows, fit, os.path.splitext(out)[0] + ".png")


@main.command(name="zero-error")
@_config_opt
@channel_options
@source_options
@click.option("--k", type=int, default=8, show_default=True)
@click.option("--r1", type=float, default=0.4, show_default=True)
@click.option("--r2", type=float, default=0.4, show_default=True)
@click.option("--delta", type=float, default=0.25, show_default=True)
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None, help="CSV output path")
def zero_error_cmd(bsc, bec, channel_json, source_kind, q, lam, all_at_once,
                   k, r1, r2, delta, trials, seed, out):
    """Degenerate-channel protocol: exact decoding, retransmission stats."""
    dmc = _build_channel(bsc, bec, channel_json)
    spec = _build_source(source_kind, q, lam, all_at_once)
    seed = _default_seed() if seed is None else seed
    cfg, transcripts, stats = harness.run_zero_error_experiment(
        dmc, spec, k, r1, r2, delta, trials, seed)
    errors = sum(not tr.correct for tr in transcripts)
    mean_eta = stats.mean_eta
    click.echo(f"confirmation     n_k={cfg.n_k} ack={cfg.ack} nack={cfg.nack} y*={cfg.y_star}")
    click.echo(f"decoding errors  {errors}")
    click.echo(f"mean eta         {mean_eta:.4f}  rate {k / mean_eta:.4f}")
    click.echo(f"P[T>0]           {stats.p_positive:.4f}  mean T {stats.mean_t:.4f}")
    if stats.chi2_pvalue is not None:
        click.echo(f"geometric fit    p={stats.geom_p:.4f} chi2_p={stats.chi2_pvalue:.4f}")
    click.echo(f"mean-T bound     {stats.mean_t_bound:.4f}  holds: {stats.bound_holds}")
    if out:
        with open(out, "w") as fh:
            fh.write("k,r1,r2,delta,n_k,trials,errors,mean_eta,rate,p_positive,mean_t,geom_p,chi2_p,seed\n")
            chi2p = "" if stats.chi2_pvalue is None else f"{stats.chi2_pvalue:.6g}"
            fh.write(f"{k},{r1},{r2},{delta},{cfg.n_k},{trials},{errors},"
                     f"{mean_eta:.6g},{k / mean_eta:.6g},{stats.p_positive:.6g},"
                     f"{stats.mean_t:.6g},{stats.geom_p:.6g},{chi2p},{seed}\n")


if __name__ == "__main__":
    sys.exit(main())
