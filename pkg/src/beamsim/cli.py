"""Command line interface: seeded Monte Carlo sweeps and validation."""

from __future__ import annotations

from dataclasses import replace

import click

from .harness import (
    ScenarioConfig,
    emit_csv,
    emit_spectrum_csv,
    load_config,
    summarize,
    sweep_snapshots,
    sweep_snr,
)


def _prepare_config(config_path, seed, fixed_step) -> ScenarioConfig:
    cfg = load_config(config_path) if config_path else ScenarioConfig()
    if seed is not None:
        cfg = replace(cfg, base_seed=seed)
    if fixed_step:
        cfg = replace(cfg, fixed_step=True)
    return cfg


def _print_summary(records):
    for row in summarize(records):
        click.echo(
            f"{row['scenario']:>22s} {row['method']:>12s} snr={row['snr_db']:>6.1f} "
            f"K={row['snapshots']:>4d} runs={row['runs']:>4d} "
            f"mean={row['mean_sinr_db']:8.3f} dB median={row['median_sinr_db']:8.3f} dB")


config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
    default=None, help="JSON scenario config; omitted fields keep defaults.")
out_option = click.option("--out", "out_path", required=True,
                          type=click.Path(dir_okay=False, writable=True))
seed_option = click.option("--seed", type=click.IntRange(min=0), default=None,
                           help="Override the config base seed.")
fixed_step_option = click.option(
    "--fixed-step", is_flag=True, default=False,
    help="Use plain fixed-step recursions instead of conjugate gradient.")


@click.group()
def main():
    """Matrix-free robust adaptive beamforming simulations."""


@main.command("sweep-snr")
@config_option
@out_option
@seed_option
@fixed_step_option
def sweep_snr_cmd(config_path, out_path, seed, fixed_step):
    """Output SINR versus input SNR at the configured snapshot count."""
    cfg = _prepare_config(config_path, seed, fixed_step)
    records = sweep_snr(cfg)
    emit_csv(records, out_path)
    _print_summary(records)
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command("sweep-snapshots")
@config_option
@out_option
@seed_option
@fixed_step_option
def sweep_snapshots_cmd(config_path, out_path, seed, fixed_step):
    """Output SINR versus snapshot count at 20 dB SNR."""
    cfg = _prepare_config(config_path, seed, fixed_step)
    records = sweep_snapshots(cfg)
    emit_csv(records, out_path)
    _print_summary(records)
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command("spectrum")
@config_option
@out_option
@seed_option
def spectrum_cmd(config_path, out_path, seed):
    """Maximum-entropy spectrum of one seeded batch on a 1 degree grid."""
    cfg = _prepare_config(config_path, seed, False)
    emit_spectrum_csv(cfg, out_path)
    click.echo(f"wrote spectrum to {out_path}")


@main.command("validate")
@click.option("--quick", is_flag=True, default=False,
              help="Run a reduced number of random cases per check.")
def validate_cmd(quick):
    """Run the oracle-equivalence suite; exit nonzero on any failure."""
    from .validation import run_all

    results = run_all(quick=quick)
    failed = False
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        click.echo(f"[{status}] {result.name}: {result.detail}")
        failed |= not result.passed
    if failed:
        raise SystemExit(1)
    click.echo(f"{len(results)} checks passed")


if __name__ == "__main__":
    main()
