"""Command-line entry point: ``adaptqp run | bench | audit``.

Exit status is 0 on success, 1 when arguments or input data are invalid and
2 when a run fails (including an audit that does not pass).
"""
from __future__ import annotations

import json
import logging
import os
import sys

import click

from .core import HyperParams, InvalidArgumentError
from .harness import (GRID_C, GRID_D, ExperimentConfig, HarnessError, Setting,
                      benchmark_primal_vs_dual, emit_report, run_setting)

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class RunFailed(click.ClickException):
    exit_code = EXIT_FAILED


def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        dims = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers") from None
    if not dims or any(d < 1 for d in dims):
        raise click.BadParameter("dimensions must be positive integers")
    return dims


def _report_format(path):
    return "csv" if path and os.path.splitext(path)[1].lower() == ".csv" else "json"


def _emit(rows, out):
    text = emit_report(rows, _report_format(out), out)
    if out is None:
        click.echo(text, nl=False)


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def cli(verbose):
    """Max-margin domain transfer experiments."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--setting", "settings", multiple=True, required=True,
              type=click.Choice([s.value for s in Setting]),
              help="Setting to evaluate (repeatable).")
@click.option("--source", type=click.Path(exists=True, dir_okay=False), help="Source dataset file.")
@click.option("--target", type=click.Path(exists=True, dir_okay=False), help="Target dataset file.")
@click.option("--synthetic", type=click.Choice(["shifted", "toy"]), help="Use a generator instead of files.")
@click.option("--dims", callback=_int_list, help="Dimensions for the shifted generator, e.g. 32,64.")
@click.option("--folds", default=10, show_default=True, type=click.IntRange(min=2))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--cs", default=1.0, show_default=True, type=float, help="Source penalty C_S.")
@click.option("--ct", default=1.0, show_default=True, type=float, help="Target penalty C_T.")
@click.option("--d", "d_weight", default=1.0, show_default=True, type=float, help="Distance weight D.")
@click.option("--grid", is_flag=True,
              help="Sweep C_S = C_T over {0.1, 1, 10} and D over {0.01, 0.1, 1, 10}.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True),
              help="Report path (.json or .csv); stdout when omitted.")
def run(settings, source, target, synthetic, dims, folds, seed, cs, ct, d_weight, grid, out):
    """Paired k-fold evaluation of one or more settings."""
    if synthetic is None and (source is None or target is None):
        raise click.UsageError("give --source and --target, or --synthetic")
    if synthetic is not None and (source or target):
        raise click.UsageError("--synthetic cannot be combined with dataset files")
    if synthetic == "shifted" and not dims:
        raise click.UsageError("--synthetic shifted needs --dims")
    if synthetic != "shifted" and dims:
        raise click.UsageError("--dims only applies to --synthetic shifted")

    if grid:
        points = [HyperParams(c, c, d) for c in GRID_C for d in GRID_D]
    else:
        points = [HyperParams(cs, ct, d_weight)]
    rows = []
    for dim in dims or [None]:
        for hp in points:
            for setting in settings:
                cfg = ExperimentConfig(setting, folds, hp, dim, source, target, synthetic, seed)
                rows.extend(run_setting(cfg))
    _emit(rows, out)


@cli.command()
@click.option("--dims", callback=_int_list, default="16,32,64", show_default=True)
@click.option("--repeats", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--n-target", default=90, show_default=True, type=click.IntRange(min=4))
@click.option("--n-source", default=200, show_default=True, type=click.IntRange(min=4))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False, writable=True),
              help="Timing table path (.csv or .json); stdout when omitted.")
def bench(dims, repeats, n_target, n_source, seed, out):
    """Primal vs dual transform-step timings per dimension."""
    rows = benchmark_primal_vs_dual(dims, n_target, n_source, seed, repeats)
    _emit(rows, out)


@cli.command()
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--instances", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--out", type=click.Path(dir_okay=False, writable=True), help="Write the JSON report here.")
def audit(seed, instances, out):
    """KKT and primal cross-check of the dual solver on random small instances."""
    from .oracle import audit_suite

    passed, records = audit_suite(seed, instances)
    text = json.dumps({"passed": passed, "instances": records}, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    n_ok = sum(r["passed"] for r in records)
    click.echo(f"audit: {n_ok}/{len(records)} instances passed", err=True)
    if not passed:
        raise RunFailed("audit failed")


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="adaptqp", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_FAILED
    except RunFailed as exc:
        exc.show()
        return EXIT_FAILED
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    except HarnessError as exc:
        cause = exc.__cause__
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID if isinstance(cause, InvalidArgumentError) else EXIT_FAILED
    except InvalidArgumentError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit status 2
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
