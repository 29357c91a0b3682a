import csv
import functools
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import click
import numpy as np

from .asymptotic import fim_asymptotic
from .batch import BatchEvaluator
from .config import RunConfig, load_config
from .design import optimize_design
from .efficiency import efficiency_table, ultimate_efficiency
from .exceptions import ConfigError, OUDesignError, ValidationError
from .fisher import fim_exact, fim_markov_sum
from .metrics import metrics
from .models import Criterion, Domain, SamplingDesign, SubvectorSelection
from .moments import mean, variance
from .outype import affinity_check
from .registry import make_builtin_model
from .simulate import mc_crlb_study

logger = logging.getLogger("oudesign")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

FIGURE1_PANELS = {
    "a": {"rho": 1.0, "delta": 1.0, "gamma": 1.0},
    "b": {"rho": 3.0, "delta": 1.0, "gamma": 1.0},
    "c": {"rho": 1.0, "delta": 3.0, "gamma": 1.0},
    "d": {"rho": 1.0, "delta": 1.0, "gamma": 3.0},
}
FIGURE1_DOMAIN = (1.0, 2.0)
FIGURE1_SIZES = range(2, 31)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(rows: Iterable[Sequence], header: Sequence[str], out: Optional[str] = None) -> None:
    """CSV with a header row and 12 significant digits, to a file or stdout."""
    def emit(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])

    if out is None:
        emit(sys.stdout)
        return
    try:
        with open(out, "w", newline="") as handle:
            emit(handle)
    except OSError as e:
        raise ConfigError(f"Cannot write {out}: {str(e)}")


def run_figure1(output_dir: str, evaluator: Optional[BatchEvaluator] = None,
                ns: Iterable[int] = FIGURE1_SIZES) -> List[Path]:
    """Ultimate D/E/A efficiencies of equidistant designs for the four Gompertz panels."""
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {output_dir}: {str(e)}")
    domain = Domain(*FIGURE1_DOMAIN)
    criteria = [Criterion.D, Criterion.E, Criterion.A]
    ns = list(ns)
    paths = []
    for panel, params in FIGURE1_PANELS.items():
        model = make_builtin_model("gompertz_log", dict(params, Y0=1.0))
        sel = SubvectorSelection.complete(model.partition, ("rho", "delta"))
        rows = efficiency_table(model, None, domain, ns, criteria, sel, evaluator=evaluator)
        by_n = {}
        for row in rows:
            by_n.setdefault(row.n, {})[row.criterion] = row.ueff
        path = out / f"panel_{panel}.csv"
        write_csv(
            [[n] + [by_n[n][c] for c in criteria] for n in ns],
            ["n", "ueff_D", "ueff_E", "ueff_A"],
            str(path),
        )
        logger.info(f"Wrote panel {panel} to {path}")
        paths.append(path)
    return paths


def handle_errors(func):
    """Map library errors to the stable exit codes."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            logger.error(f"{type(e).__name__}: {e.message}")
            click.echo(f"Error: {e.message}", err=True)
            sys.exit(EXIT_CONFIG)
        except OUDesignError as e:
            logger.error(f"{type(e).__name__}: {e.message}")
            click.echo(f"Error: {e.message}", err=True)
            sys.exit(EXIT_NUMERIC)
    return wrapper


def _parse_sizes(raw: Optional[str]) -> Optional[List[int]]:
    if raw is None:
        return None
    try:
        return [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--n must be a comma-separated list of integers, got {raw!r}")


def _load(config_path: str, out: Optional[str], seed: Optional[int], n: Optional[str],
          criterion: Sequence[str]) -> RunConfig:
    config = load_config(config_path)
    updates = {}
    if out is not None:
        updates["output"] = out
    if seed is not None:
        updates["seed"] = seed
    sizes = _parse_sizes(n)
    if sizes is not None:
        updates["n"] = sizes
    if criterion:
        updates["criteria"] = [Criterion(c) for c in criterion]
    return config.model_copy(update=updates)


def _model(config: RunConfig):
    if config.model is None:
        raise ConfigError("Configuration needs a 'model' section for this command")
    return config.model.build()


def _design(config: RunConfig, domain: Domain) -> SamplingDesign:
    if config.design is not None:
        return SamplingDesign(config.design, domain)
    if config.n:
        return SamplingDesign.equidistant(domain, config.n[0])
    raise ConfigError("Configuration needs 'design' times or a design size 'n'")


config_option = click.option("--config", "config_path", required=True, type=click.Path(), help="Run configuration (JSON or YAML)")
out_option = click.option("--out", default=None, help="Output path (stdout when omitted)")
seed_option = click.option("--seed", default=None, type=click.IntRange(0, 2**64 - 1), help="Random seed")
n_option = click.option("--n", "n", default=None, help="Design sizes as a comma-separated list")
criterion_option = click.option("--criterion", multiple=True, type=click.Choice(["D", "E", "A"]), help="Information function")


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity")
@click.option("--threads", default=None, type=click.IntRange(min=1), help="Worker threads (overrides OU_DESIGN_THREADS)")
@click.option("--metrics-file", default=None, type=click.Path(), help="Write Prometheus metrics here on exit")
@click.pass_context
def cli(ctx, verbose: int, threads: Optional[int], metrics_file: Optional[str]):
    """Fisher information and sampling designs for linear SDEs."""
    logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * verbose),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["evaluator"] = BatchEvaluator(max_workers=threads)
    if metrics_file:
        ctx.call_on_close(lambda: metrics.write(metrics_file))


@cli.command()
@config_option
@out_option
@n_option
@handle_errors
def moments(config_path, out, n):
    """Mean and variance at the design times."""
    config = _load(config_path, out, None, n, ())
    model = _model(config)
    design = _design(config, config.domain.build())
    E = np.atleast_1d(mean(model, None, design.times, config.quadrature))
    V = np.atleast_1d(variance(model, None, design.times, config.quadrature))
    write_csv(zip(design.times, E, V), ["t", "mean", "variance"], config.output)


@cli.command()
@config_option
@out_option
@n_option
@click.option("--method", type=click.Choice(["exact", "markov"]), default="exact", help="Evaluation route")
@click.pass_context
@handle_errors
def fim(ctx, config_path, out, n, method):
    """Fisher information matrix of a design."""
    config = _load(config_path, out, None, n, ())
    model = _model(config)
    design = _design(config, config.domain.build())
    if method == "exact":
        info = fim_exact(model, None, design, config.quadrature)
    else:
        info = fim_markov_sum(model, None, design, config.quadrature, ctx.obj["evaluator"])
    write_csv(info.to_rows(), ["label"] + list(info.labels), config.output)


@cli.command()
@config_option
@out_option
@handle_errors
def asymptotic(config_path, out):
    """Information of the fully observed trajectory on the domain."""
    config = _load(config_path, out, None, None, ())
    model = _model(config)
    result = fim_asymptotic(model, None, config.domain.build(), config.quadrature)
    write_csv(result.i_inf.to_rows(), ["label"] + list(result.i_inf.labels), config.output)
    click.echo(result.note, err=True)


@cli.command()
@config_option
@out_option
@n_option
@criterion_option
@click.pass_context
@handle_errors
def ueff(ctx, config_path, out, n, criterion):
    """Ultimate efficiencies of equidistant designs."""
    config = _load(config_path, out, None, n, criterion)
    model = _model(config)
    if not config.n:
        raise ConfigError("Configuration needs design sizes 'n' for ueff")
    rows = efficiency_table(
        model, None, config.domain.build(), config.n, config.criteria, config.build_selection(model),
        config.quadrature, ctx.obj["evaluator"],
    )
    write_csv(((r.n, r.criterion.value, r.ueff) for r in rows), ["n", "criterion", "ueff"], config.output)


@cli.command()
@config_option
@out_option
@seed_option
@n_option
@criterion_option
@click.pass_context
@handle_errors
def optimize(ctx, config_path, out, seed, n, criterion):
    """Optimise an n-point design for one criterion."""
    config = _load(config_path, out, None, n, criterion)
    if seed is not None:
        config = config.model_copy(update={"optimizer": config.optimizer.model_copy(update={"seed": seed})})
    model = _model(config)
    if len(config.n) != 1 or len(config.criteria) != 1:
        raise ConfigError("optimize needs exactly one design size and one criterion")
    domain = config.domain.build()
    sel = config.build_selection(model)
    c = config.criteria[0]
    result = optimize_design(model, None, config.n[0], domain, sel, c, config.optimizer,
                             quad=config.quadrature, evaluator=ctx.obj["evaluator"])
    efficiency = ultimate_efficiency(model, None, result.design, sel, c, quad=config.quadrature)
    write_csv(([t, result.value, efficiency] for t in result.design.times),
              ["t", "criterion_value", "ueff"], config.output)


@cli.command("check-outype")
@config_option
@out_option
@click.pass_context
@handle_errors
def check_outype(ctx, config_path, out):
    """Check whether a nonlinear SDE is of Ornstein-Uhlenbeck type."""
    config = _load(config_path, out, None, None, ())
    if config.sde is None:
        raise ConfigError("Configuration needs an 'sde' section for check-outype")
    sde = config.sde.build()
    result = affinity_check(sde, config.sde.t_grid, config.sde.y_grid, config.quadrature, ctx.obj["evaluator"])
    write_csv(result.to_rows(), ["t", "a", "b"], config.output)
    verdict = "OU type" if result.is_ou_type else "not OU type"
    click.echo(f"{sde.name}: {verdict} (max residual {result.max_residual:.3g}, tolerance {result.tolerance:.3g})", err=True)


@cli.command("mc-validate")
@config_option
@out_option
@seed_option
@click.option("--replications", default=None, type=click.IntRange(min=100), help="Monte-Carlo replications")
@click.pass_context
@handle_errors
def mc_validate(ctx, config_path, out, seed, replications):
    """Monte-Carlo comparison of estimator spread with the inverse information."""
    config = _load(config_path, out, seed, None, ())
    model = _model(config)
    design = _design(config, config.domain.build())
    R = replications or config.replications
    report = mc_crlb_study(model, None, design, config.build_selection(model), R, config.seed,
                           config.quadrature, ctx.obj["evaluator"])
    write_csv(report.to_rows(), ["label", "truth", "mean", "variance", "crlb", "ratio"], config.output)
    click.echo(f"R={report.replications} n={report.n} seed={report.seed} non_converged={report.non_converged}", err=True)


@cli.command()
@click.option("--out", default="figure1", help="Output directory for panel CSV files")
@click.pass_context
@handle_errors
def figure1(ctx, out):
    """Write the four Gompertz efficiency panels as CSV."""
    for path in run_figure1(out, ctx.obj["evaluator"]):
        click.echo(str(path))


if __name__ == "__main__":
    cli()
