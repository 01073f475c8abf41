import logging

import click  # type: ignore
import numpy as np

from iblab import api
from iblab.config import ConfigError
from iblab.decomposition import ZeroProbability
from iblab.gaussian_core import GaussianError, InvalidCovariance, UnknownBlock

LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


class InputError(click.ClickException):
    """An invalid input file, option or configuration."""

    exit_code = 1


class NumericalError(click.ClickException):
    """A numerical failure on valid input."""

    exit_code = 2


def _translate(error: Exception) -> click.ClickException:
    match error:
        case InvalidCovariance() | UnknownBlock():
            return InputError(str(error))
        case GaussianError() | ZeroProbability() | np.linalg.LinAlgError():
            return NumericalError(str(error))
        case _:
            return InputError(str(error))


class IbGroup(click.Group):
    """Command group whose usage errors exit with status 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = 1
            raise


def _execute(**kwargs) -> None:
    try:
        result = api.run(api.RunConfig(**kwargs))
    except (ConfigError, GaussianError, ValueError, KeyError, TypeError, OSError) as e:
        raise _translate(e) from e
    if isinstance(result, str):
        click.echo(result, nl=False)
    else:
        click.echo(f"Results saved to {result}.", err=True)


def common_options(func):
    """Options shared by every computing subcommand."""
    options = [
        click.option(
            "-o",
            "--output",
            type=click.Path(file_okay=True, dir_okay=False),
            help="Output file path. Print to stdout when omitted.",
        ),
        click.option(
            "-c",
            "--config",
            "config_path",
            type=click.Path(exists=True, file_okay=True, dir_okay=False),
            help="Configuration file path for this run.",
        ),
        click.option("--seed", type=int, help="Seed overriding the configuration file."),
        click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of CSV."),
        click.option(
            "--validate",
            is_flag=True,
            help="Append a Monte-Carlo validation block (implies --json).",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def beta_options(func):
    func = click.option(
        "--log-spacing", is_flag=True, help="Space the beta grid evenly in log beta."
    )(func)
    return click.option(
        "-b",
        "--beta-grid",
        required=True,
        help="Inclusive beta grid 'a:b:n', e.g. 1:10:10.",
    )(func)


def _paths(func):
    func = click.option(
        "--data",
        type=click.Path(exists=True, file_okay=True, dir_okay=False),
        help="Data CSV with X... and Y... columns.",
    )(func)
    return click.option(
        "--cov",
        type=click.Path(exists=True, file_okay=True, dir_okay=False),
        help="Covariance JSON over blocks X and Y.",
    )(func)


@click.group(cls=IbGroup)
@click.version_option(package_name="ib-lab")
@click.help_option("-h", "--help")
@click.option("-v", "--verbose", count=True, help="Log INFO (-v) or DEBUG (-vv) to stderr.")
def cli(verbose):
    """ib-lab: information bottleneck models, solvers and decompositions."""
    logging.basicConfig(
        level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)],
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of CSV.")
@click.option(
    "-o", "--output", type=click.Path(file_okay=True, dir_okay=False), help="Output file path."
)
def dags(as_json, output):
    """List the DAG models of the IB over {X, Y, T} (standard listing, d-separation)."""
    _execute(command="dags", as_json=as_json, output=output)


@cli.command()
@_paths
@beta_options
@click.option("--copula", is_flag=True, help="Copula-transform --data columns first.")
@click.option("--sparse", is_flag=True, help="Restrict A to be diagonal.")
@common_options
def gib(cov, data, beta_grid, log_spacing, copula, sparse, output, config_path, seed, as_json, validate):
    """Analytic Gaussian IB curve, min I(X;T) - beta*I(T;Y) with T = AX + xi.

    Rows of A are scaled left eigenvectors of S_{X|Y} S_X^-1 and switch on at
    beta_i = 1/(1 - lambda_i).
    """
    _execute(
        command="gib",
        cov=cov,
        data=data,
        beta_grid=beta_grid,
        log_spacing=log_spacing,
        copula=copula,
        sparse=sparse,
        output=output,
        config_path=config_path,
        seed=seed,
        as_json=as_json,
        validate=validate,
    )


@cli.command("sparse-gib")
@_paths
@beta_options
@click.option("--copula", is_flag=True, help="Copula-transform --data columns first.")
@click.option("--tol", type=float, help="Projected-gradient tolerance.")
@click.option("--max-iter", type=int, help="Maximum descent steps.")
@common_options
def sparse_gib(
    cov, data, beta_grid, log_spacing, copula, tol, max_iter, output, config_path, seed, as_json, validate
):
    """Sparse Gaussian IB, (1-beta)/2 ln|S_X D + I| + beta/2 ln|S_{X|Y} D + I| over D >= 0."""
    _execute(
        command="sparse-gib",
        cov=cov,
        data=data,
        beta_grid=beta_grid,
        log_spacing=log_spacing,
        copula=copula,
        output=output,
        config_path=config_path,
        seed=seed,
        as_json=as_json,
        validate=validate,
        overrides={"sparse_gib": {"tol": tol, "max_iter": max_iter}},
    )


@cli.command()
@click.option(
    "--pmf",
    required=True,
    type=click.Path(exists=True, file_okay=True, dir_okay=False),
    help="pmf of (X, Y) as long-format CSV or JSON.",
)
@click.option("-k", "--t-card", "t_dim", type=int, help="Cardinality of T, |X| by default.")
@beta_options
@click.option("--smooth", is_flag=True, help="Add the configured smoothing to every atom.")
@click.option("--tol", type=float, help="Functional change tolerance.")
@click.option("--max-iter", type=int, help="Maximum update rounds.")
@click.option("--n-init", type=int, help="Seeded restarts per beta.")
@common_options
def ba(
    pmf, t_dim, beta_grid, log_spacing, smooth, tol, max_iter, n_init, output, config_path, seed, as_json, validate
):
    """Discrete IB by Blahut-Arimoto: p(t|x) ~ p(t) exp(-beta KL(p(y|x) || p(y|t)))."""
    _execute(
        command="ba",
        pmf=pmf,
        t_dim=t_dim,
        beta_grid=beta_grid,
        log_spacing=log_spacing,
        smooth=smooth,
        output=output,
        config_path=config_path,
        seed=seed,
        as_json=as_json,
        validate=validate,
        overrides={"ba": {"tol": tol, "max_iter": max_iter, "n_init": n_init}},
    )


@cli.command()
@_paths
@beta_options
@click.option("--copula", is_flag=True, help="Copula-transform --data columns first.")
@click.option("--t-dim", type=int, help="Dimension of T, dim X by default.")
@click.option("--drop-hy", is_flag=True, help="Report the bound without H(Y).")
@click.option(
    "--prior",
    type=click.Choice(["marginal", "standard"]),
    help="Rate term against the induced P(T) or against N(0, I).",
)
@click.option("--lr", type=float, help="Largest step size.")
@click.option("--tol", type=float, help="Objective change tolerance.")
@click.option("--max-iter", type=int, help="Maximum descent steps.")
@common_options
def dvib(
    cov,
    data,
    beta_grid,
    log_spacing,
    copula,
    t_dim,
    drop_hy,
    prior,
    lr,
    tol,
    max_iter,
    output,
    config_path,
    seed,
    as_json,
    validate,
):
    """Linear variational IB, E_X KL(P(T|X) || P(T)) - beta (E log P(Y|T) + H(Y))."""
    _execute(
        command="dvib",
        cov=cov,
        data=data,
        beta_grid=beta_grid,
        log_spacing=log_spacing,
        copula=copula,
        t_dim=t_dim,
        drop_hy=drop_hy,
        output=output,
        config_path=config_path,
        seed=seed,
        as_json=as_json,
        validate=validate,
        overrides={"dvib": {"prior": prior, "lr": lr, "tol": tol, "max_iter": max_iter}},
    )


@cli.command()
@click.option("--sem", help="SEM JSON file or scenario name (e.g. chain_xty).")
@click.option(
    "--cov",
    type=click.Path(exists=True, file_okay=True, dir_okay=False),
    help="Covariance JSON over blocks X, Y and T.",
)
@click.option(
    "--pmf",
    type=click.Path(exists=True, file_okay=True, dir_okay=False),
    help="pmf of (X, Y, T) as long-format CSV or JSON.",
)
@click.option("--grid", "edge_grid", help="Sweep one SEM edge, 'T->Y=a:b:n'.")
@click.option("--log-spacing", is_flag=True, help="Space the --grid values in log scale.")
@click.option("--smooth", is_flag=True, help="Add the configured smoothing to every atom.")
@click.option("--compare", is_flag=True, help="Print the IB versus DVIB comparison table.")
@common_options
def decompose(
    sem, cov, pmf, edge_grid, log_spacing, smooth, compare, output, config_path, seed, as_json, validate
):
    """Decompose I(T;Y) = [E log P(Y|T) + H(Y)] + I(Y;T|X) + L(Y;T|X) + residual.

    The residual is zero when X - T - Y holds; I(Y;T|X) + L(Y;T|X) is zero
    when T - X - Y holds.
    """
    _execute(
        command="decompose",
        sem=sem,
        cov=cov,
        pmf=pmf,
        edge_grid=edge_grid,
        log_spacing=log_spacing,
        smooth=smooth,
        compare=compare,
        output=output,
        config_path=config_path,
        seed=seed,
        as_json=as_json,
        validate=validate,
    )


@cli.command()
@click.option("--dag", required=True, help="Edge list, e.g. 'X->T, T->Y'.")
@click.option("-n", "--count", default=100, show_default=True, help="Number of random SEMs.")
@common_options
def sweep(dag, count, output, config_path, seed, as_json, validate):
    """Decompose I(T;Y) for seeded random linear-Gaussian SEMs on one DAG."""
    if validate:
        raise click.UsageError("'sweep' does not support --validate.")
    _execute(
        command="sweep",
        dag=dag,
        count=count,
        output=output,
        config_path=config_path,
        seed=seed,
        as_json=as_json,
    )


@cli.command()
@click.option(
    "--copy",
    type=click.Path(exists=True, file_okay=False, dir_okay=True),
    help="Copy the default configuration file to the specified directory.",
)
def config(copy):
    """Get an editable copy of the ib-lab configuration."""
    if copy:
        filepath = api.copy_config(copy)
        click.echo(f"Configuration file copied to {filepath}.")
    else:
        click.echo("Nothing to do. Use --copy DIR.")
