from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from attrs import define, field

from iblab import utils
from iblab.config import Config, default_config_path, load_config
from iblab.decomposition import (
    decompose_discrete,
    decompose_gaussian,
    violation_profile,
)
from iblab.discrete_ib import DiscreteJoint, info_curve_discrete
from iblab.dvib_linear import dvib_curve
from iblab.gaussian_core import GaussianJoint
from iblab.gaussian_ib import canonical_correlations, gib_analytic, gib_curve, sparse_gib
from iblab.graph_models import Dag, admissible_ib_dags, classify, ib_model_listing, is_admissible
from iblab.loaders import joint_from_data, read_covariance, read_data, read_pmf, read_sem
from iblab.mc_validate import discrete_validation_block, validation_block
from iblab.results_export import csv_text, json_text, render_comparison, write_text
from iblab.sem_lab import build_joint, random_sem

COMMANDS = ("dags", "gib", "sparse-gib", "ba", "dvib", "decompose", "sweep")

REPORT_COLUMNS = [
    "bound_term",
    "cmi",
    "clautum",
    "h_y",
    "i_ty_exact",
    "residual",
    "txy_violation",
    "xty_violation",
    "identity_gap",
]


@define
class RunConfig:
    """Everything one command-line invocation needs.

    Attributes:
        command: One of `COMMANDS`.
        cov: Covariance JSON file.
        sem: SEM JSON file or scenario name.
        pmf: pmf CSV or JSON file.
        data: Data CSV file.
        beta_grid: Grid "a:b:n" of β values.
        log_spacing: Space the β grid evenly in log β.
        seed: Seed overriding the configuration file.
        t_dim: Dimension (Gaussian) or cardinality (discrete) of T.
        edge_grid: "U->V=a:b:n", an edge coefficient sweep for `decompose`.
        dag: Edge list such as "X->T, T->Y" for `sweep`.
        count: Number of random SEMs for `sweep`.
        output: Output file; the artefact is returned as text when None.
        config_path: Configuration file overriding the packaged defaults.
        overrides: Per-section configuration overrides, e.g. {"ba": {"tol": 1e-8}}.
    """

    command: str = field()
    cov: Optional[Path] = None
    sem: Optional[str] = None
    pmf: Optional[Path] = None
    data: Optional[Path] = None
    beta_grid: Optional[str] = None
    log_spacing: bool = False
    seed: Optional[int] = None
    t_dim: Optional[int] = None
    edge_grid: Optional[str] = None
    dag: Optional[str] = None
    count: int = 100
    output: Optional[Path] = None
    config_path: Optional[Path] = None
    as_json: bool = False
    copula: bool = False
    sparse: bool = False
    validate: bool = False
    drop_hy: bool = False
    smooth: bool = False
    compare: bool = False
    overrides: dict[str, dict[str, Any]] = field(factory=dict)

    @command.validator
    def _check_command(self, attribute, value):
        if value not in COMMANDS:
            raise ValueError(f"Unknown command '{value}', expected one of {COMMANDS}.")

    def betas(self) -> list[float]:
        if self.beta_grid is None:
            raise ValueError(f"'{self.command}' needs --beta-grid.")
        return utils.parse_beta_grid(self.beta_grid, self.log_spacing)


def _settings(config: Config, run_config: RunConfig) -> dict[str, Any]:
    data = config.to_dict()
    for key, values in run_config.overrides.items():
        data[key] = {**data.get(key, {}), **{k: v for k, v in values.items() if v is not None}}
    if run_config.seed is not None:
        data["seed"] = run_config.seed
    merged = Config(data)
    merged.validate()
    return merged.to_dict()


def dags_listing() -> pd.DataFrame:
    """The listed IB models with their admissibility and Markov chains.

    Returns:
        pd.DataFrame: Columns column, model, is_dag, admissible, chains.
    """
    rows = []
    for model in ib_model_listing():
        dag = model.to_dag()
        if dag is None:
            admissible, chains = False, ""
        else:
            admissible = is_admissible(dag)
            chains = ";".join(sorted(c.value for c in classify(dag).chains))
        rows.append((model.column.value, str(model), model.is_dag, admissible, chains))
    return pd.DataFrame(rows, columns=["column", "model", "is_dag", "admissible", "chains"])


def dags_document() -> dict[str, Any]:
    """The listed IB models and the admissible DAGs as a JSON document."""
    listing = dags_listing()
    admissible = [
        {"model": str(dag), "edges": dag.to_list(), "markov_class": cls.value}
        for dag, cls in admissible_ib_dags()
    ]
    return {
        "listing": listing.to_dict(orient="records"),
        "listing_counts": listing.groupby("column", sort=False).size().to_dict(),
        "admissible": admissible,
    }


def sparse_gib_curve(
    joint: GaussianJoint, betas: list[float], settings: dict[str, Any]
) -> pd.DataFrame:
    """The sparse GIB solution at every β.

    Returns:
        pd.DataFrame: Columns beta, i_xt, i_ty, rank, objective, kkt_residual, converged.
    """
    rows = []
    for beta in betas:
        sol = sparse_gib(
            joint,
            beta,
            tol=settings["sparse_gib"]["tol"],
            seed=settings["seed"],
            n_starts=settings["n_starts"],
            max_iter=settings["sparse_gib"]["max_iter"],
        )
        rows.append(
            (beta, sol.i_xt, sol.i_ty, sol.rank, sol.objective, sol.kkt_residual, sol.converged)
        )
    return pd.DataFrame(
        rows,
        columns=["beta", "i_xt", "i_ty", "rank", "objective", "kkt_residual", "converged"],
    )


def random_sem_sweep(dag: Dag, count: int, seed: int) -> pd.DataFrame:
    """Decompose `count` random SEMs on one DAG, SEM k drawn with seed `seed + k`.

    Returns:
        pd.DataFrame: Column seed followed by every decomposition term.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}.")
    rows = []
    for k in range(count):
        report = decompose_gaussian(build_joint(random_sem(dag, seed + k)))
        data = report.to_dict()
        rows.append([seed + k] + [data[c] for c in REPORT_COLUMNS])
    return pd.DataFrame(rows, columns=["seed"] + REPORT_COLUMNS)


def report_comparison(joint: GaussianJoint) -> str:
    """Compare the term optimised for I(T;Y) by the IB and by the DVIB.

    Args:
        joint: Gaussian joint over X, Y and T.

    Returns:
        The comparison as a text table.
    """
    return render_comparison(decompose_gaussian(joint))


def _gaussian_input(run_config: RunConfig) -> tuple[GaussianJoint, str]:
    if run_config.cov is not None and run_config.data is not None:
        raise ValueError("Give either --cov or --data, not both.")
    if run_config.cov is not None:
        return read_covariance(run_config.cov), utils.file_digest(run_config.cov)
    if run_config.data is not None:
        joint = joint_from_data(read_data(run_config.data), copula=run_config.copula)
        return joint, utils.file_digest(run_config.data)
    raise ValueError(f"'{run_config.command}' needs --cov or --data.")


def _decompose_input(run_config: RunConfig) -> tuple[Any, str]:
    given = [v for v in (run_config.sem, run_config.cov, run_config.pmf) if v is not None]
    if len(given) != 1:
        raise ValueError("Give exactly one of --sem, --cov or --pmf.")
    if run_config.sem is not None:
        sem = read_sem(run_config.sem)
        path = Path(run_config.sem)
        digest = (
            utils.file_digest(path) if path.is_file() else utils.text_digest(json_text(sem.to_dict()))
        )
        return sem, digest
    if run_config.cov is not None:
        return read_covariance(run_config.cov), utils.file_digest(run_config.cov)
    assert run_config.pmf is not None
    return read_pmf(run_config.pmf), utils.file_digest(run_config.pmf)


def _table_artifact(
    df: pd.DataFrame, run_config: RunConfig, extra: dict[str, Any], validation: Any = None
) -> str:
    if not (run_config.as_json or run_config.validate):
        return csv_text(df)
    doc = {"command": run_config.command, "rows": df.to_dict(orient="records"), **extra}
    if validation is not None:
        doc["validation"] = validation
    return json_text(doc)


def _run_gaussian_curve(run_config: RunConfig, settings: dict[str, Any]) -> str:
    joint, digest = _gaussian_input(run_config)
    betas = run_config.betas()
    if run_config.command == "dvib":
        dvib = settings["dvib"]
        df = dvib_curve(
            joint,
            betas,
            t_dim=run_config.t_dim,
            seed=settings["seed"],
            lr=dvib["lr"],
            tol=dvib["tol"],
            max_iter=dvib["max_iter"],
            prior=dvib["prior"],
            drop_hy=run_config.drop_hy,
        )
    elif run_config.command == "sparse-gib" or run_config.sparse:
        df = sparse_gib_curve(joint, betas, settings)
    else:
        df = gib_curve(joint, betas)
    extra: dict[str, Any] = {"input_digest": digest}
    if run_config.command == "gib":
        extra["critical_betas"] = gib_analytic(joint, betas[0]).critical_betas
        extra["canonical_correlations"] = canonical_correlations(joint).tolist()
    validation = None
    if run_config.validate:
        validation = validation_block(
            joint.marginal(["X", "Y"]), settings["mc"]["n_samples"], settings["seed"]
        )
    return _table_artifact(df, run_config, extra, validation)


def _run_ba(run_config: RunConfig, settings: dict[str, Any]) -> str:
    if run_config.pmf is None:
        raise ValueError("'ba' needs --pmf.")
    pmf = read_pmf(run_config.pmf)
    if pmf.ndim != 2:
        raise ValueError("'ba' needs a two-way pmf over (X, Y).")
    if run_config.smooth:
        eps = settings["discrete"]["smoothing"]
        pmf = (pmf + eps) / (pmf + eps).sum()
    joint = DiscreteJoint(pmf)
    ba = settings["ba"]
    df = info_curve_discrete(
        joint,
        run_config.t_dim or joint.x_card,
        run_config.betas(),
        seed=settings["seed"],
        tol=ba["tol"],
        max_iter=ba["max_iter"],
        n_init=ba["n_init"],
    )
    validation = None
    if run_config.validate:
        validation = discrete_validation_block(pmf, settings["mc"]["n_samples"], settings["seed"])
    extra = {"input_digest": utils.file_digest(run_config.pmf)}
    return _table_artifact(df, run_config, extra, validation)


def _run_decompose(run_config: RunConfig, settings: dict[str, Any]) -> str:
    source, digest = _decompose_input(run_config)
    if run_config.edge_grid is not None:
        if run_config.sem is None:
            raise ValueError("--grid needs --sem.")
        edge, grid = utils.parse_edge_grid(run_config.edge_grid, run_config.log_spacing)
        df = violation_profile(source, edge, grid)
        return _table_artifact(df, run_config, {"input_digest": digest, "edge": edge})
    validation = None
    if isinstance(source, np.ndarray):
        if run_config.compare:
            raise ValueError("--compare needs a Gaussian input.")
        if source.ndim != 3:
            raise ValueError("decompose needs a three-way pmf over (X, Y, T).")
        smoothing = settings["discrete"]["smoothing"] if run_config.smooth else 0.0
        report = decompose_discrete(source, smoothing=smoothing)
        if run_config.validate:
            validation = discrete_validation_block(
                source, settings["mc"]["n_samples"], settings["seed"]
            )
    else:
        joint = source if isinstance(source, GaussianJoint) else build_joint(source)
        if run_config.compare:
            return report_comparison(joint)
        report = decompose_gaussian(joint)
        if run_config.validate:
            validation = validation_block(joint, settings["mc"]["n_samples"], settings["seed"])
    doc: dict[str, Any] = {**report.to_dict(), "input_digest": digest}
    if validation is not None:
        doc["validation"] = validation
    return json_text(doc)


def _run_sweep(run_config: RunConfig, settings: dict[str, Any]) -> str:
    if run_config.dag is None:
        raise ValueError("'sweep' needs --dag.")
    df = random_sem_sweep(Dag.from_string(run_config.dag), run_config.count, settings["seed"])
    return _table_artifact(df, run_config, {"dag": run_config.dag})


def run(run_config: RunConfig) -> str | Path:
    """Run one command.

    Args:
        run_config: The command and its inputs.

    Returns:
        The output path when `run_config.output` is set, the artefact text
        otherwise.

    Raises:
        ConfigError: When the configuration is invalid.
        InputFileError: When an input file cannot be parsed.
        GaussianError: On a numerical failure.
    """
    settings = _settings(load_config(run_config.config_path), run_config)
    match run_config.command:
        case "dags":
            text = json_text(dags_document()) if run_config.as_json else csv_text(dags_listing())
        case "gib" | "sparse-gib" | "dvib":
            text = _run_gaussian_curve(run_config, settings)
        case "ba":
            text = _run_ba(run_config, settings)
        case "decompose":
            text = _run_decompose(run_config, settings)
        case "sweep":
            text = _run_sweep(run_config, settings)
    if run_config.output is None:
        return text
    return write_text(text, run_config.output)


def copy_config(dirpath: str | Path) -> Path:
    """Copy the default configuration file to the specified directory.

    Args:
        dirpath: Path to the directory to copy the configuration file to.

    Returns:
        Path to the copied configuration file.
    """
    filepath = Path(dirpath) / "config.yaml"
    text = default_config_path().read_text(encoding="utf8")
    with open(filepath, "w", encoding="utf8") as f:
        f.write(text)
    return filepath
