import io
import json

import numpy as np
import pandas as pd
import pytest

from iblab import api
from iblab.api import RunConfig
from iblab.config import ConfigValueError, default_config_path
from iblab.graph_models import Dag


def run_csv(**kwargs) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(api.run(RunConfig(**kwargs))))


def run_json(**kwargs) -> dict:
    return json.loads(api.run(RunConfig(**kwargs)))


class TestRunConfig:
    def test_unknown_command(self):
        with pytest.raises(ValueError):
            RunConfig("fit")

    def test_betas(self):
        assert RunConfig("gib", beta_grid="1:3:3").betas() == [1.0, 2.0, 3.0]

    def test_betas_missing(self):
        with pytest.raises(ValueError):
            RunConfig("gib").betas()


class TestSettings:
    def test_overrides_skip_none(self):
        settings = api._settings(
            api.load_config(), RunConfig("ba", overrides={"ba": {"tol": None, "n_init": 3}})
        )
        assert settings["ba"]["tol"] == 1e-10
        assert settings["ba"]["n_init"] == 3

    def test_seed(self):
        settings = api._settings(api.load_config(), RunConfig("ba", seed=7))
        assert settings["seed"] == 7

    def test_invalid_override(self):
        with pytest.raises(ConfigValueError):
            api._settings(api.load_config(), RunConfig("dvib", overrides={"dvib": {"lr": -1.0}}))


class TestDags:
    def test_listing(self):
        df = api.dags_listing()
        assert len(df) == 10
        assert df.groupby("column", sort=False).size().to_dict() == {
            "T-X-Y": 3,
            "X-T-Y": 2,
            "Other": 5,
        }
        assert df["is_dag"].sum() == 9
        assert not df.loc[~df["is_dag"], "admissible"].any()

    def test_document(self):
        doc = api.dags_document()
        assert doc["listing_counts"] == {"T-X-Y": 3, "X-T-Y": 2, "Other": 5}
        assert len(doc["admissible"]) == 9

    def test_run_csv(self):
        df = run_csv(command="dags")
        assert list(df.columns) == ["column", "model", "is_dag", "admissible", "chains"]

    def test_run_json(self):
        doc = run_json(command="dags", as_json=True)
        assert len(doc["listing"]) == 10


class TestGib:
    def test_curve(self):
        df = run_csv(command="gib", cov="tests/data/rho05.json", beta_grid="1:10:10")
        assert len(df) == 10
        row = df[df["beta"] == 8].iloc[0]
        assert row["i_xt"] == pytest.approx(0.4236489, abs=1e-7)
        assert row["i_ty"] == pytest.approx(0.0770753, abs=1e-7)

    def test_json(self):
        doc = run_json(command="gib", cov="tests/data/rho05.json", beta_grid="1:10:10", as_json=True)
        assert doc["critical_betas"] == [4.0]
        assert doc["canonical_correlations"] == [0.5]
        assert len(doc["input_digest"]) == 64

    def test_validate_implies_json(self):
        doc = run_json(
            command="gib", cov="tests/data/rho05.json", beta_grid="8:8:1", validate=True
        )
        assert [c["quantity"] for c in doc["validation"]["checks"]] == ["I(X;Y)", "L(X;Y)", "H(Y)"]

    def test_data(self):
        df = run_csv(command="gib", data="tests/data/data.csv", beta_grid="1:100:3", copula=True)
        assert df["rank"].max() >= 1

    def test_sparse(self):
        df = run_csv(command="gib", cov="tests/data/rho05.json", beta_grid="8:8:1", sparse=True)
        assert df.loc[0, "i_xt"] == pytest.approx(0.4236489, abs=1e-5)
        assert "kkt_residual" in df.columns

    def test_sparse_command(self):
        df = run_csv(command="sparse-gib", cov="tests/data/rho05.json", beta_grid="2:8:2")
        assert df["rank"].tolist() == [0, 1]

    def test_needs_input(self):
        with pytest.raises(ValueError):
            api.run(RunConfig("gib", beta_grid="1:2:2"))

    def test_rejects_two_inputs(self):
        with pytest.raises(ValueError):
            api.run(
                RunConfig(
                    "gib", cov="tests/data/rho05.json", data="tests/data/data.csv", beta_grid="1:2:2"
                )
            )


class TestBa:
    def test_curve(self):
        df = run_csv(command="ba", pmf="tests/data/pmf_xy.csv", beta_grid="1:50:3")
        assert list(df.columns) == ["beta", "i_xt", "i_ty", "converged"]
        assert df["i_ty"].iloc[-1] == pytest.approx(0.192745, abs=1e-3)

    def test_t_card_and_smoothing(self):
        df = run_csv(
            command="ba", pmf="tests/data/pmf_xy.csv", beta_grid="5:5:1", t_dim=3, smooth=True
        )
        assert len(df) == 1

    def test_needs_two_way_pmf(self):
        with pytest.raises(ValueError):
            api.run(RunConfig("ba", pmf="tests/data/pmf_xyt.json", beta_grid="1:2:2"))

    def test_validate(self):
        doc = run_json(
            command="ba",
            pmf="tests/data/pmf_xy.csv",
            beta_grid="5:5:1",
            validate=True,
            overrides={"mc": {"n_samples": 1000}},
        )
        assert doc["validation"]["n"] == 1000


class TestDvib:
    def test_curve(self):
        df = run_csv(
            command="dvib",
            cov="tests/data/rho05.json",
            beta_grid="1:8:2",
            overrides={"dvib": {"max_iter": 300}},
        )
        assert list(df.columns) == ["beta", "i_xt", "i_ty_bound", "converged"]

    def test_drop_hy(self):
        kwargs = dict(
            command="dvib",
            cov="tests/data/rho05.json",
            beta_grid="8:8:1",
            overrides={"dvib": {"max_iter": 50}},
        )
        with_hy = run_csv(**kwargs)
        without = run_csv(**kwargs, drop_hy=True)
        diff = with_hy.loc[0, "i_ty_bound"] - without.loc[0, "i_ty_bound"]
        assert diff == pytest.approx(0.5 * np.log(2 * np.pi * np.e), abs=1e-8)


class TestDecompose:
    def test_sem_file(self):
        doc = run_json(command="decompose", sem="tests/data/chain_xty.json")
        assert abs(doc["residual"]) < 1e-9
        assert doc["cmi"] == pytest.approx(0.5 * np.log(2))

    def test_scenario_matches_file(self):
        from_file = run_json(command="decompose", sem="tests/data/chain_xty.json")
        from_name = run_json(command="decompose", sem="chain_xty")
        for key in ("bound_term", "cmi", "clautum", "i_ty_exact"):
            assert from_file[key] == from_name[key]

    def test_cov(self):
        doc = run_json(command="decompose", cov="tests/data/chain_cov.json")
        assert doc["txy_violation"] == pytest.approx(1.0)

    def test_pmf(self):
        doc = run_json(command="decompose", pmf="tests/data/pmf_xyt.json")
        assert abs(doc["identity_gap"]) < 1e-9

    def test_grid(self):
        df = run_csv(command="decompose", sem="chain_xty", edge_grid="T->Y=0:1:3")
        assert df["param"].tolist() == [0.0, 0.5, 1.0]

    def test_grid_needs_sem(self):
        with pytest.raises(ValueError):
            api.run(RunConfig("decompose", cov="tests/data/chain_cov.json", edge_grid="T->Y=0:1:3"))

    def test_compare(self):
        text = api.run(RunConfig("decompose", sem="chain_xty", compare=True))
        assert "difference (IB - DVIB): 1\n" in text

    def test_compare_needs_gaussian(self):
        with pytest.raises(ValueError):
            api.run(RunConfig("decompose", pmf="tests/data/pmf_xyt.json", compare=True))

    def test_exactly_one_input(self):
        with pytest.raises(ValueError):
            api.run(RunConfig("decompose", sem="chain_xty", cov="tests/data/chain_cov.json"))

    def test_validate(self):
        doc = run_json(
            command="decompose",
            sem="chain_xty",
            validate=True,
            overrides={"mc": {"n_samples": 2000}},
        )
        assert len(doc["validation"]["checks"]) == 7


def test_report_comparison(fork):
    text = api.report_comparison(fork)
    line = next(l for l in text.splitlines() if l.startswith("difference"))
    assert abs(float(line.split(":")[1])) < 1e-10


class TestSweep:
    def test_random_sem_sweep(self):
        df = api.random_sem_sweep(Dag.from_string("X->T, T->Y"), 4, seed=10)
        assert df["seed"].tolist() == [10, 11, 12, 13]
        assert np.all(df["xty_violation"] < 1e-9)
        assert np.all(df["txy_violation"] > 0)

    def test_fork(self):
        df = api.random_sem_sweep(Dag.from_string("X->T, X->Y"), 3, seed=0)
        assert np.all(df["txy_violation"].abs() < 1e-9)

    def test_count(self):
        with pytest.raises(ValueError):
            api.random_sem_sweep(Dag(), 0, seed=0)

    def test_run(self):
        df = run_csv(command="sweep", dag="X->T, T->Y", count=2)
        assert list(df.columns) == ["seed"] + api.REPORT_COLUMNS


class TestRun:
    def test_output(self, clean_dir):
        filepath = clean_dir / "out.csv"
        result = api.run(RunConfig("gib", cov="tests/data/rho05.json", beta_grid="1:2:2", output=filepath))
        assert result == filepath
        assert filepath.read_text().startswith("beta,i_xt,i_ty,rank\n")

    def test_deterministic(self):
        kwargs = dict(command="ba", pmf="tests/data/pmf_xy.csv", beta_grid="1:10:4", seed=3)
        assert api.run(RunConfig(**kwargs)) == api.run(RunConfig(**kwargs))

    def test_config_file(self, clean_dir):
        filepath = api.copy_config(clean_dir)
        text = filepath.read_text().replace("seed: 0", "seed: -1")
        filepath.write_text(text)
        with pytest.raises(ConfigValueError):
            api.run(RunConfig("dags", config_path=filepath))


def test_copy_config(clean_dir):
    """Test copy_config()."""
    api.copy_config(clean_dir)
    assert (clean_dir / "config.yaml").exists()
    assert (clean_dir / "config.yaml").read_text() == default_config_path().read_text()
