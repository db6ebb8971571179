import json

import pytest

from causalab.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def fixtures(tmp_path):
    dag = {
        "nodes": [{"name": "X"}, {"name": "T"}, {"name": "Y"}],
        "links": [
            {"source": "X", "target": "T"},
            {"source": "X", "target": "Y"},
            {"source": "T", "target": "Y"},
        ],
        "treatment": "T",
        "outcome": "Y",
    }
    dag_path = tmp_path / "dag.json"
    dag_path.write_text(json.dumps(dag))

    csv_path = tmp_path / "data.csv"
    rows = ["t,x,health,y"]
    values = [
        (1, 2.0, 1, 10.0), (1, 3.0, 5, 12.0), (1, 2.5, 2, 11.0), (1, 4.0, 5, 14.0),
        (0, 2.1, 1, 9.0), (0, 3.2, 5, 11.5), (0, 2.4, 2, 10.0), (0, 4.2, 5, 13.0),
    ]
    rows += [",".join(str(v) for v in row) for row in values]
    csv_path.write_text("\n".join(rows) + "\n")
    return {"dag": str(dag_path), "csv": str(csv_path), "dir": tmp_path}


def test_classify_lists_confounder(capsys, fixtures):
    code, out, _ = run_cli(capsys, "classify", "--dag", fixtures["dag"])
    assert code == 0
    doc = json.loads(out)
    assert doc["confounders"] == ["X"]
    assert doc["classes"]["T"] == "treatment"


def test_balance_identical_groups_all_zero(capsys, tmp_path):
    csv_path = tmp_path / "ident.csv"
    csv_path.write_text("t,a,b\n1,1,5\n1,2,6\n0,1,5\n0,2,6\n")
    code, out, _ = run_cli(
        capsys, "balance", "--data", str(csv_path), "--treatment", "t", "--covariates", "a,b"
    )
    assert code == 0
    doc = json.loads(out)
    assert all(row["unadjusted"] == 0.0 and row["adjusted"] == 0.0 for row in doc["covariates"])


def test_full_pipeline_and_facet_two_cells(capsys, fixtures, tmp_path):
    scores_path = tmp_path / "scores.json"
    code, out, _ = run_cli(
        capsys, "propensity", "--data", fixtures["csv"], "--treatment", "t",
        "--covariates", "x", "--out", str(scores_path),
    )
    assert code == 0
    scores_doc = json.loads(scores_path.read_text())
    assert scores_doc["model"]["covariates"] == ["x"]
    assert len(scores_doc["scores"]) == 8

    match_path = tmp_path / "match.json"
    code, out, _ = run_cli(
        capsys, "match", "--data", fixtures["csv"], "--treatment", "t",
        "--metric", "propensity", "--scores", str(scores_path), "--out", str(match_path),
    )
    assert code == 0
    match_doc = json.loads(match_path.read_text())
    assert len(match_doc["pairs"]) == 4

    code, out, _ = run_cli(
        capsys, "effects", "--data", fixtures["csv"], "--outcome", "y",
        "--match", str(match_path),
    )
    assert code == 0
    record = json.loads(out)
    assert record["method"] == "matched"
    assert len(record["ites"]) == 4

    code, out, _ = run_cli(
        capsys, "effects", "--data", fixtures["csv"], "--outcome", "y",
        "--match", str(match_path), "--facet", "health", "--threshold", "health=3.5",
    )
    assert code == 0
    table = json.loads(out)
    assert len(table["cells"]) == 2
    sides = {cell["key"][0][1] for cell in table["cells"]}
    assert sides == {"<3.5", ">=3.5"}


def test_effects_ipw_route(capsys, fixtures, tmp_path):
    scores_path = tmp_path / "scores.json"
    run_cli(capsys, "propensity", "--data", fixtures["csv"], "--treatment", "t",
            "--covariates", "x", "--out", str(scores_path))
    code, out, _ = run_cli(
        capsys, "effects", "--data", fixtures["csv"], "--outcome", "y",
        "--treatment", "t", "--weights", str(scores_path),
    )
    assert code == 0
    assert json.loads(out)["method"] == "ipw"


def test_versions_append_and_store(capsys, fixtures, tmp_path):
    store = tmp_path / "versions.json"
    cohort = tmp_path / "cohort.json"
    cohort.write_text(json.dumps({"row_ids": [0, 1, 4, 5]}))
    code, out, _ = run_cli(
        capsys, "versions", "--file", str(store), "--dag", fixtures["dag"],
        "--cohort", str(cohort), "--ate", "1.5",
    )
    assert code == 0
    doc = json.loads(store.read_text())
    assert doc["dags"][0]["cohorts"][0]["ate"] == 1.5
    # appending with the same DAG dedups
    code, _, _ = run_cli(
        capsys, "versions", "--file", str(store), "--dag", fixtures["dag"],
        "--cohort", str(cohort), "--ate", "1.7",
    )
    assert code == 0
    doc = json.loads(store.read_text())
    assert len(doc["dags"]) == 1
    assert len(doc["dags"][0]["cohorts"]) == 2


def test_seeded_runs_are_byte_identical(capsys, fixtures, tmp_path):
    scores_path = tmp_path / "scores.json"
    run_cli(capsys, "propensity", "--data", fixtures["csv"], "--treatment", "t",
            "--covariates", "x", "--out", str(scores_path))
    match_path = tmp_path / "match.json"
    run_cli(capsys, "match", "--data", fixtures["csv"], "--treatment", "t",
            "--metric", "propensity", "--scores", str(scores_path), "--out", str(match_path))

    def snapshot():
        outputs = []
        for argv in (
            ("classify", "--dag", fixtures["dag"]),
            ("propensity", "--data", fixtures["csv"], "--treatment", "t", "--covariates", "x"),
            ("balance", "--data", fixtures["csv"], "--treatment", "t", "--covariates", "x"),
            ("match", "--data", fixtures["csv"], "--treatment", "t", "--metric", "propensity",
             "--scores", str(scores_path)),
            ("effects", "--data", fixtures["csv"], "--outcome", "y", "--match", str(match_path),
             "--seed", "7"),
        ):
            code, out, _ = run_cli(capsys, *argv)
            assert code == 0
            outputs.append(out)
        return outputs

    assert snapshot() == snapshot()


def test_validation_and_io_exit_codes(capsys, fixtures, tmp_path):
    # unknown column: validation error
    code, _, err = run_cli(
        capsys, "balance", "--data", fixtures["csv"], "--treatment", "t", "--covariates", "nope"
    )
    assert code == 1 and "error" in err
    # missing file: I/O error
    code, _, err = run_cli(capsys, "classify", "--dag", str(tmp_path / "absent.json"))
    assert code == 2
    # usage error: exit 1
    code, _, err = run_cli(capsys, "classify")
    assert code == 1


def test_categorical_covariates_expand(capsys, tmp_path):
    csv_path = tmp_path / "cat.csv"
    csv_path.write_text("t,color\n1,red\n1,blue\n0,red\n0,green\n")
    code, out, err = run_cli(
        capsys, "balance", "--data", str(csv_path), "--treatment", "t", "--covariates", "color"
    )
    assert code == 0
    names = [row["name"] for row in json.loads(out)["covariates"]]
    assert names == ["color=green", "color=red"]
    assert "expanded categorical" in err
