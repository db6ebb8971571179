import json

import pytest
from fastapi.testclient import TestClient

from causalab.service import create_app

CSV = (
    "t,x,health,internet,y\n"
    "1,2.0,1,yes,10\n"
    "1,3.0,5,no,12\n"
    "1,2.5,2,yes,11\n"
    "1,4.0,5,yes,14\n"
    "0,2.1,1,no,9\n"
    "0,3.2,5,yes,11.5\n"
    "0,2.4,2,yes,10\n"
    "0,4.2,5,no,13\n"
)


@pytest.fixture
def client():
    return TestClient(create_app())


def mint(client) -> dict:
    response = client.get("/dag")
    return {"X-Session": response.headers["X-Session"]}


def test_server_mints_and_requires_sessions(client):
    response = client.get("/dag")
    sid = response.headers["X-Session"]
    assert response.status_code == 200
    # echoing the id keeps the session
    again = client.get("/dag", headers={"X-Session": sid})
    assert again.headers["X-Session"] == sid
    # unknown ids are rejected
    missing = client.get("/dag", headers={"X-Session": "deadbeef"})
    assert missing.status_code == 404
    assert missing.json()["error"] == "unknown_session"


def test_dataset_upload_and_summary(client):
    headers = mint(client)
    response = client.post("/datasets", content=CSV, headers=headers)
    assert response.status_code == 200
    summary = response.json()
    assert summary["n_rows"] == 8
    kinds = {c["name"]: c["kind"] for c in summary["columns"]}
    assert kinds["internet"] == "binary" and kinds["x"] == "continuous"


def test_dag_editing_cycle_conflict_and_classification(client):
    headers = mint(client)
    for name in ("X", "T", "Y"):
        assert client.post("/dag/nodes", json={"name": name}, headers=headers).status_code == 200
    for source, target in (("X", "T"), ("X", "Y"), ("T", "Y")):
        response = client.post("/dag/edges", json={"source": source, "target": target}, headers=headers)
        assert response.status_code == 200

    # classification before designations: 422 missing_designation
    response = client.get("/dag/classification", headers=headers)
    assert response.status_code == 422
    assert response.json()["error"] == "missing_designation"

    assert client.post("/dag/treatment", json={"node": "T"}, headers=headers).status_code == 200
    assert client.post("/dag/outcome", json={"node": "Y"}, headers=headers).status_code == 200

    before = client.get("/dag", headers=headers).json()
    conflict = client.post("/dag/edges", json={"source": "Y", "target": "X"}, headers=headers)
    assert conflict.status_code == 409
    assert conflict.json()["error"] == "cycle"
    assert client.get("/dag", headers=headers).json() == before

    role = client.post("/dag/outcome", json={"node": "T"}, headers=headers)
    assert role.status_code == 409
    assert role.json()["error"] == "role_conflict"

    classes = client.get("/dag/classification", headers=headers).json()
    assert classes["confounders"] == ["X"]


def test_mutation_counter_monotone_and_echoed(client):
    headers = mint(client)
    counters = []
    for name in ("A", "B", "C"):
        response = client.post("/dag/nodes", json={"name": name}, headers=headers)
        counters.append(int(response.headers["X-Mutation-Counter"]))
    assert counters == sorted(counters)
    assert len(set(counters)) == len(counters)
    # reads do not bump the counter
    read = client.get("/dag", headers=headers)
    assert int(read.headers["X-Mutation-Counter"]) == counters[-1]


def _prepare_scored_session(client):
    headers = mint(client)
    client.post("/datasets", content=CSV, headers=headers)
    response = client.post(
        "/propensity/fit",
        json={"covariates": ["x", "health"], "treatment": "t"},
        headers=headers,
    )
    assert response.status_code == 200
    return headers, response.json()


def test_propensity_fit_select_histogram(client):
    headers, fitted = _prepare_scored_session(client)
    assert fitted["model"]["converged"] is True
    assert len(fitted["scores"]) == 8

    hist = client.get("/propensity/histogram?bins=10", headers=headers)
    assert hist.status_code == 200
    body = hist.json()
    assert sum(body["treated"]) + sum(body["control"]) == 8

    # brush example: scores {0.1, 0.5, 0.9} -> selection {1, 2}
    select = client.post("/propensity/select", json={"range": [0.0, 1.0]}, headers=headers)
    assert select.status_code == 200
    payload = select.json()
    assert sorted(payload["selection"] + payload["inverse"]) == list(range(8))

    bad = client.post("/propensity/select", json={"range": [0.9]}, headers=headers)
    assert bad.status_code == 400


def test_propensity_fit_validation(client):
    headers = mint(client)
    client.post("/datasets", content=CSV, headers=headers)
    response = client.post("/propensity/fit", json={"covariates": ["x"]}, headers=headers)
    assert response.status_code == 400
    # degenerate treatment: all rows one class
    csv = "t,x\n1,1.0\n1,2.0\n"
    client.post("/datasets", content=csv, headers=headers)
    response = client.post(
        "/propensity/fit", json={"covariates": ["x"], "treatment": "t"}, headers=headers
    )
    assert response.status_code == 422
    assert response.json()["error"] == "degenerate_treatment"


def test_match_balance_effects_flow(client):
    headers, _ = _prepare_scored_session(client)
    match = client.post("/match", json={"treatment": "t", "metric": "propensity"}, headers=headers)
    assert match.status_code == 200
    assert len(match.json()["pairs"]) == 4

    balance = client.post(
        "/balance", json={"covariates": ["x", "health"], "treatment": "t"}, headers=headers
    )
    assert balance.status_code == 200
    body = balance.json()
    assert body["mode"] == "cohort_adjusted"
    assert {row["name"] for row in body["covariates"]} == {"x", "health"}

    weighted = client.post(
        "/balance",
        json={"covariates": ["x"], "treatment": "t", "adjust": "weights"},
        headers=headers,
    )
    assert weighted.json()["mode"] == "weight_adjusted"

    matched = client.post("/effects/matched", json={"outcome": "y"}, headers=headers)
    assert matched.status_code == 200
    assert matched.json()["method"] == "matched"

    ipw = client.post("/effects/ipw", json={"outcome": "y", "treatment": "t"}, headers=headers)
    assert ipw.status_code == 200

    table = client.post(
        "/effects/facet",
        json={"outcome": "y", "variables": ["health"], "thresholds": {"health": 3.5}},
        headers=headers,
    )
    assert table.status_code == 200
    assert len(table.json()["cells"]) == 2


def test_versions_flow_and_exports(client):
    headers, _ = _prepare_scored_session(client)
    client.post("/match", json={"treatment": "t", "metric": "propensity"}, headers=headers)
    for name in ("t", "y"):
        client.post("/dag/nodes", json={"name": name}, headers=headers)
    client.post("/dag/edges", json={"source": "t", "target": "y"}, headers=headers)
    client.post("/dag/treatment", json={"node": "t"}, headers=headers)
    client.post("/dag/outcome", json={"node": "y"}, headers=headers)

    for ate in (1.0, 2.0):
        response = client.post("/versions", json={"ate": ate, "timestamp": ""}, headers=headers)
        assert response.status_code == 200

    icicle = client.get("/versions/icicle", headers=headers).json()
    assert len(icicle["children"]) == 1
    assert len(icicle["children"][0]["children"]) == 2

    ates = client.get("/versions/ates", headers=headers).json()["ates"]
    assert [entry["ate"] for entry in ates] == [1.0, 2.0]

    exported = client.get("/export/versions.json", headers=headers)
    assert exported.status_code == 200
    assert "attachment" in exported.headers["content-disposition"]
    doc = json.loads(exported.content)
    assert len(doc["dags"][0]["cohorts"]) == 2

    dag_doc = client.get("/export/dag.json", headers=headers)
    replayed = client.put("/dag", content=dag_doc.content, headers=headers)
    assert replayed.status_code == 200
    assert replayed.json() == json.loads(dag_doc.content)

    restore = client.post("/versions/restore", json={"label": "DAG 1"}, headers=headers)
    assert restore.status_code == 200


def test_missing_resources_are_404(client):
    headers = mint(client)
    assert client.get("/propensity/histogram", headers=headers).status_code == 404
    assert client.post("/match", json={"treatment": "t"}, headers=headers).status_code == 404
    assert client.post("/effects/matched", json={"outcome": "y"}, headers=headers).status_code == 404


def test_upload_cap_enforced():
    client = TestClient(create_app(max_upload_mb=1))
    headers = mint(client)
    big = "a,b\n" + ("1,2\n" * 300000)
    response = client.post("/datasets", content=big, headers=headers)
    assert response.status_code == 413


def test_state_dir_survives_restart(tmp_path):
    state = tmp_path / "state"
    first = TestClient(create_app(state_dir=str(state)))
    headers = mint(first)
    first.post("/datasets", content=CSV, headers=headers)
    first.post("/dag/nodes", json={"name": "T"}, headers=headers)

    # a fresh app instance with the same state dir restores the session
    second = TestClient(create_app(state_dir=str(state)))
    response = second.get("/dag", headers=headers)
    assert response.status_code == 200
    assert response.json()["nodes"] == [{"name": "T"}]
    summary = second.get("/datasets/summary", headers=headers)
    assert summary.json()["n_rows"] == 8


def test_service_matches_direct_library_calls(client):
    # the service adds no semantics: same inputs, same artifacts
    import io

    import causalab as cl

    headers = mint(client)
    client.post("/datasets", content=CSV, headers=headers)
    fitted = client.post(
        "/propensity/fit", json={"covariates": ["x", "health"], "treatment": "t"}, headers=headers
    ).json()
    match_doc = client.post(
        "/match", json={"treatment": "t", "metric": "propensity"}, headers=headers
    ).json()
    balance_doc = client.post(
        "/balance", json={"covariates": ["x", "health"], "treatment": "t"}, headers=headers
    ).json()

    ds = cl.load_csv(io.StringIO(CSV))
    model = cl.fit_propensity(ds, ["x", "health"], "t")
    scores = cl.predict(model, ds)
    assert fitted["model"] == model.to_json()
    assert fitted["scores"] == scores.tolist()

    result = cl.match(ds, "t", cl.MatchSpec(metric=cl.Metric.PROPENSITY), scores)
    assert match_doc == result.to_json()

    report = cl.balance_report(ds, ["x", "health"], "t", adjusted=cl.matched_cohort(ds, result))
    assert balance_doc == report.to_json()


def test_node_link_put(client):
    headers = mint(client)
    doc = {"format": "node_link",
           "document": {"nodes": [{"id": "A"}, {"id": "B"}], "links": [{"source": "A", "target": "B"}]}}
    response = client.put("/dag", json=doc, headers=headers)
    assert response.status_code == 200
    body = response.json()
    assert [n["name"] for n in body["nodes"]] == ["A", "B"]
    assert body["treatment"] is None
