import json

import pytest

from causalab.dag import CausalDag, export_dag_json
from causalab.errors import HashMismatchError, SchemaError
from causalab.provenance import (
    VersionTree,
    add_version,
    ate_series,
    icicle_data,
    load_versions,
    save_versions,
)


def _dag_doc(layout=None, extra_edge=False):
    edges = [("X", "T"), ("X", "Y"), ("T", "Y")]
    if extra_edge:
        edges.append(("X", "Z"))
    nodes = ["X", "T", "Y"] + (["Z"] if extra_edge else [])
    return export_dag_json(CausalDag.build(nodes, edges, "T", "Y", layout=layout))


def test_dedup_same_dag_two_cohorts():
    tree = VersionTree()
    tree = add_version(tree, _dag_doc(), [1, 2, 3], ate=0.5, timestamp="")
    tree = add_version(tree, _dag_doc(), [4, 5], ate=0.7, timestamp="")
    assert len(tree.dags) == 1
    assert [c.label for c in tree.dags[0].cohorts] == ["Cohort 1.1", "Cohort 1.2"]


def test_layout_only_change_keeps_dag_version():
    tree = VersionTree()
    tree = add_version(tree, _dag_doc(), [1], ate=0.1, timestamp="")
    moved = _dag_doc(layout={"X": (50.0, 60.0)})
    tree = add_version(tree, moved, [2], ate=0.2, timestamp="")
    assert len(tree.dags) == 1


def test_structural_change_creates_new_version():
    tree = VersionTree()
    tree = add_version(tree, _dag_doc(), [1], ate=0.1, timestamp="")
    tree = add_version(tree, _dag_doc(extra_edge=True), [2], ate=0.2, timestamp="")
    assert [d.label for d in tree.dags] == ["DAG 1", "DAG 2"]
    assert tree.dags[0].hash != tree.dags[1].hash


def test_append_only_labels_and_hashes_stable():
    tree = VersionTree()
    tree = add_version(tree, _dag_doc(), [1], ate=0.1, timestamp="")
    first_hash = tree.dags[0].hash
    first_label = tree.dags[0].cohorts[0].label
    tree = add_version(tree, _dag_doc(extra_edge=True), [2], ate=0.2, timestamp="")
    tree = add_version(tree, _dag_doc(), [3], ate=0.3, timestamp="")
    assert tree.dags[0].hash == first_hash
    assert tree.dags[0].cohorts[0].label == first_label


def test_icicle_widths():
    tree = VersionTree()
    tree = add_version(tree, _dag_doc(), [1], 0.1, timestamp="")
    tree = add_version(tree, _dag_doc(), [2], 0.2, timestamp="")
    tree = add_version(tree, _dag_doc(extra_edge=True), [3], 0.3, timestamp="")
    layout = icicle_data(tree)
    widths = [child["width"] for child in layout["children"]]
    assert widths == pytest.approx([2 / 3, 1 / 3])
    assert sum(widths) == pytest.approx(1.0)
    leaf_widths = [leaf["width"] for child in layout["children"] for leaf in child["children"]]
    assert sum(leaf_widths) == pytest.approx(1.0)


def test_icicle_empty_tree():
    layout = icicle_data(VersionTree())
    assert layout["children"] == []


def test_ate_series_insertion_order_across_dags():
    tree = VersionTree()
    tree = add_version(tree, _dag_doc(), [1], 0.1, timestamp="")
    tree = add_version(tree, _dag_doc(extra_edge=True), [2], 0.2, timestamp="")
    tree = add_version(tree, _dag_doc(), [3], 0.3, timestamp="")
    series = ate_series(tree)
    assert series == [("Cohort 1.1", 0.1), ("Cohort 2.1", 0.2), ("Cohort 1.2", 0.3)]
    # labels join against the icicle leaves
    leaves = {leaf["name"] for child in icicle_data(tree)["children"] for leaf in child["children"]}
    assert {label for label, _ in series} == leaves


def test_save_load_round_trip():
    tree = VersionTree()
    tree = add_version(tree, _dag_doc(layout={"X": (1.0, 2.0)}), [1, 5, 9], 0.5,
                       notes="first pass", timestamp="2024-01-01T00:00:00+00:00")
    tree = add_version(tree, _dag_doc(extra_edge=True), [2], -0.25, timestamp="")
    doc = save_versions(tree)
    restored = load_versions(doc)
    assert restored == tree
    # including through a JSON string
    assert load_versions(json.dumps(doc)) == tree
    # empty tree round trip
    assert load_versions(save_versions(VersionTree())) == VersionTree()


def test_tampered_document_detected():
    tree = add_version(VersionTree(), _dag_doc(), [1, 2], 0.5, timestamp="")
    doc = save_versions(tree)
    tampered = json.loads(json.dumps(doc))
    tampered["dags"][0]["dag"]["links"].pop()
    with pytest.raises(HashMismatchError):
        load_versions(tampered)
    tampered = json.loads(json.dumps(doc))
    tampered["dags"][0]["cohorts"][0]["row_ids"] = [7, 8]
    with pytest.raises(HashMismatchError):
        load_versions(tampered)


def test_malformed_documents_rejected():
    with pytest.raises(SchemaError):
        load_versions({"not_dags": []})
    with pytest.raises(SchemaError):
        load_versions({"dags": [{"hash": "x"}]})
    with pytest.raises(SchemaError):
        load_versions("{bad json")


def test_random_trees_round_trip():
    import numpy as np

    rng = np.random.default_rng(12)
    for _ in range(20):
        tree = VersionTree()
        for _ in range(int(rng.integers(1, 21))):
            doc = _dag_doc(extra_edge=bool(rng.integers(0, 2)))
            ids = sorted(int(i) for i in rng.choice(1000, size=rng.integers(1, 30), replace=False))
            tree = add_version(tree, doc, ids, float(rng.normal()), timestamp="")
        assert load_versions(save_versions(tree)) == tree
