import numpy as np
import pytest

from causalab.dataset import Column, ColumnKind, Dataset


def make_dataset(row_ids=None, **columns) -> Dataset:
    """Build a Dataset from keyword arrays; kind is inferred from the values
    unless given as a (kind, values) tuple."""
    cols = []
    for name, value in columns.items():
        if isinstance(value, tuple) and isinstance(value[0], (ColumnKind, str)):
            kind, values = ColumnKind(value[0]), np.asarray(value[1])
        else:
            values = np.asarray(value)
            if values.dtype.kind in "OU":
                kind = ColumnKind.CATEGORICAL
                values = values.astype(object)
            elif set(np.unique(values)) <= {0.0, 1.0}:
                kind = ColumnKind.BINARY
            else:
                kind = ColumnKind.CONTINUOUS
        cols.append(Column(name, kind, values))
    return Dataset(tuple(cols), row_ids)


def confounded_study(n: int, seed: int, tau: float = 2.0) -> Dataset:
    """Synthetic confounded study: the confounder shifts the treatment
    log-odds by 1.0 and the outcome by 2.0; treatment adds tau."""
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n)
    t = (rng.random(n) < 1.0 / (1.0 + np.exp(-c))).astype(float)
    y = 2.0 * c + tau * t + rng.normal(size=n)
    return make_dataset(
        c=(ColumnKind.CONTINUOUS, c),
        t=(ColumnKind.BINARY, t),
        y=(ColumnKind.CONTINUOUS, y),
    )


@pytest.fixture
def student_csv(tmp_path):
    from causalab import demo

    path = tmp_path / "students.csv"
    demo.write_student_study(path)
    return path
