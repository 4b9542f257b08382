import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fedfeat.dataset import (
    DISCRETE,
    Column,
    Table,
    bundled_datasets,
    kfold_indices,
    load_bundled,
    load_partition,
    load_table,
    search_space_size,
    vertical_split,
)
from fedfeat.errors import ConfigError, DataError


def five_feature_table():
    cols = tuple(Column(n, "numeric", np.arange(4.0) + i) for i, n in enumerate("abcde"))
    return Table("five", cols, np.array([0, 1, 0, 1]), 2)


def test_load_three_rows(write_csv):
    t = load_table(write_csv("a,b,label\n1,2,0\n3,4,1\n5,6,0\n"))
    assert t.rows == 3
    assert t.numeric_names == ["a", "b"]
    assert t.column("a").values.dtype == np.float64


def test_text_column_is_discrete(write_csv):
    t = load_table(write_csv('a,colour,label\n1,red,0\n2,blue,1\n3,"red,blue",0\n'))
    assert t.column("colour").kind == DISCRETE
    assert t.numeric_names == ["a"]


def test_labels_remapped_dense(write_csv):
    t = load_table(write_csv("a,label\n1,5\n2,9\n3,5\n"))
    assert t.label.tolist() == [0, 1, 0]
    assert t.n_classes == 2


def test_numeric_labels_sort_numerically(write_csv):
    t = load_table(write_csv("a,label\n1,10\n2,9\n3,10\n"))
    assert t.label.tolist() == [1, 0, 1]


@pytest.mark.parametrize(
    "text",
    [
        "a,b\n1,2\n3,4\n",  # no label column
        "a,label\n",  # empty
        "a,label\n1,0\n2,0\n",  # single class
        "a,label\n1,0\n,1\n",  # numeric column with a hole
    ],
)
def test_load_errors(write_csv, text):
    with pytest.raises(DataError):
        load_table(write_csv(text))


def test_custom_label_column(write_csv):
    t = load_table(write_csv("y,a\nx,1\nz,2\n"), label_column="y")
    assert t.numeric_names == ["a"] and t.class_names == ("x", "z")


def test_vertical_split_two_parties():
    views = vertical_split(five_feature_table(), {"alice": ["a", "b"], "bob": ["c", "d", "e"]})
    assert [len(v.features) for v in views] == [2, 3]
    assert all(np.array_equal(v.label, views[0].label) for v in views)


def test_vertical_split_sequence_and_empty_party():
    views = vertical_split(five_feature_table(), [["a"], []])
    assert [v.name for v in views] == ["p0", "p1"]
    assert views[1].features == ()


def test_vertical_split_errors(write_csv):
    t = five_feature_table()
    with pytest.raises(ConfigError):
        vertical_split(t, [["a", "b"], ["b"]])
    with pytest.raises(DataError):
        vertical_split(t, [["zzz"]])
    d = load_table(write_csv("a,c,label\n1,x,0\n2,y,1\n"))
    with pytest.raises(ConfigError):
        vertical_split(d, [["a"], ["c"]])


def test_vertical_split_preserves_values():
    t, part = load_bundled("wine")
    views = vertical_split(t, part)
    for v in views:
        for f in v.features:
            assert f.values.tobytes() == t.column(f.name).values.tobytes()
    names = sorted(f.name for v in views for f in v.features)
    assert names == sorted(t.numeric_names)


@pytest.mark.parametrize("m,b,expected", [([2, 3], 4, 24), ([5], 3, 0), ([1, 1], 1, 1)])
def test_search_space_examples(m, b, expected):
    assert search_space_size(m, b) == expected


def brute_force_space(m, b):
    owners = [p for p, n in enumerate(m) for _ in range(n)]
    pairs = sum(1 for i, j in itertools.combinations(range(len(owners)), 2) if owners[i] != owners[j])
    return pairs * b


@given(st.lists(st.integers(0, 6), max_size=4), st.integers(0, 5))
def test_search_space_matches_enumeration(m, b):
    assert search_space_size(m, b) == brute_force_space(m, b)


def test_kfold_examples():
    loo = kfold_indices(10, 10, 0)
    assert [len(te) for _, te in loo] == [1] * 10
    assert sorted(len(te) for _, te in kfold_indices(10, 3, 0)) == [3, 3, 4]
    a, b = kfold_indices(37, 5, 9), kfold_indices(37, 5, 9)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))


def test_kfold_errors():
    with pytest.raises(DataError):
        kfold_indices(3, 5, 0)
    with pytest.raises(ConfigError):
        kfold_indices(3, 1, 0)


@given(st.integers(2, 60), st.integers(2, 10), st.integers(0, 2**31))
def test_kfold_partitions(rows, k, seed):
    if rows < k:
        return
    folds = kfold_indices(rows, k, seed)
    tests = np.concatenate([te for _, te in folds])
    assert sorted(tests.tolist()) == list(range(rows))
    sizes = [len(te) for _, te in folds]
    assert max(sizes) - min(sizes) <= 1
    for tr, te in folds:
        assert set(tr.tolist()).isdisjoint(te.tolist()) and len(tr) + len(te) == rows


def test_bundled_datasets_load():
    assert set(bundled_datasets()) >= {"iris", "wine", "breast_cancer"}
    for name in bundled_datasets():
        t, part = load_bundled(name)
        assert len(vertical_split(t, part)) >= 2


def test_load_partition_rejects_bad_doc(tmp_path):
    p = tmp_path / "p.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_partition(p)


def test_table_is_immutable():
    t = five_feature_table()
    with pytest.raises(ValueError):
        t.column("a").values[0] = 9.0
