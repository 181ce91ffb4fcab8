import numpy as np
import pytest

from predex.dataset import (
    BinningSpec,
    CategoricalBins,
    Dataset,
    NumericBins,
    discretize,
    load_csv,
    load_csv_text,
    parse_datetime,
    set_roles,
)
from predex.errors import ConfigError, EmptyInputError, ParseError, SchemaError


def test_load_infers_categorical_and_numeric(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("city,temp\nBoston,30\nNYC,50\n")
    ds = load_csv(path)
    assert ds.n_rows == 2
    assert ds.feature("city").kind == "categorical"
    assert ds.feature("temp").kind == "numeric"
    assert ds.feature("temp").role == "context"


def test_load_infers_datetime_as_epoch_seconds():
    ds = load_csv_text("dtime\n2004-03-02 07:40:59\n2004-03-02 23:59:59\n")
    assert ds.feature("dtime").kind == "datetime"
    col = ds.column("dtime")
    assert col[0] == parse_datetime("2004-03-02 07:40:59")
    assert float(col[0]) == int(col[0])  # integral epoch seconds


def test_ragged_row_is_parse_error_naming_row():
    with pytest.raises(ParseError) as err:
        load_csv_text("a,b\n1,2\n3\n")
    assert err.value.row == 2


def test_empty_file_and_header_only_are_empty_input(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(EmptyInputError):
        load_csv(empty)
    with pytest.raises(EmptyInputError):
        load_csv_text("a,b\n")


def test_missing_tokens_and_clause_exclusion():
    ds = load_csv_text("x,y\n1,na\n2,NULL\n3,\n4,9\n")
    assert ds.feature("y").kind == "numeric"
    assert np.isnan(ds.column("y")[:3]).all()
    assert ds.missing_mask("y").sum() == 3


def test_mixed_column_falls_back_to_categorical():
    ds = load_csv_text("x\n1\ntwo\n3\n")
    assert ds.feature("x").kind == "categorical"


def test_schema_hints_override_inference():
    ds = load_csv_text("id,v\n1,2\n2,3\n", {"id": {"kind": "categorical", "role": "context"}})
    assert ds.feature("id").kind == "categorical"
    with pytest.raises(SchemaError):
        load_csv_text("a\n1\n", {"missing": {"kind": "numeric"}})


def test_hinted_kind_failure_names_the_cell():
    with pytest.raises(ParseError) as err:
        load_csv_text("v\nabc\n", {"v": {"kind": "numeric"}})
    assert "abc" in str(err.value)


def test_set_roles_target_context_split():
    ds = load_csv_text("sales,region,weather\n10,ne,snow\n12,sw,sun\n")
    ds2 = set_roles(ds, ["sales"])
    assert ds2.feature("sales").role == "target"
    assert ds2.feature("region").role == "context"
    assert [f.name for f in ds2.target_features()] == ["sales"]
    ds3 = set_roles(ds2, [])
    assert not ds3.target_features()
    with pytest.raises(SchemaError):
        set_roles(ds, ["missing_col"])


def test_schema_inference_is_deterministic(tmp_path):
    text = "a,b,c\n1,x,2004-01-01\n2,y,2004-01-02\n"
    one = load_csv_text(text)
    two = load_csv_text(text)
    assert one.schema == two.schema


def test_discretize_equal_width_twenty_bins():
    ds = Dataset.from_columns(
        {"t": np.linspace(0, 100, 101)}, {"t": "numeric"}
    )
    table = discretize(ds, BinningSpec(bin_count=20))["t"]
    assert isinstance(table, NumericBins)
    assert len(table.edges) == 21
    widths = np.diff(table.edges)
    assert np.allclose(widths, 5.0)


def test_discretize_categorical_one_bin_per_value(t1):
    ds, _ = t1
    table = discretize(ds)["city"]
    assert isinstance(table, CategoricalBins)
    assert table.values == ("Boston", "Chicago", "NYC")


def test_discretize_constant_column_degenerate_bin():
    ds = Dataset.from_columns({"t": [122.153] * 5}, {"t": "numeric"})
    table = discretize(ds)["t"]
    assert table.edges == (122.153, 122.153)
    assert table.degenerate


def test_discretize_rejects_bad_bin_count(t1):
    ds, _ = t1
    with pytest.raises(ConfigError):
        discretize(ds, BinningSpec(bin_count=0))
    with pytest.raises(ConfigError):
        discretize(ds, BinningSpec(overrides={"temp": -1}))


def test_binning_partitions_observed_values():
    rng = np.random.default_rng(3)
    values = rng.uniform(-5, 17, size=500)
    ds = Dataset.from_columns({"v": values}, {"v": "numeric"})
    table = discretize(ds, BinningSpec(bin_count=7))["v"]
    col = ds.column("v")
    membership = np.zeros(len(col), dtype=int)
    for lo, hi, last in table.intervals():
        in_bin = (col >= lo) & ((col <= hi) if last else (col < hi))
        membership += in_bin
    assert (membership == 1).all()  # every value in exactly one bin


def test_per_feature_override():
    ds = Dataset.from_columns(
        {"a": np.linspace(0, 1, 50), "b": np.linspace(0, 1, 50)},
        {"a": "numeric", "b": "numeric"},
    )
    tables = discretize(ds, BinningSpec(bin_count=4, overrides={"b": 10}))
    assert len(tables["a"].edges) == 5
    assert len(tables["b"].edges) == 11


def test_drop_feature():
    ds = load_csv_text("a,b\n1,2\n3,4\n")
    ds2 = ds.drop_feature("b")
    assert ds2.feature_names == ("a",)
    with pytest.raises(SchemaError):
        ds.column("nope")
