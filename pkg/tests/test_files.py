#
#  test_files.py
#

import json

import jsonschema
import numpy as np
import pytest
import yaml

from klfactor import files

from .mocking import rng


@pytest.mark.parametrize("name", files.SCHEMA_NAMES)
def test_schemas_are_valid(name):
    jsonschema.Draft7Validator.check_schema(files.SCHEMAS[name])


def test_matrix_round_trip(tmp_path):
    x = rng(1).normal(size=(5, 5)) * 10.0 ** rng(2).integers(-8, 8, size=(5, 5))
    path = tmp_path / "x.csv"
    files.write_matrix_csv(path, x)
    assert np.array_equal(files.load_matrix_csv(path), x)


def test_complex_matrix_round_trip(tmp_path):
    x = np.array([[1 + 2j, -0.5], [3.25, 1e-20 - 7j]])
    path = tmp_path / "z.csv"
    files.write_matrix_csv(path, x)
    assert np.array_equal(files.load_matrix_csv(path), x)


def test_vectors_become_one_row(tmp_path):
    path = tmp_path / "v.csv"
    files.write_matrix_csv(path, np.array([1.0, 2.0, 3.0]))
    assert path.read_text() == "1,2,3\n"
    assert files.load_vector_csv(path).tolist() == [1.0, 2.0, 3.0]


def test_labelled_matrix(tmp_path):
    path = tmp_path / "g.csv"
    files.write_matrix_csv(path, np.eye(2), labels=["a", "b"])
    x, labels = files.load_matrix_csv(path, labels=True)
    assert labels == ["a", "b"]
    assert np.array_equal(x, np.eye(2))


def test_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,4\n5,x\n")
    with pytest.raises(files.ParseError, match="row 3, col 2"):
        files.load_matrix_csv(path)


def test_non_numeric_cell_below_labels(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,oops\n")
    with pytest.raises(files.ParseError, match="row 2, col 2"):
        files.load_matrix_csv(path, labels=True)


def test_missing_cell(tmp_path):
    path = tmp_path / "gap.csv"
    path.write_text("1,2\n3,\n")
    with pytest.raises(files.ParseError, match="missing value at row 2, col 2"):
        files.load_matrix_csv(path)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(files.ParseError, match="no rows"):
        files.load_matrix_csv(path)


def test_header_only(tmp_path):
    path = tmp_path / "header.csv"
    path.write_text("a,b\n")
    with pytest.raises(files.ParseError, match="no rows"):
        files.load_matrix_csv(path, labels=True)


def test_parse_errors_are_input_errors():
    assert issubclass(files.ParseError, files.InputError)
    assert issubclass(files.SchemaError, files.InputError)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("1.5", 1.5),
        (" -2 ", -2),
        ("1e-3", 0.001),
        ("1+2i", 1 + 2j),
        ("0.5-0.25i", 0.5 - 0.25j),
    ],
)
def test_parse_cell(text, expected):
    assert files.parse_cell(text) == expected


def test_format_cell():
    assert files.format_cell(0.1) == "0.10000000000000001"
    assert files.format_cell(1 - 2j) == "1-2i"
    assert files.parse_cell(files.format_cell(0.1 + 0.2j)) == 0.1 + 0.2j


def test_complex_array():
    assert files.complex_array([[1, "0+1i"], ["2-1i", 3]], 2).tolist() == [[1, 1j], [2 - 1j, 3]]
    assert files.complex_array([[[1, 0], [0, 1]], [[0, -1], [2, 0]]], 2).tolist() == [[1, 1j], [-1j, 2]]

    with pytest.raises(files.ParseError):
        files.complex_array([[1, "x"]], 2)


def test_load_document(tmp_path):
    path = tmp_path / "model.yaml"
    with open(path, "w") as ostream:
        yaml.dump({"omega0": 0.0, "domega": 0.5, "S": [1.0, 2.0], "seed": 3}, ostream)
    assert files.load_document(path, "stationary")["seed"] == 3

    path = tmp_path / "model.json"
    path.write_text(json.dumps({"omega0": 0.0, "domega": 0.5, "S": [1.0]}))
    with pytest.raises(files.SchemaError, match="seed"):
        files.load_document(path, "stationary")


def test_schema_error_names_the_field(tmp_path):
    path = tmp_path / "alg.json"
    path.write_text(json.dumps({"model": "function", "weights": [0.5, "a"]}))
    with pytest.raises(files.SchemaError, match="weights/1"):
        files.load_document(path, "algebra")


def test_malformed_document(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    with pytest.raises(files.ParseError):
        files.load_document(path)


def test_load_weights(tmp_path):
    path = tmp_path / "w.json"
    path.write_text('{"weights": [0.75, 0.25]}')
    assert files.load_weights(path).tolist() == [0.75, 0.25]

    path.write_text('{"weights": []}')
    with pytest.raises(files.SchemaError):
        files.load_weights(path)


def test_jsonable():
    doc = files.jsonable({"a": np.float64(0.1), "b": np.arange(3), "c": 1 + 2j, 4: (np.int64(2),)})
    assert doc == {"a": 0.1, "b": [0, 1, 2], "c": [1.0, 2.0], "4": [2]}
    assert type(doc["a"]) is float


def test_write_report_json(tmp_path):
    path = tmp_path / "r.json"
    files.write_report_json(path, {"b": 0.1, "a": [1 / 3]})
    text = path.read_text()
    assert text.endswith("}\n")
    assert text.index('"b"') < text.index('"a"')
    assert files.read_report_json(path) == {"b": 0.1, "a": [1 / 3]}


def test_split_labels():
    assert files.split_labels(["x", "", "z"], 3) == ("x", "1", "z")
    assert files.split_labels([], 2) == ("0", "1")
