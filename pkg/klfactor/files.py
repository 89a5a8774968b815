#
#  files.py
#
#  Matrices on CSV, input documents on JSON/YAML, reports on JSON.
#

import json
from os.path import dirname, join
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import jsonschema
import numpy as np
import pandas as pd
import structlog
import yaml

from .utils import InputError

log = structlog.get_logger()

SchemaName = Literal["algebra", "weights", "stationary", "galerkin"]

SCHEMA_NAMES: List[SchemaName] = ["algebra", "weights", "stationary", "galerkin"]

SCHEMAS: Dict[str, Dict[str, Any]] = {
    name: json.load(open(join(dirname(__file__), "schemas", f"{name}.json"))) for name in SCHEMA_NAMES
}

# enough significant digits for any float64 to survive a text round trip
FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def parse_cell(text: str) -> complex:
    """Parse a decimal real or a complex entry written as "re+imi"."""
    text = text.strip()
    try:
        return complex(float(text))
    except ValueError:
        pass

    if text.endswith("i"):
        return complex(text[:-1] + "j")

    raise ValueError(f"not a number: {text!r}")


def format_cell(z: complex) -> str:
    if z.imag == 0:
        return FLOAT_FORMAT % z.real
    return f"{FLOAT_FORMAT % z.real}{'+' if z.imag >= 0 else '-'}{FLOAT_FORMAT % abs(z.imag)}i"


def _as_real_if_exact(x: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(x) and np.all(x.imag == 0):
        return x.real.copy()
    return x


def load_matrix_csv(path: PathLike, labels: bool = False) -> Any:
    """Load a numeric matrix. With `labels`, the first row holds column labels
    and a `(matrix, labels)` pair is returned.

    Entries that are all real come back as a float array, otherwise complex.
    Errors cite 1-based file rows and columns.
    """
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path}: no rows")
    except pd.errors.ParserError as e:
        raise ParseError(f"{path}: {e}")

    column_labels: List[str] = []
    first_row = 1
    if labels:
        if len(frame) == 0:
            raise ParseError(f"{path}: no rows")
        column_labels = [str(v).strip() for v in frame.iloc[0]]
        frame = frame.iloc[1:]
        first_row = 2

    if len(frame) == 0:
        raise ParseError(f"{path}: no rows")

    values = np.empty(frame.shape, dtype=complex)
    for r, row in enumerate(frame.itertuples(index=False)):
        for c, cell in enumerate(row):
            if not isinstance(cell, str) or cell.strip() == "":
                raise ParseError(f"{path}: missing value at row {r + first_row}, col {c + 1}")
            try:
                values[r, c] = parse_cell(str(cell))
            except ValueError:
                raise ParseError(f"{path}: non-numeric value {cell!r} at row {r + first_row}, col {c + 1}")

    matrix = _as_real_if_exact(values)
    log.debug("csv.load", path=str(path), shape=matrix.shape)

    if labels:
        return matrix, column_labels
    return matrix


def write_matrix_csv(path: PathLike, x: np.ndarray, labels: Optional[List[str]] = None) -> None:
    """Write `x` (1-D arrays become a single row) with 17 significant digits."""
    x = np.asarray(x)
    if x.ndim == 1:
        x = x.reshape(1, -1)

    header: Union[bool, List[str]] = list(labels) if labels is not None else False

    if np.iscomplexobj(x) and np.any(x.imag != 0):
        frame = pd.DataFrame([[format_cell(complex(z)) for z in row] for row in x])
        frame.to_csv(path, header=header, index=False)
    else:
        pd.DataFrame(np.real(x)).to_csv(path, header=header, index=False, float_format=FLOAT_FORMAT)


def write_frame_csv(path: PathLike, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def load_vector_csv(path: PathLike) -> np.ndarray:
    """A single row or a single column of reals, e.g. a time grid."""
    x = load_matrix_csv(path)
    if x.ndim != 2 or min(x.shape) != 1:
        raise ParseError(f"{path}: expected a single row or column, got shape {x.shape}")
    if np.iscomplexobj(x):
        raise ParseError(f"{path}: expected real values")
    return x.ravel()


def complex_array(obj: Any, ndim: int) -> np.ndarray:
    """Numbers, "re+imi" strings or [re, im] pairs, nested `ndim` deep."""
    try:
        arr = np.array(obj, dtype=object)
    except ValueError as e:
        raise ParseError(f"ragged array: {e}")

    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0].astype(float) + 1j * arr[..., 1].astype(float)

    if arr.ndim != ndim:
        raise ParseError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")

    out = np.empty(arr.shape, dtype=complex)
    for ix, v in np.ndenumerate(arr):
        try:
            out[ix] = parse_cell(v) if isinstance(v, str) else complex(v)
        except (TypeError, ValueError):
            raise ParseError(f"non-numeric entry {v!r} at index {ix}")
    return out


def load_document(path: PathLike, schema: Optional[SchemaName] = None) -> Dict[str, Any]:
    """Load a JSON or YAML document, validating it against one of our schemas."""
    path = Path(path)
    try:
        with open(path) as istream:
            if path.suffix in (".yml", ".yaml"):
                doc = yaml.safe_load(istream)
            else:
                doc = json.load(istream)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ParseError(f"{path}: {e}")

    if schema is not None:
        error = jsonschema.exceptions.best_match(jsonschema.Draft7Validator(SCHEMAS[schema]).iter_errors(doc))
        if error is not None:
            where = "/".join(str(p) for p in error.absolute_path) or "(root)"
            raise SchemaError(f"{path}: {where}: {error.message}")

    return doc


def load_weights(path: PathLike) -> np.ndarray:
    return np.asarray(load_document(path, "weights")["weights"], dtype=float)


def jsonable(obj: Any) -> Any:
    """Convert numpy values and complex numbers into plain JSON types.

    Complex numbers become [re, im]; floats keep Python's shortest repr, which
    round-trips exactly.
    """
    if hasattr(obj, "to_dict") and not isinstance(obj, (pd.DataFrame, pd.Series)):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()] if obj.ndim else jsonable(obj.item())
    if isinstance(obj, np.generic):
        return jsonable(obj.item())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_report_json(path: PathLike, report: Any) -> None:
    with open(path, "w") as ostream:
        json.dump(jsonable(report), ostream, indent=2)
        ostream.write("\n")
    log.info("report.write", path=str(path))


def read_report_json(path: PathLike) -> Dict[str, Any]:
    with open(path) as istream:
        return json.load(istream)


def split_labels(header: List[str], count: int) -> Tuple[str, ...]:
    """Labels for `count` columns; blank or missing entries fall back to their index."""
    labels = [h if h else str(i) for i, h in enumerate(header)]
    return tuple(labels + [str(i) for i in range(len(labels), count)])[:count]


class ParseError(InputError):
    pass


class SchemaError(InputError):
    pass
