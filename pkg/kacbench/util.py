"""General utility functions."""

import json
import math
import sys
from datetime import datetime
from enum import Enum, IntEnum
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Union

from jsonschema import Draft7Validator
from jsonschema.exceptions import best_match
from pydantic import BaseModel

from .log import log

JSON_v = Union[None, bool, int, float, str]
"""JSON primitive values."""

UnsafeJSON = Union[JSON_v, List[JSON_v], Mapping[str, Any]]
"""Superficial JSON type (not recursive!) to have at least some annotations."""

ExtRational = Union[Fraction, float]
"""A value in [0, +inf]: a Fraction, or the float `math.inf` (never any other float)."""


class ExitCode(IntEnum):
    """Exit status of the command line runner."""

    PASS = 0
    FAIL = 1
    USAGE = 2
    ABSTAIN = 3
    INTERNAL = 4
    """An internal invariant failed (a bug, or inputs corrupted behind validation)."""


def critical_exit(msg: str, code: ExitCode = ExitCode.USAGE) -> None:
    """
    Show critical error message and terminate application.

    Used for misconfiguration errors (settings or experiment files) and for
    failed internal invariants.
    """
    log.critical(msg)
    sys.exit(int(code))


################################################################
# exact numbers


def parse_rational(value: Any) -> Fraction:
    """
    Parse an exact rational from an int, a Fraction or a string like '3/7' or '0.25'.

    Floats are refused, because they are almost never the number the user meant.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not an exact rational: '{value}' ({e})")
    raise TypeError(f"expected int or string for an exact rational, got {value!r}")


def parse_ext_rational(value: Any) -> ExtRational:
    """Like `parse_rational`, but also accepts 'inf' (and `math.inf`) for +infinity."""
    if isinstance(value, float) and value == math.inf:
        return math.inf
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return parse_rational(value)


def frac_str(value: ExtRational) -> str:
    """Render an exact value as 'numerator/denominator' (or 'inf')."""
    if isinstance(value, float):
        if value == math.inf:
            return "inf"
        raise ValueError(f"inexact value {value} where an exact one is required")
    return f"{value.numerator}/{value.denominator}"


def ext_sum(values: Iterable[ExtRational]) -> ExtRational:
    """Sum of non-negative extended rationals (exact, +inf absorbs)."""
    total = Fraction(0)
    for v in values:
        if v == math.inf:
            return math.inf
        total += v
    return total


def ext_mul(mass: Fraction, value: ExtRational) -> ExtRational:
    """Product of a mass and an extended value with the measure-theory rule 0 * inf = 0."""
    if value == math.inf:
        return Fraction(0) if mass == 0 else math.inf
    return mass * value


class Rational(Fraction):
    """Pydantic field type for exact rationals (parsed with `parse_rational`)."""

    @classmethod
    def __get_validators__(cls):
        yield parse_rational

    @classmethod
    def __modify_schema__(cls, field_schema):
        field_schema.update(type="string", examples=["1/5", "0.25", "3"])


class ExtendedRational(Fraction):
    """Pydantic field type for values in [0, +inf] (parsed with `parse_ext_rational`)."""

    @classmethod
    def __get_validators__(cls):
        yield parse_ext_rational

    @classmethod
    def __modify_schema__(cls, field_schema):
        field_schema.update(type="string", examples=["1/5", "inf"])


class JsonValue:
    """Mixin for domain values that know their own compact JSON form."""

    def __json__(self) -> UnsafeJSON:
        raise NotImplementedError


class Record(BaseModel):
    """Base class of all serializable reports (exact rationals as 'n/d' strings)."""

    class Config:
        """Domain values (Fractions, group elements) are stored as they are."""

        arbitrary_types_allowed = True

    def jsonable(self) -> UnsafeJSON:
        """Return the record as plain JSON data (see `to_jsonable`)."""
        return to_jsonable(self.dict())

    def json(self, **kwargs) -> str:  # type: ignore[override]
        """Serialize deterministically (field order, sorted sets)."""
        return json.dumps(self.jsonable(), **kwargs)


def to_jsonable(obj: Any) -> UnsafeJSON:
    """
    Convert nested report data into plain JSON values.

    Fractions become 'n/d' strings, +inf becomes 'inf', NaN becomes null,
    sets become sorted lists and domain values use their `__json__` form.
    """
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.dict())
    if isinstance(obj, JsonValue):
        return to_jsonable(obj.__json__())
    if isinstance(obj, Fraction):
        return frac_str(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, datetime):
        return obj.isoformat()
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return [to_jsonable(v) for v in _sorted(list(obj))]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sorted(values: List[Any]) -> List[Any]:
    try:
        return sorted(values)
    except TypeError:  # mixed types
        return sorted(values, key=lambda v: json.dumps(to_jsonable(v), sort_keys=True))


################################################################
# files


def save_json(obj: BaseModel, filepath: Path):
    """Store a pydantic model serialized to JSON into a file."""
    with open(filepath, "w") as file:
        file.write(obj.json(indent=2))
        file.write("\n")
        file.flush()


def load_json(filename: Union[Path, str]) -> UnsafeJSON:
    """Load JSON from a file. On failure, terminate program (fatal error)."""
    try:
        with open(filename, "r") as file:
            return json.load(file)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        critical_exit(f"Cannot load {filename}: {str(e)}")
    return None  # make mypy happy


def validate_json(instance: UnsafeJSON, schema: UnsafeJSON) -> Optional[str]:
    """
    Validate JSON against JSON Schema, on success return None, otherwise the error.

    The error message starts with the dotted location of the offending field.
    """
    validator = Draft7Validator(schema)
    error = best_match(validator.iter_errors(instance))
    if error is None:
        return None
    location = ".".join(map(str, error.absolute_path)) or "<root>"
    return f"{location}: {error.message}"
