"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numbers
from typing import Iterable, Mapping

from .corpus import QueryRecord, make_record
from .text import normalize


def check_records(X: Iterable, name: str = "X") -> list[QueryRecord]:
    """Coerce ``X`` to a non-empty list of valid :class:`QueryRecord`.

    Accepts records or mappings with ``query``, ``facets`` and optional
    ``documents`` keys.
    """
    if isinstance(X, (str, bytes, Mapping)):
        raise TypeError(f"{name} must be an iterable of records, got {type(X).__name__}")
    out = []
    for i, item in enumerate(X):
        if isinstance(item, QueryRecord):
            rec = make_record(item.query, item.facets, item.documents)
        elif isinstance(item, Mapping):
            try:
                rec = make_record(item["query"], item["facets"], item.get("documents", ()))
            except KeyError as exc:
                raise ValueError(f"{name}[{i}] is missing {exc.args[0]!r}") from None
        else:
            raise TypeError(f"{name}[{i}] is a {type(item).__name__}, not a record")
        out.append(rec)
    if not out:
        raise ValueError(f"{name} is empty")
    return out


def check_queries(X: Iterable, name: str = "X") -> list[QueryRecord]:
    """Like :func:`check_records` but facets may be absent (prediction input)."""
    if isinstance(X, (str, bytes, Mapping)):
        raise TypeError(f"{name} must be an iterable of records, got {type(X).__name__}")
    out = []
    for i, item in enumerate(X):
        if isinstance(item, QueryRecord):
            out.append(item)
        elif isinstance(item, Mapping) and "query" in item:
            facets = item.get("facets") or ()
            docs = tuple(item.get("documents", ()))
            if facets:
                out.append(make_record(item["query"], facets, docs))
            else:
                out.append(QueryRecord(normalize(item["query"]), (), tuple(normalize(d) for d in docs)))
        elif isinstance(item, str):
            out.append(QueryRecord(normalize(item), ()))
        else:
            raise TypeError(f"{name}[{i}] is a {type(item).__name__}, not a record")
    return out


def check_int(value, name: str, minimum: int = 0, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an int, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_float(value, name: str, minimum: float = 0.0, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a number, got {value!r}")
    if value < minimum or (strict and value == minimum):
        raise ValueError(f"{name} must be {'>' if strict else '>='} {minimum}, got {value}")
    return float(value)
