"""Function DSL files (JSON or TOML).

Document shape::

    {
      "name": "ex32",                      # optional
      "dim": 1,
      "box": [[-4, 4]],
      "pieces": [
        {"guard": ["x1 < 0"], "body": "1 + x1^4"},
        {"guard": ["x1 >= 0"], "body": "x1^2"}
      ],
      "flags": {"claims_semialgebraic": true, "claims_lsc": true}
    }

Guards are lists of polynomial relations ``lhs REL rhs`` with REL one of
``< <= > >= =``; an empty guard list means "everywhere in the box". Bodies use
the expression grammar of :mod:`subreglab.expr`. Unknown keys, unknown
function names and non-polynomial guards are rejected with a
:class:`ParseError` that carries the line and column in the source file.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ParseError
from .expr import parse_expr, parse_relation
from .piecewise import GuardAtom, Piece, PiecewiseFn

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as _toml

TOP_KEYS = {"name", "dim", "box", "pieces", "flags", "meta"}
PIECE_KEYS = {"guard", "body"}
FLAG_KEYS = {"claims_semialgebraic", "claims_lsc"}


def _locate(source: str | None, fragment: str):
    """1-based (line, column) of the first character of ``fragment`` in ``source``."""
    if not source:
        return None, None
    for needle in (json.dumps(fragment)[1:-1], fragment):
        pos = source.find(needle)
        if pos >= 0:
            line = source.count("\n", 0, pos) + 1
            col = pos - (source.rfind("\n", 0, pos) + 1) + 1
            return line, col
    return None, None


def _reraise(err: ParseError, source: str | None, fragment: str):
    line, col = _locate(source, fragment)
    if line is None:
        raise err
    inner = err.column or 1
    msg = str(err).split(" (line")[0]
    raise ParseError(msg, line, col + inner - 1, fragment) from None


def from_dict(doc: dict, source: str | None = None) -> PiecewiseFn:
    """Build a :class:`PiecewiseFn` from a parsed DSL document."""
    if not isinstance(doc, dict):
        raise ParseError("DSL document must be an object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        line, col = _locate(source, f'"{key}"')
        raise ParseError(f"unknown key {key!r}", line, col)
    try:
        dim = int(doc["dim"])
        box = tuple((float(lo), float(hi)) for lo, hi in doc["box"])
        raw_pieces = doc["pieces"]
    except KeyError as exc:
        raise ParseError(f"missing required key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed dim/box: {exc}") from None
    flags = doc.get("flags", {}) or {}
    bad_flags = set(flags) - FLAG_KEYS
    if bad_flags:
        raise ParseError(f"unknown flag {sorted(bad_flags)[0]!r}")
    pieces = []
    for k, raw in enumerate(raw_pieces):
        if not isinstance(raw, dict) or set(raw) - PIECE_KEYS or "body" not in raw:
            raise ParseError(f"piece {k} must be an object with 'guard' and 'body'")
        guard = raw.get("guard", [])
        if isinstance(guard, str):
            guard = [guard]
        atoms = []
        for text in guard:
            try:
                poly, rel = parse_relation(text, dim)
            except ParseError as err:
                _reraise(err, source, text)
            if not poly.is_polynomial():
                line, col = _locate(source, text)
                raise ParseError(f"guard {text!r} is not polynomial", line, col)
            atoms.append(GuardAtom(poly, rel, text))
        try:
            body = parse_expr(raw["body"], dim)
        except ParseError as err:
            _reraise(err, source, raw["body"])
        pieces.append(Piece(tuple(atoms), body))
    return PiecewiseFn(
        dim=dim,
        pieces=tuple(pieces),
        box=box,
        claims_semialgebraic=bool(flags.get("claims_semialgebraic", False)),
        claims_lsc=bool(flags.get("claims_lsc", False)),
        name=str(doc.get("name", "")),
        meta=dict(doc.get("meta", {}) or {}),
    )


def loads(text: str, fmt: str = "json") -> PiecewiseFn:
    if fmt == "toml":
        try:
            doc = _toml.loads(text)
        except _toml.TOMLDecodeError as exc:
            raise ParseError(f"invalid TOML: {exc}") from None
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    return from_dict(doc, text)


def load(path) -> PiecewiseFn:
    """Read a ``.json`` or ``.toml`` DSL file."""
    path = Path(path)
    fmt = "toml" if path.suffix.lower() == ".toml" else "json"
    fn = loads(path.read_text(), fmt)
    if not fn.name:
        object.__setattr__(fn, "name", path.stem)
    return fn


def to_dict(f: PiecewiseFn) -> dict:
    """Serialize to a DSL document; bodies are printed fully parenthesized."""
    doc = {
        "name": f.name,
        "dim": f.dim,
        "box": [[lo, hi] for lo, hi in f.box],
        "pieces": [
            {"guard": [a.to_dsl() for a in p.guard], "body": p.body.to_dsl()}
            for p in f.pieces
        ],
        "flags": {"claims_semialgebraic": f.claims_semialgebraic,
                  "claims_lsc": f.claims_lsc},
    }
    if f.meta:
        doc["meta"] = f.meta
    return doc


def dumps(f: PiecewiseFn) -> str:
    return json.dumps(to_dict(f), indent=2)


def dump(f: PiecewiseFn, path) -> None:
    Path(path).write_text(dumps(f) + "\n")
