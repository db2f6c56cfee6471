"""JSON document formats for the command line.

Every input the CLI reads is a JSON document.  Complex matrices serialize
as nested arrays of [re, im] pairs (bare numbers are accepted on input and
read as reals).  Decoders carry a location string so a malformed field is
reported by its path inside the document, and unknown fields are rejected
rather than ignored.

Document shapes:

* algebra: {"blocks": [[n, w], ...]} or
  {"group_table": {"order": N, "product": [[...]], "identity": i}}
* module: {"algebra": ..., "multiplicities": [...], "reference_gram"?: matrix}
  or {"action_generators": [matrix, ...], "reference_gram"?: matrix}
* operator: a matrix, or {"matrix": ...}
* complex: {"algebra": ..., "modules": [...], "boundaries": [matrix, ...],
  "convention": "chain"|"cochain", "grams"?: [matrix|null, ...]}
* cell complex: {"generators": [...], "cells": {"0": [...], ...},
  "boundaries": {"1": [[[coeff, word], ...] row per lower cell], ...}}
* representation: {"module": ..., "generator_images": [matrix, ...] | {name: matrix},
  "side"?: "right"|"left"}
* symbol: {"rank": n, "size": m,
  "coefficients": [{"exponent": [k, ...], "matrix": ...}, ...]}
"""

from __future__ import annotations

import json
import numbers

import numpy as np

from .algebra import FiniteGroupTable, FiniteVonNeumannAlgebra, build_group_algebra
from .complexes import CHAIN, COCHAIN, HilbertianChainComplex
from .errors import ParseError, ValidationError
from .modules import (
    CommutantOperator,
    HilbertianModule,
    ModuleMorphism,
    module_from_group_action,
)
from .symbols import LaurentMatrix
from .torsion import CellComplex, GroupRepresentation

FORMAT_VERSION = 1
MAX_GENERATED_ORDER = 256


def load_document(path: str):
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None


def _expect_mapping(doc, where):
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object, got {type(doc).__name__}")
    return doc


def _check_keys(doc, where, required, optional=()):
    doc = _expect_mapping(doc, where)
    missing = [k for k in required if k not in doc]
    if missing:
        raise ParseError(f"{where}: missing fields {missing}")
    unknown = [k for k in doc if k not in required and k not in optional]
    if unknown:
        raise ParseError(f"{where}: unknown fields {unknown}")
    return doc


def _as_number(value, where):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _decode_entry(value, where) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ParseError(f"{where}: complex entries are [re, im] pairs")
        return complex(_as_number(value[0], where), _as_number(value[1], where))
    return complex(_as_number(value, where), 0.0)


def decode_matrix(doc, where="matrix") -> np.ndarray:
    if not isinstance(doc, list) or not doc:
        raise ParseError(f"{where}: expected a non-empty array of rows")
    rows = []
    width = None
    for i, row in enumerate(doc):
        if not isinstance(row, list) or not row:
            raise ParseError(f"{where}[{i}]: expected a non-empty row")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"{where}[{i}]: ragged row of length {len(row)}")
        rows.append([_decode_entry(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)])
    return np.array(rows, dtype=complex)


def encode_matrix(matrix) -> list:
    matrix = np.asarray(matrix, dtype=complex)
    return [
        [[float(v.real), float(v.imag)] for v in row] for row in matrix
    ]


def decode_algebra(doc, where="algebra") -> FiniteVonNeumannAlgebra:
    doc = _expect_mapping(doc, where)
    if "blocks" in doc:
        _check_keys(doc, where, ("blocks",))
        blocks = doc["blocks"]
        if not isinstance(blocks, list) or not blocks:
            raise ParseError(f"{where}.blocks: expected a non-empty array")
        parsed = []
        for i, pair in enumerate(blocks):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ParseError(f"{where}.blocks[{i}]: expected [n, w]")
            n = pair[0]
            if isinstance(n, bool) or not isinstance(n, numbers.Integral):
                raise ParseError(f"{where}.blocks[{i}]: block size must be an integer")
            parsed.append((int(n), _as_number(pair[1], f"{where}.blocks[{i}]")))
        return FiniteVonNeumannAlgebra(tuple(parsed))
    if "group_table" in doc:
        _check_keys(doc, where, ("group_table",))
        inner = _check_keys(
            doc["group_table"], f"{where}.group_table", ("order", "product"), ("identity",)
        )
        table = FiniteGroupTable(inner["product"], int(inner.get("identity", 0)))
        if table.order != int(inner["order"]):
            raise ParseError(
                f"{where}.group_table: order {inner['order']} does not match the table"
            )
        return build_group_algebra(table).algebra
    raise ParseError(f"{where}: expected either 'blocks' or 'group_table'")


def _generated_group_module(doc, where) -> HilbertianModule:
    generators = doc["action_generators"]
    if not isinstance(generators, list) or not generators:
        raise ParseError(f"{where}.action_generators: expected a non-empty array")
    mats = [
        decode_matrix(m, f"{where}.action_generators[{i}]")
        for i, m in enumerate(generators)
    ]
    d = mats[0].shape[0]
    elements = [np.eye(d, dtype=complex)]

    def find(m):
        for i, e in enumerate(elements):
            if np.linalg.norm(e - m, 2) <= 1e-8:
                return i
        return None

    frontier = [np.eye(d, dtype=complex)]
    while frontier:
        current = frontier.pop()
        for g in mats:
            product = current @ g
            if find(product) is None:
                if len(elements) >= MAX_GENERATED_ORDER:
                    raise ValidationError(
                        f"{where}: generated group exceeds {MAX_GENERATED_ORDER} elements"
                    )
                elements.append(product)
                frontier.append(product)
    order = len(elements)
    product = np.zeros((order, order), dtype=int)
    for a in range(order):
        for b in range(order):
            idx = find(elements[a] @ elements[b])
            if idx is None:
                raise ValidationError(f"{where}: action does not close into a group")
            product[a, b] = idx
    dec = build_group_algebra(FiniteGroupTable(product))
    gram = doc.get("reference_gram")
    if gram is not None:
        gram = decode_matrix(gram, f"{where}.reference_gram")
    return module_from_group_action(dec, elements, gram)


def decode_module(doc, where="module") -> HilbertianModule:
    doc = _expect_mapping(doc, where)
    if "action_generators" in doc:
        _check_keys(doc, where, ("action_generators",), ("reference_gram",))
        return _generated_group_module(doc, where)
    _check_keys(doc, where, ("algebra", "multiplicities"), ("reference_gram",))
    algebra = decode_algebra(doc["algebra"], f"{where}.algebra")
    mult = doc["multiplicities"]
    if not isinstance(mult, list) or not all(
        isinstance(m, numbers.Integral) and not isinstance(m, bool) for m in mult
    ):
        raise ParseError(f"{where}.multiplicities: expected an array of integers")
    gram = doc.get("reference_gram")
    if gram is not None:
        gram = decode_matrix(gram, f"{where}.reference_gram")
    return HilbertianModule(algebra, tuple(int(m) for m in mult), reference_gram=gram)


def decode_operator(doc, module, where="operator") -> CommutantOperator:
    if isinstance(doc, dict):
        _check_keys(doc, where, ("matrix",))
        doc = doc["matrix"]
        where = f"{where}.matrix"
    matrix = decode_matrix(doc, where)
    return CommutantOperator.from_matrix(module, matrix)


def decode_complex(doc, where="complex", convention=None) -> HilbertianChainComplex:
    doc = _check_keys(
        doc, where, ("algebra", "modules", "boundaries"), ("convention", "grams")
    )
    algebra = decode_algebra(doc["algebra"], f"{where}.algebra")
    if convention is None:
        convention = doc.get("convention", CHAIN)
    if convention not in (CHAIN, COCHAIN):
        raise ParseError(f"{where}.convention: expected 'chain' or 'cochain'")
    raw_modules = doc["modules"]
    if not isinstance(raw_modules, list) or not raw_modules:
        raise ParseError(f"{where}.modules: expected a non-empty array")
    modules = []
    for i, entry in enumerate(raw_modules):
        sub = f"{where}.modules[{i}]"
        if isinstance(entry, list):
            entry = {"multiplicities": entry}
        entry = _check_keys(entry, sub, ("multiplicities",), ("reference_gram",))
        mult = entry["multiplicities"]
        if not isinstance(mult, list):
            raise ParseError(f"{sub}.multiplicities: expected an array")
        gram = entry.get("reference_gram")
        if gram is not None:
            gram = decode_matrix(gram, f"{sub}.reference_gram")
        modules.append(
            HilbertianModule(algebra, tuple(int(m) for m in mult), reference_gram=gram)
        )
    raw_maps = doc["boundaries"]
    if not isinstance(raw_maps, list) or len(raw_maps) != len(modules) - 1:
        raise ParseError(
            f"{where}.boundaries: expected {len(modules) - 1} matrices"
        )
    maps = []
    for i, entry in enumerate(raw_maps):
        matrix = decode_matrix(entry, f"{where}.boundaries[{i}]")
        if convention == CHAIN:
            source, target = modules[i + 1], modules[i]
        else:
            source, target = modules[i], modules[i + 1]
        maps.append(ModuleMorphism.from_matrix(source, target, matrix))
    grams = doc.get("grams")
    if grams is not None:
        if not isinstance(grams, list) or len(grams) != len(modules):
            raise ParseError(f"{where}.grams: expected one entry per degree")
        grams = [
            None if g is None else decode_matrix(g, f"{where}.grams[{i}]")
            for i, g in enumerate(grams)
        ]
    return HilbertianChainComplex(modules, maps, convention, grams=grams)


def _decode_ring_entry(entry, where):
    if not isinstance(entry, list):
        raise ParseError(f"{where}: expected an array of [coeff, word] pairs")
    pairs = []
    for j, pair in enumerate(entry):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError(f"{where}[{j}]: expected [coeff, word]")
        coeff, word = pair
        if isinstance(coeff, str):
            try:
                coeff = int(coeff)
            except ValueError:
                raise ParseError(f"{where}[{j}]: bad coefficient {pair[0]!r}") from None
        elif isinstance(coeff, bool) or not isinstance(coeff, numbers.Integral):
            raise ParseError(f"{where}[{j}]: coefficients are integers")
        if not isinstance(word, str):
            raise ParseError(f"{where}[{j}]: words are strings")
        pairs.append((int(coeff), word))
    return pairs


def decode_cell_complex(doc, where="cell complex") -> CellComplex:
    doc = _check_keys(doc, where, ("generators", "cells", "boundaries"))
    generators = doc["generators"]
    if not isinstance(generators, list):
        raise ParseError(f"{where}.generators: expected an array")
    cells_doc = _expect_mapping(doc["cells"], f"{where}.cells")
    try:
        dims = sorted(int(k) for k in cells_doc)
    except ValueError:
        raise ParseError(f"{where}.cells: keys must be dimensions") from None
    if dims != list(range(len(dims))):
        raise ParseError(f"{where}.cells: dimensions must be contiguous from 0")
    cells = [cells_doc[str(d)] for d in dims]
    for d, labels in enumerate(cells):
        if not isinstance(labels, list):
            raise ParseError(f"{where}.cells.{d}: expected an array of labels")
    boundaries_doc = _expect_mapping(doc["boundaries"], f"{where}.boundaries")
    expected = [str(d) for d in dims[1:]]
    if sorted(boundaries_doc, key=int) != expected:
        raise ParseError(f"{where}.boundaries: expected keys {expected}")
    boundaries = []
    for d in expected:
        rows = boundaries_doc[d]
        sub = f"{where}.boundaries.{d}"
        if not isinstance(rows, list):
            raise ParseError(f"{sub}: expected an array of rows")
        matrix = []
        for r, row in enumerate(rows):
            if not isinstance(row, list):
                raise ParseError(f"{sub}[{r}]: expected an array of entries")
            matrix.append(
                [
                    _decode_ring_entry(entry, f"{sub}[{r}][{c}]")
                    for c, entry in enumerate(row)
                ]
            )
        boundaries.append(matrix)
    return CellComplex(generators, cells, boundaries)


def decode_representation(doc, generators, where="representation") -> GroupRepresentation:
    doc = _check_keys(doc, where, ("module", "generator_images"), ("side",))
    module = decode_module(doc["module"], f"{where}.module")
    side = doc.get("side", "right")
    raw = doc["generator_images"]
    generators = list(generators)
    images = {}
    if isinstance(raw, dict):
        for name, matrix in raw.items():
            if name not in generators:
                raise ParseError(f"{where}.generator_images: unknown generator {name!r}")
            images[name] = decode_matrix(matrix, f"{where}.generator_images[{name!r}]")
    elif isinstance(raw, list):
        if len(raw) != len(generators):
            raise ParseError(
                f"{where}.generator_images: need {len(generators)} images, got {len(raw)}"
            )
        for name, matrix in zip(generators, raw):
            images[name] = decode_matrix(matrix, f"{where}.generator_images[{name!r}]")
    else:
        raise ParseError(f"{where}.generator_images: expected an array or object")
    return GroupRepresentation(module, images, side)


def decode_symbol(doc, where="symbol") -> LaurentMatrix:
    doc = _check_keys(doc, where, ("rank", "size", "coefficients"))
    rank, size = doc["rank"], doc["size"]
    for name, value in (("rank", rank), ("size", size)):
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise ParseError(f"{where}.{name}: expected an integer")
    coefficients = doc["coefficients"]
    if not isinstance(coefficients, list):
        raise ParseError(f"{where}.coefficients: expected an array")
    terms = {}
    for i, entry in enumerate(coefficients):
        sub = f"{where}.coefficients[{i}]"
        entry = _check_keys(entry, sub, ("exponent", "matrix"))
        exponent = entry["exponent"]
        if isinstance(exponent, numbers.Integral) and not isinstance(exponent, bool):
            exponent = [exponent]
        if not isinstance(exponent, list) or not all(
            isinstance(k, numbers.Integral) and not isinstance(k, bool) for k in exponent
        ):
            raise ParseError(f"{sub}.exponent: expected an array of integers")
        key = tuple(int(k) for k in exponent)
        if key in terms:
            raise ParseError(f"{sub}: duplicate exponent {list(key)}")
        matrix = decode_matrix(entry["matrix"], f"{sub}.matrix")
        if matrix.shape != (int(size), int(size)):
            raise ParseError(f"{sub}.matrix: expected shape {(int(size),) * 2}")
        terms[key] = matrix
    return LaurentMatrix(int(rank), terms, shape=(int(size), int(size)))


def encode_symbol(symbol: LaurentMatrix) -> dict:
    return {
        "rank": symbol.rank,
        "size": symbol.size,
        "coefficients": [
            {"exponent": list(k), "matrix": encode_matrix(c)}
            for k, c in symbol.coefficients.items()
        ],
    }


def document_kind(doc) -> str:
    """Classify a loaded document by its fields."""
    if not isinstance(doc, dict):
        raise ParseError("document root must be an object")
    keys = set(doc)
    if {"rank", "coefficients"} <= keys:
        return "symbol"
    if "cells" in keys:
        return "cell_complex"
    if {"modules", "boundaries"} <= keys:
        return "complex"
    if "generator_images" in keys:
        return "representation"
    if "multiplicities" in keys or "action_generators" in keys:
        return "module"
    if "blocks" in keys or "group_table" in keys:
        return "algebra"
    raise ParseError(f"cannot classify a document with fields {sorted(keys)}")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, numbers.Integral):
        return int(value)
    if isinstance(value, numbers.Real):
        return float(value)
    if isinstance(value, numbers.Complex):
        return [float(value.real), float(value.imag)]
    raise ValidationError(f"cannot serialize {type(value).__name__} into a report")


def structured_report(payload: dict) -> str:
    """Deterministic machine-readable report: sorted keys, versioned."""
    body = {"format_version": FORMAT_VERSION}
    body.update(_jsonable(payload))
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def text_report(payload: dict) -> str:
    lines = []

    def walk(prefix, value):
        if isinstance(value, dict):
            for key in value:
                walk(f"{prefix}.{key}" if prefix else str(key), value[key])
        elif isinstance(value, (list, tuple)) and any(
            isinstance(v, (dict, list, tuple)) for v in value
        ):
            for i, v in enumerate(value):
                walk(f"{prefix}[{i}]", v)
        else:
            if isinstance(value, (list, tuple)):
                rendered = "[" + ", ".join(str(_jsonable(v)) for v in value) + "]"
            else:
                rendered = str(_jsonable(value))
            lines.append(f"{prefix}: {rendered}")

    walk("", payload)
    return "\n".join(lines)
