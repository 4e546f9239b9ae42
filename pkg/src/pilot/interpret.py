"""Feature importance, text rendering, and model (de)serialization.

The model file is JSON with a ``schema_version`` field; floats are written
in Python's shortest round-trip decimal form, so a saved and reloaded tree
predicts bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .build import PilotTree, TreeNode, iter_nodes
from .data import ColumnKind, ColumnMeta, Hyperparams
from .errors import SchemaError
from .kinds import ModelKind
from .scan import NodeFit

__all__ = [
    "SCHEMA_VERSION",
    "ImportanceVector",
    "feature_importance",
    "render_text",
    "save_model",
    "load_model",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ImportanceVector:
    """Per-feature weights, nonnegative and summing to 1 (or all zero)."""

    names: tuple[str, ...]
    weights: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return {n: float(w) for n, w in zip(self.names, self.weights)}


def feature_importance(tree: PilotTree) -> ImportanceVector:
    """Impurity-gain importance.

    Each node using predictor ``j`` contributes its node weight (cases over
    training size) times its per-case gain; a tree that is a single constant
    leaf yields the all-zero vector.
    """
    acc = np.zeros(len(tree.column_meta))
    for node in iter_nodes(tree.root):
        pred = node.fit.predictor
        if pred is not None:
            acc[pred] += node.weight * node.fit.gain
    total = acc.sum()
    if total > 0.0:
        acc = acc / total
    names = tuple(m.name for m in tree.column_meta)
    return ImportanceVector(names=names, weights=acc)


def _coef_text(coef: tuple[float, float]) -> str:
    return f"({coef[0]:.6g}, {coef[1]:.6g})"


def render_text(tree: PilotTree) -> str:
    """One line per node, children indented two spaces per level."""
    lines: list[str] = []

    def walk(node: TreeNode, indent: int) -> None:
        fit = node.fit
        pad = "  " * indent
        if fit.kind is ModelKind.CON:
            lines.append(f"{pad}CON value={fit.coef_left[0]:.6g} n={node.n}")
        elif fit.kind is ModelKind.LIN:
            name = tree.column_meta[fit.predictor].name
            lines.append(
                f"{pad}LIN {name} coef={_coef_text(fit.coef_left)} n={node.n}")
        elif fit.pivot_levels is not None:
            meta = tree.column_meta[fit.predictor]
            levels = ",".join(meta.levels[i] for i in fit.pivot_levels)
            lines.append(
                f"{pad}PCON {meta.name} in {{{levels}}} "
                f"left={_coef_text(fit.coef_left)} "
                f"right={_coef_text(fit.coef_right)} n={node.n}")
        else:
            name = tree.column_meta[fit.predictor].name
            lines.append(
                f"{pad}{fit.kind.name} {name} <= {fit.pivot:.6g} "
                f"left={_coef_text(fit.coef_left)} "
                f"right={_coef_text(fit.coef_right)} n={node.n}")
        for child in node.children:
            walk(child, indent + 1)

    walk(tree.root, 0)
    return "\n".join(lines)


# -- serialization ------------------------------------------------------------

_NODE_KEYS = {"kind", "predictor", "pivot", "pivot_set", "coef_l", "coef_r",
              "range", "n", "gain", "children"}
_TOP_KEYS = {"schema_version", "hyperparams", "offset", "bound_B", "columns",
             "root"}
_HP_KEYS = {"max_depth", "min_fit", "min_leaf", "allowed_kinds",
            "min_unique_for_lin_blin", "min_unique_per_child_for_plin",
            "rss_floor_scale", "max_lin_chain", "min_rel_gain_lin"}


def _node_to_dict(node: TreeNode) -> dict:
    fit = node.fit
    out: dict = {
        "kind": fit.kind.value,
        "predictor": fit.predictor,
        "coef_l": list(fit.coef_left),
        "coef_r": None if fit.coef_right is None else list(fit.coef_right),
        "range": None if fit.x_range is None else list(fit.x_range),
        "n": node.n,
        "gain": fit.gain,
        "children": [_node_to_dict(c) for c in node.children],
    }
    if fit.pivot is not None:
        out["pivot"] = fit.pivot
    if fit.pivot_levels is not None:
        out["pivot_set"] = list(fit.pivot_levels)
    return out


def save_model(tree: PilotTree, path: str) -> None:
    """Write the fitted tree as JSON. Floats survive a round trip exactly."""
    hp = tree.hyperparams
    doc = {
        "schema_version": SCHEMA_VERSION,
        "hyperparams": {
            "max_depth": hp.max_depth,
            "min_fit": hp.min_fit,
            "min_leaf": hp.min_leaf,
            "allowed_kinds": sorted(k.value for k in hp.allowed_kinds),
            "min_unique_for_lin_blin": hp.min_unique_for_lin_blin,
            "min_unique_per_child_for_plin": hp.min_unique_per_child_for_plin,
            "rss_floor_scale": hp.rss_floor_scale,
            "max_lin_chain": hp.max_lin_chain,
            "min_rel_gain_lin": hp.min_rel_gain_lin,
        },
        "offset": tree.offset,
        "bound_B": tree.bound_B,
        "columns": [
            {"name": m.name, "kind": m.kind.value,
             "levels": None if m.levels is None else list(m.levels)}
            for m in tree.column_meta
        ],
        "root": _node_to_dict(tree.root),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, allow_nan=False, indent=1)
        fh.write("\n")


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise SchemaError(f"model file invalid at {path}: {msg}")


def _check_keys(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    _expect(isinstance(obj, dict), path, "expected an object")
    unknown = set(obj) - allowed
    _expect(not unknown, path, f"unknown keys {sorted(unknown)!r}")
    missing = required - set(obj)
    _expect(not missing, path, f"missing keys {sorted(missing)!r}")


def _as_float(v, path: str) -> float:
    _expect(isinstance(v, (int, float)) and not isinstance(v, bool), path,
            "expected a number")
    return float(v)


def _as_coef(v, path: str) -> tuple[float, float]:
    _expect(isinstance(v, list) and len(v) == 2, path,
            "expected [intercept, slope]")
    return (_as_float(v[0], path), _as_float(v[1], path))


def _node_from_dict(obj: dict, meta: tuple[ColumnMeta, ...], n_train: int,
                    depth: int, counter: list[int], path: str) -> TreeNode:
    required = _NODE_KEYS - {"pivot", "pivot_set"}
    _check_keys(obj, _NODE_KEYS, required, path)
    try:
        kind = ModelKind(obj["kind"])
    except ValueError:
        raise SchemaError(f"model file invalid at {path}.kind: "
                          f"unknown kind {obj['kind']!r}") from None
    predictor = obj["predictor"]
    if predictor is not None:
        _expect(isinstance(predictor, int) and 0 <= predictor < len(meta),
                f"{path}.predictor", "column index out of range")
    n = obj["n"]
    _expect(isinstance(n, int) and n >= 1, f"{path}.n", "expected a count")
    pivot = obj.get("pivot")
    pivot_set = obj.get("pivot_set")
    if pivot is not None:
        pivot = _as_float(pivot, f"{path}.pivot")
    if pivot_set is not None:
        _expect(isinstance(pivot_set, list) and
                all(isinstance(v, int) for v in pivot_set),
                f"{path}.pivot_set", "expected a list of level ids")
        pivot_set = tuple(pivot_set)
    coef_l = _as_coef(obj["coef_l"], f"{path}.coef_l")
    coef_r = None if obj["coef_r"] is None else _as_coef(obj["coef_r"],
                                                         f"{path}.coef_r")
    rng = obj["range"]
    if rng is not None:
        _expect(isinstance(rng, list) and len(rng) == 2, f"{path}.range",
                "expected [min, max]")
        rng = (_as_float(rng[0], f"{path}.range"),
               _as_float(rng[1], f"{path}.range"))
    children_raw = obj["children"]
    _expect(isinstance(children_raw, list), f"{path}.children",
            "expected a list")
    expected_children = {ModelKind.CON: 0, ModelKind.LIN: 1}.get(kind, 2)
    _expect(len(children_raw) == expected_children, f"{path}.children",
            f"{kind.value} node needs {expected_children} children")

    node_id = counter[0]
    counter[0] += 1
    child_depth = depth + (1 if kind.is_split else 0)
    children = tuple(
        _node_from_dict(c, meta, n_train, child_depth, counter,
                        f"{path}.children[{i}]")
        for i, c in enumerate(children_raw)
    )
    left_rows = children[0].n if kind.is_split else n
    right_rows = children[1].n if kind.is_split else 0
    fit = NodeFit(
        kind=kind,
        predictor=predictor,
        pivot=pivot,
        pivot_levels=pivot_set,
        coef_left=coef_l,
        coef_right=coef_r,
        bic=float("nan"),
        rss_after=float("nan"),
        rss_before=float("nan"),
        gain=_as_float(obj["gain"], f"{path}.gain"),
        left_rows=left_rows,
        right_rows=right_rows,
        x_range=rng,
    )
    return TreeNode(fit=fit, node_id=node_id, depth=depth, n=n,
                    weight=n / n_train, children=children)


def load_model(path: str) -> PilotTree:
    """Read a model file written by :func:`save_model`.

    Raises
    ------
    SchemaError
        Unsupported schema version, or any structural problem; the message
        names the JSON path of the offending field.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(
                f"model file is not valid JSON: {exc.msg} "
                f"(line {exc.lineno}, column {exc.colno})") from None
    _check_keys(doc, _TOP_KEYS, _TOP_KEYS, "$")
    version = doc["schema_version"]
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    hp_raw = doc["hyperparams"]
    _check_keys(hp_raw, _HP_KEYS, _HP_KEYS, "$.hyperparams")
    try:
        kinds = frozenset(ModelKind(k) for k in hp_raw["allowed_kinds"])
    except ValueError as exc:
        raise SchemaError(f"model file invalid at $.hyperparams.allowed_kinds: "
                          f"{exc}") from None
    try:
        hp = Hyperparams(
            max_depth=hp_raw["max_depth"],
            min_fit=hp_raw["min_fit"],
            min_leaf=hp_raw["min_leaf"],
            allowed_kinds=kinds,
            min_unique_for_lin_blin=hp_raw["min_unique_for_lin_blin"],
            min_unique_per_child_for_plin=hp_raw["min_unique_per_child_for_plin"],
            rss_floor_scale=hp_raw["rss_floor_scale"],
            max_lin_chain=hp_raw["max_lin_chain"],
            min_rel_gain_lin=hp_raw["min_rel_gain_lin"],
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"model file invalid at $.hyperparams: {exc}") from None

    cols_raw = doc["columns"]
    _expect(isinstance(cols_raw, list), "$.columns", "expected a list")
    metas: list[ColumnMeta] = []
    for i, c in enumerate(cols_raw):
        cpath = f"$.columns[{i}]"
        _check_keys(c, {"name", "kind", "levels"}, {"name", "kind", "levels"},
                    cpath)
        try:
            kind = ColumnKind(c["kind"])
        except ValueError:
            raise SchemaError(f"model file invalid at {cpath}.kind: "
                              f"unknown kind {c['kind']!r}") from None
        levels = c["levels"]
        if kind is ColumnKind.CATEGORICAL:
            _expect(isinstance(levels, list), f"{cpath}.levels",
                    "categorical column needs its level table")
            levels = tuple(str(v) for v in levels)
        else:
            _expect(levels is None, f"{cpath}.levels",
                    "numeric column must not carry levels")
        metas.append(ColumnMeta(str(c["name"]), kind,
                                levels if kind is ColumnKind.CATEGORICAL else None))

    meta_t = tuple(metas)
    root_raw = doc["root"]
    _expect(isinstance(root_raw, dict), "$.root", "expected an object")
    counter = [0]
    root = _node_from_dict(root_raw, meta_t, root_raw.get("n", 1), 0, counter,
                           "$.root")
    return PilotTree(
        root=root,
        bound_B=_as_float(doc["bound_B"], "$.bound_B"),
        offset=_as_float(doc["offset"], "$.offset"),
        hyperparams=hp,
        column_meta=meta_t,
        n_train=root.n,
        diagnostics=None,
    )
