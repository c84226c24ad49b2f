"""JSON encoding of states, layouts, plans and mixtures.

Classical states are arrays of reals. Quantum states and other complex
matrices are ``{"re": [[...]], "im": [[...]]}``. Layouts are
``{"dims": [...], "labels": [...]}``.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from typing import Any

import numpy as np

from .errors import SchemaError
from .majorization import PermutationMixture, TTransformStep, UnitaryPlan
from .statekit import SubsystemLayout


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def state_to_json(state):
    state = np.asarray(state)
    if state.ndim == 1:
        return np.asarray(state, dtype=float).tolist()
    return matrix_to_json(state)


def _real_array(obj, path: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError("expected an array of numbers", path) from None
    if arr.ndim != ndim:
        raise SchemaError(f"expected a {ndim}-dimensional array, got {arr.ndim} dimensions", path)
    return arr


def matrix_from_json(obj, path: str = "$") -> np.ndarray:
    if isinstance(obj, dict):
        if "re" not in obj:
            raise SchemaError('matrix object needs a "re" field', path)
        re = _real_array(obj["re"], f"{path}.re", 2)
        im = _real_array(obj.get("im", np.zeros_like(re)), f"{path}.im", 2)
        if re.shape != im.shape:
            raise SchemaError(f"re has shape {re.shape} but im has shape {im.shape}", path)
        return re + 1j * im
    if isinstance(obj, list):
        return _real_array(obj, path, 2).astype(complex)
    raise SchemaError("expected a matrix ({re, im} object or nested list)", path)


def state_from_json(obj, path: str = "$") -> np.ndarray:
    """Vector for a flat list, complex matrix for ``{re, im}`` or a nested list."""
    if isinstance(obj, list) and obj and not isinstance(obj[0], list):
        return _real_array(obj, path, 1)
    return matrix_from_json(obj, path)


def layout_to_json(layout: SubsystemLayout) -> dict:
    return {"dims": list(layout.dims), "labels": list(layout.labels)}


def layout_from_json(obj, path: str = "$") -> SubsystemLayout:
    if not isinstance(obj, dict) or "dims" not in obj:
        raise SchemaError('layout needs a "dims" field', path)
    dims = obj["dims"]
    if not isinstance(dims, list) or not all(isinstance(d, int) and d > 0 for d in dims):
        raise SchemaError("dims must be a list of positive integers", f"{path}.dims")
    labels = obj.get("labels", [])
    if not isinstance(labels, list) or not all(isinstance(lab, str) for lab in labels):
        raise SchemaError("labels must be a list of strings", f"{path}.labels")
    return SubsystemLayout(tuple(dims), tuple(labels))


def step_from_json(obj, path: str = "$") -> TTransformStep:
    try:
        return TTransformStep(int(obj["j"]), int(obj["k"]), float(obj["t"]))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"step needs integer j, k and real t ({exc})", path) from None
    except ValueError as exc:
        raise SchemaError(str(exc), path) from None


def plan_to_json(plan: UnitaryPlan, dense: bool = True) -> dict:
    out = {"dim": plan.dim, "steps": [s.to_dict() for s in plan.steps]}
    if plan.pre_rotation is not None:
        out["pre_rotation"] = matrix_to_json(plan.pre_rotation)
    if plan.post_rotation is not None:
        out["post_rotation"] = matrix_to_json(plan.post_rotation)
    if dense:
        out["dense"] = matrix_to_json(plan.dense)
    return out


def plan_from_json(obj, path: str = "$") -> UnitaryPlan:
    if not isinstance(obj, dict) or "steps" not in obj or "dim" not in obj:
        raise SchemaError('plan needs "dim" and "steps"', path)
    steps = [step_from_json(s, f"{path}.steps[{i}]") for i, s in enumerate(obj["steps"])]
    pre = matrix_from_json(obj["pre_rotation"], f"{path}.pre_rotation") if "pre_rotation" in obj else None
    post = matrix_from_json(obj["post_rotation"], f"{path}.post_rotation") if "post_rotation" in obj else None
    dense = matrix_from_json(obj["dense"], f"{path}.dense") if "dense" in obj else None
    return UnitaryPlan(steps, int(obj["dim"]), pre, post, dense)


def mixture_to_json(mix: PermutationMixture) -> dict:
    return {"weights": mix.weights.tolist(), "permutations": mix.perms.tolist()}


def mixture_from_json(obj, path: str = "$") -> PermutationMixture:
    try:
        return PermutationMixture(np.asarray(obj["weights"], float), np.asarray(obj["permutations"], int))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f'mixture needs "weights" and "permutations" ({exc})', path) from None
    except ValueError as exc:
        raise SchemaError(str(exc), path) from None


def _clean(obj):
    """Replace non-finite floats by strings so output stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_golden(name: str) -> dict:
    """Load one of the bundled golden files (``three_level_quantum`` or ``three_level_classical``)."""
    text = resources.files("catalytic").joinpath("golden", f"{name}.json").read_text()
    return json.loads(text)
