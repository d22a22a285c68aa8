"""JSON model files: schema validation, construction of the model objects,
and round-trip serialization.

Errors carry the JSON path of the offending value and, when the source
text is available, its line number.
"""

import hashlib
import json
from dataclasses import dataclass, field

import jsonschema

from . import degroot_friedkin as df
from . import lotka_volterra as lv
from . import sis

MODEL_SCHEMA_VERSION = 1

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}

_control = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "zero"}}, "additionalProperties": False},
        {"properties": {"kind": {"const": "linear"}, "k": _number},
         "required": ["k"], "additionalProperties": False},
        {"properties": {"kind": {"const": "power"}, "c": _number, "p": _number},
         "required": ["c", "p"], "additionalProperties": False},
        {"properties": {"kind": {"const": "saturating"}, "c": _number, "kappa": _number},
         "required": ["c", "kappa"], "additionalProperties": False},
    ],
}

_experiment = {
    "type": "object",
    "properties": {
        "x0": _vector,
        "T": {"type": "number", "exclusiveMinimum": 0},
        "method": {"enum": ["rk45", "rk4"]},
        "step": {"type": "number", "exclusiveMinimum": 0},
        "seeds_per_dim": {"type": "integer", "minimum": 2},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "grid": {"type": "integer", "minimum": 1},
        "samples_per_face": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_parameters = {
    "sis": {
        "type": "object",
        "required": ["d", "b"],
        "properties": {"d": _vector, "b": _matrix,
                       "controls": {"type": "array", "items": _control}},
        "additionalProperties": False,
    },
    "glv": {
        "type": "object",
        "required": ["d", "a", "region"],
        "properties": {
            "d": _vector,
            "a": _matrix,
            "perturbation": {
                "type": "object",
                "required": ["kind", "c"],
                "properties": {"kind": {"const": "self_limitation"}, "c": _vector},
                "additionalProperties": False,
            },
            "region": {
                "type": "object",
                "required": ["radius", "floor"],
                "properties": {"radius": _number, "floor": _number},
                "additionalProperties": False,
            },
            "bound": _matrix,
        },
        "additionalProperties": False,
    },
    "df": {
        "type": "object",
        "required": ["gamma"],
        "properties": {"gamma": _vector, "delta": _number},
        "additionalProperties": False,
    },
}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "parameters"],
    "properties": {
        "schema_version": {"const": MODEL_SCHEMA_VERSION},
        "kind": {"enum": sorted(_parameters)},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "parameters": {"type": "object"},
        "experiment": _experiment,
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": k}}, "required": ["kind"]},
         "then": {"properties": {"parameters": s}}}
        for k, s in _parameters.items()
    ],
}


class ModelError(ValueError):
    """Invalid model file. ``path`` is the JSON path, ``line`` the source line
    (``None`` when unknown)."""

    def __init__(self, message, path=(), line=None, source=None):
        self.path = tuple(path)
        self.line = line
        self.source = source
        where = "/" + "/".join(str(p) for p in self.path)
        prefix = f"{source}:" if source else ""
        prefix += f"{line}: " if line is not None else " " if source else ""
        super().__init__(f"{prefix}{where}: {message}")


# Source positions -------------------------------------------------------------

_decoder = json.JSONDecoder()


def _skip_ws(text, i):
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def locate(text, path):
    """Character offset of the value at ``path`` in JSON ``text``; falls
    back to the deepest enclosing value that exists."""
    i = _skip_ws(text, 0)
    for key in path:
        if i >= len(text):
            break
        if text[i] == "{" and isinstance(key, str):
            j = _skip_ws(text, i + 1)
            found = None
            while j < len(text) and text[j] == '"':
                name, j = json.decoder.scanstring(text, j + 1)
                j = _skip_ws(text, j)
                j = _skip_ws(text, j + 1)  # past ':'
                if name == key:
                    found = j
                    break
                _, j = _decoder.raw_decode(text, j)
                j = _skip_ws(text, j)
                if j < len(text) and text[j] == ",":
                    j = _skip_ws(text, j + 1)
            if found is None:
                return i
            i = found
        elif text[i] == "[" and isinstance(key, int):
            j = _skip_ws(text, i + 1)
            for _ in range(key):
                if j >= len(text) or text[j] == "]":
                    return i
                _, j = _decoder.raw_decode(text, j)
                j = _skip_ws(text, j)
                if j < len(text) and text[j] == ",":
                    j = _skip_ws(text, j + 1)
            if j >= len(text) or text[j] == "]":
                return i
            i = j
        else:
            break
    return i


def line_of(text, path):
    if text is None:
        return None
    return text.count("\n", 0, locate(text, path)) + 1


# Loading ----------------------------------------------------------------------

@dataclass
class LoadedModel:
    """A validated model file. ``model`` is an ``SISNetwork``, ``GLVModel``
    or ``DFModel``; ``control`` is set for SIS files with controls."""

    kind: str
    model: object
    document: dict
    control: object = None
    region: object = None
    bound: object = None
    sha256: str = None
    experiment: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.model.n

    def to_dict(self):
        doc = {k: v for k, v in self.document.items() if k != "parameters"}
        if self.kind == "sis":
            params = self.model.to_dict()
            if self.control is not None:
                params["controls"] = self.control.to_dicts()
        elif self.kind == "glv":
            params = {"d": self.model.d.tolist(), "a": self.model.a.tolist()}
            if "perturbation" in self.document["parameters"]:
                params["perturbation"] = {"kind": "self_limitation",
                                          "c": self.model.self_limitation.tolist()}
            params["region"] = self.region.to_dict()
            if "bound" in self.document["parameters"]:
                params["bound"] = self.bound.A.tolist()
        else:
            params = {"gamma": self.model.gamma.tolist()}
            if "delta" in self.document["parameters"]:
                params["delta"] = self.model.delta
        doc["parameters"] = params
        return doc


def _build(doc, text, source):
    def fail(msg, path):
        raise ModelError(msg, path, line_of(text, path), source)

    kind = doc["kind"]
    p = doc["parameters"]
    base = ("parameters",)
    out = LoadedModel(kind=kind, model=None, document=doc, experiment=doc.get("experiment", {}))

    if kind == "sis":
        try:
            out.model = sis.SISNetwork(p["d"], p["b"])
        except ValueError as exc:
            fail(str(exc), base)
        if "controls" in p:
            if len(p["controls"]) != out.model.n:
                fail(f"need one control per node ({out.model.n})", base + ("controls",))
            controls = []
            for i, spec in enumerate(p["controls"]):
                try:
                    controls.append(sis.control_from_dict(spec))
                except (ValueError, TypeError) as exc:
                    fail(str(exc), base + ("controls", i))
            out.control = sis.ControlSpec(controls)
    elif kind == "glv":
        c = p.get("perturbation", {}).get("c")
        try:
            out.model = lv.GLVModel(p["d"], p["a"], c)
        except ValueError as exc:
            fail(str(exc), base)
        try:
            out.region = lv.LVRegion(float(p["region"]["radius"]), float(p["region"]["floor"]))
            out.region.validate(out.model.n)
        except ValueError as exc:
            fail(str(exc), base + ("region",))
        try:
            out.bound = lv.SectorBound(p.get("bound", p["a"]))
        except ValueError as exc:
            fail(str(exc), base + ("bound",))
        if out.bound.A.shape != (out.model.n, out.model.n):
            fail("bound must match the interaction matrix shape", base + ("bound",))
    else:
        try:
            out.model = df.DFModel(p["gamma"], p.get("delta", df.DEFAULT_DELTA))
        except ValueError as exc:
            fail(str(exc), base)

    x0 = out.experiment.get("x0")
    if x0 is not None and len(x0) != out.model.n:
        fail(f"x0 must have {out.model.n} components", ("experiment", "x0"))
    return out


def parse_model(doc, text=None, source=None):
    """Validate a decoded document and build the model objects."""
    validator = jsonschema.Draft202012Validator(MODEL_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: len(e.absolute_path), reverse=True)
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = tuple(err.absolute_path)
        raise ModelError(err.message, path, line_of(text, path), source)
    return _build(doc, text, source)


def load_model(path):
    """Read, validate and build a model file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc.msg}", (), exc.lineno, str(path)) from None
    out = parse_model(doc, text, str(path))
    out.sha256 = hashlib.sha256(raw).hexdigest()
    return out
