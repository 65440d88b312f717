"""JSON configuration documents: schema, parsing and serialization.

A document has four top-level sections::

    {"chart": {...}, "prompts": {...}, "workflow": {...}, "backend": {...}}

Unknown keys are rejected at every level. ``document_from_parts`` produces
the inverse, which is what a run state stores as ``config.json``.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import jsonschema

from .backend import ENDPOINT_ENV, AdapterBackend, MockBackend
from .chart import ChartSpec, Datum, Edge, Node, Series, validate_spec
from .config import DEFAULT_NEGATIVE, DEFAULT_QUALITY, PromptSpec, Strengths, WorkflowConfig
from .errors import ValidationError

_RGB = {"type": "array", "items": {"type": "integer"}, "minItems": 3, "maxItems": 3}
_OPT_RGB = {"anyOf": [_RGB, {"type": "null"}]}
_NUM = {"type": "number"}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_WORKFLOW_TYPES = {
    "seed": {"type": "integer"},
    "steps": {"type": "integer"},
    "guidance": _NUM,
    "beta": _NUM,
    "realism": {"type": "boolean"},
    "recipe": _obj({
        "pipeline": {"type": "string"},
        "pregen": {"anyOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}}]},
        "smooth": {"type": "boolean"},
        "refine": {"type": "boolean"},
    }),
    "trace": {"type": "boolean"},
    "strengths": _obj({f.name: _NUM for f in dataclasses.fields(Strengths)}),
    "background_colors": {"type": "array", "items": _RGB, "minItems": 2, "maxItems": 2},
    "transform": {"anyOf": [{"enum": ["rescale", "cutout", "elongate", "stack", "tile_fill"]}, {"type": "null"}]},
    "equalize_grid": {"type": "boolean"},
    "refine_after_regen": {"type": "boolean"},
}

SCHEMA = _obj({
    "chart": _obj({
        "kind": {"enum": ["bar", "pie", "area", "network"]},
        "data": {"type": "array", "items": _NUM},
        "colors": {"type": "array", "items": _RGB},
        "labels": {"type": "array", "items": {"type": "string"}},
        "canvas": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "background": _RGB,
        "series": {"type": "array", "items": _obj({
            "x": {"type": "array", "items": _NUM},
            "y": {"type": "array", "items": _NUM},
            "color": _OPT_RGB,
            "label": {"type": "string"},
        }, ["x", "y"])},
        "nodes": {"type": "array", "items": _obj({
            "id": {"type": "string"},
            "radius": {"anyOf": [_NUM, {"type": "null"}]},
            "weight": {"anyOf": [_NUM, {"type": "null"}]},
            "color": _OPT_RGB,
            "position": {"anyOf": [{"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                                   {"type": "null"}]},
        }, ["id"])},
        "edges": {"type": "array", "items": _obj({
            "source": {"type": "string"},
            "target": {"type": "string"},
            "width": _NUM,
            "color": _OPT_RGB,
        }, ["source", "target"])},
    }, ["kind"]),
    "prompts": _obj({
        "context": {"type": "string"},
        "subPrompts": {"type": "array", "items": {"type": "string"}},
        "binding": {"type": "object", "patternProperties": {"^[0-9]+$": {"type": "integer"}},
                    "additionalProperties": False},
        "background": {"type": ["string", "null"]},
        "negative": {"type": "string"},
        "quality": {"type": "string"},
    }, ["context", "subPrompts"]),
    "workflow": _obj({
        **_WORKFLOW_TYPES,
        **{f.name: _NUM for f in dataclasses.fields(WorkflowConfig)
           if f.name not in _WORKFLOW_TYPES and f.name != "canvas"},
    }),
    "backend": _obj({
        "type": {"enum": ["mock", "adapter"]},
        "endpoint": {"type": ["string", "null"]},
        "capabilities": {"type": "array", "items": {"type": "string"}},
    }),
}, ["chart", "prompts"])


@dataclass
class LoadedConfig:
    spec: ChartSpec
    prompts: PromptSpec
    workflow: WorkflowConfig
    backend: dict


def _path(err):
    out = ""
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def validate_document(doc):
    """Schema check collecting every violation as ``(field, message)``."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    problems = [(_path(e), e.message) for e in sorted(validator.iter_errors(doc), key=lambda e: list(e.path))]
    if problems:
        raise ValidationError(problems)
    return doc


def chart_from_dict(d):
    kind = d["kind"]
    canvas = tuple(d.get("canvas", (512, 512)))
    bg = tuple(d.get("background", (255, 255, 255)))
    if kind in ("bar", "pie"):
        values = d.get("data", [])
        colors = d.get("colors")
        labels = d.get("labels")
        data = [Datum(labels[i] if labels and i < len(labels) else str(i), v,
                      tuple(colors[i]) if colors and i < len(colors) else None)
                for i, v in enumerate(values)]
        return ChartSpec(kind, canvas, data=data, background=bg)
    if kind == "area":
        series = [Series(list(s["x"]), list(s["y"]), tuple(s["color"]) if s.get("color") else None,
                         s.get("label", "")) for s in d.get("series", [])]
        return ChartSpec(kind, canvas, series=series, background=bg)
    nodes = [Node(n["id"], n.get("radius"), n.get("weight"),
                  tuple(n["color"]) if n.get("color") else None,
                  tuple(n["position"]) if n.get("position") else None) for n in d.get("nodes", [])]
    edges = [Edge(e["source"], e["target"], e.get("width", 3.0),
                  tuple(e["color"]) if e.get("color") else None) for e in d.get("edges", [])]
    return ChartSpec(kind, canvas, nodes=nodes, edges=edges, background=bg)


def chart_to_dict(spec):
    d = {"kind": spec.kind, "canvas": list(spec.canvas), "background": list(spec.background)}
    if spec.kind in ("bar", "pie"):
        d["data"] = [x.value for x in spec.data]
        d["labels"] = [x.label for x in spec.data]
        if all(x.color is not None for x in spec.data):
            d["colors"] = [list(x.color) for x in spec.data]
    elif spec.kind == "area":
        d["series"] = [{"x": list(s.x), "y": list(s.y), "color": list(s.color) if s.color else None,
                        "label": s.label} for s in spec.series]
    else:
        d["nodes"] = [{"id": n.id, "radius": n.radius, "weight": n.weight,
                       "color": list(n.color) if n.color else None,
                       "position": list(n.position) if n.position is not None else None} for n in spec.nodes]
        d["edges"] = [{"source": e.source, "target": e.target, "width": e.width,
                       "color": list(e.color) if e.color else None} for e in spec.edges]
    return d


def prompts_from_dict(d):
    return PromptSpec(
        context=d["context"],
        sub_prompts=list(d["subPrompts"]),
        binding={int(k): int(v) for k, v in d.get("binding", {}).items()},
        background=d.get("background"),
        negative=d.get("negative", DEFAULT_NEGATIVE),
        quality=d.get("quality", DEFAULT_QUALITY),
    )


def prompts_to_dict(p):
    return {"context": p.context, "subPrompts": list(p.sub_prompts),
            "binding": {str(k): v for k, v in p.binding.items()}, "background": p.background,
            "negative": p.negative, "quality": p.quality}


def workflow_from_dict(d, canvas=(512, 512)):
    d = dict(d)
    d["canvas"] = tuple(canvas)
    return WorkflowConfig.from_dict(d)


def workflow_to_dict(cfg):
    d = cfg.to_dict()
    d.pop("canvas")
    d["background_colors"] = [list(c) for c in cfg.background_colors]
    return d


def parse_document(doc):
    """Validate a config document and build the typed objects it describes."""
    validate_document(doc)
    spec = chart_from_dict(doc["chart"])
    prompts = prompts_from_dict(doc["prompts"])
    workflow = workflow_from_dict(doc.get("workflow", {}), spec.canvas)
    problems = []
    try:
        validate_spec(spec)
    except ValidationError as exc:
        problems += [(f"chart.{f}", m) for f, m in exc.problems]
    for check in (prompts.validate, workflow.validate):
        try:
            check()
        except ValidationError as exc:
            problems += exc.problems
    if problems:
        raise ValidationError(problems)
    backend = {"type": "mock", "endpoint": None}
    backend.update(doc.get("backend", {}))
    return LoadedConfig(spec, prompts, workflow, backend)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError([("", f"invalid JSON: {exc}")]) from exc
    return parse_document(doc)


def document_from_parts(spec, prompts, workflow, backend=None):
    doc = {"chart": chart_to_dict(spec), "prompts": prompts_to_dict(prompts),
           "workflow": workflow_to_dict(workflow)}
    if backend is not None:
        doc["backend"] = dict(backend)
    return doc


def make_backend(backend_cfg, environ=None):
    """Instantiate the configured backend; the endpoint env var overrides the config endpoint."""
    environ = os.environ if environ is None else environ
    kind = backend_cfg.get("type", "mock")
    if kind == "mock":
        return MockBackend(capabilities=backend_cfg.get("capabilities"))
    endpoint = environ.get(ENDPOINT_ENV) or backend_cfg.get("endpoint")
    return AdapterBackend(endpoint)
