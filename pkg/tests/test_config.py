import json

import pytest

from stylviz import WorkflowConfig
from stylviz.backend import ENDPOINT_ENV, AdapterBackend, MockBackend
from stylviz.config import DEFAULT_NEGATIVE, PromptSpec
from stylviz.configfile import (chart_from_dict, chart_to_dict, document_from_parts, make_backend,
                                parse_document)
from stylviz.errors import ValidationError

from conftest import area_spec, network_spec

DOC = {
    "chart": {"kind": "bar", "data": [3, 1, 2], "colors": [[255, 0, 0], [0, 255, 0], [0, 0, 255]]},
    "prompts": {"context": "snacks", "subPrompts": ["fries", "hamburgers"], "binding": {"2": 0}},
    "workflow": {"seed": 4, "strengths": {"refine": 0.25}},
}


def test_parse_document():
    c = parse_document(DOC)
    assert [d.value for d in c.spec.data] == [3, 1, 2]
    assert c.prompts.binding == {2: 0} and c.prompts.negative == DEFAULT_NEGATIVE
    assert c.workflow.seed == 4 and c.workflow.strengths.refine == 0.25 and c.workflow.strengths.synthesize == 0.8
    assert c.backend["type"] == "mock"


def test_unknown_keys_and_field_names():
    bad = json.loads(json.dumps(DOC))
    bad["workflow"]["colour"] = 1
    with pytest.raises(ValidationError) as err:
        parse_document(bad)
    assert "colour" in str(err.value)
    bad = json.loads(json.dumps(DOC))
    bad["chart"]["data"][1] = -1
    with pytest.raises(ValidationError) as err:
        parse_document(bad)
    assert err.value.problems[0][0] == "chart.data[1].value"


def test_strength_range_checked():
    bad = json.loads(json.dumps(DOC))
    bad["workflow"]["strengths"]["refine"] = 1.5
    with pytest.raises(ValidationError) as err:
        parse_document(bad)
    assert err.value.problems[0][0] == "workflow.strengths.refine"


@pytest.mark.parametrize("spec", [network_spec(3), area_spec()])
def test_chart_roundtrip(spec):
    assert chart_from_dict(chart_to_dict(spec)) == spec


def test_document_roundtrip():
    c = parse_document(DOC)
    again = parse_document(document_from_parts(c.spec, c.prompts, c.workflow, c.backend))
    assert again.workflow == c.workflow and again.prompts == c.prompts and again.spec == c.spec


def test_workflow_dict_roundtrip():
    cfg = WorkflowConfig(seed=3)
    assert WorkflowConfig.from_dict(cfg.to_dict()) == cfg


def test_prompt_model():
    p = PromptSpec("ctx", ["a", "b"], background="bg")
    assert p.group_prompt(1) == "ctx, b"
    assert p.full_prompt() == "ctx, a, b"
    assert p.refine_prompt().startswith("ctx, a, b, bg, ")
    with pytest.raises(ValidationError):
        PromptSpec("", []).validate()
    with pytest.raises(ValidationError):
        PromptSpec("c", ["a"], binding={0: 3}).validate()


def test_make_backend(monkeypatch):
    assert isinstance(make_backend({"type": "mock"}), MockBackend)
    b = make_backend({"type": "mock", "capabilities": ["img2img"]})
    assert not b.supports("stepwise")
    monkeypatch.setenv(ENDPOINT_ENV, "http://example.invalid/")
    a = make_backend({"type": "adapter", "endpoint": "http://other.invalid/"})
    assert isinstance(a, AdapterBackend) and a.endpoint == "http://example.invalid/"
