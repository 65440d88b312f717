"""Turn plain charts into stylized images without losing the data they encode.

Three stages run over a pluggable diffusion backend: *sketch* (stylized
objects fitted to each mark), *synthesize* (whole-image coherence, including
masked multi-prompt diffusion) and *refine* (a low-strength quality pass).
"""

from .backend import AdapterBackend, MockBackend, PipelineRequest, RecordingBackend
from .chart import ChartSpec, Datum, Edge, Node, Series, render_plain, validate_spec
from .config import PromptSpec, Strengths, WorkflowConfig
from .recipe import RecipeSelection, select_recipe
from .workflow import RunState, geometry_fidelity, resume, run

__version__ = "0.1.0"

__all__ = [
    "AdapterBackend",
    "ChartSpec",
    "Datum",
    "Edge",
    "MockBackend",
    "Node",
    "PipelineRequest",
    "PromptSpec",
    "RecipeSelection",
    "RecordingBackend",
    "RunState",
    "Series",
    "Strengths",
    "WorkflowConfig",
    "geometry_fidelity",
    "render_plain",
    "resume",
    "run",
    "select_recipe",
    "validate_spec",
]
