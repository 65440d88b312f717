from .adapter import ENDPOINT_ENV, AdapterBackend, handle_message
from .base import (
    CAPABILITIES,
    PIPELINES,
    BackendDescriptor,
    DiffusionBackend,
    PipelineRequest,
    RecordingBackend,
    executed_steps,
    stepwise_pipeline,
)
from .mock import MockBackend, mock_target_pattern

__all__ = [
    "AdapterBackend",
    "BackendDescriptor",
    "CAPABILITIES",
    "DiffusionBackend",
    "ENDPOINT_ENV",
    "MockBackend",
    "PIPELINES",
    "PipelineRequest",
    "RecordingBackend",
    "executed_steps",
    "handle_message",
    "mock_target_pattern",
    "stepwise_pipeline",
]
