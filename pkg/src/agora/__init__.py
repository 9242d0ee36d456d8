"""Multi-agent counselor debate pipeline and evaluation harness."""

from agora.domain import (
    AttributeKind,
    AttributeScoreVector,
    CANONICAL_ATTRIBUTES,
    CounselorPersona,
    DebateTranscript,
    DebateTurn,
    GeneratedResponse,
    Method,
    MethodConfig,
    SamplingParams,
    UserCase,
    canonical_agent_order,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeKind",
    "AttributeScoreVector",
    "CANONICAL_ATTRIBUTES",
    "CounselorPersona",
    "DebateTranscript",
    "DebateTurn",
    "GeneratedResponse",
    "Method",
    "MethodConfig",
    "SamplingParams",
    "UserCase",
    "canonical_agent_order",
    "__version__",
]
