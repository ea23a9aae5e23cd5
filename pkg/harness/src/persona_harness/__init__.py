"""Prompted ballot generation feeding the repvote exchange format."""

from .config import API_KEY_ENV, ConfigError, endpoint_config, load_config, prompt_template
from .endpoint import (
    ChatEndpoint,
    Endpoint,
    EndpointConfig,
    EndpointError,
    MockEndpoint,
    TransientEndpointError,
)
from .generate import GenerateResult, generate
from .parsing import ParseFailure, extract_entries
from .prompts import (
    GROUP_ORDER,
    HarnessError,
    MissingTraitError,
    PromptTemplate,
    TraitGroup,
    answer_instruction,
    format_question,
    render_profile,
    render_prompt,
    scenario_preamble,
)

__all__ = [
    "API_KEY_ENV",
    "ChatEndpoint",
    "ConfigError",
    "Endpoint",
    "EndpointConfig",
    "EndpointError",
    "GROUP_ORDER",
    "GenerateResult",
    "HarnessError",
    "MissingTraitError",
    "MockEndpoint",
    "ParseFailure",
    "PromptTemplate",
    "TraitGroup",
    "TransientEndpointError",
    "answer_instruction",
    "endpoint_config",
    "extract_entries",
    "format_question",
    "generate",
    "load_config",
    "prompt_template",
    "render_profile",
    "render_prompt",
    "scenario_preamble",
]

__version__ = "0.1.0"
