"""TOML config for the harness; the API key can come from the environment.

Layout:

    [files]
    election = "election.pb"
    traits = "traits.csv"
    output = "ai.jsonl"
    rejects = "rejects.jsonl"

    [prompt]
    currency = "CHF"
    [prompt.groups]
    socio_demographics = ["gender", "age"]
    [prompt.phrases]
    age = "{value} years old"

    [generate]
    formats = ["approval", "cumulative"]
    temperatures = [0.4, 0.2, 0.0]
    runs_per_temp = 20
    source = "ai"
    parse_retries = 2
    workers = 1

    [endpoint]
    base_url = "https://api.example.com/v1"
    model = "some-chat-model"
    api_key_env = "PERSONA_HARNESS_API_KEY"
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .endpoint import EndpointConfig
from .prompts import HarnessError, PromptTemplate

API_KEY_ENV = "PERSONA_HARNESS_API_KEY"


class ConfigError(HarnessError):
    pass


def load_config(path: str | Path) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}")


def prompt_template(config: Mapping) -> PromptTemplate:
    section = config.get("prompt", {})
    groups = section.get("groups", {})
    if not isinstance(groups, Mapping) or not groups:
        raise ConfigError("[prompt.groups] must map group names to trait key lists")
    try:
        return PromptTemplate(
            groups={name: tuple(keys) for name, keys in groups.items()},
            phrases=dict(section.get("phrases", {})),
            currency=str(section.get("currency", "CHF")),
        )
    except HarnessError as exc:
        raise ConfigError(str(exc))


def endpoint_config(config: Mapping, api_key: str | None = None) -> EndpointConfig:
    section = config.get("endpoint", {})
    base_url = section.get("base_url")
    model = section.get("model")
    if not base_url or not model:
        raise ConfigError("[endpoint] needs base_url and model (or use --mock)")
    key_env = str(section.get("api_key_env", API_KEY_ENV))
    key = api_key or section.get("api_key") or os.environ.get(key_env)
    try:
        return EndpointConfig(
            base_url=str(base_url),
            model=str(model),
            api_key=key,
            timeout=float(section.get("timeout", 60.0)),
            max_retries=int(section.get("max_retries", 4)),
            backoff_base=float(section.get("backoff_base", 0.5)),
            requests_per_second=float(section.get("requests_per_second", 0.0)),
            max_concurrency=int(section.get("max_concurrency", 4)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[endpoint]: {exc}")
