"""Runtime settings: defaults, optional JSON file, environment overrides.

Precedence, lowest to highest: built-in defaults, config file, environment.
Environment variables use the ``POLICYQA_`` prefix.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

ENV_PREFIX = "POLICYQA_"


@dataclass
class Settings:
    corpus_dir: str = "corpus"
    k: int = 3
    max_prompt_tokens: int = 3000
    default_mode: str = "rulebook_kg"
    max_chars: int = 2000
    overlap_chars: int = 200

    llm_backend: str = "echo"  # remote | replay | echo
    llm_endpoint: str = ""
    llm_api_key: str = ""
    llm_model: str = "gpt-3.5-turbo"
    llm_timeout_s: float = 30.0
    llm_max_output_tokens: int = 512
    replay_fixture: str = ""

    kg_source: str = "fixture"  # fixture | endpoint
    kg_fixture: str = ""
    sparql_endpoint: str = "https://dbpedia.org/sparql"
    sparql_language: str = "en"
    sparql_timeout_s: float = 10.0


_FLOAT_FIELDS = {"llm_timeout_s", "sparql_timeout_s"}
_INT_FIELDS = {"k", "max_prompt_tokens", "llm_max_output_tokens", "max_chars", "overlap_chars"}


def load_settings(config_path: str | Path | None = None, env: dict | None = None) -> Settings:
    if env is None:
        env = dict(os.environ)
    values: dict = {}
    if config_path:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(Settings)}
        values.update({k: v for k, v in raw.items() if k in known})
    for f in fields(Settings):
        env_key = ENV_PREFIX + f.name.upper()
        if env_key in env:
            values[f.name] = env[env_key]
    settings = Settings(**values)
    for name in _INT_FIELDS:
        setattr(settings, name, int(getattr(settings, name)))
    for name in _FLOAT_FIELDS:
        setattr(settings, name, float(getattr(settings, name)))
    return settings
