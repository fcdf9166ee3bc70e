"""Run configuration, read from a YAML (or JSON) file."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from termbench.errors import UsageError
from termbench.providers.base import digest_of


@dataclass
class ChatConfig:
    base_url: str = "https://api.openai.com/v1"
    model_id: str = "gpt-3.5-turbo"
    api_key_env: str | None = "OPENAI_API_KEY"


@dataclass
class EmbedConfig:
    base_url: str = "https://api.openai.com/v1"
    model_id: str = "text-embedding-ada-002"
    api_key_env: str | None = "OPENAI_API_KEY"
    dimension: int | None = None


@dataclass
class SearchConfig:
    api_key_env: str = "GOOGLE_API_KEY"
    cx_env: str = "GOOGLE_CSE_ID"


@dataclass
class Config:
    generator: ChatConfig = field(default_factory=ChatConfig)
    evaluator: ChatConfig = field(default_factory=lambda: ChatConfig(model_id="llama2:70b"))
    models: dict[str, ChatConfig] = field(default_factory=dict)
    embedder: EmbedConfig = field(default_factory=EmbedConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    corpus_dump: str | None = None
    dump_date: str | None = None
    topic_count: int = 20
    terms_per_topic: int = 50
    suggestion_count: int = 50
    neighbor_count: int = 50
    per_source: int = 3
    gates: dict = field(default_factory=dict)
    parallelism: int = 1
    mock_dimension: int = 64

    @property
    def digest(self) -> str:
        return digest_of(asdict(self))

    def model(self, name: str) -> ChatConfig:
        if name in self.models:
            return self.models[name]
        for cfg in self.models.values():
            if cfg.model_id == name:
                return cfg
        return ChatConfig(self.generator.base_url, name, self.generator.api_key_env)


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"unknown config keys in {where}: {', '.join(unknown)}")
    return cls(**data)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must be a mapping")
    data = dict(data)
    for key, cls in (("generator", ChatConfig), ("evaluator", ChatConfig), ("embedder", EmbedConfig), ("search", SearchConfig)):
        if key in data:
            data[key] = _build(cls, data[key] or {}, key)
    if "models" in data:
        data["models"] = {name: _build(ChatConfig, m or {}, f"models.{name}") for name, m in data["models"].items()}
    return _build(Config, data, "config")
