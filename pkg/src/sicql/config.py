"""Engine defaults and application configuration.

The application config is a single JSON document; unknown keys are
rejected at load so typos fail fast. CLI flags override file values and
API keys come only from environment variables.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, replace

from sicql.errors import ConfigError
from sicql.lang.ast import FailureMode

_DEFAULTS_KEYS = {
    "retry", "failure_mode", "relevance", "decode_allowlist",
    "normalize_grounding_whitespace", "record_separator", "fewshot_k",
    "exemplar_capacity", "current_date",
}
_MODEL_KEYS = {"kind", "script", "seed", "base_url", "model", "api_key_env", "timeout"}
_TOP_KEYS = {"defaults", "model", "profile", "run_dir", "store", "port"}


@dataclass(frozen=True)
class EngineConfig:
    default_retry: int = 1
    default_failure_mode: FailureMode = FailureMode.CONTINUE
    enable_default_relevance: bool = False
    decode_allowlist: frozenset[str] = frozenset({"domain-regex", "grounding-extractive"})
    normalize_grounding_whitespace: bool = False
    record_separator: str = "\n---\n"
    fewshot_k: int = 2
    exemplar_capacity: int = 256
    current_date: dt.date | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        unknown = set(data) - _DEFAULTS_KEYS
        if unknown:
            raise ConfigError(f"unknown defaults keys: {sorted(unknown)}")
        current = data.get("current_date")
        if current is not None:
            try:
                current = dt.date.fromisoformat(current)
            except ValueError as exc:
                raise ConfigError(f"current_date must be YYYY-MM-DD: {current!r}") from exc
        mode = data.get("failure_mode", "CONTINUE")
        try:
            failure_mode = FailureMode(mode)
        except ValueError as exc:
            raise ConfigError(f"unknown failure mode {mode!r}") from exc
        retry = data.get("retry", 1)
        if retry < 0:
            raise ConfigError("default retry threshold must be non-negative")
        return cls(
            default_retry=retry,
            default_failure_mode=failure_mode,
            enable_default_relevance=data.get("relevance", False),
            decode_allowlist=frozenset(
                data.get("decode_allowlist", ("domain-regex", "grounding-extractive"))
            ),
            normalize_grounding_whitespace=data.get("normalize_grounding_whitespace", False),
            record_separator=data.get("record_separator", "\n---\n"),
            fewshot_k=data.get("fewshot_k", 2),
            exemplar_capacity=data.get("exemplar_capacity", 256),
            current_date=current,
        )


@dataclass
class AppConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    model: dict = field(default_factory=lambda: {"kind": "fake"})
    profile_path: str | None = None
    run_dir: str = "runs"
    store_path: str = "constraint_store.jsonl"
    port: int = 8000

    @classmethod
    def from_dict(cls, data: dict) -> "AppConfig":
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        model = data.get("model", {"kind": "fake"})
        unknown = set(model) - _MODEL_KEYS
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        if model.get("kind", "fake") not in ("fake", "http"):
            raise ConfigError(f"unknown model kind {model.get('kind')!r}")
        return cls(
            engine=EngineConfig.from_dict(data.get("defaults", {})),
            model=model,
            profile_path=data.get("profile"),
            run_dir=data.get("run_dir", "runs"),
            store_path=data.get("store", "constraint_store.jsonl"),
            port=data.get("port", 8000),
        )

    @classmethod
    def load(cls, path: str) -> "AppConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, **kwargs) -> "AppConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def build_model_client(config: AppConfig, seed: int = 0):
    """Instantiate the configured model client."""
    from sicql.models import FakeModel, FakeModelScript, HttpModel

    spec = config.model
    kind = spec.get("kind", "fake")
    if kind == "fake":
        script_path = spec.get("script")
        script = FakeModelScript.load(script_path) if script_path else FakeModelScript()
        return FakeModel(script, seed=spec.get("seed", seed))
    return HttpModel(
        base_url=spec.get("base_url", "http://localhost:8080/v1"),
        model=spec.get("model", "default"),
        api_key_env=spec.get("api_key_env", "SICQL_API_KEY"),
        timeout=spec.get("timeout", 30.0),
    )
