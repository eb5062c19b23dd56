"""Layered application configuration.

Precedence: command-line flag > environment variable > config file >
built-in default. The provider credential is the one exception: it only
ever comes from the environment variable named by api_key_ref, never from
a file, so configs can be committed without leaking secrets.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .dataset import QualityLabel
from .errors import ConfigError
from .judge import ProviderConfig
from .prompts import PROMPT_VERSION

ENV_CONFIG_PATH = "SEGQC_CONFIG"
ENV_API_KEY = "SEGQC_API_KEY"

_ENV_KEYS = {
    "SEGQC_PROVIDER": "provider.kind",
    "SEGQC_ENDPOINT": "provider.endpoint_url",
    "SEGQC_MODEL": "provider.model_id",
    "SEGQC_MANIFEST": "paths.manifest",
    "SEGQC_CACHE_DIR": "paths.cache_dir",
    "SEGQC_OUT_DIR": "paths.out_dir",
    "SEGQC_POSITIVE_CLASS": "positive_class",
    "SEGQC_ENSEMBLE_K": "ensemble_k",
}


@dataclass(frozen=True)
class Paths:
    manifest: str = "phantoms/manifest.jsonl"
    cache_dir: str = "cache"
    out_dir: str = "out"


@dataclass(frozen=True)
class AppConfig:
    provider_kind: str = "mock"
    provider: ProviderConfig = field(
        default_factory=lambda: ProviderConfig(endpoint_url="", model_id="mock-hcr")
    )
    paths: Paths = field(default_factory=Paths)
    positive_class: QualityLabel = QualityLabel.REJECT
    ensemble_k: int | None = None
    prompt_version: str = PROMPT_VERSION

    def redacted_dict(self) -> dict:
        key_state = "set" if os.environ.get(self.provider.api_key_ref) else "unset"
        return {
            "provider": {
                "kind": self.provider_kind,
                "endpoint_url": self.provider.endpoint_url,
                "model_id": self.provider.model_id,
                "api_key_ref": self.provider.api_key_ref,
                "api_key": f"<redacted:{key_state}>",
                "timeout": self.provider.timeout,
                "max_retries": self.provider.max_retries,
                "max_parallel": self.provider.max_parallel,
                "temperature": self.provider.temperature,
            },
            "paths": {
                "manifest": self.paths.manifest,
                "cache_dir": self.paths.cache_dir,
                "out_dir": self.paths.out_dir,
            },
            "positive_class": self.positive_class.value,
            "ensemble_k": self.ensemble_k,
            "prompt_version": self.prompt_version,
        }


def _read_config_file(path: Path) -> dict:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config", f"{path} must contain a JSON object")
    return obj


def _flatten(obj: dict, prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in obj.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


_KNOWN_KEYS = {
    "provider.kind",
    "provider.endpoint_url",
    "provider.model_id",
    "provider.api_key_ref",
    "provider.timeout",
    "provider.max_retries",
    "provider.max_parallel",
    "provider.temperature",
    "paths.manifest",
    "paths.cache_dir",
    "paths.out_dir",
    "positive_class",
    "ensemble_k",
    "prompt_version",
}


def _coerce_int(key: str, value: Any) -> int:
    try:
        if isinstance(value, bool):
            raise ValueError
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected an integer, got {value!r}") from None


def _coerce_float(key: str, value: Any) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None


def load_config(
    file_path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> AppConfig:
    """Resolve the effective configuration.

    `overrides` holds dotted keys from command-line flags (highest
    precedence); `env` defaults to os.environ. Unknown keys and invalid
    values raise ConfigError naming the key."""
    env = os.environ if env is None else env

    layers: list[dict[str, Any]] = []
    path = Path(file_path) if file_path else (
        Path(env[ENV_CONFIG_PATH]) if env.get(ENV_CONFIG_PATH) else None
    )
    if path is not None:
        file_flat = _flatten(_read_config_file(path))
        if any(k.endswith("api_key") for k in file_flat):
            raise ConfigError(
                "provider.api_key", "credentials must come from the environment, not the config file"
            )
        layers.append(file_flat)
    env_flat = {dotted: env[var] for var, dotted in _ENV_KEYS.items() if env.get(var)}
    layers.append(env_flat)
    if overrides:
        layers.append({k: v for k, v in overrides.items() if v is not None})

    merged: dict[str, Any] = {}
    for layer in layers:
        for key, value in layer.items():
            if key not in _KNOWN_KEYS:
                raise ConfigError(key, "unknown configuration key")
            merged[key] = value

    kind = str(merged.get("provider.kind", "mock"))
    if kind not in ("mock", "live"):
        raise ConfigError("provider.kind", f"must be 'mock' or 'live', got {kind!r}")

    provider = ProviderConfig(
        endpoint_url=str(merged.get("provider.endpoint_url", "")),
        model_id=str(merged.get("provider.model_id", "mock-hcr" if kind == "mock" else "")),
        api_key_ref=str(merged.get("provider.api_key_ref", ENV_API_KEY)),
        timeout=_coerce_float("provider.timeout", merged.get("provider.timeout", 60.0)),
        max_retries=_coerce_int("provider.max_retries", merged.get("provider.max_retries", 3)),
        max_parallel=_coerce_int("provider.max_parallel", merged.get("provider.max_parallel", 4)),
        temperature=_coerce_float("provider.temperature", merged.get("provider.temperature", 0.0)),
    )
    if provider.max_retries < 0:
        raise ConfigError("provider.max_retries", "must be >= 0")

    paths = Paths(
        manifest=str(merged.get("paths.manifest", Paths.manifest)),
        cache_dir=str(merged.get("paths.cache_dir", Paths.cache_dir)),
        out_dir=str(merged.get("paths.out_dir", Paths.out_dir)),
    )
    for key, value in (
        ("paths.manifest", paths.manifest),
        ("paths.cache_dir", paths.cache_dir),
        ("paths.out_dir", paths.out_dir),
    ):
        if not value:
            raise ConfigError(key, "must be nonempty")

    raw_positive = merged.get("positive_class", QualityLabel.REJECT.value)
    try:
        positive = QualityLabel(raw_positive)
    except ValueError:
        raise ConfigError("positive_class", f"must be accept or reject, got {raw_positive!r}") from None

    ensemble_k = merged.get("ensemble_k")
    if ensemble_k is not None:
        ensemble_k = _coerce_int("ensemble_k", ensemble_k)
        if ensemble_k < 2:
            raise ConfigError("ensemble_k", "must be >= 2 when set")

    return AppConfig(
        provider_kind=kind,
        provider=provider,
        paths=paths,
        positive_class=positive,
        ensemble_k=ensemble_k,
        prompt_version=str(merged.get("prompt_version", PROMPT_VERSION)),
    )
