"""The ``section.key = value`` run-config format."""
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from pydantic import ValidationError

from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import ConfigError
from gsgw.repositories.base import BaseRepository, PathLike
from gsgw.schemas.run import RunConfig

logger = get_logger(__name__)

RawConfig = Dict[str, Dict[str, str]]


def parse_config_text(text: str, source: str = "<config>") -> RawConfig:
    """
    Split config text into {section: {key: raw value}}.

    ``#`` starts a comment; blank lines are ignored; values keep their text
    (whitespace around commas normalized).

    Raises:
        ConfigError: On a malformed or duplicate key, with its line number
    """
    raw: RawConfig = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{source}: line {number}: expected 'section.key = value'")
        key, value = (part.strip() for part in content.split("=", 1))
        section, dot, name = key.partition(".")
        if not dot or not section or not name or "." in name:
            raise ConfigError(f"{source}: line {number}: key {key!r} must look like section.key")
        bucket = raw.setdefault(section, {})
        if name in bucket:
            raise ConfigError(f"{source}: line {number}: duplicate key {key!r}")
        bucket[name] = ", ".join(item.strip() for item in value.split(",")) if "," in value else value
    return raw


def canonical_text(raw: RawConfig) -> str:
    """Sections and keys sorted, one ``section.key = value`` per line."""
    lines = []
    for section in sorted(raw):
        for key in sorted(raw[section]):
            lines.append(f"{section}.{key} = {raw[section][key]}")
    return "".join(f"{line}\n" for line in lines)


def config_hash(raw: RawConfig) -> str:
    return hashlib.sha256(canonical_text(raw).encode("utf-8")).hexdigest()


def build_run_config(raw: RawConfig, base_dir: Path, source: str = "<config>") -> RunConfig:
    """
    Validate raw sections and anchor relative paths at base_dir.

    Raises:
        ConfigError: On an unknown section, unknown key or invalid value
    """
    unknown = sorted(set(raw) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"{source}: unknown sections {unknown}")
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"{source}: {problems}") from exc
    return config.resolve_paths(base_dir)


@dataclass(frozen=True)
class LoadedConfig:
    config: RunConfig
    raw: RawConfig
    canonical: str
    hash: str
    path: Optional[Path] = None


class ConfigRepository(BaseRepository):
    """Loads run configs; relative paths inside resolve against the config's directory."""

    def load(self, name: PathLike) -> LoadedConfig:
        path = self.resolve(name)
        raw = parse_config_text(self.read_text(path), str(path))
        config = build_run_config(raw, path.parent, str(path))
        digest = config_hash(raw)
        logger.info(f"Loaded config {digest[:12]}", extra={"path": str(path)})
        return LoadedConfig(config, raw, canonical_text(raw), digest, path)

    def save(self, name: PathLike, raw: RawConfig) -> Path:
        return self.write_text(name, canonical_text(raw))
