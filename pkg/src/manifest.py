"""Run manifests written next to every output set."""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .utils import load_json_file, save_json_file

MANIFEST_NAME = "manifest.json"


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class RunManifest:
    """Command, resolved parameters and produced files of one CLI run."""

    command: str
    params: dict[str, Any]
    version: str
    seeds: list[int] = field(default_factory=list)
    started_at: str = field(default_factory=utc_now)
    finished_at: Optional[str] = None
    outputs: list[str] = field(default_factory=list)

    def add_output(self, path: Path) -> Path:
        name = Path(path).name
        if name not in self.outputs:
            self.outputs.append(name)
        return path

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "version": self.version,
            "seeds": self.seeds,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": self.outputs,
        }

    def write(self, out_dir: Path) -> Path:
        """Stamp the finish time and write ``manifest.json`` atomically."""
        self.finished_at = utc_now()
        return save_json_file(self.to_dict(), Path(out_dir) / MANIFEST_NAME)

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        """Read a manifest file or the manifest inside a directory.

        Raises:
            FileNotFoundError: If the manifest does not exist
            ConfigError: If it lacks the command or parameters
        """
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            data = load_json_file(path)
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        try:
            return cls(
                command=data["command"],
                params=dict(data["params"]),
                version=data.get("version", ""),
                seeds=list(data.get("seeds", [])),
                started_at=data.get("started_at", ""),
                finished_at=data.get("finished_at"),
                outputs=list(data.get("outputs", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: not a run manifest ({exc})") from exc
