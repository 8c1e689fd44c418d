"""Configuration management for twochan."""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, TypeVar

from dotenv import load_dotenv

SUPPORTED_SOLVERS = ("CLARABEL", "SCS")
ENV_PREFIX = "TWOCHAN_"

T = TypeVar("T")


def _default_cache_dir() -> Path:
    return Path.home() / ".twochan" / "cache"


@dataclass
class Config:
    """Settings read from ``TWOCHAN_*`` environment variables.

    Values that fail to parse keep their default and are reported by
    ``validate()`` together with out-of-range values.
    """

    output_dir: Path = field(default_factory=lambda: Path("./output"))
    solver: str = "CLARABEL"
    sdp_tol: float = 1e-8
    cache_dir: Path = field(default_factory=_default_cache_dir)
    cache_ttl: int = 86400
    workers: int = 1
    debug: bool = False
    parse_errors: list[str] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.output_dir = Path(self.output_dir).expanduser()
        self.cache_dir = Path(self.cache_dir).expanduser()
        self.solver = self.solver.upper()

    @classmethod
    def from_env(cls, env_file: Optional[str] = None) -> "Config":
        """Load configuration from the environment, after reading a .env file.

        Args:
            env_file: Optional path to .env file (default: search upwards from the cwd)
        """
        if env_file:
            load_dotenv(env_file)
        else:
            load_dotenv()

        errors: list[str] = []
        defaults = cls()

        def read(name: str, parse: Callable[[str], T], default: T) -> T:
            raw = os.getenv(ENV_PREFIX + name)
            if raw is None or raw.strip() == "":
                return default
            try:
                return parse(raw.strip())
            except ValueError:
                errors.append(f"{ENV_PREFIX}{name}: cannot parse {raw!r}")
                return default

        return cls(
            output_dir=read("OUTPUT_DIR", Path, defaults.output_dir),
            solver=read("SOLVER", str, defaults.solver),
            sdp_tol=read("SDP_TOL", float, defaults.sdp_tol),
            cache_dir=read("CACHE_DIR", Path, defaults.cache_dir),
            cache_ttl=read("CACHE_TTL", int, defaults.cache_ttl),
            workers=read("WORKERS", int, defaults.workers),
            debug=read("DEBUG", lambda s: s.lower() in ("1", "true", "yes"), defaults.debug),
            parse_errors=errors,
        )

    def validate(self) -> list[str]:
        """Validate configuration values.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = list(self.parse_errors)

        if self.solver not in SUPPORTED_SOLVERS:
            errors.append(f"TWOCHAN_SOLVER must be one of {', '.join(SUPPORTED_SOLVERS)}, got {self.solver}")
        if not self.sdp_tol > 0:
            errors.append("TWOCHAN_SDP_TOL must be positive")
        if self.cache_ttl < 0:
            errors.append("TWOCHAN_CACHE_TTL must not be negative")
        if self.workers < 1:
            errors.append("TWOCHAN_WORKERS must be at least 1")

        return errors

    def ensure_output_dir(self, subdir: Optional[str] = None) -> Path:
        """Create the output directory (or a subdirectory of it) and return it."""
        path = self.output_dir / subdir if subdir else self.output_dir
        path.mkdir(parents=True, exist_ok=True)
        return path
