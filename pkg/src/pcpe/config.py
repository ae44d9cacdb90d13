import logging
import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from src.pcpe.exceptions import InvalidInputError
from .automaton import ViolationMode

DEFAULT_ROOT = "data/repository"
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8765


@dataclass(frozen=True)
class Settings:
    """
    Runtime settings of a repository deployment, read from the
    environment (and a .env file when present).
    """

    root: Path = Path(DEFAULT_ROOT)
    violation_mode: ViolationMode = ViolationMode.DENY_REQUEST
    log_level: str = "WARNING"
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        self._validate_log_level()
        self._validate_port()

    def _validate_log_level(self):
        if not isinstance(logging.getLevelName(self.log_level.upper()), int):
            raise InvalidInputError(
                f"PCPE_LOG_LEVEL '{self.log_level}' no es un nivel válido.",
                "PCPE_LOG_LEVEL",
            )
        object.__setattr__(self, "log_level", self.log_level.upper())

    def _validate_port(self):
        if not 0 < self.port < 65536:
            raise InvalidInputError(
                f"PCPE_PORT {self.port} está fuera de rango.", "PCPE_PORT"
            )

    def with_root(self, root: str | Path | None) -> "Settings":
        if root is None:
            return self
        return Settings(root, self.violation_mode, self.log_level, self.host, self.port)


def load_settings() -> Settings:
    load_dotenv()
    mode = os.environ.get("PCPE_VIOLATION_MODE", ViolationMode.DENY_REQUEST.value)
    try:
        violation_mode = ViolationMode(mode)
    except ValueError as e:
        raise InvalidInputError(
            f"PCPE_VIOLATION_MODE debe ser deny-request o kill-session, no '{mode}'.",
            "PCPE_VIOLATION_MODE",
        ) from e
    port = os.environ.get("PCPE_PORT", str(DEFAULT_PORT))
    if not port.isdigit():
        raise InvalidInputError(f"PCPE_PORT '{port}' no es un número.", "PCPE_PORT")
    return Settings(
        root=Path(os.environ.get("PCPE_ROOT", DEFAULT_ROOT)),
        violation_mode=violation_mode,
        log_level=os.environ.get("PCPE_LOG_LEVEL", "WARNING"),
        host=os.environ.get("PCPE_HOST", DEFAULT_HOST),
        port=int(port),
    )
