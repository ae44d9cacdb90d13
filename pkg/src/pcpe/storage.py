import json
import os
import tempfile
from pathlib import Path
from typing import Protocol

from src.pcpe.exceptions import InvalidInputError
from .canonical import canonical_dumps
from .models import (
    BehaviorInterface,
    DigitalObject,
    MechanismModule,
    ScopeRecord,
    Session,
)
from .models.identifiers import check_identifier
from .models.interface import interface_from_dict, interface_to_dict
from .models.mechanism import mechanism_from_dict, mechanism_to_dict
from .objects import canonical_object_bytes, object_from_dict


class Database(Protocol):
    """
    Storage contract of the repository; services only talk to this,
    never to the file layout.
    """

    def get_object(self, object_id: str) -> DigitalObject | None: ...
    def save_object(self, obj: DigitalObject) -> None: ...
    def list_object_ids(self) -> list[str]: ...
    def get_default_policy(self) -> str | None: ...
    def save_default_policy(self, text: str) -> None: ...
    def get_group_policy(self, group_id: str) -> str | None: ...
    def save_group_policy(self, group_id: str, text: str) -> None: ...
    def list_group_ids(self) -> list[str]: ...
    def get_session(self, session_id: str) -> Session | None: ...
    def save_session(self, session: Session) -> None: ...
    def get_interface(self, interface_id: str) -> BehaviorInterface | None: ...
    def save_interface(self, interface: BehaviorInterface) -> None: ...
    def list_interfaces(self) -> list[BehaviorInterface]: ...
    def get_mechanism(self, mechanism_id: str) -> MechanismModule | None: ...
    def save_mechanism(self, mechanism: MechanismModule) -> None: ...
    def list_mechanisms(self) -> list[MechanismModule]: ...


class FileStorage:
    """
    One canonical file per entity under a root directory:

        objects/<id>.json, policies/default.pol, policies/groups/<gid>.pol,
        sessions/<sid>.json, registry/{interfaces,mechanisms}/<id>.json

    Every write goes to a temporary file that then replaces the target.
    """

    def __init__(self, root: str | Path = "data/repository") -> None:
        self.root: Path = Path(root)

    def _path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def _write_atomic(self, path: Path, data: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise

    def _read_json(self, path: Path) -> dict | None:
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InvalidInputError(f"Archivo corrupto {path}: {e}") from e

    def _ids_in(self, *parts: str, suffix: str) -> list[str]:
        folder = self._path(*parts)
        if not folder.is_dir():
            return []
        return sorted(p.name[: -len(suffix)] for p in folder.glob(f"*{suffix}"))

    def get_object(self, object_id: str) -> DigitalObject | None:
        check_identifier(object_id, "objeto")
        data = self._read_json(self._path("objects", f"{object_id}.json"))
        return object_from_dict(data) if data is not None else None

    def save_object(self, obj: DigitalObject) -> None:
        self._write_atomic(
            self._path("objects", f"{obj.id}.json"), canonical_object_bytes(obj)
        )

    def list_object_ids(self) -> list[str]:
        return self._ids_in("objects", suffix=".json")

    def get_default_policy(self) -> str | None:
        path = self._path("policies", "default.pol")
        return path.read_text(encoding="utf-8") if path.exists() else None

    def save_default_policy(self, text: str) -> None:
        self._write_atomic(self._path("policies", "default.pol"), text.encode("utf-8"))

    def get_group_policy(self, group_id: str) -> str | None:
        check_identifier(group_id, "grupo")
        path = self._path("policies", "groups", f"{group_id}.pol")
        return path.read_text(encoding="utf-8") if path.exists() else None

    def save_group_policy(self, group_id: str, text: str) -> None:
        check_identifier(group_id, "grupo")
        self._write_atomic(
            self._path("policies", "groups", f"{group_id}.pol"), text.encode("utf-8")
        )

    def list_group_ids(self) -> list[str]:
        return self._ids_in("policies", "groups", suffix=".pol")

    def get_session(self, session_id: str) -> Session | None:
        check_identifier(session_id, "sesión")
        data = self._read_json(self._path("sessions", f"{session_id}.json"))
        if data is None:
            return None
        scopes = {}
        for key, record in data.get("scopes", {}).items():
            object_id, _, scope_key = key.partition("/")
            scopes[(object_id, scope_key)] = ScopeRecord(
                policy_hash=record["policyHash"],
                state=record.get("state", {}),
                killed=record.get("killed", False),
            )
        return Session(data["id"], scopes)

    def save_session(self, session: Session) -> None:
        scopes = {
            f"{object_id}/{scope_key}": {
                "policyHash": record.policy_hash,
                "state": record.state,
                "killed": record.killed,
            }
            for (object_id, scope_key), record in sorted(session.scopes.items())
        }
        self._write_atomic(
            self._path("sessions", f"{session.id}.json"),
            canonical_dumps({"id": session.id, "scopes": scopes}),
        )

    def get_interface(self, interface_id: str) -> BehaviorInterface | None:
        check_identifier(interface_id, "interfaz")
        data = self._read_json(self._path("registry", "interfaces", f"{interface_id}.json"))
        return interface_from_dict(data) if data is not None else None

    def save_interface(self, interface: BehaviorInterface) -> None:
        self._write_atomic(
            self._path("registry", "interfaces", f"{interface.id}.json"),
            canonical_dumps(interface_to_dict(interface)),
        )

    def list_interfaces(self) -> list[BehaviorInterface]:
        return [
            self.get_interface(i)
            for i in self._ids_in("registry", "interfaces", suffix=".json")
        ]

    def get_mechanism(self, mechanism_id: str) -> MechanismModule | None:
        check_identifier(mechanism_id, "mecanismo")
        data = self._read_json(self._path("registry", "mechanisms", f"{mechanism_id}.json"))
        return mechanism_from_dict(data) if data is not None else None

    def save_mechanism(self, mechanism: MechanismModule) -> None:
        self._write_atomic(
            self._path("registry", "mechanisms", f"{mechanism.id}.json"),
            canonical_dumps(mechanism_to_dict(mechanism)),
        )

    def list_mechanisms(self) -> list[MechanismModule]:
        return [
            self.get_mechanism(i)
            for i in self._ids_in("registry", "mechanisms", suffix=".json")
        ]
