from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from src.pcpe.exceptions import InvalidInputError
from .identifiers import check_identifier


@dataclass(frozen=True)
class Select:
    """Fetch the datastream bound to a slot."""

    slot: str


@dataclass(frozen=True)
class SelectIndexed:
    """Fetch the slot named `<prefix><value of arg>`."""

    prefix: str
    arg: str


@dataclass(frozen=True)
class Concat:
    """Concatenate every output produced so far into one."""


@dataclass(frozen=True)
class Label:
    """Set the content type of the result."""

    mime_type: str


PipelineStep = Select | SelectIndexed | Concat | Label


@dataclass(frozen=True)
class MechanismMethod:
    pipeline: tuple[PipelineStep, ...]
    mime_type: str

    def __post_init__(self):
        object.__setattr__(self, "pipeline", tuple(self.pipeline))
        if not self.pipeline:
            raise InvalidInputError("El pipeline de un método no puede estar vacío.")
        if not isinstance(self.mime_type, str) or "/" not in self.mime_type:
            raise InvalidInputError("El tipo MIME del método no es válido.", "mimeType")


@dataclass(frozen=True)
class MechanismModule:
    """
    Declarative behavior implementation: one pipeline per interface
    method, reading datastreams through declared slots.
    """

    id: str
    interface_id: str
    method_table: Mapping[str, MechanismMethod] = field(default_factory=dict)
    slots: tuple[str, ...] = ()

    def __post_init__(self):
        check_identifier(self.id, "mecanismo")
        check_identifier(self.interface_id, "interfaz")
        object.__setattr__(self, "method_table", MappingProxyType(dict(self.method_table)))
        object.__setattr__(self, "slots", tuple(self.slots))
        if len(set(self.slots)) != len(self.slots):
            raise InvalidInputError(f"El mecanismo {self.id} repite slots.", "slots")

    def __hash__(self):
        return hash((self.id, self.interface_id, self.slots))


@dataclass(frozen=True)
class DisseminationResult:
    mime_type: str
    payload: bytes

    def __post_init__(self):
        if not self.mime_type:
            raise InvalidInputError("El resultado debe tener un tipo MIME.")


def step_to_dict(step: PipelineStep) -> dict:
    match step:
        case Select(slot=slot):
            return {"op": "select", "slot": slot}
        case SelectIndexed(prefix=prefix, arg=arg):
            return {"op": "selectIndexed", "prefix": prefix, "arg": arg}
        case Concat():
            return {"op": "concat"}
        case Label(mime_type=mime_type):
            return {"op": "label", "mimeType": mime_type}
    raise InvalidInputError(f"Paso de pipeline desconocido: {step!r}")


def step_from_dict(data: dict) -> PipelineStep:
    op = data.get("op")
    try:
        if op == "select":
            return Select(data["slot"])
        if op == "selectIndexed":
            return SelectIndexed(data["prefix"], data["arg"])
        if op == "concat":
            return Concat()
        if op == "label":
            return Label(data["mimeType"])
    except KeyError as e:
        raise InvalidInputError(f"Al paso {op} le falta el campo {e}.") from e
    raise InvalidInputError(f"Paso de pipeline desconocido: {op}")


def mechanism_to_dict(mechanism: MechanismModule) -> dict:
    """
    Canonical JSON shape of a mechanism definition file.
    """

    return {
        "id": mechanism.id,
        "interfaceId": mechanism.interface_id,
        "slots": list(mechanism.slots),
        "methods": {
            name: {
                "pipeline": [step_to_dict(s) for s in method.pipeline],
                "mimeType": method.mime_type,
            }
            for name, method in sorted(mechanism.method_table.items())
        },
    }


def mechanism_from_dict(data: dict) -> MechanismModule:
    try:
        return MechanismModule(
            id=data["id"],
            interface_id=data["interfaceId"],
            slots=tuple(data.get("slots", [])),
            method_table={
                name: MechanismMethod(
                    pipeline=tuple(step_from_dict(s) for s in spec["pipeline"]),
                    mime_type=spec.get("mimeType", "application/octet-stream"),
                )
                for name, spec in data.get("methods", {}).items()
            },
        )
    except (KeyError, TypeError, AttributeError) as e:
        raise InvalidInputError(f"Definición de mecanismo incompleta: {e}") from e
