from dataclasses import dataclass

from src.pcpe.exceptions import InvalidInputError
from .identifiers import check_identifier

PARAM_TYPES = ("int", "string")


@dataclass(frozen=True)
class Param:
    name: str
    type: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise InvalidInputError("El nombre del parámetro no puede estar vacío.")
        if self.type not in PARAM_TYPES:
            raise InvalidInputError(
                f"El tipo del parámetro {self.name} debe ser int o string.", "type"
            )


@dataclass(frozen=True)
class MethodSignature:
    """
    One method of a behavior interface: its parameters and the mime
    type of what it returns.
    """

    name: str
    params: tuple[Param, ...] = ()
    returns: str = "application/octet-stream"

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise InvalidInputError("El nombre del método no puede estar vacío.")
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise InvalidInputError(
                f"El método {self.name} repite nombres de parámetro.", "params"
            )

    def param_type(self, name: str) -> str | None:
        for param in self.params:
            if param.name == name:
                return param.type
        return None


@dataclass(frozen=True)
class BehaviorInterface:
    """
    A formally defined behavior interface: the set of methods a
    disseminator of this kind exposes.
    """

    id: str
    methods: tuple[MethodSignature, ...] = ()

    def __post_init__(self):
        check_identifier(self.id, "interfaz")
        names = [m.name for m in self.methods]
        if len(names) != len(set(names)):
            raise InvalidInputError(
                f"La interfaz {self.id} repite nombres de método.", "methods"
            )

    @property
    def method_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.methods)

    def get_method(self, name: str) -> MethodSignature | None:
        for method in self.methods:
            if method.name == name:
                return method
        return None


def interface_to_dict(interface: BehaviorInterface) -> dict:
    """
    Canonical JSON shape of an interface registry entry.
    """

    return {
        "id": interface.id,
        "methods": [
            {
                "name": m.name,
                "params": [{"name": p.name, "type": p.type} for p in m.params],
                "returns": m.returns,
            }
            for m in interface.methods
        ],
    }


def interface_from_dict(data: dict) -> BehaviorInterface:
    try:
        return BehaviorInterface(
            id=data["id"],
            methods=tuple(
                MethodSignature(
                    name=m["name"],
                    params=tuple(
                        Param(p["name"], p["type"]) for p in m.get("params", [])
                    ),
                    returns=m.get("returns", "application/octet-stream"),
                )
                for m in data.get("methods", [])
            ),
        )
    except (KeyError, TypeError) as e:
        raise InvalidInputError(f"Definición de interfaz incompleta: {e}") from e
