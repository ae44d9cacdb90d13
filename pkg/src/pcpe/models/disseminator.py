from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from src.pcpe.exceptions import InvalidInputError
from .identifiers import check_identifier


@dataclass(frozen=True)
class Disseminator:
    """
    A pluggable association of a behavior interface, a mechanism and
    the datastreams the mechanism slots are bound to.
    """

    id: str
    interface_id: str
    mechanism_id: str
    binding: Mapping[str, str] = field(default_factory=dict)
    # slot name -> datastream id

    def __post_init__(self):
        check_identifier(self.id, "diseminador")
        check_identifier(self.interface_id, "interfaz")
        check_identifier(self.mechanism_id, "mecanismo")
        self._validate_binding()
        object.__setattr__(self, "binding", MappingProxyType(dict(self.binding)))

    def _validate_binding(self):
        if not isinstance(self.binding, Mapping):
            raise InvalidInputError(
                f"Los enlaces del diseminador {self.id} deben ser un mapa.", "binding"
            )
        for slot, ds_id in self.binding.items():
            if not isinstance(slot, str) or not slot.strip():
                raise InvalidInputError(
                    f"El diseminador {self.id} tiene un slot vacío.", "binding"
                )
            check_identifier(ds_id, "DataStream")

    def __hash__(self):
        return hash((self.id, self.interface_id, self.mechanism_id))
