from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from src.pcpe.exceptions import (
    DanglingBindingError,
    DuplicateIdError,
    InvalidInputError,
)
from .datastream import DataStream
from .disseminator import Disseminator
from .identifiers import check_identifier
from .policy_binding import InlinePolicy, GroupPolicy, PolicyBinding


@dataclass(frozen=True)
class DigitalObject:
    """
    A Digital Object: a container of datastreams, the disseminators
    plugged into it and the policy bound to each disseminator.
    Values are immutable; mutations build new objects.
    """

    id: str
    label: str
    datastreams: Mapping[str, DataStream] = field(default_factory=dict)
    disseminators: tuple[Disseminator, ...] = ()
    policy_bindings: Mapping[str, PolicyBinding] = field(default_factory=dict)
    # disseminator id -> policy binding

    def __post_init__(self):
        object.__setattr__(self, "datastreams", MappingProxyType(dict(self.datastreams)))
        object.__setattr__(self, "disseminators", tuple(self.disseminators))
        object.__setattr__(
            self, "policy_bindings", MappingProxyType(dict(self.policy_bindings))
        )
        self._validate_id()
        self._validate_label()
        self._validate_datastreams()
        self._validate_disseminators()
        self._validate_policy_bindings()

    def _validate_id(self):
        check_identifier(self.id, "objeto")

    def _validate_label(self):
        if not isinstance(self.label, str):
            raise InvalidInputError("La etiqueta del objeto debe ser un texto.", "label")

    def _validate_datastreams(self):
        """
        Keys must equal the id of the stream they hold.
        """

        for key, ds in self.datastreams.items():
            if not isinstance(ds, DataStream):
                raise InvalidInputError("Los DataStreams deben ser de tipo DataStream.")
            if key != ds.id:
                raise InvalidInputError(
                    f"La clave {key} no coincide con el DataStream {ds.id}."
                )

    def _validate_disseminators(self):
        """
        Disseminator ids are unique and every binding target exists.
        """

        seen: set[str] = set()
        for dissem in self.disseminators:
            if not isinstance(dissem, Disseminator):
                raise InvalidInputError(
                    "Los diseminadores deben ser de tipo Disseminator."
                )
            if dissem.id in seen:
                raise DuplicateIdError("diseminador", dissem.id)
            seen.add(dissem.id)
            for ds_id in dissem.binding.values():
                if ds_id not in self.datastreams:
                    raise DanglingBindingError(f"Diseminador {dissem.id}", ds_id)

    def _validate_policy_bindings(self):
        """
        At most one policy per disseminator; inline policies must live
        in this object.
        """

        dissem_ids = {d.id for d in self.disseminators}
        for dissem_id, binding in self.policy_bindings.items():
            if dissem_id not in dissem_ids:
                raise InvalidInputError(
                    f"La política está asociada al diseminador {dissem_id}, que no existe.",
                    "policy_bindings",
                )
            if not isinstance(binding, (InlinePolicy, GroupPolicy)):
                raise InvalidInputError("Tipo de asociación de política desconocido.")
            if isinstance(binding, InlinePolicy) and binding.ds_id not in self.datastreams:
                raise DanglingBindingError(f"Política de {dissem_id}", binding.ds_id)

    def __hash__(self):
        return hash((self.id, self.label, self.disseminators))

    def get_disseminator(self, disseminator_id: str) -> Disseminator | None:
        for dissem in self.disseminators:
            if dissem.id == disseminator_id:
                return dissem
        return None
