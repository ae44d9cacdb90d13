import base64
import binascii
from dataclasses import dataclass
from typing import Callable, Mapping

from src.pcpe.exceptions import (
    BindingWouldDangleError,
    DuplicateIdError,
    InvalidInputError,
    ResolutionFailureError,
    UnknownDataStreamError,
    UnknownTargetError,
)
from .canonical import canonical_dumps
from .models import (
    BehaviorInterface,
    DataStream,
    DigitalObject,
    Disseminator,
    GroupPolicy,
    InlinePolicy,
    MethodSignature,
    PolicyBinding,
)

Resolver = Callable[[str], bytes]
# Receives the raw locator string of a reference datastream.


def build_object(
    id: str,
    datastreams: list[DataStream],
    disseminators: list[Disseminator],
    label: str,
    policy_bindings: Mapping[str, PolicyBinding] | None = None,
) -> DigitalObject:
    """
    Builds a validated Digital Object out of loose parts; duplicated
    datastream ids are reported here because a map would hide them.
    """

    streams: dict[str, DataStream] = {}
    for ds in datastreams:
        if ds.id in streams:
            raise DuplicateIdError("DataStream", ds.id)
        streams[ds.id] = ds
    return DigitalObject(
        id=id,
        label=label,
        datastreams=streams,
        disseminators=tuple(disseminators),
        policy_bindings=dict(policy_bindings or {}),
    )


def resolve_datastream(obj: DigitalObject, ds_id: str, resolver: Resolver) -> bytes:
    """
    Returns the bytes of a datastream: inline payloads verbatim,
    references through the resolver.
    """

    ds = obj.datastreams.get(ds_id)
    if ds is None:
        raise UnknownDataStreamError(obj.id, ds_id)
    if ds.inline is not None:
        return ds.inline
    try:
        data = resolver(ds.reference)
    except ResolutionFailureError:
        raise
    except Exception as e:
        raise ResolutionFailureError(ds.reference, str(e)) from e
    if not isinstance(data, bytes):
        raise ResolutionFailureError(ds.reference, "el resolvedor no devolvió bytes")
    return data


@dataclass(frozen=True)
class DisseminatorDescriptor:
    disseminator_id: str
    interface_id: str
    methods: tuple[MethodSignature, ...]


def list_disseminators(
    obj: DigitalObject, interfaces: Mapping[str, BehaviorInterface]
) -> list[DisseminatorDescriptor]:
    """
    One descriptor per disseminator, in object order, with the full
    method signatures of its interface (empty if unregistered).
    """

    descriptors = []
    for dissem in obj.disseminators:
        interface = interfaces.get(dissem.interface_id)
        methods = interface.methods if interface is not None else ()
        descriptors.append(
            DisseminatorDescriptor(dissem.id, dissem.interface_id, tuple(methods))
        )
    return descriptors


@dataclass(frozen=True)
class AddDataStream:
    datastream: DataStream


@dataclass(frozen=True)
class DeleteDataStream:
    ds_id: str


@dataclass(frozen=True)
class AddDisseminator:
    disseminator: Disseminator


@dataclass(frozen=True)
class DeleteDisseminator:
    disseminator_id: str


Mutation = AddDataStream | DeleteDataStream | AddDisseminator | DeleteDisseminator


def apply_primitive_mutation(obj: DigitalObject, op: Mutation) -> DigitalObject:
    """
    The unmediated state transition behind the mutating primitive
    methods. Returns a new object; `obj` is never touched.
    """

    streams = dict(obj.datastreams)
    dissems = list(obj.disseminators)
    bindings = dict(obj.policy_bindings)

    match op:
        case AddDataStream(datastream=ds):
            if ds.id in streams:
                raise DuplicateIdError("DataStream", ds.id)
            streams[ds.id] = ds
        case DeleteDataStream(ds_id=ds_id):
            if ds_id not in streams:
                raise UnknownTargetError("DataStream", ds_id)
            _ensure_unused(obj, ds_id)
            del streams[ds_id]
        case AddDisseminator(disseminator=dissem):
            if obj.get_disseminator(dissem.id) is not None:
                raise DuplicateIdError("diseminador", dissem.id)
            dissems.append(dissem)
        case DeleteDisseminator(disseminator_id=dissem_id):
            if obj.get_disseminator(dissem_id) is None:
                raise UnknownTargetError("diseminador", dissem_id)
            dissems = [d for d in dissems if d.id != dissem_id]
            bindings.pop(dissem_id, None)
        case _:
            raise InvalidInputError(f"Mutación desconocida: {op!r}")

    return DigitalObject(
        id=obj.id,
        label=obj.label,
        datastreams=streams,
        disseminators=tuple(dissems),
        policy_bindings=bindings,
    )


def _ensure_unused(obj: DigitalObject, ds_id: str) -> None:
    for dissem in obj.disseminators:
        if ds_id in dissem.binding.values():
            raise BindingWouldDangleError(ds_id, f"el diseminador {dissem.id}")
    for dissem_id, binding in obj.policy_bindings.items():
        if isinstance(binding, InlinePolicy) and binding.ds_id == ds_id:
            raise BindingWouldDangleError(ds_id, f"la política de {dissem_id}")


def datastream_to_dict(ds: DataStream) -> dict:
    data: dict = {"id": ds.id, "mimeType": ds.mime_type}
    if ds.inline is not None:
        data["inlineBase64"] = base64.b64encode(ds.inline).decode("ascii")
    else:
        data["reference"] = ds.reference
    return data


def datastream_from_dict(data: dict) -> DataStream:
    try:
        if "inlineBase64" in data:
            payload = base64.b64decode(data["inlineBase64"], validate=True)
            return DataStream(data["id"], data["mimeType"], inline=payload)
        return DataStream(data["id"], data["mimeType"], reference=data.get("reference"))
    except (KeyError, TypeError) as e:
        raise InvalidInputError(f"DataStream incompleto: {e}") from e
    except binascii.Error as e:
        raise InvalidInputError(f"Contenido base64 inválido: {e}") from e


def binding_to_dict(binding: PolicyBinding) -> dict:
    if isinstance(binding, InlinePolicy):
        return {"kind": "inline", "dsId": binding.ds_id}
    return {"kind": "group", "groupId": binding.group_id}


def binding_from_dict(data: dict) -> PolicyBinding:
    kind = data.get("kind") if isinstance(data, dict) else None
    if kind == "inline" and "dsId" in data:
        return InlinePolicy(data["dsId"])
    if kind == "group" and "groupId" in data:
        return GroupPolicy(data["groupId"])
    raise InvalidInputError(f"Asociación de política inválida: {data!r}")


def sorted_datastreams(obj: DigitalObject) -> list[DataStream]:
    return sorted(obj.datastreams.values(), key=lambda ds: ds.id)


def object_to_dict(obj: DigitalObject) -> dict:
    """
    Canonical JSON shape: fields in fixed order, map keys sorted and
    datastreams ordered by id. Disseminators keep object order, which
    is part of object equality.
    """

    return {
        "id": obj.id,
        "label": obj.label,
        "datastreams": [datastream_to_dict(ds) for ds in sorted_datastreams(obj)],
        "disseminators": [
            {
                "id": d.id,
                "interfaceId": d.interface_id,
                "mechanismId": d.mechanism_id,
                "binding": dict(sorted(d.binding.items())),
            }
            for d in obj.disseminators
        ],
        "policyBindings": {
            dissem_id: binding_to_dict(binding)
            for dissem_id, binding in sorted(obj.policy_bindings.items())
        },
    }


def object_from_dict(data: dict) -> DigitalObject:
    try:
        return build_object(
            id=data["id"],
            label=data.get("label", ""),
            datastreams=[datastream_from_dict(d) for d in data.get("datastreams", [])],
            disseminators=[
                Disseminator(
                    id=d["id"],
                    interface_id=d["interfaceId"],
                    mechanism_id=d["mechanismId"],
                    binding=d.get("binding", {}),
                )
                for d in data.get("disseminators", [])
            ],
            policy_bindings={
                dissem_id: binding_from_dict(b)
                for dissem_id, b in data.get("policyBindings", {}).items()
            },
        )
    except (KeyError, TypeError, AttributeError) as e:
        raise InvalidInputError(f"Definición de objeto incompleta: {e}") from e


def canonical_object_bytes(obj: DigitalObject) -> bytes:
    return canonical_dumps(object_to_dict(obj))


@dataclass(frozen=True)
class ObjectProfile:
    """
    What GetObjectProfile answers: the object's label and the ids and
    mime types of its parts, without content.
    """

    object_id: str
    label: str
    datastreams: tuple[tuple[str, str], ...]
    disseminator_ids: tuple[str, ...]


def object_profile(obj: DigitalObject) -> ObjectProfile:
    return ObjectProfile(
        obj.id,
        obj.label,
        tuple((ds.id, ds.mime_type) for ds in sorted_datastreams(obj)),
        tuple(d.id for d in obj.disseminators),
    )
