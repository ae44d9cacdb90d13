"""
JSON shapes shared by the CLI `--json` output and the HTTP service, so
both surfaces report identical results for identical requests.
"""

import base64
from typing import Any

from src.pcpe.exceptions import InvalidInputError, PCPEError
from .models import (
    DigitalObject,
    DisseminationResult,
    MethodSignature,
    Principal,
    Receipt,
    Session,
)
from .objects import DisseminatorDescriptor, ObjectProfile, object_to_dict
from .weaver import PolicyViolation


def signature_to_wire(signature: MethodSignature) -> dict:
    return {
        "name": signature.name,
        "params": [{"name": p.name, "type": p.type} for p in signature.params],
        "returns": signature.returns,
    }


def to_wire(value: Any) -> Any:
    match value:
        case DisseminationResult(mime_type=mime_type, payload=payload):
            return {
                "mimeType": mime_type,
                "payloadBase64": base64.b64encode(payload).decode("ascii"),
            }
        case DigitalObject():
            return object_to_dict(value)
        case ObjectProfile():
            return {
                "id": value.object_id,
                "label": value.label,
                "datastreams": [
                    {"id": ds_id, "mimeType": mime} for ds_id, mime in value.datastreams
                ],
                "disseminators": list(value.disseminator_ids),
            }
        case DisseminatorDescriptor():
            return {
                "disseminatorId": value.disseminator_id,
                "interfaceId": value.interface_id,
                "methods": [signature_to_wire(m) for m in value.methods],
            }
        case MethodSignature():
            return signature_to_wire(value)
        case Session():
            return {
                "id": value.id,
                "scopes": {
                    f"{object_id}/{scope}": {
                        "policyHash": record.policy_hash,
                        "state": record.state,
                        "killed": record.killed,
                    }
                    for (object_id, scope), record in sorted(value.scopes.items())
                },
            }
        case bytes():
            return base64.b64encode(value).decode("ascii")
        case list() | tuple():
            return [to_wire(v) for v in value]
        case dict():
            return {k: to_wire(v) for k, v in value.items()}
    return value


def violation_to_wire(violation: PolicyViolation) -> dict:
    halt = violation.halt
    return {
        "kind": "PolicyViolation",
        "message": violation.message,
        "detail": {
            "scope": violation.scope,
            "policyId": halt.policy_id,
            "handlerId": halt.handler_id,
            "guard": halt.guard,
            "line": halt.line,
        },
    }


def error_kind(error: Exception) -> str:
    if isinstance(error, InvalidInputError) or not isinstance(error, PCPEError):
        return "BadRequest"
    return type(error).__name__.removesuffix("Error")


def error_to_wire(error: Exception) -> dict:
    detail: dict = {}
    if hasattr(error, "diagnostics"):
        detail["diagnostics"] = [
            {"kind": d.kind, "message": d.message, "line": d.line, "column": d.column}
            for d in error.diagnostics
        ]
    if isinstance(error, InvalidInputError) and error.field:
        detail["field"] = error.field
    return {"kind": error_kind(error), "message": str(error), "detail": detail}


def principal_from_wire(data: Any) -> Principal:
    """
    Builds a Principal from `{name, credentials, receipts:[{name, amountCents}]}`.
    A missing principal is the anonymous one.
    """

    if data is None:
        return Principal()
    if not isinstance(data, dict):
        raise InvalidInputError("El principal debe ser un objeto.", "principal")
    try:
        receipts = tuple(
            Receipt(r["name"], r["amountCents"]) for r in data.get("receipts", [])
        )
        credentials = data.get("credentials", [])
        if not isinstance(credentials, list):
            raise InvalidInputError("Las credenciales deben ser una lista.", "principal")
        return Principal(
            name=data.get("name", "anonymous"),
            credentials=frozenset(credentials),
            receipts=receipts,
        )
    except (KeyError, TypeError) as e:
        raise InvalidInputError(f"Principal inválido: {e}", "principal") from e
