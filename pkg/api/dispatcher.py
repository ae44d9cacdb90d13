import base64
import binascii
import logging
from typing import Any, Callable

from pydantic import ValidationError

from src.pcpe.exceptions import InvalidInputError, PCPEError
from src.pcpe.models import Principal
from src.pcpe.objects import binding_from_dict
from src.pcpe.services import Services
from src.pcpe.weaver import PolicyViolation
from src.pcpe.wire import error_to_wire, principal_from_wire, to_wire, violation_to_wire
from .schemas.wire import WireError, WireRequest, WireResponse

logger = logging.getLogger(__name__)

Handler = Callable[[Services, dict, Principal, str], Any]


def _param(params: dict, name: str, kind: type = str) -> Any:
    if name not in params:
        raise InvalidInputError(f"Falta el parámetro {name}.", name)
    value = params[name]
    if not isinstance(value, kind):
        raise InvalidInputError(f"El parámetro {name} tiene un tipo inválido.", name)
    return value


def _get_object(services, params, principal, session_id):
    return services.repository.get_object(_param(params, "objectId"))


def _list_disseminators(services, params, principal, session_id):
    return services.repository.invoke_primitive(
        _param(params, "objectId"), "ListDisseminators", {}, principal, session_id
    )


def _disseminate(services, params, principal, session_id):
    return services.repository.disseminate(
        _param(params, "objectId"),
        _param(params, "disseminatorId"),
        _param(params, "method"),
        _param(params, "args", dict) if "args" in params else {},
        principal,
        session_id,
    )


def _primitive(services, params, principal, session_id):
    return services.repository.invoke_primitive(
        _param(params, "objectId"),
        _param(params, "method"),
        _param(params, "args", dict) if "args" in params else {},
        principal,
        session_id,
    )


def _set_default_policy(services, params, principal, session_id):
    services.repository.set_default_policy(_param(params, "text"))


def _register_group_policy(services, params, principal, session_id):
    services.repository.register_group_policy(
        _param(params, "groupId"), _param(params, "text")
    )


def _attach_policy(services, params, principal, session_id):
    services.repository.attach_policy(
        _param(params, "objectId"),
        _param(params, "disseminatorId"),
        binding_from_dict(_param(params, "binding", dict)),
    )


def _export_object(services, params, principal, session_id):
    package = services.portability.export_object(_param(params, "objectId"))
    return {"packageBase64": base64.b64encode(package.to_bytes()).decode("ascii")}


def _import_object(services, params, principal, session_id):
    try:
        data = base64.b64decode(_param(params, "packageBase64"), validate=True)
    except binascii.Error as e:
        raise InvalidInputError(f"Paquete base64 inválido: {e}", "packageBase64") from e
    return {"objectId": services.portability.import_object(data)}


def _show_session(services, params, principal, session_id):
    return services.repository.show_session(params.get("sessionId", session_id))


OPERATIONS: dict[str, Handler] = {
    "getObject": _get_object,
    "listDisseminators": _list_disseminators,
    "disseminate": _disseminate,
    "primitive": _primitive,
    "setDefaultPolicy": _set_default_policy,
    "registerGroupPolicy": _register_group_policy,
    "attachPolicy": _attach_policy,
    "exportObject": _export_object,
    "importObject": _import_object,
    "showSession": _show_session,
}


def _failure(kind: str, message: str, detail: dict | None = None) -> dict:
    error = WireError(kind=kind, message=message, detail=detail or {})
    return WireResponse(ok=False, error=error).model_dump(exclude_none=True)


def dispatch(services: Services, payload: Any) -> dict:
    """
    Answers one WireRequest with one WireResponse (as plain dicts).
    Denials and faults both come back as ok:false, never as exceptions.
    """

    try:
        request = WireRequest.model_validate(payload)
    except ValidationError as e:
        return _failure(
            "BadRequest", f"Solicitud mal formada: {e.error_count()} errores."
        )
    handler = OPERATIONS.get(request.op)
    if handler is None:
        return _failure("BadRequest", f"Operación desconocida: {request.op}")
    try:
        principal = principal_from_wire(
            request.principal.model_dump() if request.principal else None
        )
        result = handler(services, request.params, principal, request.sessionId)
    except PCPEError as e:
        logger.info("Request %s failed: %s", request.op, e)
        error = error_to_wire(e)
        return _failure(error["kind"], error["message"], error["detail"])
    except (TypeError, ValueError, AttributeError) as e:
        logger.warning("Request %s has malformed params: %s", request.op, e)
        return _failure("BadRequest", f"Parámetros inválidos para {request.op}.")
    if isinstance(result, PolicyViolation):
        error = violation_to_wire(result)
        return _failure(error["kind"], error["message"], error["detail"])
    return {"ok": True, "result": to_wire(result)}
