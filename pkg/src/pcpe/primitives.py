from .models import BehaviorInterface, MethodSignature, Param

PRIMITIVE_INTERFACE_ID = "pcpe:primitive"

READ_PRIMITIVES = ("GetObjectProfile", "ListDisseminators", "ListMethods", "GetDissemination")
MUTATING_PRIMITIVES = ("AddDataStream", "DeleteDataStream", "AddDisseminator", "DeleteDisseminator")
PRIMITIVE_METHODS = READ_PRIMITIVES + MUTATING_PRIMITIVES


def _sig(name: str, *params: str) -> MethodSignature:
    return MethodSignature(
        name, tuple(Param(p, "string") for p in params), "application/json"
    )


PRIMITIVE_INTERFACE = BehaviorInterface(
    id=PRIMITIVE_INTERFACE_ID,
    methods=(
        _sig("GetObjectProfile"),
        _sig("ListDisseminators"),
        _sig("ListMethods", "disseminatorId"),
        _sig("GetDissemination", "disseminatorId", "method"),
        _sig("AddDataStream", "dsId", "mimeType"),
        _sig("DeleteDataStream", "dsId"),
        _sig("AddDisseminator", "disseminatorId"),
        _sig("DeleteDisseminator", "disseminatorId"),
    ),
)
