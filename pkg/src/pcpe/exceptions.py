class PCPEError(Exception):
    """
    PCPEError class that inherits from Exception
    to create the repository-specific Exceptions.
    """

    pass


class InvalidInputError(PCPEError):
    """
    Exception raised when data given by a caller is not valid (Ex:
    empty ids, wrong types, malformed files, etc.)
    """

    def __init__(self, message: str, field: str | None = None):
        self.field: str | None = field
        super().__init__(message)


class ObjectModelError(PCPEError):
    """
    ObjectModelError class created to report Digital Object
    structure - related Errors.
    """

    pass


class DuplicateIdError(ObjectModelError):
    """
    Raised when a datastream or disseminator id collides with
    another one inside the same object.
    """

    def __init__(self, kind: str, item_id: str):
        self.kind: str = kind
        self.item_id: str = item_id
        super().__init__(f"El {kind} con ID {item_id} ya existe en el objeto.")


class DanglingBindingError(ObjectModelError):
    """
    Raised when a disseminator (or a policy binding) points to a
    datastream that is not part of the object.
    """

    def __init__(self, owner_id: str, ds_id: str):
        self.owner_id: str = owner_id
        self.ds_id: str = ds_id
        super().__init__(
            f"{owner_id} referencia el DataStream {ds_id}, que no existe en el objeto."
        )


class UnknownDataStreamError(ObjectModelError):
    """
    Class UnknownDataStreamError created to raise an Error if the
    datastream id does not exist in the object.
    """

    def __init__(self, object_id: str, ds_id: str):
        self.object_id: str = object_id
        self.ds_id: str = ds_id
        super().__init__(f"DataStream {ds_id} no encontrado en el objeto {object_id}.")


class ResolutionFailureError(ObjectModelError):
    """
    Raised when the resolver of a reference datastream fails; the
    locator is attached for diagnostics.
    """

    def __init__(self, locator: str, cause: str):
        self.locator: str = locator
        self.cause: str = cause
        super().__init__(f"No se pudo resolver la referencia {locator}: {cause}")


class UnknownTargetError(ObjectModelError):
    """
    Raised when a delete mutation targets something that is not there.
    """

    def __init__(self, kind: str, item_id: str):
        self.kind: str = kind
        self.item_id: str = item_id
        super().__init__(f"El {kind} con ID {item_id} no existe en el objeto.")


class BindingWouldDangleError(ObjectModelError):
    """
    Raised when deleting a datastream that a disseminator or a
    policy binding still uses.
    """

    def __init__(self, ds_id: str, used_by: str):
        self.ds_id: str = ds_id
        self.used_by: str = used_by
        super().__init__(
            f"No se puede eliminar el DataStream {ds_id}: lo usa {used_by}."
        )


class PolicyError(PCPEError):
    """
    PolicyError class created to report policy language and
    automaton - related Errors.
    """

    pass


class ParseError(PolicyError):
    """
    Raised by the policy parser; carries the position and the
    tokens that would have been accepted there.
    """

    def __init__(
        self, line: int, column: int, expected: tuple[str, ...], found: str = ""
    ):
        self.line: int = line
        self.column: int = column
        self.expected: tuple[str, ...] = tuple(expected)
        self.found: str = found
        options = ", ".join(self.expected) if self.expected else "?"
        super().__init__(
            f"Error de sintaxis en línea {line}, columna {column}: "
            f"se esperaba {options}, se encontró '{found}'."
        )


class CompileError(PolicyError):
    """
    Raised when an AST that skipped validation reaches the compiler.
    """

    def __init__(self, message: str):
        super().__init__(message)


class InvalidPolicyError(PolicyError):
    """
    Raised when a policy does not parse or does not validate for
    its scope. The diagnostics list is kept for callers.
    """

    def __init__(self, policy_name: str, diagnostics: list):
        self.policy_name: str = policy_name
        self.diagnostics: list = list(diagnostics)
        detail = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"La política {policy_name} no es válida: {detail}")


class StateSchemaMismatchError(PolicyError):
    """
    Raised when serialized automaton state does not fit the
    variables declared by the automaton.
    """

    def __init__(self, message: str):
        super().__init__(message)


class ScopeMismatchError(PolicyError):
    """
    Raised when an interface-scoped policy meets a mechanism or a
    disseminator of another interface.
    """

    def __init__(self, policy_interface: str, target_interface: str):
        self.policy_interface: str = policy_interface
        self.target_interface: str = target_interface
        super().__init__(
            f"La política es para la interfaz {policy_interface}, "
            f"pero el destino implementa {target_interface}."
        )


class MechanismError(PCPEError):
    """
    MechanismError class created to report behavior mechanism
    execution Errors.
    """

    pass


class UnknownMethodError(MechanismError):
    """
    Raised when a method is not part of the invoked interface.
    """

    def __init__(self, target: str, method: str):
        self.target: str = target
        self.method: str = method
        super().__init__(f"El método {method} no existe en {target}.")


class PipelineFailureError(MechanismError):
    """
    Raised when a pipeline fails after the monitor allowed it; this is
    a fault, never a denial.
    """

    def __init__(self, mechanism_id: str, method: str, cause: str):
        self.mechanism_id: str = mechanism_id
        self.method: str = method
        self.cause: str = cause
        super().__init__(f"Falló {mechanism_id}.{method}: {cause}")


class InvalidMechanismError(MechanismError):
    """
    Raised when a mechanism definition does not fit its interface.
    """

    def __init__(self, mechanism_id: str, message: str):
        self.mechanism_id: str = mechanism_id
        super().__init__(f"Mecanismo {mechanism_id} inválido: {message}")


class RepositoryError(PCPEError):
    """
    RepositoryError class created to report repository management Errors.
    """

    pass


class DuplicateObjectError(RepositoryError):
    def __init__(self, object_id: str):
        self.object_id: str = object_id
        super().__init__(f"El objeto {object_id} ya existe en el repositorio.")


class UnknownObjectError(RepositoryError):
    def __init__(self, object_id: str):
        self.object_id: str = object_id
        super().__init__(f"Objeto con ID {object_id} no encontrado.")


class UnknownDisseminatorError(RepositoryError):
    def __init__(self, object_id: str, disseminator_id: str):
        self.object_id: str = object_id
        self.disseminator_id: str = disseminator_id
        super().__init__(
            f"Diseminador {disseminator_id} no encontrado en el objeto {object_id}."
        )


class UnknownGroupError(RepositoryError):
    def __init__(self, group_id: str):
        self.group_id: str = group_id
        super().__init__(f"Política de grupo {group_id} no registrada.")


class UnknownInterfaceError(RepositoryError):
    def __init__(self, interface_id: str):
        self.interface_id: str = interface_id
        super().__init__(f"Interfaz {interface_id} no registrada.")


class UnknownMechanismError(RepositoryError):
    def __init__(self, mechanism_id: str):
        self.mechanism_id: str = mechanism_id
        super().__init__(f"Mecanismo {mechanism_id} no registrado.")


class InvalidPolicyBindingError(RepositoryError):
    """
    Raised when an object carries a policy binding that cannot be
    resolved or whose policy does not validate.
    """

    def __init__(self, object_id: str, disseminator_id: str, diagnostics: list):
        self.object_id: str = object_id
        self.disseminator_id: str = disseminator_id
        self.diagnostics: list = list(diagnostics)
        detail = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(
            f"La política asociada a {object_id}/{disseminator_id} no es válida: {detail}"
        )


class RegistryConflictError(RepositoryError):
    """
    Raised when an imported interface or mechanism differs from the
    one already registered under the same id.
    """

    def __init__(self, kind: str, item_id: str):
        self.kind: str = kind
        self.item_id: str = item_id
        super().__init__(
            f"El {kind} {item_id} ya está registrado con una definición distinta."
        )


class PortabilityError(PCPEError):
    """
    PortabilityError class created to report export / import Errors.
    """

    pass


class TamperDetectedError(PortabilityError):
    def __init__(self, message: str = "El digest del paquete no coincide."):
        super().__init__(f"Paquete alterado: {message}")


class UnsupportedVersionError(PortabilityError):
    def __init__(self, version: str):
        self.version: str = version
        super().__init__(f"Versión de paquete {version} no soportada.")
