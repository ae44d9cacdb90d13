from dataclasses import dataclass

from src.pcpe.exceptions import InvalidInputError
from .identifiers import check_identifier

OBJECT_LOCATOR_PREFIX = "obj:"
URL_LOCATOR_PREFIX = "url:"


@dataclass(frozen=True)
class Locator:
    """
    Parsed reference of a ReferenceDataStream: either an internal
    dissemination (object, interface, method) or an external URL.
    """

    raw: str
    object_id: str | None = None
    interface_id: str | None = None
    method: str | None = None
    url: str | None = None

    @property
    def is_internal(self) -> bool:
        return self.object_id is not None


def parse_locator(raw: str) -> Locator:
    """
    Parses `obj:<object-id>/<interface-id>/<method>` or `url:<string>`.
    """

    if not isinstance(raw, str):
        raise InvalidInputError("La referencia debe ser un texto.", "reference")
    if raw.startswith(OBJECT_LOCATOR_PREFIX):
        parts = raw[len(OBJECT_LOCATOR_PREFIX) :].split("/")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            raise InvalidInputError(
                f"La referencia interna {raw} debe tener la forma obj:<objeto>/<interfaz>/<método>.",
                "reference",
            )
        return Locator(raw, object_id=parts[0], interface_id=parts[1], method=parts[2])
    if raw.startswith(URL_LOCATOR_PREFIX) and len(raw) > len(URL_LOCATOR_PREFIX):
        return Locator(raw, url=raw[len(URL_LOCATOR_PREFIX) :])
    raise InvalidInputError(
        f"La referencia {raw} debe empezar por 'obj:' o 'url:'.", "reference"
    )


@dataclass(frozen=True)
class DataStream:
    """
    A mime-typed content element of a Digital Object; the content is
    either carried inline or referenced through a locator.
    """

    id: str
    mime_type: str
    inline: bytes | None = None
    reference: str | None = None

    def __post_init__(self):
        self._validate_id()
        self._validate_mime_type()
        self._validate_content()

    def _validate_id(self):
        check_identifier(self.id, "DataStream")

    def _validate_mime_type(self):
        """
        Validates that the mime type looks like type/subtype.
        """

        if not isinstance(self.mime_type, str) or "/" not in self.mime_type:
            raise InvalidInputError(
                f"El tipo MIME del DataStream {self.id} no es válido.", "mime_type"
            )

    def _validate_content(self):
        """
        Exactly one of inline payload / reference must be populated.
        """

        if (self.inline is None) == (self.reference is None):
            raise InvalidInputError(
                f"El DataStream {self.id} debe tener contenido en línea o una referencia, no ambos.",
                "content",
            )
        if self.inline is not None and not isinstance(self.inline, bytes):
            raise InvalidInputError(
                f"El contenido del DataStream {self.id} debe ser bytes.", "inline"
            )
        if self.reference is not None:
            parse_locator(self.reference)

    @property
    def is_reference(self) -> bool:
        return self.reference is not None

    @property
    def locator(self) -> Locator | None:
        return parse_locator(self.reference) if self.reference is not None else None
