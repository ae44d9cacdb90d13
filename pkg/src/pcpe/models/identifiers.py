import re

from src.pcpe.exceptions import InvalidInputError

ID_PATTERN = re.compile(r"[A-Za-z0-9][A-Za-z0-9._:-]*")
# Ids double as file names and locator segments, so "/" is never allowed.


def check_identifier(value: object, what: str) -> str:
    """
    Validates that an id is a non-empty string usable as a file name.
    """

    if not isinstance(value, str) or not value.strip():
        raise InvalidInputError(f"El ID de {what} no puede estar vacío.", what)
    if not ID_PATTERN.fullmatch(value):
        raise InvalidInputError(f"El ID de {what} '{value}' no es válido.", what)
    return value
