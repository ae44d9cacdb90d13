from dataclasses import dataclass, field

from src.pcpe.exceptions import InvalidInputError


@dataclass(frozen=True)
class Receipt:
    """
    A payment asserted by the caller, amount in integer cents.
    """

    name: str
    amount: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise InvalidInputError("El nombre del recibo no puede estar vacío.")
        if not isinstance(self.amount, int) or isinstance(self.amount, bool):
            raise InvalidInputError(
                f"El monto del recibo {self.name} debe ser un entero en centavos."
            )
        if self.amount < 0:
            raise InvalidInputError("El monto del recibo no puede ser negativo.")


@dataclass(frozen=True)
class Principal:
    """
    The requester: asserted credentials plus the receipts presented
    with this request. Verifying them is the deployment's job.
    """

    name: str = "anonymous"
    credentials: frozenset[str] = field(default_factory=frozenset)
    receipts: tuple[Receipt, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "credentials", frozenset(self.credentials))
        object.__setattr__(self, "receipts", tuple(self.receipts))
        self._validate_name()
        self._validate_credentials()

    def _validate_name(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise InvalidInputError("El nombre del principal no puede estar vacío.")

    def _validate_credentials(self):
        for credential in self.credentials:
            if not isinstance(credential, str) or not credential.strip():
                raise InvalidInputError("Las credenciales no pueden estar vacías.")


ANONYMOUS = Principal()
