"""
Weaving: binds a compiled automaton to a mechanism module so that the
only way into a pipeline goes through the automaton.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Mapping

from src.pcpe.exceptions import (
    InvalidMechanismError,
    PCPEError,
    PipelineFailureError,
    ScopeMismatchError,
    UnknownMethodError,
)
from . import automaton
from .automaton import (
    AutomatonState,
    Event,
    Halt,
    PrincipalSnapshot,
    SecurityAutomaton,
    Value,
)
from .models import (
    BehaviorInterface,
    Concat,
    DisseminationResult,
    Label,
    MechanismModule,
    Select,
    SelectIndexed,
)

logger = logging.getLogger(__name__)

SlotResolver = Callable[[str], bytes]
# Receives a slot name, returns the bytes of the datastream bound to it.


def validate_mechanism(mechanism: MechanismModule, interface: BehaviorInterface) -> None:
    """
    Raises InvalidMechanismError unless the method table covers exactly
    the interface and every pipeline is well formed.
    """

    if mechanism.interface_id != interface.id:
        raise InvalidMechanismError(
            mechanism.id, f"implementa {mechanism.interface_id}, no {interface.id}"
        )
    missing = set(interface.method_names) - set(mechanism.method_table)
    extra = set(mechanism.method_table) - set(interface.method_names)
    if missing or extra:
        raise InvalidMechanismError(
            mechanism.id,
            f"faltan métodos {sorted(missing)}, sobran {sorted(extra)}",
        )
    for name, method in mechanism.method_table.items():
        signature = interface.get_method(name)
        outputs = 0
        for step in method.pipeline:
            match step:
                case Select(slot=slot):
                    if slot not in mechanism.slots:
                        raise InvalidMechanismError(
                            mechanism.id, f"{name} usa el slot no declarado {slot}"
                        )
                    outputs += 1
                case SelectIndexed(prefix=prefix, arg=arg):
                    if signature.param_type(arg) is None:
                        raise InvalidMechanismError(
                            mechanism.id, f"{name} no tiene el parámetro {arg}"
                        )
                    if not any(s.startswith(prefix) for s in mechanism.slots):
                        raise InvalidMechanismError(
                            mechanism.id, f"ningún slot empieza por {prefix}"
                        )
                    outputs += 1
                case Concat():
                    if outputs == 0:
                        raise InvalidMechanismError(
                            mechanism.id, f"{name} concatena sin entradas"
                        )
                    outputs = 1
                case Label():
                    pass
        if outputs != 1:
            raise InvalidMechanismError(
                mechanism.id, f"el pipeline de {name} produce {outputs} resultados"
            )


def execute_raw(
    mechanism: MechanismModule,
    method: str,
    args: Mapping[str, Value],
    resolve_slot: SlotResolver,
) -> DisseminationResult:
    """
    Runs a pipeline with no mediation at all.
    """

    spec = mechanism.method_table.get(method)
    if spec is None:
        raise UnknownMethodError(mechanism.id, method)
    outputs: list[bytes] = []
    mime_type = spec.mime_type
    try:
        for step in spec.pipeline:
            match step:
                case Select(slot=slot):
                    outputs.append(resolve_slot(slot))
                case SelectIndexed(prefix=prefix, arg=arg):
                    if arg not in args:
                        raise PipelineFailureError(
                            mechanism.id, method, f"falta el argumento {arg}"
                        )
                    slot = f"{prefix}{args[arg]}"
                    if slot not in mechanism.slots:
                        raise PipelineFailureError(
                            mechanism.id, method, f"no existe el slot {slot}"
                        )
                    outputs.append(resolve_slot(slot))
                case Concat():
                    outputs = [b"".join(outputs)]
                case Label(mime_type=label):
                    mime_type = label
    except PipelineFailureError:
        raise
    except PCPEError as e:
        raise PipelineFailureError(mechanism.id, method, str(e)) from e
    if len(outputs) != 1:
        raise PipelineFailureError(
            mechanism.id, method, f"el pipeline produjo {len(outputs)} resultados"
        )
    return DisseminationResult(mime_type, outputs[0])


@dataclass(frozen=True)
class SecuredMechanism:
    mechanism: MechanismModule
    automaton: SecurityAutomaton
    policy_hash: str


def weave(mechanism: MechanismModule, compiled: SecurityAutomaton) -> SecuredMechanism:
    scope = compiled.scope
    if not scope.is_default and scope.interface_id != mechanism.interface_id:
        raise ScopeMismatchError(scope.interface_id, mechanism.interface_id)
    logger.debug("Weaving %s with policy %s", mechanism.id, compiled.policy_id)
    return SecuredMechanism(mechanism, compiled, compiled.policy_hash)


@dataclass(frozen=True)
class InvocationContext:
    principal: PrincipalSnapshot
    state: AutomatonState
    resolve_slot: SlotResolver


@dataclass(frozen=True)
class PolicyViolation:
    """
    A denial. Returned, never raised: callers tell it apart from faults.
    """

    halt: Halt
    scope: str = ""

    @property
    def message(self) -> str:
        return self.halt.message


@dataclass(frozen=True)
class InvocationOutcome:
    result: DisseminationResult | PolicyViolation
    next_state: AutomatonState

    @property
    def denied(self) -> bool:
        return isinstance(self.result, PolicyViolation)


def invoke(
    secured: SecuredMechanism,
    method: str,
    args: Mapping[str, Value],
    ctx: InvocationContext,
    scope: str = "",
) -> InvocationOutcome:
    """
    Steps the automaton first; the pipeline only runs on Allow.
    """

    if method not in secured.mechanism.method_table:
        raise UnknownMethodError(secured.mechanism.interface_id, method)
    decision = automaton.step(
        secured.automaton, ctx.state, Event(method, args, ctx.principal)
    )
    if isinstance(decision, Halt):
        return InvocationOutcome(PolicyViolation(decision, scope), ctx.state)
    result = execute_raw(secured.mechanism, method, args, ctx.resolve_slot)
    return InvocationOutcome(result, decision.next)
