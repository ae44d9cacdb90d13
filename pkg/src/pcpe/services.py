import base64
import json
import logging
import threading
import weakref
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Callable, Generic, Mapping, TypeVar

from src.pcpe.exceptions import (
    DuplicateObjectError,
    InvalidInputError,
    InvalidPolicyBindingError,
    InvalidPolicyError,
    ParseError,
    PCPEError,
    RegistryConflictError,
    ResolutionFailureError,
    StateSchemaMismatchError,
    TamperDetectedError,
    UnknownDataStreamError,
    UnknownDisseminatorError,
    UnknownGroupError,
    UnknownInterfaceError,
    UnknownMechanismError,
    UnknownMethodError,
    UnknownObjectError,
    UnsupportedVersionError,
)
from . import automaton
from .automaton import (
    AutomatonState,
    Event,
    Halt,
    PrincipalSnapshot,
    SecurityAutomaton,
    Value,
    ViolationMode,
    compile_policy,
    state_from_dict,
    state_to_dict,
)
from .canonical import canonical_dumps, sha256_hex
from .config import Settings
from .models import (
    ANONYMOUS,
    BehaviorInterface,
    DataStream,
    DigitalObject,
    Disseminator,
    DisseminationResult,
    GroupPolicy,
    InlinePolicy,
    MechanismModule,
    MethodSignature,
    PolicyBinding,
    Principal,
    ScopeRecord,
    Session,
    parse_locator,
)
from .models.interface import interface_from_dict, interface_to_dict
from .models.mechanism import mechanism_from_dict, mechanism_to_dict
from .objects import (
    AddDataStream,
    AddDisseminator,
    DeleteDataStream,
    DeleteDisseminator,
    Mutation,
    apply_primitive_mutation,
    list_disseminators,
    object_from_dict,
    object_profile,
    object_to_dict,
    resolve_datastream,
)
from .policy import Diagnostic, PolicyAST, empty_policy, parse_policy, validate_policy
from .primitives import PRIMITIVE_INTERFACE, PRIMITIVE_METHODS
from .storage import Database, FileStorage
from .weaver import (
    InvocationContext,
    PolicyViolation,
    SecuredMechanism,
    invoke,
    validate_mechanism,
    weave,
)

logger = logging.getLogger(__name__)

DEFAULT_SCOPE = "default"
POLICY_MIME_TYPE = "text/x-pcpe-policy"
MAX_REFERENCE_DEPTH = 8
DEFAULT_CACHE_SIZE = 256
DEFAULT_SESSION_CACHE_SIZE = 1024

K = TypeVar("K")
V = TypeVar("V")

UrlResolver = Callable[[str], bytes]


def _no_external_resolver(url: str) -> bytes:
    raise ResolutionFailureError(f"url:{url}", "no hay resolvedor externo configurado")


def check_policy(
    text: str, interface: BehaviorInterface | None, name: str = "?"
) -> PolicyAST:
    """
    Parses and validates policy text for a scope: `interface=None`
    means the default scope. Raises InvalidPolicyError with every
    diagnostic found.
    """

    try:
        ast = parse_policy(text)
    except ParseError as e:
        raise InvalidPolicyError(
            name, [Diagnostic("ParseError", str(e), e.line, e.column)]
        ) from e
    if interface is None and not ast.scope.is_default:
        diagnostics = [
            Diagnostic(
                "ScopeMismatch",
                "Se esperaba una política para el ámbito default.",
                ast.scope.pos.line,
                ast.scope.pos.column,
            )
        ]
    elif interface is not None and ast.scope.is_default:
        diagnostics = [
            Diagnostic(
                "ScopeMismatch",
                f"Se esperaba una política para la interfaz {interface.id}.",
                ast.scope.pos.line,
                ast.scope.pos.column,
            )
        ]
    else:
        diagnostics = validate_policy(ast, interface, PRIMITIVE_METHODS)
    if diagnostics:
        raise InvalidPolicyError(ast.name, diagnostics)
    return ast


def coerce_args(signature: MethodSignature, args: Mapping[str, Any]) -> dict[str, Value]:
    """
    Converts raw arguments (the CLI sends every value as text) to the
    types of the signature; unknown or missing parameters are rejected.
    Integers come as int or decimal text, never as float.
    """

    if not isinstance(args, Mapping):
        raise InvalidInputError(
            f"Los argumentos de {signature.name} deben ser un objeto.", "args"
        )
    unknown = set(args) - {p.name for p in signature.params}
    if unknown:
        raise InvalidInputError(
            f"{signature.name} no acepta los parámetros {sorted(unknown)}.", "args"
        )
    typed: dict[str, Value] = {}
    for param in signature.params:
        if param.name not in args:
            raise InvalidInputError(
                f"Falta el parámetro {param.name} de {signature.name}.", "args"
            )
        value = args[param.name]
        if param.type == "int":
            if isinstance(value, bool) or not isinstance(value, (int, str)):
                raise InvalidInputError(
                    f"{param.name} debe ser un entero, no '{value}'.", "args"
                )
            try:
                typed[param.name] = int(value)
            except (TypeError, ValueError) as e:
                raise InvalidInputError(
                    f"{param.name} debe ser un entero, no '{value}'.", "args"
                ) from e
        else:
            if not isinstance(value, str):
                raise InvalidInputError(f"{param.name} debe ser un texto.", "args")
            typed[param.name] = value
    return typed


class RegistryService:
    """
    Registry of behavior interfaces and mechanisms. Mechanisms are
    checked against their interface before they are stored.
    """

    def __init__(
        self, storage: Database, on_mechanism_change: Callable[[str], None] | None = None
    ) -> None:
        self.storage: Database = storage
        self.on_mechanism_change = on_mechanism_change

    def register_interface(self, interface: BehaviorInterface) -> None:
        self.storage.save_interface(interface)
        logger.info("Interface %s registered", interface.id)

    def register_mechanism(self, mechanism: MechanismModule) -> None:
        interface = self.get_interface(mechanism.interface_id)
        validate_mechanism(mechanism, interface)
        self.storage.save_mechanism(mechanism)
        logger.info("Mechanism %s registered", mechanism.id)
        if self.on_mechanism_change is not None:
            self.on_mechanism_change(mechanism.id)

    def get_interface(self, interface_id: str) -> BehaviorInterface:
        interface = self.storage.get_interface(interface_id)
        if interface is None:
            raise UnknownInterfaceError(interface_id)
        return interface

    def get_mechanism(self, mechanism_id: str) -> MechanismModule:
        mechanism = self.storage.get_mechanism(mechanism_id)
        if mechanism is None:
            raise UnknownMechanismError(mechanism_id)
        return mechanism

    def list_interfaces(self) -> list[BehaviorInterface]:
        return self.storage.list_interfaces()

    def list_mechanisms(self) -> list[MechanismModule]:
        return self.storage.list_mechanisms()


class BoundedCache(Generic[K, V]):
    """
    Thread-safe LRU map; the least recently used entry is evicted once
    more than `max_size` entries are held.
    """

    def __init__(self, max_size: int) -> None:
        if max_size < 1:
            raise InvalidInputError(
                f"El tamaño de caché debe ser positivo, no {max_size}.", "cache_size"
            )
        self.max_size = max_size
        self._lock = threading.RLock()
        self._data: OrderedDict[K, V] = OrderedDict()

    def get(self, key: K) -> V | None:
        with self._lock:
            value = self._data.get(key)
            if value is not None:
                self._data.move_to_end(key)
            return value

    def put(self, key: K, value: V) -> None:
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.max_size:
                evicted, _ = self._data.popitem(last=False)
                logger.debug("Evicted %s", evicted)

    def drop_where(self, predicate: Callable[[K], bool]) -> int:
        with self._lock:
            stale = [k for k in self._data if predicate(k)]
            for key in stale:
                del self._data[key]
        return len(stale)

    def keys(self) -> list[K]:
        with self._lock:
            return list(self._data)

    def values(self) -> list[V]:
        with self._lock:
            return list(self._data.values())

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)


class WeaveCache:
    """
    Secured mechanisms keyed by (mechanism id, policy hash), at most
    `max_size` of them.
    """

    def __init__(self, max_size: int = DEFAULT_CACHE_SIZE) -> None:
        self._entries: BoundedCache[tuple[str, str], SecuredMechanism] = BoundedCache(
            max_size
        )
        self.lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_weave(
        self, mechanism: MechanismModule, compiled: SecurityAutomaton
    ) -> SecuredMechanism:
        key = (mechanism.id, compiled.policy_hash)
        with self.lock:
            secured = self._entries.get(key)
            if secured is not None:
                self.hits += 1
                logger.debug("Weave cache hit %s", key)
                return secured
            self.misses += 1
            logger.debug("Weave cache miss %s", key)
            secured = weave(mechanism, compiled)
            self._entries.put(key, secured)
            return secured

    def invalidate_policy(self, policy_hash: str) -> int:
        with self.lock:
            return self._entries.drop_where(lambda k: k[1] == policy_hash)

    def invalidate_mechanism(self, mechanism_id: str) -> int:
        with self.lock:
            return self._entries.drop_where(lambda k: k[0] == mechanism_id)

    def keys(self) -> list[tuple[str, str]]:
        return self._entries.keys()

    def __len__(self) -> int:
        return len(self._entries)


class RepositoryService:
    """
    The repository management layer: objects, policy scoping, the
    mediated dissemination path and per-session automaton states.
    """

    def __init__(
        self,
        storage: Database,
        violation_mode: ViolationMode = ViolationMode.DENY_REQUEST,
        url_resolver: UrlResolver = _no_external_resolver,
        cache_size: int = DEFAULT_CACHE_SIZE,
        session_cache_size: int = DEFAULT_SESSION_CACHE_SIZE,
    ) -> None:
        self.storage: Database = storage
        self.violation_mode: ViolationMode = violation_mode
        self.url_resolver: UrlResolver = url_resolver
        self.registry = RegistryService(storage, self._on_mechanism_change)
        self.cache = WeaveCache(cache_size)
        self.lock = threading.RLock()
        # An entry lives only while some call holds its lock.
        self._session_locks: weakref.WeakValueDictionary[str, threading.Lock] = (
            weakref.WeakValueDictionary()
        )
        self._sessions: BoundedCache[str, Session] = BoundedCache(session_cache_size)
        self._compiled: BoundedCache[tuple[str, str | None], SecurityAutomaton] = (
            BoundedCache(cache_size)
        )

    # -- objects -----------------------------------------------------------

    def get_object(self, object_id: str) -> DigitalObject:
        obj = self.storage.get_object(object_id)
        if obj is None:
            raise UnknownObjectError(object_id)
        return obj

    def list_objects(self) -> list[DigitalObject]:
        return [self.get_object(i) for i in self.storage.list_object_ids()]

    def ingest(self, obj: DigitalObject) -> str:
        """
        Stores a new object once every policy binding it carries
        resolves and validates for its disseminator.
        """

        with self.lock:
            if self.storage.get_object(obj.id) is not None:
                raise DuplicateObjectError(obj.id)
            for dissem_id in obj.policy_bindings:
                self.checked_policy_ast(obj, obj.get_disseminator(dissem_id))
            self.storage.save_object(obj)
        logger.info("Object %s ingested", obj.id)
        return obj.id

    def policy_text(self, obj: DigitalObject, binding: PolicyBinding) -> str:
        if isinstance(binding, InlinePolicy):
            raw = resolve_datastream(obj, binding.ds_id, self._resolve_reference)
            try:
                return raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise InvalidInputError(
                    f"La política {binding.ds_id} no es texto UTF-8."
                ) from e
        text = self.storage.get_group_policy(binding.group_id)
        if text is None:
            raise UnknownGroupError(binding.group_id)
        return text

    def checked_policy_ast(
        self,
        obj: DigitalObject,
        dissem: Disseminator,
        interfaces: Mapping[str, BehaviorInterface] | None = None,
        groups: Mapping[str, str] | None = None,
    ) -> PolicyAST:
        """
        The AST of the policy bound to a disseminator; any failure is
        reported as InvalidPolicyBindingError with diagnostics.
        `interfaces` and `groups` stand in for registry and group
        entries that are about to be stored.
        """

        binding = obj.policy_bindings.get(dissem.id)
        if binding is None:
            return empty_policy(dissem.id, dissem.interface_id)
        try:
            if interfaces is None:
                interface = self.registry.get_interface(dissem.interface_id)
            elif dissem.interface_id in interfaces:
                interface = interfaces[dissem.interface_id]
            else:
                raise UnknownInterfaceError(dissem.interface_id)
            if isinstance(binding, GroupPolicy) and groups and binding.group_id in groups:
                text = groups[binding.group_id]
            else:
                text = self.policy_text(obj, binding)
            return check_policy(text, interface, dissem.id)
        except InvalidPolicyError as e:
            raise InvalidPolicyBindingError(obj.id, dissem.id, e.diagnostics) from e
        except PCPEError as e:
            raise InvalidPolicyBindingError(
                obj.id, dissem.id, [Diagnostic(type(e).__name__, str(e), 0, 0)]
            ) from e

    # -- policies ----------------------------------------------------------

    def _compile(self, ast: PolicyAST) -> SecurityAutomaton:
        key = (automaton.policy_hash(ast), ast.scope.interface_id)
        with self.lock:
            compiled = self._compiled.get(key)
            if compiled is None:
                compiled = compile_policy(ast)
                self._compiled.put(key, compiled)
            return compiled

    def _default_automaton(self) -> SecurityAutomaton:
        text = self.storage.get_default_policy()
        if text is None:
            return self._compile(empty_policy(DEFAULT_SCOPE))
        return self._compile(check_policy(text, None, DEFAULT_SCOPE))

    def _hash_of(self, text: str | None) -> str | None:
        if text is None:
            return None
        try:
            return automaton.policy_hash(parse_policy(text))
        except ParseError:
            return None

    def _invalidate(self, old_hash: str | None) -> None:
        if old_hash is not None:
            dropped = self.cache.invalidate_policy(old_hash)
            logger.info("Invalidated %d weave cache entries", dropped)

    def _on_mechanism_change(self, mechanism_id: str) -> None:
        dropped = self.cache.invalidate_mechanism(mechanism_id)
        logger.info("Mechanism %s changed, %d cache entries dropped", mechanism_id, dropped)

    def set_default_policy(self, policy_text: str) -> None:
        check_policy(policy_text, None, DEFAULT_SCOPE)
        with self.lock:
            old = self._hash_of(self.storage.get_default_policy())
            self.storage.save_default_policy(policy_text)
            self._invalidate(old)
        logger.info("Default policy updated")

    def register_group_policy(self, group_id: str, policy_text: str) -> None:
        try:
            ast = parse_policy(policy_text)
        except ParseError as e:
            raise InvalidPolicyError(
                group_id, [Diagnostic("ParseError", str(e), e.line, e.column)]
            ) from e
        if ast.scope.is_default:
            raise InvalidPolicyError(
                group_id,
                [
                    Diagnostic(
                        "ScopeMismatch",
                        "Una política de grupo debe ser para una interfaz.",
                        ast.scope.pos.line,
                        ast.scope.pos.column,
                    )
                ],
            )
        interface = self.registry.get_interface(ast.scope.interface_id)
        check_policy(policy_text, interface, group_id)
        with self.lock:
            previous = self.storage.get_group_policy(group_id)
            if previous is not None:
                old_scope = parse_policy(previous).scope
                if old_scope.interface_id != interface.id:
                    raise InvalidPolicyError(
                        group_id,
                        [
                            Diagnostic(
                                "ScopeMismatch",
                                f"El grupo {group_id} es para {old_scope.interface_id}.",
                                ast.scope.pos.line,
                                ast.scope.pos.column,
                            )
                        ],
                    )
            self.storage.save_group_policy(group_id, policy_text)
            self._invalidate(self._hash_of(previous))
        logger.info("Group policy %s registered", group_id)

    def get_group_policy(self, group_id: str) -> str:
        text = self.storage.get_group_policy(group_id)
        if text is None:
            raise UnknownGroupError(group_id)
        return text

    def attach_policy(
        self, object_id: str, disseminator_id: str, binding: PolicyBinding
    ) -> None:
        with self.lock:
            obj = self.get_object(object_id)
            dissem = obj.get_disseminator(disseminator_id)
            if dissem is None:
                raise UnknownDisseminatorError(object_id, disseminator_id)
            interface = self.registry.get_interface(dissem.interface_id)
            if isinstance(binding, InlinePolicy) and binding.ds_id not in obj.datastreams:
                raise UnknownDataStreamError(object_id, binding.ds_id)
            check_policy(self.policy_text(obj, binding), interface, disseminator_id)
            old_binding = obj.policy_bindings.get(disseminator_id)
            old = (
                self._hash_of(self.policy_text(obj, old_binding))
                if old_binding is not None
                else None
            )
            bindings = dict(obj.policy_bindings)
            bindings[disseminator_id] = binding
            self.storage.save_object(
                DigitalObject(
                    obj.id, obj.label, obj.datastreams, obj.disseminators, bindings
                )
            )
            self._invalidate(old)
        logger.info(
            "Policy %s attached to %s/%s", binding.kind, object_id, disseminator_id
        )

    # -- sessions ----------------------------------------------------------

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self.lock:
            return self._session_locks.setdefault(session_id, threading.Lock())

    def _load_session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            session = self.storage.get_session(session_id) or Session(session_id)
            self._sessions.put(session_id, session)
        return session

    def _commit_session(self, session: Session) -> None:
        self.storage.save_session(session)
        self._sessions.put(session.id, session)

    def show_session(self, session_id: str) -> Session:
        with self._session_lock(session_id):
            return self._load_session(session_id).copy()

    def flush_sessions(self) -> int:
        """
        Writes every session held in memory; called on shutdown.
        """

        with self.lock:
            sessions = self._sessions.values()
        for session in sessions:
            with self._session_lock(session.id):
                self.storage.save_session(session)
        logger.info("Flushed %d sessions", len(sessions))
        return len(sessions)

    def _scope_state(
        self, session: Session, object_id: str, scope_key: str, compiled: SecurityAutomaton
    ) -> tuple[AutomatonState, bool]:
        record = session.scopes.get((object_id, scope_key))
        if record is None:
            return compiled.initial, False
        if record.policy_hash != compiled.policy_hash:
            logger.warning(
                "Policy of %s/%s changed; session %s restarts that scope",
                object_id,
                scope_key,
                session.id,
            )
            return compiled.initial, False
        try:
            return state_from_dict(record.state, compiled), record.killed
        except StateSchemaMismatchError:
            logger.warning("Unreadable state for %s/%s, restarting", object_id, scope_key)
            return compiled.initial, False

    @staticmethod
    def _store_state(
        session: Session,
        object_id: str,
        scope_key: str,
        compiled: SecurityAutomaton,
        state: AutomatonState,
        killed: bool = False,
    ) -> None:
        session.scopes[(object_id, scope_key)] = ScopeRecord(
            compiled.policy_hash, state_to_dict(state), killed
        )

    def _deny(
        self,
        session: Session,
        obj: DigitalObject,
        scope_key: str,
        compiled: SecurityAutomaton,
        state: AutomatonState,
        halt: Halt,
    ) -> PolicyViolation:
        logger.info(
            "Denied on %s/%s by %s %s", obj.id, scope_key, halt.policy_id, halt.handler_id
        )
        if self.violation_mode is ViolationMode.KILL_SESSION:
            self._store_state(session, obj.id, scope_key, compiled, state, killed=True)
        return PolicyViolation(halt, scope_key)

    @staticmethod
    def _killed(compiled: SecurityAutomaton) -> Halt:
        return Halt(compiled.policy_id, "session-halted", "false", 0)

    # -- mediated paths ----------------------------------------------------

    def _resolve_reference(self, raw: str, depth: int = 0) -> bytes:
        """
        Internal references are disseminated as an anonymous caller in a
        throwaway session, so the referenced object's policies apply.
        """

        locator = parse_locator(raw)
        if not locator.is_internal:
            return self.url_resolver(locator.url)
        if depth >= MAX_REFERENCE_DEPTH:
            raise ResolutionFailureError(raw, "demasiadas referencias encadenadas")
        obj = self.get_object(locator.object_id)
        dissem = next(
            (d for d in obj.disseminators if d.interface_id == locator.interface_id),
            None,
        )
        if dissem is None:
            raise ResolutionFailureError(
                raw, f"el objeto no implementa {locator.interface_id}"
            )
        result = self._disseminate_in(
            obj,
            dissem.id,
            locator.method,
            {},
            PrincipalSnapshot.of(ANONYMOUS),
            Session("internal"),
            depth + 1,
        )
        if isinstance(result, PolicyViolation):
            raise ResolutionFailureError(raw, result.message)
        return result.payload

    def _disseminate_in(
        self,
        obj: DigitalObject,
        disseminator_id: str,
        method: str,
        args: Mapping[str, Any],
        principal: PrincipalSnapshot,
        session: Session,
        depth: int = 0,
    ) -> DisseminationResult | PolicyViolation:
        """
        Default scope first, then the disseminator's woven mechanism.
        `session` is a working copy; it only receives new states when
        both scopes allow.
        """

        dissem = obj.get_disseminator(disseminator_id)
        if dissem is None:
            raise UnknownDisseminatorError(obj.id, disseminator_id)
        interface = self.registry.get_interface(dissem.interface_id)
        signature = interface.get_method(method)
        if signature is None:
            raise UnknownMethodError(dissem.interface_id, method)
        typed_args = coerce_args(signature, args)

        with self.lock:
            default = self._default_automaton()
            compiled = self._compile(self.checked_policy_ast(obj, dissem))
            mechanism = self.registry.get_mechanism(dissem.mechanism_id)
            secured = self.cache.get_or_weave(mechanism, compiled)

        default_state, killed = self._scope_state(session, obj.id, DEFAULT_SCOPE, default)
        if killed:
            return PolicyViolation(self._killed(default), DEFAULT_SCOPE)
        decision = automaton.step(
            default,
            default_state,
            Event(
                "GetDissemination",
                {"disseminatorId": disseminator_id, "method": method},
                principal,
            ),
        )
        if isinstance(decision, Halt):
            return self._deny(session, obj, DEFAULT_SCOPE, default, default_state, decision)

        state, killed = self._scope_state(session, obj.id, dissem.id, compiled)
        if killed:
            return PolicyViolation(self._killed(compiled), dissem.id)

        def resolve_slot(slot: str) -> bytes:
            ds_id = dissem.binding.get(slot)
            if ds_id is None:
                raise UnknownDataStreamError(obj.id, slot)
            return resolve_datastream(
                obj, ds_id, lambda raw: self._resolve_reference(raw, depth)
            )

        outcome = invoke(
            secured,
            method,
            typed_args,
            InvocationContext(principal, state, resolve_slot),
            dissem.id,
        )
        if isinstance(outcome.result, PolicyViolation):
            return self._deny(
                session, obj, dissem.id, compiled, state, outcome.result.halt
            )
        self._store_state(session, obj.id, DEFAULT_SCOPE, default, decision.next)
        self._store_state(session, obj.id, dissem.id, compiled, outcome.next_state)
        return outcome.result

    def disseminate(
        self,
        object_id: str,
        disseminator_id: str,
        method: str,
        args: Mapping[str, Any],
        principal: Principal,
        session_id: str,
    ) -> DisseminationResult | PolicyViolation:
        """
        Runs one content-specific method through both policy scopes.
        Session state is committed only when both allow (or when a
        kill-session denial halts a scope).
        """

        with self._session_lock(session_id):
            obj = self.get_object(object_id)
            working = self._load_session(session_id).copy()
            result = self._disseminate_in(
                obj,
                disseminator_id,
                method,
                args,
                PrincipalSnapshot.of(principal),
                working,
            )
            if (
                not isinstance(result, PolicyViolation)
                or self.violation_mode is ViolationMode.KILL_SESSION
            ):
                self._commit_session(working)
            return result

    def invoke_primitive(
        self,
        object_id: str,
        method: str,
        args: Mapping[str, Any],
        principal: Principal,
        session_id: str,
    ) -> Any:
        """
        One generic API call, gated by the default policy. Reads return
        data; mutations persist the new object value.
        """

        if method not in PRIMITIVE_METHODS:
            raise UnknownMethodError(PRIMITIVE_INTERFACE.id, method)
        if method == "GetDissemination":
            return self.disseminate(
                object_id,
                _required(args, "disseminatorId"),
                _required(args, "method"),
                args.get("args", {}),
                principal,
                session_id,
            )
        signature = PRIMITIVE_INTERFACE.get_method(method)
        event_args = {
            p.name: args[p.name]
            for p in signature.params
            if isinstance(args.get(p.name), str)
        }
        snapshot = PrincipalSnapshot.of(principal)

        with self._session_lock(session_id):
            obj = self.get_object(object_id)
            working = self._load_session(session_id).copy()
            default = self._default_automaton()
            state, killed = self._scope_state(working, obj.id, DEFAULT_SCOPE, default)
            if killed:
                return PolicyViolation(self._killed(default), DEFAULT_SCOPE)
            decision = automaton.step(default, state, Event(method, event_args, snapshot))
            if isinstance(decision, Halt):
                violation = self._deny(working, obj, DEFAULT_SCOPE, default, state, decision)
                if self.violation_mode is ViolationMode.KILL_SESSION:
                    self._commit_session(working)
                return violation
            result = self._run_primitive(obj, method, args)
            self._store_state(working, obj.id, DEFAULT_SCOPE, default, decision.next)
            self._commit_session(working)
            return result

    def _run_primitive(self, obj: DigitalObject, method: str, args: Mapping[str, Any]) -> Any:
        if method == "GetObjectProfile":
            return object_profile(obj)
        if method == "ListDisseminators":
            interfaces = {i.id: i for i in self.registry.list_interfaces()}
            return list_disseminators(obj, interfaces)
        if method == "ListMethods":
            dissem_id = _required(args, "disseminatorId")
            dissem = obj.get_disseminator(dissem_id)
            if dissem is None:
                raise UnknownDisseminatorError(obj.id, dissem_id)
            return self.registry.get_interface(dissem.interface_id).methods
        return self._mutate(obj.id, _mutation_from_args(method, args))

    def _mutate(self, object_id: str, mutation: Mutation) -> DigitalObject:
        with self.lock:
            obj = self.get_object(object_id)
            updated = apply_primitive_mutation(obj, mutation)
            self.storage.save_object(updated)
            affected = {
                d.mechanism_id
                for d in obj.disseminators
                if updated.get_disseminator(d.id) != d
            }
            for mechanism_id in affected:
                self.cache.invalidate_mechanism(mechanism_id)
        logger.info("Object %s mutated: %s", object_id, type(mutation).__name__)
        return updated


def _required(args: Mapping[str, Any], name: str, kind: type = str) -> Any:
    if name not in args:
        raise InvalidInputError(f"Falta el parámetro {name}.", name)
    value = args[name]
    if not isinstance(value, kind):
        raise InvalidInputError(f"El parámetro {name} tiene un tipo inválido.", name)
    return value


def _mutation_from_args(method: str, args: Mapping[str, Any]) -> Mutation:
    if method == "AddDataStream":
        content = args.get("content")
        if isinstance(content, str):
            content = content.encode("utf-8")
        return AddDataStream(
            DataStream(
                _required(args, "dsId"),
                _required(args, "mimeType"),
                inline=content,
                reference=args.get("reference"),
            )
        )
    if method == "DeleteDataStream":
        return DeleteDataStream(_required(args, "dsId"))
    if method == "AddDisseminator":
        return AddDisseminator(
            Disseminator(
                _required(args, "disseminatorId"),
                _required(args, "interfaceId"),
                _required(args, "mechanismId"),
                args.get("binding", {}),
            )
        )
    if method == "DeleteDisseminator":
        return DeleteDisseminator(_required(args, "disseminatorId"))
    raise UnknownMethodError(PRIMITIVE_INTERFACE.id, method)


FORMAT_VERSION = "1"
PACKAGE_FIELDS = ("formatVersion", "object", "policies", "registry", "digest")


@dataclass(frozen=True)
class PortablePackage:
    """
    Self-sufficient export of one object: the object, the policy text
    bound to each disseminator, the registry entries it uses and a
    SHA-256 digest over all of it.
    """

    format_version: str
    object: dict
    policies: dict
    registry: dict
    digest: str

    def body(self) -> dict:
        return {
            "formatVersion": self.format_version,
            "object": self.object,
            "policies": self.policies,
            "registry": self.registry,
        }

    def to_bytes(self) -> bytes:
        return canonical_dumps({**self.body(), "digest": self.digest})

    @classmethod
    def seal(cls, obj: dict, policies: dict, registry: dict) -> "PortablePackage":
        unsigned = cls(FORMAT_VERSION, obj, policies, registry, "")
        return cls(
            FORMAT_VERSION,
            obj,
            policies,
            registry,
            sha256_hex(canonical_dumps(unsigned.body())),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "PortablePackage":
        """
        Verifies the digest and that the bytes are exactly the canonical
        form of their content; only then looks at the version.
        """

        try:
            parsed = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            logger.warning("Package is not readable JSON")
            raise TamperDetectedError("el paquete no es JSON legible.") from e
        if not isinstance(parsed, dict) or tuple(parsed) != PACKAGE_FIELDS:
            raise TamperDetectedError("la estructura del paquete no es la esperada.")
        if not all(isinstance(parsed[k], dict) for k in ("object", "policies", "registry")):
            raise TamperDetectedError("la estructura del paquete no es la esperada.")
        package = cls(
            parsed["formatVersion"],
            parsed["object"],
            parsed["policies"],
            parsed["registry"],
            parsed["digest"],
        )
        try:
            body = canonical_dumps(package.body())
        except (TypeError, ValueError) as e:
            raise TamperDetectedError(str(e)) from e
        if sha256_hex(body) != package.digest:
            logger.warning("Package digest mismatch")
            raise TamperDetectedError()
        if package.to_bytes() != data:
            logger.warning("Package bytes are not canonical")
            raise TamperDetectedError("los bytes no están en forma canónica.")
        if package.format_version != FORMAT_VERSION:
            raise UnsupportedVersionError(str(package.format_version))
        return package


class PortabilityService:
    """
    Export and import of portable packages between repositories.
    """

    def __init__(self, repository: RepositoryService) -> None:
        self.repository: RepositoryService = repository

    def export_object(self, object_id: str) -> PortablePackage:
        repo = self.repository
        obj = repo.get_object(object_id)
        policies = {}
        for dissem_id, binding in sorted(obj.policy_bindings.items()):
            entry: dict = {"kind": binding.kind}
            if isinstance(binding, GroupPolicy):
                entry["groupId"] = binding.group_id
            entry["text"] = repo.policy_text(obj, binding)
            policies[dissem_id] = entry
        interface_ids = sorted({d.interface_id for d in obj.disseminators})
        mechanism_ids = sorted({d.mechanism_id for d in obj.disseminators})
        registry = {
            "interfaces": [
                interface_to_dict(repo.registry.get_interface(i)) for i in interface_ids
            ],
            "mechanisms": [
                mechanism_to_dict(repo.registry.get_mechanism(m)) for m in mechanism_ids
            ],
        }
        logger.info("Object %s exported", object_id)
        return PortablePackage.seal(object_to_dict(obj), policies, registry)

    def import_object(self, package: PortablePackage | bytes) -> str:
        """
        Installs an exported object. Everything the package brings is
        checked first; interfaces, mechanisms, groups and the object are
        only written once all of it is known to be acceptable.
        """

        if isinstance(package, (bytes, bytearray)):
            package = PortablePackage.from_bytes(bytes(package))
        repo = self.repository
        obj = object_from_dict(package.object)
        interfaces = [interface_from_dict(d) for d in package.registry.get("interfaces", [])]
        mechanisms = [mechanism_from_dict(d) for d in package.registry.get("mechanisms", [])]

        with repo.lock:
            if repo.storage.get_object(obj.id) is not None:
                raise DuplicateObjectError(obj.id)
            known = self._checked_registry(interfaces, mechanisms)
            obj, new_groups = self._settle_groups(obj, package.policies)
            for dissem_id in obj.policy_bindings:
                repo.checked_policy_ast(
                    obj, obj.get_disseminator(dissem_id), known, new_groups
                )

            for interface in interfaces:
                if repo.storage.get_interface(interface.id) is None:
                    repo.registry.register_interface(interface)
            for mechanism in mechanisms:
                if repo.storage.get_mechanism(mechanism.id) is None:
                    repo.registry.register_mechanism(mechanism)
            for group_id, text in new_groups.items():
                repo.register_group_policy(group_id, text)
            object_id = repo.ingest(obj)
        logger.info("Object %s imported", object_id)
        return object_id

    def _checked_registry(
        self, interfaces: list[BehaviorInterface], mechanisms: list[MechanismModule]
    ) -> dict[str, BehaviorInterface]:
        """
        Interfaces known once the package is installed. Raises when an
        entry conflicts with the destination or a mechanism does not
        implement its interface.
        """

        storage = self.repository.storage
        known = {i.id: i for i in storage.list_interfaces()}
        for interface in interfaces:
            existing = known.get(interface.id)
            if existing is not None and existing != interface:
                raise RegistryConflictError("interfaz", interface.id)
            known[interface.id] = interface
        for mechanism in mechanisms:
            existing = storage.get_mechanism(mechanism.id)
            if existing is not None and existing != mechanism:
                raise RegistryConflictError("mecanismo", mechanism.id)
            if mechanism.interface_id not in known:
                raise UnknownInterfaceError(mechanism.interface_id)
            validate_mechanism(mechanism, known[mechanism.interface_id])
        return known

    def _settle_groups(
        self, obj: DigitalObject, policies: dict
    ) -> tuple[DigitalObject, dict[str, str]]:
        """
        Returns the object to ingest and the groups the destination
        lacks. A group that exists with different text is replaced by an
        inline copy of the exported text. Nothing is written.
        """

        repo = self.repository
        streams = dict(obj.datastreams)
        bindings = dict(obj.policy_bindings)
        new_groups: dict[str, str] = {}
        for dissem_id, binding in sorted(obj.policy_bindings.items()):
            if not isinstance(binding, GroupPolicy):
                continue
            entry = policies.get(dissem_id)
            if not isinstance(entry, dict) or not isinstance(entry.get("text"), str):
                raise InvalidPolicyBindingError(
                    obj.id,
                    dissem_id,
                    [Diagnostic("MissingPolicy", "El paquete no trae la política.", 0, 0)],
                )
            text = entry["text"]
            current = new_groups.get(binding.group_id)
            if current is None:
                current = repo.storage.get_group_policy(binding.group_id)
            if current is None:
                new_groups[binding.group_id] = text
            elif current != text:
                ds_id = _free_id(streams, f"policy-{dissem_id}")
                streams[ds_id] = DataStream(ds_id, POLICY_MIME_TYPE, inline=text.encode("utf-8"))
                bindings[dissem_id] = InlinePolicy(ds_id)
                logger.warning(
                    "Group %s differs here; %s/%s now carries it inline as %s",
                    binding.group_id,
                    obj.id,
                    dissem_id,
                    ds_id,
                )
        settled = DigitalObject(obj.id, obj.label, streams, obj.disseminators, bindings)
        return settled, new_groups


def _free_id(taken: Mapping[str, Any], base: str) -> str:
    candidate, n = base, 1
    while candidate in taken:
        n += 1
        candidate = f"{base}-{n}"
    return candidate


def encode_package(package: PortablePackage) -> str:
    return base64.b64encode(package.to_bytes()).decode("ascii")


@dataclass
class Services:
    repository: RepositoryService
    portability: PortabilityService


def build_services(settings: Settings) -> Services:
    """
    Wires the file storage and the services for one repository root.
    """

    repository = RepositoryService(FileStorage(settings.root), settings.violation_mode)
    return Services(repository, PortabilityService(repository))
