import json
import random
from pathlib import Path

from src.pcpe.automaton import Event, PrincipalSnapshot, ViolationMode
from src.pcpe.models import (
    BehaviorInterface,
    DataStream,
    DigitalObject,
    Disseminator,
    GroupPolicy,
    InlinePolicy,
    MechanismModule,
    MethodSignature,
    Param,
    Principal,
)
from src.pcpe.models import Receipt as PaidReceipt
from src.pcpe.models.interface import interface_from_dict
from src.pcpe.models.mechanism import mechanism_from_dict
from src.pcpe.objects import build_object
from src.pcpe.policy.ast import (
    And,
    ArgRef,
    Assignment,
    BoolLit,
    Compare,
    Credential,
    EventPattern,
    Handler,
    IntLit,
    Not,
    Or,
    PolicyAST,
    PolicyScope,
    Receipt,
    StateDecl,
    StrLit,
    VarRef,
)
from src.pcpe.services import POLICY_MIME_TYPE, RepositoryService
from src.pcpe.storage import FileStorage
from src.pcpe.weaver import PolicyViolation

"""
Shared builders for the tests: the sample lecture registry entries,
lecture objects shaped like the sample corpus and the usual principals.
"""

SAMPLES = Path(__file__).resolve().parent.parent / "samples"

SLIDE_COUNT = 20

ANONYMOUS = Principal()
CORNELL = Principal("cornellian", frozenset({"cornell"}))
PAYER = Principal("payer", receipts=(PaidReceipt("fee", 500),))
MANAGER = Principal("manager", frozenset({"repo-manager"}))


def sample_text(*parts: str) -> str:
    return SAMPLES.joinpath(*parts).read_text(encoding="utf-8")


def lecture_interface() -> BehaviorInterface:
    return interface_from_dict(json.loads(sample_text("interfaces", "LectureViewer.json")))


def dublin_core_interface() -> BehaviorInterface:
    return interface_from_dict(json.loads(sample_text("interfaces", "DublinCore.json")))


def lecture_mechanism() -> MechanismModule:
    return mechanism_from_dict(json.loads(sample_text("mechanisms", "lecture-mech.json")))


def dublin_core_mechanism() -> MechanismModule:
    return mechanism_from_dict(json.loads(sample_text("mechanisms", "dc-mech.json")))


def default_policy() -> str:
    return sample_text("policies", "default.pol")


def policy_l() -> str:
    return sample_text("policies", "policy-l.pol")


def lesson_1() -> str:
    return sample_text("policies", "lesson-1.pol")


def slide_bytes(object_id: str, n: int) -> bytes:
    return f"{object_id} slide {n}".encode()


def lecture_object(
    object_id: str = "lecture-A",
    policy: str | None = None,
    group: str | None = None,
    label: str = "Lecture A",
) -> DigitalObject:
    """
    A lecture object with low/high video, twenty slides and one XML
    metadata stream, seen through a LectureViewer and a DublinCore
    disseminator. `policy` is carried inline as Policy-L; `group`
    binds the lecture disseminator to a group policy instead.
    """

    streams = [
        DataStream("Video-L", "video/mpeg", inline=f"{object_id} video low".encode()),
        DataStream("Video-H", "video/mpeg", inline=f"{object_id} video high".encode()),
    ]
    streams += [
        DataStream(f"Slide-{n}", "image/png", inline=slide_bytes(object_id, n))
        for n in range(1, SLIDE_COUNT + 1)
    ]
    streams.append(
        DataStream("XML-metadata", "text/xml", inline=b"<dc><title>Lecture</title></dc>")
    )
    bindings = {}
    if policy is not None:
        streams.append(DataStream("Policy-L", POLICY_MIME_TYPE, inline=policy.encode()))
        bindings["Lecture-dissem"] = InlinePolicy("Policy-L")
    elif group is not None:
        bindings["Lecture-dissem"] = GroupPolicy(group)

    slot_binding = {"Video-L": "Video-L", "Video-H": "Video-H", "Metadata": "XML-metadata"}
    slot_binding.update({f"Slide-{n}": f"Slide-{n}" for n in range(1, SLIDE_COUNT + 1)})
    return build_object(
        id=object_id,
        datastreams=streams,
        disseminators=[
            Disseminator("Lecture-dissem", "LectureViewer", "lecture-mech", slot_binding),
            Disseminator(
                "DublinCore-dissem", "DublinCore", "dc-mech", {"Record": "XML-metadata"}
            ),
        ],
        label=label,
        policy_bindings=bindings,
    )


def make_repository(
    root: Path,
    with_default_policy: bool = True,
    mode: ViolationMode = ViolationMode.DENY_REQUEST,
    **options,
) -> RepositoryService:
    """
    A file-backed repository with the sample interfaces and mechanisms
    registered and, unless told otherwise, the sample default policy.
    `options` go to RepositoryService (cache sizes).
    """

    repo = RepositoryService(FileStorage(root), mode, **options)
    repo.registry.register_interface(lecture_interface())
    repo.registry.register_interface(dublin_core_interface())
    repo.registry.register_mechanism(lecture_mechanism())
    repo.registry.register_mechanism(dublin_core_mechanism())
    if with_default_policy:
        repo.set_default_policy(default_policy())
    return repo


MATRIX_REQUESTS = (
    ("GetVideoHigh", {}),
    ("GetSlide", {"n": 3}),
    ("GetSlide", {"n": 15}),
    ("GetDublinCore", {}),
)
MATRIX_PRINCIPALS = (ANONYMOUS, CORNELL, PAYER)

LECTURE_MATRIX = (
    (False, True, True),
    (True, True, True),
    (False, True, False),
    (True, True, True),
)


def decision_matrix(
    repo: RepositoryService, object_id: str, session_prefix: str = "m"
) -> tuple[tuple[bool, ...], ...]:
    """
    Allow/deny over the lecture request x principal grid; every cell
    runs in its own session so cells never influence each other.
    """

    rows = []
    for r, (method, args) in enumerate(MATRIX_REQUESTS):
        row = []
        for c, principal in enumerate(MATRIX_PRINCIPALS):
            result = repo.disseminate(
                object_id,
                "Lecture-dissem",
                method,
                args,
                principal,
                f"{session_prefix}-{object_id}-{r}-{c}",
            )
            row.append(not isinstance(result, PolicyViolation))
        rows.append(tuple(row))
    return tuple(rows)


def walk_traces(initial, inputs, depth: int, visit) -> int:
    """
    Walks every input sequence up to `depth` from `initial`.
    `visit(state, item)` checks one step and returns the next state,
    or None when the step was denied. Behavior depends only on the
    state, so (state, depth) is memoized. Returns the steps visited.
    """

    seen = set()
    pending = [(initial, depth)]
    visited = 0
    while pending:
        state, remaining = pending.pop()
        if remaining == 0 or (state, remaining) in seen:
            continue
        seen.add((state, remaining))
        for item in inputs:
            visited += 1
            following = visit(state, item)
            if following is not None:
                pending.append((following, remaining - 1))
    return visited


BENCH_INTERFACE = BehaviorInterface(
    "Bench",
    (
        MethodSignature("View", (), "text/plain"),
        MethodSignature("Page", (Param("n", "int"),), "text/plain"),
        MethodSignature("Search", (Param("q", "string"),), "text/plain"),
        MethodSignature("Note", (Param("n", "int"), Param("q", "string")), "text/plain"),
        MethodSignature("Close", (), "text/plain"),
    ),
)
BENCH_CALLS = (
    ("View", {}),
    ("Page", {"n": 3}),
    ("Search", {"q": "alpha"}),
    ("Note", {"n": 12, "q": "beta"}),
    ("Close", {}),
)
SNAPSHOTS = tuple(PrincipalSnapshot.of(p) for p in (ANONYMOUS, CORNELL, PAYER))
BENCH_EVENTS = tuple(
    Event(method, args, snapshot) for method, args in BENCH_CALLS for snapshot in SNAPSHOTS
)

_VARIABLES = (("flag", "bool"), ("count", "int"), ("mode", "string"))
_INTS = (0, 3, 5, 12, 20)
_WORDS = ("alpha", "beta", "gamma")
_ALL_OPS = ("==", "!=", "<", "<=", ">", ">=")


def _random_pattern(rng: random.Random) -> EventPattern:
    names = [m.name for m in BENCH_INTERFACE.methods]
    kind = rng.choice(("wildcard", "exact", "set"))
    if kind == "wildcard":
        return EventPattern("wildcard")
    if kind == "exact":
        return EventPattern("exact", (rng.choice(names),))
    return EventPattern("set", tuple(rng.sample(names, rng.randint(2, 4))))


def _pattern_args(pattern: EventPattern) -> set[str]:
    return {
        p.name
        for m in BENCH_INTERFACE.methods
        if pattern.matches(m.name)
        for p in m.params
    }


def _random_value(rng, kind: str, variables: dict, args: set[str]):
    if kind == "int":
        options = [IntLit(rng.choice(_INTS))]
        if "n" in args:
            options.append(ArgRef("n"))
    else:
        options = [StrLit(rng.choice(_WORDS))]
        if "q" in args:
            options.append(ArgRef("q"))
    options += [VarRef(name) for name, t in variables.items() if t == kind]
    return rng.choice(options)


def _random_atom(rng, variables: dict, args: set[str]):
    roll = rng.randrange(6)
    if roll == 0:
        return BoolLit(rng.random() < 0.5)
    if roll == 1:
        return Credential(rng.choice(("cornell", "staff")))
    if roll == 2:
        return Receipt("fee", rng.choice(_ALL_OPS), rng.choice((100, 500, 900)))
    if roll == 3:
        bools = [name for name, t in variables.items() if t == "bool"]
        if bools:
            return VarRef(rng.choice(bools))
        return Credential("cornell")
    if roll == 4:
        return Compare(
            rng.choice(_ALL_OPS),
            _random_value(rng, "int", variables, args),
            _random_value(rng, "int", variables, args),
        )
    return Compare(
        rng.choice(("==", "!=")),
        _random_value(rng, "string", variables, args),
        _random_value(rng, "string", variables, args),
    )


def _random_bool(rng, variables: dict, args: set[str], depth: int):
    if depth == 0 or rng.random() < 0.35:
        return _random_atom(rng, variables, args)
    roll = rng.randrange(3)
    if roll == 0:
        return Not(_random_bool(rng, variables, args, depth - 1))
    node = And if roll == 1 else Or
    return node(
        _random_bool(rng, variables, args, depth - 1),
        _random_bool(rng, variables, args, depth - 1),
    )


def random_policy(rng: random.Random, name: str = "random") -> PolicyAST:
    """
    A well-typed policy over the Bench interface: up to three state
    variables and up to five handlers of either phase.
    """

    decls = []
    variables: dict[str, str] = {}
    for var, kind in rng.sample(_VARIABLES, rng.randint(0, 3)):
        initial = {
            "bool": BoolLit(rng.random() < 0.5),
            "int": IntLit(rng.choice(_INTS)),
            "string": StrLit(rng.choice(_WORDS)),
        }[kind]
        decls.append(StateDecl(var, kind, initial))
        variables[var] = kind

    handlers = []
    for _ in range(rng.randint(1, 5)):
        pattern = _random_pattern(rng)
        args = _pattern_args(pattern)
        if not variables or rng.random() < 0.55:
            handlers.append(
                Handler("before", pattern, require=_random_bool(rng, variables, args, 2))
            )
            continue
        assignments = []
        for target in rng.sample(sorted(variables), rng.randint(1, len(variables))):
            kind = variables[target]
            if kind == "bool":
                expr = _random_bool(rng, variables, args, 1)
            else:
                expr = _random_value(rng, kind, variables, args)
            assignments.append(Assignment(target, expr))
        handlers.append(Handler("after", pattern, assignments=tuple(assignments)))

    return PolicyAST(
        name=name,
        scope=PolicyScope("interface", BENCH_INTERFACE.id),
        state_decls=tuple(decls),
        handlers=tuple(handlers),
    )
