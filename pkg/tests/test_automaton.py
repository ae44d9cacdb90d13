import random

import pytest

from src.pcpe.automaton import (
    Allow,
    AutomatonState,
    Event,
    Halt,
    PrincipalSnapshot,
    ViolationMode,
    compile_policy,
    deserialize_state,
    policy_hash,
    run_trace,
    serialize_state,
    step,
)
from src.pcpe.exceptions import CompileError, StateSchemaMismatchError
from src.pcpe.oracle import Interpreter, oracle_eval
from src.pcpe.policy import empty_policy, parse_policy, render_policy
from src.pcpe.policy.ast import EventPattern, Handler, PolicyAST, PolicyScope
from tests.fixtures import (
    ANONYMOUS,
    BENCH_EVENTS,
    CORNELL,
    LECTURE_MATRIX,
    MATRIX_PRINCIPALS,
    MATRIX_REQUESTS,
    PAYER,
    default_policy,
    lesson_1,
    policy_l,
    random_policy,
    walk_traces,
)

ANON = PrincipalSnapshot.of(ANONYMOUS)
CORNELLIAN = PrincipalSnapshot.of(CORNELL)
PAYING = PrincipalSnapshot.of(PAYER)

LECTURE_EVENTS = tuple(
    Event(method, args, snapshot)
    for method, args in (
        ("GetVideo", {}),
        ("GetVideoHigh", {}),
        ("GetSlide", {"n": 3}),
        ("GetSlide", {"n": 15}),
        ("GetSlide", {"n": 0}),
        ("GetSlide", {}),
        ("GetDublinCore", {}),
    )
    for snapshot in (ANON, CORNELLIAN, PAYING)
)


def _lesson():
    return compile_policy(parse_policy(lesson_1()))


def test_lesson_video_open_before_metadata():
    automaton = _lesson()

    decision = step(automaton, automaton.initial, Event("GetVideo", {}, ANON))

    assert isinstance(decision, Allow)
    assert decision.next == automaton.initial


def test_lesson_metadata_sets_flag():
    automaton = _lesson()

    decision = step(automaton, automaton.initial, Event("GetDublinCore", {}, ANON))

    assert decision.next.valuation["viewedMetadata"] is True


def test_lesson_video_closed_after_metadata_for_anonymous():
    automaton = _lesson()
    viewed = AutomatonState({"viewedMetadata": True})

    decision = step(automaton, viewed, Event("GetVideo", {}, ANON))

    assert isinstance(decision, Halt)
    assert decision.policy_id == "Lesson-1"
    assert decision.handler_id == "before#0"
    assert decision.line == 5
    assert decision.guard == '!viewedMetadata || credential("cornell")'


def test_lesson_video_stays_open_for_cornellians():
    automaton = _lesson()
    viewed = AutomatonState({"viewedMetadata": True})

    assert step(automaton, viewed, Event("GetVideo", {}, CORNELLIAN)).allowed


def test_lesson_trace():
    result = run_trace(
        _lesson(),
        [
            Event("GetVideo", {}, ANON),
            Event("GetDublinCore", {}, ANON),
            Event("GetVideo", {}, ANON),
            Event("GetVideo", {}, CORNELLIAN),
        ],
    )

    assert [d.allowed for d in result.decisions] == [True, True, False, True]
    assert result.final == AutomatonState({"viewedMetadata": True})
    assert result.halted_at is None


def test_empty_policy_allows_everything():
    automaton = compile_policy(empty_policy("none", "Bench"))

    result = run_trace(automaton, list(BENCH_EVENTS))

    assert all(d.allowed for d in result.decisions)
    assert result.final == AutomatonState()


def test_lecture_policy_decisions():
    automaton = compile_policy(parse_policy(policy_l()))
    snapshots = [PrincipalSnapshot.of(p) for p in MATRIX_PRINCIPALS]

    for (method, args), expected in zip(MATRIX_REQUESTS, LECTURE_MATRIX):
        decisions = [
            step(automaton, automaton.initial, Event(method, args, s)).allowed
            for s in snapshots
        ]
        assert tuple(decisions) == expected, method


def test_lecture_slide_denial_names_the_handler():
    automaton = compile_policy(parse_policy(policy_l()))

    decision = step(automaton, automaton.initial, Event("GetSlide", {"n": 15}, ANON))

    assert decision == Halt(
        "Policy-L", "before#2", '(arg("n") <= 10) || credential("cornell")', 12
    )


def test_lecture_slide_out_of_range_is_denied_by_first_guard():
    automaton = compile_policy(parse_policy(policy_l()))

    decision = step(automaton, automaton.initial, Event("GetSlide", {"n": 0}, CORNELLIAN))

    assert decision.handler_id == "before#1"


def test_missing_argument_makes_guard_false():
    automaton = compile_policy(parse_policy(policy_l()))

    decision = step(automaton, automaton.initial, Event("GetSlide", {}, CORNELLIAN))

    assert isinstance(decision, Halt)


def test_ill_typed_argument_makes_guard_false():
    automaton = compile_policy(parse_policy(policy_l()))

    decision = step(automaton, automaton.initial, Event("GetSlide", {"n": "3"}, ANON))

    assert isinstance(decision, Halt)
    assert decision.handler_id == "before#1"


def test_unguarded_method_is_allowed():
    automaton = compile_policy(parse_policy(policy_l()))

    assert step(automaton, automaton.initial, Event("GetVideo", {}, ANON)).allowed


def test_after_assignment_with_undefined_value_is_skipped():
    automaton = compile_policy(
        parse_policy(
            'policy "p" for interface "Bench" {\n'
            "  state count: int = 1;\n"
            '  after invoke(*) { count = arg("n"); }\n'
            "}"
        )
    )

    view = step(automaton, automaton.initial, Event("View", {}, ANON))
    page = step(automaton, automaton.initial, Event("Page", {"n": 9}, ANON))

    assert view.next.valuation["count"] == 1
    assert page.next.valuation["count"] == 9


def test_assignments_run_in_order():
    automaton = compile_policy(
        parse_policy(
            'policy "p" for default {\n'
            "  state a: int = 1;\n"
            "  state b: int = 0;\n"
            "  after invoke(*) { a = 2; b = a; }\n"
            "}"
        )
    )

    decision = step(automaton, automaton.initial, Event("GetObjectProfile"))

    assert dict(decision.next.valuation) == {"a": 2, "b": 2}


def test_bool_and_int_states_differ():
    assert AutomatonState({"x": True}) != AutomatonState({"x": 1})
    assert AutomatonState({"x": 1}) == AutomatonState({"x": 1})


def test_compile_rejects_undeclared_variable():
    ast = parse_policy('policy "p" for default { before invoke(*) { require ghost; } }')

    with pytest.raises(CompileError):
        compile_policy(ast)


def test_compile_rejects_handler_without_require():
    broken = PolicyAST(
        "p", PolicyScope("default"), handlers=(Handler("before", EventPattern("wildcard")),)
    )

    with pytest.raises(CompileError):
        compile_policy(broken)


def test_policy_hash_ignores_layout():
    compact = parse_policy(
        'policy "Lesson-1" for interface "LectureViewer" { state viewedMetadata: bool = false;'
        ' before invoke(method == "GetVideo") { require !viewedMetadata || credential("cornell"); }'
        ' after invoke(method == "GetDublinCore") { viewedMetadata = true; } }'
    )

    assert policy_hash(compact) == policy_hash(parse_policy(lesson_1()))
    assert compile_policy(compact).policy_hash == _lesson().policy_hash
    assert len(policy_hash(compact)) == 64


def test_state_serialization_round_trip():
    automaton = compile_policy(
        parse_policy(
            'policy "p" for default {\n'
            "  state seen: bool = false;\n"
            "  state count: int = 7;\n"
            '  state mode: string = "a\\"b";\n'
            "}"
        )
    )

    data = serialize_state(automaton.initial)

    assert data == (
        b'{"count":{"t":"int","v":7},"mode":{"t":"string","v":"a\\"b"},'
        b'"seen":{"t":"bool","v":false}}'
    )
    assert deserialize_state(data, automaton) == automaton.initial


@pytest.mark.parametrize(
    "data",
    [
        b'{"viewedMetadata":{"t":"int","v":1}}',
        b'{"viewedMetadata":{"t":"bool","v":1}}',
        b'{"other":{"t":"bool","v":true}}',
        b"{}",
        b"[]",
        b"not json",
    ],
)
def test_deserialize_rejects_foreign_state(data):
    with pytest.raises(StateSchemaMismatchError):
        deserialize_state(data, _lesson())


"""
The compiled automaton against the reference interpreter.
"""


def _explore(ast, events, depth):
    """
    Compares the compiled step with the interpreter on every event
    sequence up to `depth` from the initial state.
    """

    automaton = compile_policy(ast)
    interpreter = Interpreter(ast)
    assert automaton.initial == interpreter.initial()

    def visit(state, event):
        compiled = step(automaton, state, event)
        expected = interpreter.decide(state, event)
        assert compiled == expected, (render_policy(ast), event)
        return compiled.next if compiled.allowed else None

    walk_traces(automaton.initial, events, depth, visit)


@pytest.mark.parametrize("seed", range(24))
def test_random_policy_matches_interpreter(seed):
    rng = random.Random(seed)
    _explore(random_policy(rng, f"random-{seed}"), BENCH_EVENTS, 4)


@pytest.mark.parametrize("source", [policy_l, lesson_1])
def test_lecture_policies_match_interpreter(source):
    _explore(parse_policy(source()), LECTURE_EVENTS, 4)


def test_default_policy_matches_interpreter():
    manager = PrincipalSnapshot(frozenset({"repo-manager"}))
    events = [
        Event(method, {}, snapshot)
        for method in ("GetObjectProfile", "AddDataStream", "DeleteDisseminator")
        for snapshot in (ANON, manager)
    ]
    _explore(parse_policy(default_policy()), events, 3)


@pytest.mark.parametrize("mode", list(ViolationMode))
def test_random_traces_match_interpreter(mode):
    rng = random.Random(99)
    for i in range(40):
        ast = random_policy(rng, f"trace-{i}")
        events = [rng.choice(BENCH_EVENTS) for _ in range(rng.randint(0, 12))]
        assert run_trace(compile_policy(ast), events, mode) == oracle_eval(ast, events, mode)


def test_kill_mode_stops_at_first_denial():
    events = [
        Event("GetDublinCore", {}, ANON),
        Event("GetVideo", {}, ANON),
        Event("GetVideo", {}, CORNELLIAN),
    ]

    deny = run_trace(_lesson(), events, ViolationMode.DENY_REQUEST)
    kill = run_trace(_lesson(), events, ViolationMode.KILL_SESSION)

    assert len(deny.decisions) == 3
    assert deny.halted_at is None
    assert len(kill.decisions) == 2
    assert kill.halted_at == 1
    assert kill.final == AutomatonState({"viewedMetadata": True})


def test_accepted_traces_are_prefix_closed():
    rng = random.Random(5)
    for i in range(30):
        automaton = compile_policy(random_policy(rng, f"prefix-{i}"))
        events = [rng.choice(BENCH_EVENTS) for _ in range(8)]
        result = run_trace(automaton, events, ViolationMode.KILL_SESSION)
        if result.halted_at is not None:
            continue
        for cut in range(len(events) + 1):
            prefix = run_trace(automaton, events[:cut], ViolationMode.KILL_SESSION)
            assert prefix.halted_at is None
            assert prefix.decisions == result.decisions[:cut]


def test_stateless_policy_decisions_do_not_depend_on_order():
    automaton = compile_policy(parse_policy(policy_l()))
    rng = random.Random(3)
    events = list(LECTURE_EVENTS)
    baseline = {e: d.allowed for e, d in zip(events, run_trace(automaton, events).decisions)}

    for _ in range(10):
        rng.shuffle(events)
        decisions = run_trace(automaton, events).decisions
        assert {e: d.allowed for e, d in zip(events, decisions)} == baseline


def test_denial_leaves_state_unchanged():
    automaton = compile_policy(
        parse_policy(
            'policy "p" for interface "Bench" {\n'
            "  state count: int = 0;\n"
            '  before invoke(method == "Close") { require false; }\n'
            '  after invoke(*) { count = 5; }\n'
            "}"
        )
    )

    decisions = run_trace(automaton, [Event("Close", {}, ANON)])

    assert decisions.final == AutomatonState({"count": 0})
    assert isinstance(decisions.decisions[0], Halt)

