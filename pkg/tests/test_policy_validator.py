import random

from src.pcpe.policy import parse_policy, validate_policy
from src.pcpe.primitives import PRIMITIVE_METHODS
from tests.fixtures import (
    BENCH_INTERFACE,
    default_policy,
    dublin_core_interface,
    lecture_interface,
    lesson_1,
    policy_l,
    random_policy,
)


def _kinds(text: str, interface=None) -> list[str]:
    return [d.kind for d in validate_policy(parse_policy(text), interface)]


def test_lecture_policy_is_valid():
    assert validate_policy(parse_policy(policy_l()), lecture_interface()) == []


def test_lesson_policy_is_valid():
    assert validate_policy(parse_policy(lesson_1()), lecture_interface()) == []


def test_default_policy_is_valid_against_primitives():
    assert validate_policy(parse_policy(default_policy()), None, PRIMITIVE_METHODS) == []


def test_unknown_method():
    diagnostics = validate_policy(
        parse_policy(
            'policy "p" for interface "LectureViewer" {\n'
            '  before invoke(method == "GetFoo") { require true; }\n'
            "}"
        ),
        lecture_interface(),
    )

    assert [d.kind for d in diagnostics] == ["UnknownMethod"]
    assert "GetFoo" in diagnostics[0].message
    assert diagnostics[0].line == 2


def test_arg_compared_with_wrong_type():
    diagnostics = validate_policy(
        parse_policy(
            'policy "p" for interface "LectureViewer" {\n'
            '  before invoke(method == "GetSlide") { require arg("n") == "abc"; }\n'
            "}"
        ),
        lecture_interface(),
    )

    assert [d.kind for d in diagnostics] == ["TypeMismatch"]
    assert (diagnostics[0].line, diagnostics[0].column) == (2, 58)


def test_default_scope_checks_primitive_names():
    kinds = _kinds(
        'policy "d" for default { before invoke(method == "GetVideo") { require true; } }'
    )

    assert kinds == ["UnknownMethod"]


def test_restricted_primitive_list():
    diagnostics = validate_policy(
        parse_policy(default_policy()), None, ["GetObjectProfile", "ListDisseminators"]
    )

    assert {d.kind for d in diagnostics} == {"UnknownMethod"}
    assert len(diagnostics) == 4


def test_missing_interface():
    assert _kinds(policy_l()) == ["MissingInterface"]


def test_scope_mismatch():
    assert _kinds(policy_l(), dublin_core_interface()) == ["ScopeMismatch"]


def test_duplicate_and_undeclared_variables():
    kinds = _kinds(
        'policy "p" for interface "LectureViewer" {\n'
        "  state seen: bool = false;\n"
        "  state seen: int = 0;\n"
        '  before invoke(*) { require missing; }\n'
        '  after invoke(*) { ghost = true; }\n'
        "}",
        lecture_interface(),
    )

    assert kinds == ["DuplicateVariable", "UndeclaredVariable", "UndeclaredVariable"]


def test_initial_value_type():
    assert _kinds('policy "p" for default { state n: int = "zero"; }') == ["TypeMismatch"]


def test_require_must_be_bool():
    kinds = _kinds(
        'policy "p" for interface "LectureViewer" {\n'
        '  before invoke(method == "GetSlide") { require arg("n"); }\n'
        "}",
        lecture_interface(),
    )

    assert kinds == ["TypeMismatch"]


def test_ordering_on_bool_is_rejected():
    kinds = _kinds(
        'policy "p" for default { state f: bool = true; before invoke(*) { require f < true; } }'
    )

    assert kinds == ["TypeMismatch"]


def test_assignment_type_mismatch():
    kinds = _kinds(
        'policy "p" for interface "LectureViewer" {\n'
        "  state count: int = 0;\n"
        '  after invoke(method == "GetSlide") { count = credential("cornell"); }\n'
        "}",
        lecture_interface(),
    )

    assert kinds == ["TypeMismatch"]


def test_arg_of_unguarded_method():
    kinds = _kinds(
        'policy "p" for interface "LectureViewer" {\n'
        '  before invoke(method == "GetVideo") { require arg("n") > 1; }\n'
        "}",
        lecture_interface(),
    )

    assert kinds == ["UnknownArgument"]


def test_wildcard_sees_args_of_every_method():
    kinds = _kinds(
        'policy "p" for interface "LectureViewer" {\n'
        '  before invoke(*) { require arg("n") <= 10; }\n'
        "}",
        lecture_interface(),
    )

    assert kinds == []


def test_every_diagnostic_has_a_position():
    diagnostics = validate_policy(
        parse_policy(
            'policy "p" for interface "LectureViewer" {\n'
            "  state a: bool = 1;\n"
            '  before invoke(method in ["GetSlide", "Nope"]) { require arg("n") == "x" && b; }\n'
            "}"
        ),
        lecture_interface(),
    )

    assert len(diagnostics) == 4
    assert all(d.line > 0 and d.column > 0 for d in diagnostics)


def test_validation_is_deterministic():
    ast = parse_policy(
        'policy "p" for interface "LectureViewer" { before invoke(method == "X") { require y; } }'
    )

    assert validate_policy(ast, lecture_interface()) == validate_policy(
        ast, lecture_interface()
    )


def test_random_policies_are_valid():
    rng = random.Random(11)
    for i in range(60):
        assert validate_policy(random_policy(rng, f"r{i}"), BENCH_INTERFACE) == []
