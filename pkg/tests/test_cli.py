import json

import pytest
from typer.testing import CliRunner

from src.pcpe.cli import EXIT_DENIED, EXIT_FAULT, EXIT_OK, EXIT_USAGE, app, run_command
from tests.fixtures import SAMPLES, lesson_1, slide_bytes

runner = CliRunner()


@pytest.fixture
def root(tmp_path):
    """
    A repository set up entirely through the CLI from the sample files.
    """

    repo = tmp_path / "repo"
    steps = [
        ["registry", "add-interface", str(SAMPLES / "interfaces" / "LectureViewer.json")],
        ["registry", "add-interface", str(SAMPLES / "interfaces" / "DublinCore.json")],
        ["registry", "add-mechanism", str(SAMPLES / "mechanisms" / "lecture-mech.json")],
        ["registry", "add-mechanism", str(SAMPLES / "mechanisms" / "dc-mech.json")],
        ["policy", "set-default", str(SAMPLES / "policies" / "default.pol")],
        ["ingest", str(SAMPLES / "objects" / "lecture-A.json")],
    ]
    for step in steps:
        result = runner.invoke(app, [*step, "--root", str(repo)])
        assert result.exit_code == EXIT_OK, result.output
    return repo


def _invoke(root, *args: str):
    return runner.invoke(app, [*args, "--root", str(root)])


def _json(result) -> dict:
    return json.loads(result.stdout)


def test_setup_stores_the_object(root):
    assert (root / "objects" / "lecture-A.json").exists()


def test_invoke_writes_payload(root):
    result = _invoke(root, "invoke", "lecture-A", "Lecture-dissem", "GetSlide", "--arg", "n=3")

    assert result.exit_code == EXIT_OK
    assert result.stdout_bytes == slide_bytes("lecture-A", 3)


def test_invoke_json(root):
    result = _invoke(
        root, "invoke", "lecture-A", "Lecture-dissem", "GetSlide", "--arg", "n=3", "--json"
    )

    body = _json(result)
    assert body["ok"] is True
    assert body["result"]["mimeType"] == "image/png"


def test_denied_invocation_exits_2(root):
    result = _invoke(
        root, "invoke", "lecture-A", "Lecture-dissem", "GetVideoHigh", "--json"
    )

    assert result.exit_code == EXIT_DENIED
    body = _json(result)
    assert body["ok"] is False
    assert body["error"]["kind"] == "PolicyViolation"
    assert body["error"]["detail"]["handlerId"] == "before#0"
    assert body["error"]["detail"]["policyId"] == "Policy-L"


@pytest.mark.parametrize(
    "presented",
    [["--credential", "cornell"], ["--receipt", "fee=500"], ["--receipt", "fee=900"]],
)
def test_credentials_and_receipts_open_high_video(root, presented):
    result = _invoke(
        root, "invoke", "lecture-A", "Lecture-dissem", "GetVideoHigh", *presented
    )

    assert result.exit_code == EXIT_OK
    assert result.stdout_bytes == b"lecture-A video high"


def test_small_receipt_is_not_enough(root):
    result = _invoke(
        root, "invoke", "lecture-A", "Lecture-dissem", "GetVideoHigh", "--receipt", "fee=499"
    )

    assert result.exit_code == EXIT_DENIED


def test_fault_exits_1(root):
    result = _invoke(root, "invoke", "ghost", "Lecture-dissem", "GetVideo", "--json")

    assert result.exit_code == EXIT_FAULT
    assert _json(result)["error"]["kind"] == "UnknownObject"


def test_object_show(root):
    result = _invoke(root, "object", "show", "lecture-A")

    assert result.exit_code == EXIT_OK
    assert "Lecture-dissem" in result.stdout


def test_primitive_mutation_needs_manager(root):
    args = ["primitive", "lecture-A", "AddDataStream", "--arg", "dsId=Notes"]
    args += ["--arg", "mimeType=text/plain", "--arg", "content=hola"]

    denied = _invoke(root, *args)
    allowed = _invoke(root, *args, "--credential", "repo-manager", "--json")

    assert denied.exit_code == EXIT_DENIED
    assert allowed.exit_code == EXIT_OK
    assert "Notes" in [ds["id"] for ds in _json(allowed)["result"]["datastreams"]]


def test_primitive_args_json(root):
    result = _invoke(
        root,
        "primitive",
        "lecture-A",
        "GetDissemination",
        "--args-json",
        '{"disseminatorId": "Lecture-dissem", "method": "GetSlide", "args": {"n": 2}}',
    )

    assert result.exit_code == EXIT_OK
    assert result.stdout_bytes == slide_bytes("lecture-A", 2)


def test_group_policy_and_session(root, tmp_path):
    policy_file = tmp_path / "lesson-1.pol"
    policy_file.write_text(lesson_1(), encoding="utf-8")

    assert _invoke(root, "policy", "group", "add", "lesson-1", str(policy_file)).exit_code == 0
    assert (
        _invoke(root, "policy", "attach", "lecture-A", "Lecture-dissem", "--group", "lesson-1")
        .exit_code
        == 0
    )
    _invoke(root, "invoke", "lecture-A", "Lecture-dissem", "GetDublinCore", "--session", "s1")
    video = _invoke(root, "invoke", "lecture-A", "Lecture-dissem", "GetVideo", "--session", "s1")
    session = _invoke(root, "session", "show", "s1", "--json")

    assert video.exit_code == EXIT_DENIED
    scopes = _json(session)["result"]["scopes"]
    assert scopes["lecture-A/Lecture-dissem"]["state"] == {
        "viewedMetadata": {"t": "bool", "v": True}
    }


def test_invalid_policy_reports_diagnostics(root, tmp_path):
    policy_file = tmp_path / "bad.pol"
    policy_file.write_text('policy "bad" for interface "LectureViewer" {\n  oops\n}\n')

    result = _invoke(root, "policy", "group", "add", "bad", str(policy_file), "--json")

    assert result.exit_code == EXIT_FAULT
    error = _json(result)["error"]
    assert error["kind"] == "InvalidPolicy"
    assert error["detail"]["diagnostics"][0]["line"] == 2


def test_export_and_import(root, tmp_path):
    package = tmp_path / "lecture-A.pcpe"
    other = tmp_path / "other"

    exported = _invoke(root, "export", "lecture-A", "-o", str(package))
    imported = runner.invoke(app, ["import", str(package), "--root", str(other)])
    denied = runner.invoke(
        app,
        ["invoke", "lecture-A", "Lecture-dissem", "GetVideoHigh", "--root", str(other)],
    )

    assert exported.exit_code == EXIT_OK
    assert imported.exit_code == EXIT_OK
    assert imported.stdout.strip() == "lecture-A"
    assert denied.exit_code == EXIT_DENIED


def test_tampered_package_is_rejected(root, tmp_path):
    package = tmp_path / "lecture-A.pcpe"
    _invoke(root, "export", "lecture-A", "-o", str(package))
    data = bytearray(package.read_bytes())
    data[len(data) // 2] ^= 0x01
    package.write_bytes(bytes(data))

    result = runner.invoke(
        app, ["import", str(package), "--root", str(tmp_path / "other"), "--json"]
    )

    assert result.exit_code == EXIT_FAULT
    assert _json(result)["error"]["kind"] == "TamperDetected"


def test_run_command_exit_codes(root):
    base = ["--root", str(root)]

    assert run_command(["object", "show", "lecture-A", *base]) == EXIT_OK
    assert run_command(["invoke", "lecture-A", "Lecture-dissem", "GetVideoHigh", *base]) == (
        EXIT_DENIED
    )
    assert run_command(["object", "show", "ghost", *base]) == EXIT_FAULT


@pytest.mark.parametrize(
    "argv",
    [
        ["no-such-command"],
        ["invoke", "lecture-A"],
        ["invoke", "lecture-A", "Lecture-dissem", "GetSlide", "--arg", "n"],
        ["invoke", "lecture-A", "Lecture-dissem", "GetVideoHigh", "--receipt", "fee=5.00"],
        ["policy", "attach", "lecture-A", "Lecture-dissem"],
        ["policy", "attach", "lecture-A", "Lecture-dissem", "--inline", "a", "--group", "b"],
    ],
)
def test_usage_errors_exit_64(root, argv):
    assert run_command([*argv, "--root", str(root)]) == EXIT_USAGE
