"""Command-line surface: statuses, exit codes, byte determinism."""

import json

import pytest

from mtg_turing.cli import main
from mtg_turing.machine import (
    SYMBOLS,
    TmConfig,
    TmState,
    TmTape,
    load_default_program,
    symbol_by_type,
    tm_run,
)


def write_tape(path, head, left=(), right=(), state=None):
    data = {"left": list(left), "head": head, "right": list(right)}
    if state:
        data["state"] = state
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def halt1(tmp_path):
    return write_tape(tmp_path / "halt1.tape", "Rhino")


@pytest.fixture
def blank(tmp_path):
    return write_tape(tmp_path / "blank.tape", "Cephalid")


def test_run_reports_halt_step(halt1, capsys):
    code = main(["run", "--tape", halt1, "--state", "q1", "--max-steps", "10"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines()[0] == "halted-alice-wins at step 1"
    assert "state: halted" in out


def test_run_step_limit_prints_oracle_tape(blank, capsys):
    code = main(["run", "--tape", blank, "--state", "q2", "--max-steps", "50"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines()[0] == "step-limit"
    expected = tm_run(
        TmConfig(TmTape((), symbol_by_type("Cephalid"), ()), TmState.Q2),
        load_default_program(),
        50,
    ).config
    right_line = next(l for l in out.splitlines() if l.startswith("right:"))
    assert right_line == "right: " + ",".join(s.creature_type for s in expected.tape.right)


def test_run_requires_tape_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--state", "q1", "--max-steps", "5"])
    assert exc.value.code == 2


def test_run_state_can_come_from_the_tape_file(tmp_path, capsys):
    path = write_tape(tmp_path / "t.tape", "Rhino", state="q1")
    assert main(["run", "--tape", path, "--max-steps", "3"]) == 0
    assert "halted-alice-wins at step 1" in capsys.readouterr().out


def test_run_without_any_state_is_a_usage_error(tmp_path):
    path = write_tape(tmp_path / "t.tape", "Rhino")
    with pytest.raises(SystemExit) as exc:
        main(["run", "--tape", path, "--max-steps", "3"])
    assert exc.value.code == 2


def test_run_trace_files_are_byte_identical(halt1, tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        trace = tmp_path / f"{name}.trace"
        main(["run", "--tape", halt1, "--state", "q1", "--max-steps", "10", "--trace", str(trace)])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    assert (tmp_path / "a.trace").read_bytes() == (tmp_path / "b.trace").read_bytes()
    assert (tmp_path / "a.trace").read_bytes()  # not empty


def test_verify_small_batch_ok(capsys):
    code = main(["verify", "--cases", "3", "--steps", "15", "--seed", "42"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.strip().splitlines()[-1] == "3/3 ok"


def test_verify_single_case_prints_turn_counts(capsys):
    code = main(["verify", "--cases", "1", "--steps", "1", "--seed", "7"])
    out = capsys.readouterr().out
    assert code == 0
    line = out.splitlines()[0]
    assert "turns3=" in line and "turns4=" in line


def test_verify_rejects_zero_cases():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--cases", "0", "--steps", "5", "--seed", "1"])
    assert exc.value.code == 2


def test_dump_board_deterministic(blank, capsys):
    main(["dump-board", "--tape", blank, "--state", "q1"])
    first = capsys.readouterr().out
    main(["dump-board", "--tape", blank, "--state", "q1"])
    second = capsys.readouterr().out
    assert first == second
    assert "Rotlung Reanimator" in first


def test_dump_board_json_matches_text_content(blank, capsys):
    main(["dump-board", "--tape", blank, "--state", "q1"])
    text = capsys.readouterr().out
    main(["dump-board", "--tape", blank, "--state", "q1", "--format", "json"])
    data = json.loads(capsys.readouterr().out)
    assert f"permanents={len(data['permanents'])}" in text
    assert data["players"]["alice"]["hand"] == ["Infest"]


def test_manifest_env_var_is_honored(halt1, tmp_path, monkeypatch, capsys):
    import importlib.resources as res

    bundled = res.files("mtg_turing.data").joinpath("rogozhin_2_18.manifest").read_text()
    alt = tmp_path / "alt.manifest"
    alt.write_text(bundled)
    monkeypatch.setenv("MTG_TURING_MANIFEST", str(alt))
    assert main(["run", "--tape", halt1, "--state", "q1", "--max-steps", "5"]) == 0
    monkeypatch.setenv("MTG_TURING_MANIFEST", str(tmp_path / "missing.manifest"))
    with pytest.raises(SystemExit) as exc:
        main(["run", "--tape", halt1, "--state", "q1", "--max-steps", "5"])
    assert exc.value.code == 2
