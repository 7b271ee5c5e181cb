"""
End-to-end tests of the ab-shift-lab command line
"""

import json

import pytest

from main import EXIT_BUDGET, EXIT_OK, EXIT_VALIDATION, main
from shared_utils.helpers import SCHEMA_HEADER

MIXTURE = "0.5*periodic:2 + 0.5*periodic:3"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("DEPTH", "FORMAT", "ALPHA", "BETA", "CACHE_DIR"):
        monkeypatch.delenv(f"AB_SHIFT_{name}", raising=False)


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_alphabet_text(capsys):
    code, out = _run(capsys, "alphabet")
    assert code == EXIT_OK
    assert "k: 3" in out.out
    assert "1/5" in out.out and "3/5" in out.out


def test_language_csv(capsys):
    code, out = _run(capsys, "language", "--n", "2", "--depth", "6", "--format", "csv")
    assert code == EXIT_OK
    lines = out.out.strip().split("\n")
    assert lines[0] == SCHEMA_HEADER
    assert lines[1] == "word"
    assert len(lines) == 2 + 8
    assert "1 1" not in lines


def test_language_count_json(capsys):
    code, out = _run(capsys, "language", "--n", "3", "--count", "--depth", "6", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out.out) == {"n": 3, "count": 20}


def test_itinerary_boundary_and_nudge(capsys):
    code, out = _run(capsys, "itinerary", "--x", "1/5", "--n", "3")
    assert code == EXIT_VALIDATION
    assert "error" in out.err

    code, out = _run(capsys, "itinerary", "--x", "1/5", "--n", "3", "--nudge")
    assert code == EXIT_OK
    assert "itinerary: 2 1 2" in out.out


@pytest.mark.parametrize("argv", [
    ["alphabet", "--beta", "2"],
    ["alphabet", "--alpha", "1"],
    ["language", "--n", "-1"],
    ["approx", "--measure", "0.7*periodic:2"],
])
def test_validation_exit_code(capsys, argv):
    assert main(argv) == EXIT_VALIDATION


def test_unknown_command(capsys):
    assert main(["frobnicate"]) == EXIT_VALIDATION


def test_budget_exit_code(capsys):
    code, out = _run(capsys, "diagram", "--depth", "10", "--vertex-budget", "5")
    assert code == EXIT_BUDGET
    assert "budget" in out.err


def test_approx_is_deterministic(capsys):
    argv = ["approx", "--measure", MIXTURE, "--depth", "8", "--format", "json"]
    first = _run(capsys, *argv)
    second = _run(capsys, *argv)
    assert first[0] == second[0] == EXIT_OK
    assert first[1].out == second[1].out
    payload = json.loads(first[1].out)
    assert payload["distance"] <= 0.2


def test_out_writes_file(capsys, tmp_path):
    target = tmp_path / "nested" / "parry.json"
    code, out = _run(capsys, "parry", "--depth", "6", "--vertices", "[2],[3]", "--format", "json",
                     "--out", str(target))
    assert code == EXIT_OK
    assert out.out == ""
    payload = json.loads(target.read_text())
    assert payload["entropy"] == pytest.approx(0.6931471805599453)
    assert payload["lambda"] == pytest.approx(2.0)


def test_config_file_flag(capsys, tmp_path):
    path = tmp_path / "lab.conf"
    path.write_text("format = csv\ndepth = 6\n")
    code, out = _run(capsys, "language", "--n", "1", "--config", str(path))
    assert code == EXIT_OK
    assert out.out.splitlines() == [SCHEMA_HEADER, "word", "1", "2", "3"]


@pytest.mark.slow
def test_saturate_parry_base(capsys):
    code, out = _run(capsys, "saturate", "--measure", "parry:base", "--eps", "0.2", "--levels", "3",
                     "--seed", "0", "--format", "json")
    assert code == EXIT_OK
    payload = json.loads(out.out)
    assert payload["admissible"]
    assert payload["lower"] <= payload["upper"]
    assert payload["h"] == pytest.approx(0.881373587, abs=1e-6)
    assert payload["rows"]
