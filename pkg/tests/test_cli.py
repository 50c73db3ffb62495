import hashlib

import pytest

from legendre_methods.cli import main
from legendre_methods.harness import OUTPUT_DIR_ENV, read_trace


def test_run_to_stdout(capsys):
    assert main(["run", "nr:mbf", "--k", "1", "--steps", "2", "--lambda0", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("step,k,f,d,gap")
    assert len(lines) == 4


def test_run_to_file(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert main(["run", "lt:lp", "--problem", "lp2x4", "--k", "1", "--steps", "3", "-o", "lp.json", "--format", "json"]) == 0
    cols, rows = read_trace(tmp_path / "lp.json")
    assert "lambda_4" in cols and len(rows) == 4


def test_seed_is_reproducible(tmp_path):
    digests = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        assert main(["run", "lt:mbf", "--problem", "random_qp", "--seed", "5", "-o", str(path)]) == 0
        digests.append(hashlib.md5(path.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_gap_data(capsys):
    assert main(["run", "sumt:log", "--gap-data"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "k,gap,bound"
    assert len(out) == 5


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"method": "ignored", "k": 1.0, "steps": 5, "lambda0": 2.0}')
    assert main(["run", "nr:mbf", "--config", str(cfg), "--steps", "1"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 3


def test_compare_pass_and_fail(capsys):
    assert main(["compare", "nr:mbf", "dual:klprox", "--steps", "3"]) == 0
    out = capsys.readouterr().out
    assert "step 3:" in out and "pass" in out
    assert main(["compare", "nr:mbf", "lt:mbf", "--lambda0", "2"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_compare_length_mismatch(capsys):
    assert main(["compare", "courant", "al", "--problem", "eq_qp1"]) == 2
    assert "error:" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["run", "newton"], ["run", "nr:mbf", "--tau", "0.3"], ["run", "nr:mbf", "--problem", "nope"]])
def test_config_errors(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_verify_suite(capsys):
    assert main(["verify", "transforms", "three-point"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split()[1] for line in out[:3]] == ["1", "2", "12"]
    assert out[-1] == "3/3 criteria passed"


def test_verify_unknown_suite(capsys):
    assert main(["verify", "everything"]) == 2


def test_listings(capsys):
    assert main(["list-problems"]) == 0
    assert "lp2x4" in capsys.readouterr().out
    assert main(["list-methods"]) == 0
    out = capsys.readouterr().out
    assert "dual:bregman-chks" in out and "sumt:ls" in out


def test_missing_verb():
    with pytest.raises(SystemExit):
        main([])
