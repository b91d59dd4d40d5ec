import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

import illiq
from illiq.cli import EXIT_MODEL, EXIT_OK, dumps_report, execute, loads_report, main, report_csv

EXAMPLES = Path(illiq.__file__).parent / "data" / "examples"
BIN1 = str(EXAMPLES / "bin1.json")
ARB = str(EXAMPLES / "arbitrage.json")


def _run(*argv, env=None):
    res = CliRunner().invoke(main, list(argv), env=env)
    return res.exit_code, res.output


def _report(*argv, env=None):
    code, out = _run(*argv, env=env)
    return code, loads_report(out)


def test_solve_hedged_call_is_zero():
    code, rep = _report("solve", "--model", BIN1, "--claim", "call", "--loss", "indicator")
    assert code == EXIT_OK
    hedged = rep["results"]["hedged"]
    assert hedged["price"] == pytest.approx(1 / 3, abs=1e-12)
    assert hedged["value"] == pytest.approx(0.0, abs=1e-10)


def test_bounds_call():
    code, rep = _report("bounds", "--model", BIN1, "--claim", "call")
    assert code == EXIT_OK
    assert rep["results"]["pi_sup"]["value"] == pytest.approx(1 / 3, abs=1e-10)
    assert rep["results"]["pi_inf"]["value"] == pytest.approx(1 / 3, abs=1e-10)


def test_check_arbitrage_reports_ray():
    code, rep = _report("check", "--model", ARB)
    assert code == EXIT_OK
    a3 = rep["results"]["assumptions"]["linearity"]
    assert a3["passed"] is False
    assert a3["detail"]["ray"] is not None


def test_check_bin1_passes():
    code, rep = _report("check", "--model", BIN1, "--loss", "entropic")
    assert code == EXIT_OK
    assert rep["results"]["ok"]


def test_unknown_command():
    code, out = _run("frobnicate", "--model", BIN1)
    assert code == EXIT_MODEL
    assert "No such command" in out
    assert execute("frobnicate", BIN1)[0] == EXIT_MODEL


def test_unreadable_file(tmp_path):
    code, out = _run("check", "--model", str(tmp_path / "missing.json"))
    assert code == EXIT_MODEL
    assert "cannot read model file" in out


def test_invalid_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, out = _run("check", "--model", str(bad))
    assert code == EXIT_MODEL
    assert "invalid JSON" in out


def test_schema_violation(tmp_path):
    data = json.loads(Path(BIN1).read_text())
    data["market"]["unexpected"] = 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    code, out = _run("check", "--model", str(bad))
    assert code == EXIT_MODEL
    assert "schema violation" in out
    assert "$['market']" in out


def test_unknown_claim_name():
    code, out = _run("bounds", "--model", BIN1, "--claim", "nope")
    assert code == EXIT_MODEL
    assert "unknown claim" in out


def test_round_trip_bit_for_bit():
    code, rep = execute("report", BIN1, loss="entropic", claim="call")
    assert code == EXIT_OK
    text = dumps_report(rep)
    again = loads_report(text)
    assert dumps_report(again) == text
    assert again["results"]["bounds"] == loads_report(dumps_report(rep))["results"]["bounds"]


def test_infinities_are_encoded():
    code, rep = execute("bounds", ARB, claim="zero")
    text = dumps_report(rep)
    assert '"-inf"' in text
    assert loads_report(text)["results"]["pi_sup"]["value"] == -math.inf


def test_deterministic_apart_from_timing():
    a = execute("report", BIN1, loss="indicator", claim="call")[1]
    b = execute("report", BIN1, loss="indicator", claim="call")[1]
    a.pop("timing")
    b.pop("timing")
    assert dumps_report(a) == dumps_report(b)


def test_csv_surface():
    code, out = _run("value", "--model", BIN1, "--claim", "call", "--loss", "indicator",
                     "--scales", "0,1,2", "--format", "csv")
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == "scale,value,status"
    vals = [float(l.split(",")[1]) for l in lines[1:]]
    assert vals == pytest.approx([0.0, 1 / 3, 2 / 3], abs=1e-8)


def test_csv_flat_report():
    rep = execute("bounds", BIN1, claim="call")[1]
    text = report_csv(rep)
    assert text.startswith("key,value\n")
    assert "results.pi_sup.value" in text


def test_output_file(tmp_path):
    out = tmp_path / "r.json"
    code, _ = _run("bounds", "--model", BIN1, "--claim", "call", "-o", str(out))
    assert code == EXIT_OK
    assert loads_report(out.read_text())["command"]["name"] == "bounds"


def test_config_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lp_feasibility": 1e-9}))
    code, rep = _report("bounds", "--model", BIN1, "--claim", "call", env={"ILLIQ_CONFIG": str(cfg)})
    assert code == EXIT_OK
    cfg.write_text(json.dumps({"no_such_tolerance": 1}))
    code, out = _run("bounds", "--model", BIN1, "--claim", "call", env={"ILLIQ_CONFIG": str(cfg)})
    assert code == EXIT_MODEL
    assert "unknown tolerance" in out


def test_default_loss_warning():
    rep = execute("solve", BIN1)[1]
    assert any("no --loss given" in w for w in rep["warnings"])


@pytest.mark.parametrize("path", sorted(EXAMPLES.glob("*.json")), ids=lambda p: p.stem)
def test_dual_gap_on_bundled_examples(path):
    code, rep = execute("dual", str(path))
    assert code == EXIT_OK
    cert = rep["results"]["certificate"]
    assert abs(cert["gap"]) <= 1e-6


def test_swap_and_value_commands():
    code, rep = execute("swap", BIN1, loss="entropic", claim="call")
    assert code == EXIT_OK
    assert rep["results"]["value"] == pytest.approx(1 / 3, abs=1e-7)
    code, rep = execute("value", BIN1, loss="indicator", claim="call", side="long")
    assert rep["results"]["value"] == pytest.approx(1 / 3, abs=1e-8)
