import json
import subprocess
import sys

import numpy as np
import pytest

from entcert.channel import channels_equal, unitary_channel
from entcert.cli import main, parse_grid
from entcert.families import repetition_bitflip, repetition_state
from entcert.specfile import load_channel, save_channel

from conftest import h2

FAST = ["--restarts", "2"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


@pytest.fixture
def files(tmp_path):
    main(["examples", str(tmp_path)])
    return tmp_path


def test_examples_writes_spec_files(files, capsys):
    capsys.readouterr()
    assert (files / "identity.channel.json").exists() and (files / "bell.state.json").exists()
    assert channels_equal(load_channel(files / "repetition.channel.json"), repetition_bitflip(0.3))


def test_analyze_examples(files, capsys):
    code, r = report(capsys, "analyze", "--channel", str(files / "identity.channel.json"),
                     "--state", str(files / "bell.state.json"), *FAST)
    res = r["results"]
    assert code == 0
    for key in ("S_Q", "coherent_info"):
        assert abs(res[key] - 1) < 1e-9
    assert abs(res["eof"]["value"] - 1) < 1e-9 and res["eof"]["upper_bound"] is True
    code, r = report(capsys, "analyze", "--example", "depolarizing:1.0", *FAST)
    assert abs(r["results"]["coherent_info"] + 1) < 1e-9 and r["results"]["eof"]["value"] < 1e-4


def test_analyze_malformed_file_exit_2(files, tmp_path, capsys):
    d = json.loads((files / "identity.channel.json").read_text())
    del d["in_dim"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    code, _, err = run(capsys, "analyze", "--channel", str(bad), "--state", str(files / "bell.state.json"))
    assert code == 2 and "in_dim" in err


def test_non_trace_preserving_exit_3(files, tmp_path, capsys):
    d = json.loads((files / "bitflip.channel.json").read_text())
    d["kraus"] = d["kraus"][:1]
    bad = tmp_path / "ntp.json"
    bad.write_text(json.dumps(d))
    code, _, err = run(capsys, "analyze", "--channel", str(bad), "--state", str(files / "bell.state.json"))
    assert code == 3 and "CompletenessViolation" in err and "deviation" in err


def test_certify_exit_codes(files, capsys):
    code, r = report(capsys, "certify", "--example", "repetition", *FAST)
    assert code == 0 and r["results"]["correctable"] is True
    code, r = report(capsys, "certify", "--example", "depolarizing", *FAST)
    assert code == 1 and r["results"]["correctable"] is False
    assert abs(r["results"]["re_mutual_info"] - 2) < 1e-9
    code, _, _ = run(capsys, "certify", "--example", "identity", "--state", str(files / "repetition.state.json"))
    assert code == 3
    code, _, _ = run(capsys, "certify", "--channel", "x.json", "--example", "identity")
    assert code == 2


def test_certify_skip_eof(capsys):
    code, r = report(capsys, "certify", "--example", "dephasing:0.5", "--skip-eof")
    assert code == 1 and r["results"]["eof_upper_bound"] is None


def test_recover_examples(tmp_path, capsys):
    u = np.array([[1, 1], [1, -1]]) / np.sqrt(2) * np.exp(0.3j)
    u = u @ np.diag([1, 1j])
    save_channel(unitary_channel(u), tmp_path / "u.json")
    out = tmp_path / "rec.json"
    code, r = report(capsys, "recover", "--channel", str(tmp_path / "u.json"),
                     "--state-example", "bell", "--out", str(out), "--skip-eof")
    assert code == 0 and abs(r["results"]["fidelity"] - 1) < 1e-9
    assert channels_equal(load_channel(out), unitary_channel(u.conj().T))
    assert r["recovery"]["in_dim"] == 2
    code, r = report(capsys, "recover", "--example", "repetition", "--skip-eof", "--method", "petz")
    assert code == 0 and r["results"]["fidelity"] >= 1 - 1e-9 and r["results"]["method"] == "petz"
    code, _, err = run(capsys, "recover", "--example", "depolarizing", "--skip-eof")
    assert code == 1 and "NotCorrectable" in err


def test_sweep_dephasing_tsv(capsys):
    code, out, _ = run(capsys, "sweep", "dephasing", "--format", "tsv", *FAST)
    lines = out.strip().splitlines()
    header = lines[0].split("\t")
    rows = [dict(zip(header, line.split("\t"))) for line in lines[1:]]
    assert code == 0 and len(rows) == 11
    for row in rows:
        p = float(row["p"])
        assert abs(float(row["I"]) - (1 - h2(p))) < 1e-9
        assert row["eps_E"] != ""


def test_sweep_edge_rows(capsys):
    code, out, _ = run(capsys, "sweep", "bitflip", "--grid", "0", "--format", "json", *FAST)
    row = json.loads(out)[0]
    assert code == 0 and abs(row["I"] - 1) < 1e-9 and abs(row["F"] - 1) < 1e-9
    code, out, _ = run(capsys, "sweep", "depolarizing", "--grid", "1", "--format", "json", *FAST)
    row = json.loads(out)[0]
    assert abs(row["I"] + 1) < 1e-9 and row["E"] < 1e-4


def test_sweep_errors(capsys):
    assert run(capsys, "sweep", "nonsense")[0] == 2
    assert run(capsys, "sweep", "dephasing", "--grid", "0:1:-1")[0] == 2
    assert run(capsys, "sweep", "dephasing", "--grid", "2", "--skip-eof")[0] == 2


def test_parse_grid():
    assert parse_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1, 0.2") == [0.1, 0.2]
    assert len(parse_grid("0:1:0.1")) == 11


def test_tomo_examples(files, tmp_path, capsys):
    code, r = report(capsys, "tomo", "--state", str(files / "product.state.json"))
    assert code == 0 and r["results"]["correlation"] < 1e-9
    code, r = report(capsys, "tomo", "--state", str(files / "bell.state.json"))
    assert abs(r["results"]["correlation"] - 0.25) < 1e-12
    assert r["results"]["reconstruction_error"] < 1e-8
    three = {"format_version": 1, "kind": "pure", "dims": [2, 2, 2], "labels": ["A", "B", "C"],
             "amplitudes": [[1, 0]] + [[0, 0]] * 7}
    (tmp_path / "three.json").write_text(json.dumps(three))
    assert run(capsys, "tomo", "--state", str(tmp_path / "three.json"))[0] == 3


def test_tsv_report(capsys):
    code, out, _ = run(capsys, "certify", "--example", "identity", "--format", "tsv", "--skip-eof")
    assert code == 0 and "results.correctable\tTrue" in out.splitlines()


def test_reports_are_byte_stable(capsys):
    args = ["certify", "--example", "amplitude-damping:0.2", "--seed", "5", *FAST]
    first = run(capsys, *args)[1]
    second = run(capsys, *args)[1]
    assert first == second


def test_examples_match_module_oracles(capsys):
    from entcert.correct import certify
    from entcert.optimize import OptimizerConfig

    _, r = report(capsys, "certify", "--example", "repetition", *FAST)
    cert = certify(repetition_bitflip(0.3), repetition_state(), cfg=OptimizerConfig(restarts=2))
    assert r["results"]["coherent_info"] == cert.coherent_info
    assert r["results"]["eof_upper_bound"] == cert.eof_value
    assert r["results"]["kl_residual"] == cert.kl_residual


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "entcert.cli", "certify", "--example", "identity",
                           "--skip-eof"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["command"] == "certify"
