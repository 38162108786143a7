import json
import subprocess
import sys

from regionrepl.harness.cli import main


def test_run_writes_trace_and_metrics(tmp_path, golden_dir):
    trace, metrics = tmp_path / "t.trace", tmp_path / "m.json"
    rc = main(["run", "--scenario", "examples/semi_entry_write",
               "--trace", str(trace), "--metrics", str(metrics)])
    assert rc == 0
    assert trace.read_text() == (golden_dir / "semi_entry_write.trace").read_text()
    m = json.loads(metrics.read_text())
    assert m["writes"]["w1"]["latency_ms"] == 50
    assert m["summary"] == {"writes": 1, "acked": 1, "failed": 0, "max_latency_ms": 50,
                            "primaries": ["01"]}


def test_run_with_check(capsys):
    assert main(["run", "--scenario", "failover_b", "--check"]) == 0
    err = capsys.readouterr().err
    assert "PASS fifo" in err and "PASS status" in err


def test_check_golden_and_corrupt(golden_dir, corrupt_dir, capsys):
    assert main(["check", "--trace", str(golden_dir / "failover_c.trace")]) == 0
    assert main(["check", "--trace", str(corrupt_dir / "log_gap.trace")]) == 1
    out = capsys.readouterr().out
    assert "FAIL log" in out


def test_converge(capsys):
    assert main(["converge", "--scenario", "failover_a"]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_converge_timeout_is_nonzero(capsys):
    assert main(["converge", "--scenario", "failover_c", "--max-time", "1100"]) == 1
    assert "max_time" in capsys.readouterr().out


def test_load_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"ops": [{"server": "99", "key": "x", "value": "1"}]}')
    assert main(["run", "--scenario", str(bad)]) == 2
    assert "unknown server '99'" in capsys.readouterr().err
    assert main(["check", "--trace", str(tmp_path / "missing.trace")]) == 2


def test_gen_then_run(tmp_path):
    scen = tmp_path / "g.json"
    assert main(["gen", "--seed", "4", "--writes", "5", "--reads", "2", "--out", str(scen)]) == 0
    assert main(["converge", "--scenario", str(scen)]) == 0


def test_check_reads_stdin(golden_dir):
    proc = subprocess.run([sys.executable, "-m", "regionrepl", "check", "--trace", "-"],
                          input=(golden_dir / "primary_entry_write.trace").read_text(),
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "FAIL" not in proc.stdout
