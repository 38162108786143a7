import pytest

from regionrepl.harness.checks import CHECKS, check_convergence, verify_trace
from regionrepl.harness.runner import run_scenario
from regionrepl.harness.scenario import ClientOp, Scenario, load_scenario, random_scenario
from regionrepl.harness.trace import TraceFormatError

GOLDEN = ["semi_entry_write", "primary_entry_write", "failover_a", "failover_b", "failover_c"]

CORRUPTIONS = {
    "illegal_transition": "status",
    "log_gap": "log",
    "double_primary": "single_primary",
    "wrong_message_count": "message_count",
    "stale_read": "read_your_writes",
    "non_fifo": "fifo",
}


@pytest.mark.parametrize("name", GOLDEN)
def test_golden_traces_pass_every_check(golden_dir, name):
    report = verify_trace((golden_dir / f"{name}.trace").read_text())
    assert report.ok, report.lines()
    assert not report.failed_checks()


@pytest.mark.parametrize("name, check", sorted(CORRUPTIONS.items()))
def test_corrupted_trace_flagged_by_intended_check(corrupt_dir, name, check):
    report = verify_trace((corrupt_dir / f"{name}.trace").read_text())
    assert not report.ok
    assert check in report.failed_checks()
    assert all(v.line > 0 for v in report.violations)


def test_corrupt_suite_covers_at_least_six_cases(corrupt_dir):
    files = sorted(p.stem for p in corrupt_dir.glob("*.trace"))
    assert files == sorted(CORRUPTIONS)


def test_report_lists_every_check(golden_dir):
    lines = verify_trace((golden_dir / "failover_c.trace").read_text()).lines()
    for name in CHECKS:
        assert any(ln.split()[1].rstrip(":") == name for ln in lines)
    assert any(ln.startswith("SKIP message_count") for ln in lines)


def test_malformed_trace_is_a_parse_error():
    with pytest.raises(TraceFormatError):
        verify_trace("t=0 world config primary=01\nnot a trace line\n")


def test_forged_backwards_transition_flagged(golden_dir):
    lines = (golden_dir / "semi_entry_write.trace").read_text().splitlines()
    idx = next(i for i, ln in enumerate(lines) if " 42 recv kind=CommitToSemi" in ln)
    # 42 has seen the sync acknowledgement, then resends the very first status
    fields = "req=w1 key=x value=1 entry=42 slsn=S42W0001 plsn=Nothing epoch=Nothing"
    status = "status='pending from Secondary in semi synchronous replication level'"
    lines[idx + 1:idx + 1] = [
        f"t=45 42 send kind=ForwardWrite to=41 mid=999 {fields} {status}",
        f"t=55 41 recv kind=ForwardWrite from=42 mid=999 {fields} {status}",
    ]
    report = verify_trace("\n".join(lines) + "\n")
    assert "status" in report.failed_checks()


def test_fault_free_run_converges():
    out = run_scenario(random_scenario(1, 100, entry_roles=("any",)))
    report = check_convergence(out.world)
    assert report.ok, report.problems
    assert len(report.servers) == 17


def test_crashed_semi_excluded_from_convergence():
    out = run_scenario(load_scenario("failover_a"))
    report = check_convergence(out.world)
    assert report.ok
    assert "42" not in report.servers and len(report.servers) == 16


def test_corrupted_store_fails_naming_server_and_key():
    s = Scenario(ops=[ClientOp(0, "c1", "42", "write", "x", "1", "w1")])
    out = run_scenario(s)
    out.world.replicas["33"].store["x"] = "tampered"
    report = check_convergence(out.world)
    assert not report.ok
    assert any("33" in p and "'x'" in p for p in report.problems)


def test_leftover_pending_entry_fails_convergence():
    out = run_scenario(Scenario(ops=[ClientOp(0, "c1", "42", "write", "x", "1", "w1")]))
    out.world.replicas["21"].pending["ghost"] = object()
    report = check_convergence(out.world)
    assert not report.ok
    assert any("21" in p for p in report.problems)
