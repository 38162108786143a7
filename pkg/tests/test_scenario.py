import json

import pytest

from regionrepl.harness.scenario import (
    SCENARIO_DIR_ENV,
    ScenarioError,
    dump_scenario,
    load_scenario,
    parse_scenario,
    random_scenario,
)

BASE = {
    "ops": [{"at": 0, "client": "c1", "server": "42", "op": "write", "key": "x",
             "value": "1", "id": "w1"}],
}


def _write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data, indent=2))
    return p


def test_bundled_semi_entry_write():
    s = load_scenario("examples/semi_entry_write")
    assert len(s.topology().servers) == 17
    assert [(op.op, op.server) for op in s.ops] == [("write", "42")]


def test_bundled_names_resolve_with_or_without_suffix():
    assert load_scenario("primary_entry_write.json").ops[0].server == "01"
    assert load_scenario("failover_c").faults[0].server == "01"


def test_unknown_server_is_a_load_error_with_line(tmp_path):
    data = {"ops": [dict(BASE["ops"][0], server="99")]}
    with pytest.raises(ScenarioError, match=r"s\.json:\d+: ops\[0\]: unknown server '99'"):
        load_scenario(_write(tmp_path, data))


def test_timeout_not_above_heartbeat_is_a_load_error(tmp_path):
    data = dict(BASE, timing={"heartbeat_ms": 50, "session_timeout_ms": 40})
    with pytest.raises(ScenarioError, match="timing"):
        load_scenario(_write(tmp_path, data))


def test_unknown_fault_server(tmp_path):
    data = dict(BASE, faults=[{"at": 10, "action": "crash", "server": "99"}])
    with pytest.raises(ScenarioError, match=r"faults\[0\]"):
        load_scenario(_write(tmp_path, data))


def test_conflicting_faults_at_same_time():
    data = dict(BASE, faults=[{"at": 10, "action": "crash", "server": "41"},
                              {"at": 10, "action": "recover", "server": "41"}])
    with pytest.raises(ScenarioError, match="crash and recover"):
        parse_scenario(data)


@pytest.mark.parametrize("op, message", [
    ({"op": "delete"}, "op must be"),
    ({"client": "42"}, "collides"),
    ({"value": None}, None),
])
def test_bad_ops(op, message):
    entry = dict(BASE["ops"][0], **op)
    if entry.get("value") is None:
        del entry["value"]
        message = "without value"
    with pytest.raises(ScenarioError, match=message):
        parse_scenario({"ops": [entry]})


def test_duplicate_request_id():
    with pytest.raises(ScenarioError, match="duplicate request id"):
        parse_scenario({"ops": BASE["ops"] * 2})


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "ops": [\n    {"at": 0,,}\n  ]\n}\n')
    with pytest.raises(ScenarioError, match=r"broken\.json:3:"):
        load_scenario(p)


def test_missing_scenario():
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario("no_such_scenario")


def test_ops_and_faults_sorted_at_load():
    data = {
        "ops": [dict(BASE["ops"][0], at=50, id="late"), dict(BASE["ops"][0], at=5, id="early")],
        "faults": [{"at": 30, "action": "recover", "server": "41"},
                   {"at": 20, "action": "crash", "server": "41"}],
    }
    s = parse_scenario(data)
    assert [op.request_id for op in s.ops] == ["early", "late"]
    assert [f.action for f in s.faults] == ["crash", "recover"]


def test_env_dir_takes_precedence_over_bundled(tmp_path, monkeypatch):
    _write(tmp_path, dict(BASE, name="mine"), "semi_entry_write.json")
    monkeypatch.setenv(SCENARIO_DIR_ENV, str(tmp_path))
    assert load_scenario("semi_entry_write").name == "mine"


def test_dump_round_trip(tmp_path):
    s = random_scenario(3, 6, reads=2, jitter_ms=4)
    p = tmp_path / "r.json"
    p.write_text(dump_scenario(s))
    again = load_scenario(p)
    assert again.ops == s.ops
    assert again.jitter_ms == 4 and again.seed == 3


def test_random_scenario_is_seeded():
    assert random_scenario(9, 10).ops == random_scenario(9, 10).ops
    assert random_scenario(9, 10).ops != random_scenario(10, 10).ops
