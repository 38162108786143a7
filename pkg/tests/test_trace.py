import pytest
from hypothesis import given
from hypothesis import strategies as st

from regionrepl.harness.runner import run_scenario
from regionrepl.harness.scenario import load_scenario
from regionrepl.harness.trace import (
    TraceFormatError,
    format_line,
    parse_line,
    parse_position,
    parse_trace,
    position_text,
)

keys = st.from_regex(r"[a-z][a-z_]{0,7}", fullmatch=True)
values = st.text(st.characters(blacklist_categories=("Cs", "Cc")), max_size=30)


@given(at=st.integers(0, 10**9), who=st.sampled_from(["01", "42", "c1", "world"]),
       event=st.sampled_from(["send", "recv", "apply", "suspect"]),
       fields=st.lists(st.tuples(keys, values), max_size=6))
def test_format_parse_round_trip(at, who, event, fields):
    line = format_line(at, who, event, fields)
    assert "\n" not in line
    rec = parse_line(line)
    assert (rec.at, rec.who, rec.event) == (at, who, event)
    assert list(rec.fields) == fields
    assert rec.render() == line


def test_status_strings_are_quoted_verbatim():
    line = format_line(5, "41", "send", [("status", "acknowledgement from Primary")])
    assert line == "t=5 41 send status='acknowledgement from Primary'"
    assert parse_line(line)["status"] == "acknowledgement from Primary"


@pytest.mark.parametrize("bad", ["garbage", "t=x 01 send", "t=1 01 send novalue",
                                 "t=1 01 send k='open"])
def test_malformed_lines_rejected(bad):
    with pytest.raises(TraceFormatError):
        parse_line(bad, 7)


def test_comments_and_blanks_skipped():
    recs = parse_trace("# note\n\nt=0 01 crash\n")
    assert [(r.line, r.event) for r in recs] == [(3, "crash")]


def test_positions():
    assert position_text((2, 7)) == "2.7"
    assert parse_position("2.7") == (2, 7)
    assert parse_position("Nothing") is None
    assert position_text(None) == "Nothing"


def test_heartbeats_hidden_unless_requested():
    s = load_scenario("semi_entry_write")
    quiet = run_scenario(s).trace_text
    loud = run_scenario(s, trace_heartbeats=True).trace_text
    assert "Heartbeat" not in quiet
    assert "kind=Heartbeat" in loud
    protocol = [ln for ln in loud.splitlines() if "Heartbeat" not in ln and " tick" not in ln]
    assert protocol == quiet.splitlines()


def test_every_send_has_matching_recv_in_fault_free_run():
    text = run_scenario(load_scenario("semi_entry_write")).trace_text
    recs = parse_trace(text)
    sent = {r["mid"] for r in recs if r.event == "send"}
    got = {r["mid"] for r in recs if r.event == "recv"}
    assert sent == got
