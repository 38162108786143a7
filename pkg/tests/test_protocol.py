import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from regionrepl.protocol import (
    Lsn,
    LsnParseError,
    ProtocolError,
    Status,
    StatusEvent,
    allowed_transition,
    determine_status,
    format_lsn,
    parse_lsn,
)
from regionrepl.topology import Role

servers = st.sampled_from(["01", "11", "21", "31", "41", "42", "43", "44", "12", "34"])


def test_paper_lsn_texts():
    assert format_lsn(Lsn("S", "42", 0, 1)) == "S42W0001"
    assert format_lsn(Lsn("P", "01", 0, 1)) == "P01W0001"
    assert parse_lsn("P11W0001", epoch=1) == Lsn("P", "11", 1, 1)


def test_counter_widens_past_four_digits():
    assert format_lsn(Lsn("P", "01", 0, 9999)) == "P01W9999"
    assert format_lsn(Lsn("P", "01", 0, 10000)) == "P01W10000"
    assert parse_lsn("P01W10000").counter == 10000


@pytest.mark.parametrize("text", ["X42W0001", "S4W0001", "S42W001", "S42W0000", "S42w0001",
                                  "S42W00001", "", "P01W0001 "])
def test_malformed_lsn(text):
    with pytest.raises(LsnParseError):
        parse_lsn(text)


@given(st.sampled_from("PS"), servers, st.integers(0, 50), st.integers(1, 10**6))
def test_lsn_round_trip(role_char, server, epoch, counter):
    lsn = Lsn(role_char, server, epoch, counter)
    assert parse_lsn(format_lsn(lsn), epoch) == lsn


def test_status_strings_are_verbatim():
    assert [s.render() for s in Status] == [
        "pending from Secondary in semi synchronous replication level",
        "pending from Secondary in synchronous replication level",
        "Primary commit",
        "acknowledgement from synchronous replication Level",
        "acknowledgement from semi synchronous replication Level",
    ]
    for s in Status:
        assert Status.parse(s.render()) is s


def test_determine_status_table():
    assert determine_status(Role.SEMI, StatusEvent.CLIENT_WRITE_ACCEPTED) is Status.PENDING_SEMI_SYNC
    assert determine_status(Role.SYNC, StatusEvent.FORWARD_RECEIVED) is Status.PENDING_SYNC
    assert determine_status(Role.PRIMARY, StatusEvent.WRITE_APPLIED) is Status.PRIMARY_COMMIT
    assert determine_status(Role.SYNC, StatusEvent.COMMIT_APPLIED) is Status.ACK_SYNC
    assert determine_status(Role.SEMI, StatusEvent.COMMIT_APPLIED) is Status.ACK_SEMI_SYNC


def test_determine_status_rejects_everything_else():
    valid = {(Role.SEMI, StatusEvent.CLIENT_WRITE_ACCEPTED), (Role.SYNC, StatusEvent.FORWARD_RECEIVED),
             (Role.PRIMARY, StatusEvent.WRITE_APPLIED), (Role.SYNC, StatusEvent.COMMIT_APPLIED),
             (Role.SEMI, StatusEvent.COMMIT_APPLIED)}
    for role, event in itertools.product(Role, StatusEvent):
        if (role, event) in valid:
            assert determine_status(role, event) is determine_status(role, event)
        else:
            with pytest.raises(ProtocolError):
                determine_status(role, event)


def test_semi_entry_chain_is_allowed():
    chain = [None, Status.PENDING_SEMI_SYNC, Status.PENDING_SYNC, Status.PRIMARY_COMMIT,
             Status.ACK_SYNC, Status.ACK_SEMI_SYNC]
    for a, b in zip(chain, chain[1:]):
        assert allowed_transition(a, b)


def test_primary_entry_chain_is_allowed():
    chain = [None, Status.PRIMARY_COMMIT, Status.ACK_SYNC, Status.ACK_SEMI_SYNC]
    for a, b in zip(chain, chain[1:]):
        assert allowed_transition(a, b)


@pytest.mark.parametrize("a,b", [
    (Status.ACK_SEMI_SYNC, Status.PENDING_SYNC),
    (Status.ACK_SYNC, Status.PRIMARY_COMMIT),
    (Status.PRIMARY_COMMIT, Status.PENDING_SYNC),
    (None, Status.ACK_SYNC),
    (None, Status.ACK_SEMI_SYNC),
    (Status.PENDING_SYNC, Status.PENDING_SEMI_SYNC),
])
def test_illegal_transitions(a, b):
    assert not allowed_transition(a, b)


@given(st.lists(st.sampled_from(list(Status)), max_size=8))
def test_legal_histories_never_go_back_to_pending(history):
    # once a record is committed, no legal path returns to a pending status
    pending = {Status.PENDING_SEMI_SYNC, Status.PENDING_SYNC}
    prev = None
    committed = False
    for s in history:
        if not allowed_transition(prev, s):
            return
        if committed:
            assert s not in pending
        committed = committed or s not in pending
        prev = s
