import io
import threading
from fractions import Fraction

import pytest

from corrlab.errors import ProtocolError
from corrlab.ghz import (
    EXPECTED_PRODUCT,
    REGIME_ORDER,
    default_schedule,
    run_all_regimes,
)
from corrlab.ghznet import (
    SessionTranscript,
    WireMessage,
    coordinator_run,
    decode_payload,
    encode_frame,
    fraction_from_wire,
    fraction_to_wire,
    load_transcript,
    node_serve,
    read_frame,
    schedule_from_wire,
    schedule_to_wire,
    verify_transcript,
)


def start_nodes(count=3):
    """Spin up node servers on ephemeral ports; returns (endpoints, threads)."""
    endpoints = []
    threads = []
    for node in range(1, count + 1):
        ready = threading.Event()
        slot = {}

        def announce(addr, slot=slot, ready=ready):
            slot["addr"] = addr
            ready.set()

        thread = threading.Thread(
            target=node_serve,
            args=(node, None, ("127.0.0.1", 0)),
            kwargs={"announce": announce},
            daemon=True,
        )
        thread.start()
        assert ready.wait(5)
        endpoints.append(slot["addr"])
        threads.append(thread)
    return endpoints, threads


class TestWireFormat:
    def test_frame_round_trip(self):
        message = WireMessage("MEASURE", ("7", "yyx", "5/4"))
        frame = encode_frame(message)
        assert frame == b"17 MEASURE 7 yyx 5/4\n"
        assert read_frame(io.BytesIO(frame)) == message

    def test_read_frame_eof_and_truncation(self):
        assert read_frame(io.BytesIO(b"")) is None
        with pytest.raises(ProtocolError):
            read_frame(io.BytesIO(b"5 DON"))
        with pytest.raises(ProtocolError):
            read_frame(io.BytesIO(b"x DONE\n"))

    def test_message_validation(self):
        with pytest.raises(ProtocolError):
            WireMessage("PING")
        with pytest.raises(ProtocolError):
            WireMessage("HELLO", ("has space",))

    def test_fraction_codec(self):
        for value in (Fraction(5, 4), Fraction(-3, 7), Fraction(2)):
            assert fraction_from_wire(fraction_to_wire(value)) == value

    def test_schedule_codec(self):
        schedule = default_schedule()
        assert schedule_from_wire(schedule_to_wire(schedule)) == schedule

    def test_payload_round_trip(self):
        message = WireMessage("RESULT", ("3", "2", "-1"))
        assert decode_payload(message.payload()) == message


class TestSession:
    def test_networked_matches_in_process(self):
        endpoints, threads = start_nodes()
        transcript = coordinator_run(default_schedule(), 40, seed=42, endpoints=endpoints)
        for thread in threads:
            thread.join(5)
        assert transcript.aborted_reason is None
        assert transcript.void_trials == []
        expected = [
            trial
            for regime in REGIME_ORDER
            for trial in run_all_regimes(default_schedule(), 40, seed=42)[regime]
        ]
        assert transcript.trials == expected

    def test_transcript_save_load_verify(self, tmp_path):
        endpoints, threads = start_nodes()
        transcript = coordinator_run(default_schedule(), 10, seed=7, endpoints=endpoints)
        for thread in threads:
            thread.join(5)
        path = tmp_path / "session.log"
        transcript.save(path)
        report = verify_transcript(load_transcript(path))
        assert report.ok
        assert report.trials_checked == 3 * 4 * 10
        for regime in REGIME_ORDER:
            assert report.product_counts[regime.value] == {
                EXPECTED_PRODUCT[regime]: 10
            }

    def test_verifier_catches_flipped_outcome(self, tmp_path):
        endpoints, threads = start_nodes()
        transcript = coordinator_run(default_schedule(), 5, seed=3, endpoints=endpoints)
        for thread in threads:
            thread.join(5)
        path = tmp_path / "session.log"
        transcript.save(path)
        lines = path.read_text().splitlines()
        for index, line in enumerate(lines):
            if "\tnode2>coord\tRESULT 0 2 " in line:
                flipped = "-1" if line.endswith("+1") else "+1"
                lines[index] = line.rsplit(" ", 1)[0] + " " + flipped
                break
        else:
            pytest.fail("no RESULT line found to tamper with")
        path.write_text("\n".join(lines) + "\n")
        report = verify_transcript(load_transcript(path))
        assert not report.ok
        assert len(report.mismatches) == 1
        assert "trial 0 node 2" in report.mismatches[0]

    def test_verifier_flags_forwarded_results(self):
        transcript = SessionTranscript()
        transcript.log("coord>node1", WireMessage("RESULT", ("0", "2", "+1")))
        report = verify_transcript(transcript)
        assert not report.ok
        assert report.forwarding_violations

    def test_honest_session_never_forwards_results(self):
        endpoints, threads = start_nodes()
        transcript = coordinator_run(default_schedule(), 3, seed=1, endpoints=endpoints)
        for thread in threads:
            thread.join(5)
        for entry in transcript.entries:
            if entry.direction.startswith("coord>"):
                assert entry.message.kind != "RESULT"

    def test_unreachable_node_aborts_cleanly(self):
        endpoints = [("127.0.0.1", 1), ("127.0.0.1", 1), ("127.0.0.1", 1)]
        transcript = coordinator_run(default_schedule(), 5, seed=1, endpoints=endpoints)
        assert transcript.aborted_reason is not None
        assert "unreachable" in transcript.aborted_reason
        assert transcript.trials == []

    def test_node_killed_mid_session_reports_abort(self):
        # Node 3 accepts the handshake, then drops the connection.
        import socket as socketlib

        def half_node(announce):
            server = socketlib.socket()
            server.bind(("127.0.0.1", 0))
            server.listen(1)
            announce(server.getsockname())
            conn, _ = server.accept()
            server.close()
            reader = conn.makefile("rb")
            hello = read_frame(reader)
            conn.sendall(encode_frame(WireMessage("HELLO", (hello.fields[0],))))
            read_frame(reader)  # SCHEDULE
            conn.close()

        endpoints, threads = start_nodes(2)
        ready = threading.Event()
        slot = {}
        thread = threading.Thread(
            target=half_node,
            args=(lambda addr: (slot.__setitem__("addr", addr), ready.set()),),
            daemon=True,
        )
        thread.start()
        assert ready.wait(5)
        endpoints.append(slot["addr"])
        transcript = coordinator_run(
            default_schedule(), 5, seed=1, endpoints=endpoints, timeout=5.0
        )
        assert transcript.aborted_reason is not None
        assert transcript.void_trials == [0]
