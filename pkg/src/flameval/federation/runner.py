"""Wire a coordinator and participants together over a transport and run rounds."""

from __future__ import annotations

import logging
import threading
from typing import Sequence

from ..measures import _check_federation
from ..metrics import LabeledPredictions, MetricSpec, MetricValue
from .protocol import DEFAULT_TIMEOUT, Coordinator, Participant
from .transport import Connection, Listener, SocketConnection, channel_pair

logger = logging.getLogger(__name__)


def run_round(
    coordinator: Coordinator,
    participants: Sequence[tuple[Participant, Connection]],
    specs: Sequence[MetricSpec],
    rounds: int = 1,
) -> list[list[MetricValue]]:
    """Serve ``participants`` on background threads and run ``rounds`` rounds.

    ``participants`` pairs each participant with the participant-side end of a
    channel whose coordinator end is already registered.
    """

    def serve(p: Participant, conn: Connection) -> None:
        try:
            p.serve(conn, register=False)
        except Exception as exc:
            logger.debug("participant %d stopped: %s", p.participant_id, exc)

    threads = [threading.Thread(target=serve, args=pc, daemon=True) for pc in participants]
    for t in threads:
        t.start()
    try:
        return [coordinator.run_round(specs) for _ in range(rounds)]
    finally:
        coordinator.close()
        for t in threads:
            t.join(timeout=coordinator.timeout)


def _make_coordinator(partitions, timeout, allow_partial) -> Coordinator:
    _check_federation(partitions)
    first = partitions[0]
    return Coordinator(first.task, first.class_count, timeout=timeout, allow_partial=allow_partial)


def run_in_process(
    partitions: Sequence[LabeledPredictions],
    specs: Sequence[MetricSpec],
    rounds: int = 1,
    timeout: float = DEFAULT_TIMEOUT,
    allow_partial: bool = False,
) -> list[MetricValue] | list[list[MetricValue]]:
    """Run the protocol with queue channels; returns one result list per round
    (a single list when ``rounds == 1``)."""
    coordinator = _make_coordinator(partitions, timeout, allow_partial)
    pairs = []
    for pid, data in enumerate(partitions):
        coord_end, part_end = channel_pair()
        p = Participant(pid, data)
        part_end.send(p.registration())
        coordinator.register(coord_end)
        pairs.append((p, part_end))
    results = run_round(coordinator, pairs, specs, rounds)
    return results[0] if rounds == 1 else results


def run_over_sockets(
    partitions: Sequence[LabeledPredictions],
    specs: Sequence[MetricSpec],
    host: str = "127.0.0.1",
    port: int = 0,
    rounds: int = 1,
    timeout: float = DEFAULT_TIMEOUT,
    allow_partial: bool = False,
) -> list[MetricValue] | list[list[MetricValue]]:
    """Run the protocol over real TCP connections on ``host``."""
    coordinator = _make_coordinator(partitions, timeout, allow_partial)
    listener = Listener(host, port)
    addr = listener.address

    def participant_main(pid: int, data: LabeledPredictions) -> None:
        try:
            conn = SocketConnection.connect(addr[0], addr[1], timeout)
            Participant(pid, data).serve(conn)
            conn.close()
        except Exception as exc:
            logger.debug("participant %d stopped: %s", pid, exc)

    threads = [
        threading.Thread(target=participant_main, args=(pid, data), daemon=True)
        for pid, data in enumerate(partitions)
    ]
    for t in threads:
        t.start()
    try:
        for _ in partitions:
            coordinator.register(listener.accept(timeout))
        results = [coordinator.run_round(specs) for _ in range(rounds)]
    finally:
        coordinator.close()
        listener.close()
        for t in threads:
            t.join(timeout=timeout)
    return results[0] if rounds == 1 else results
