"""Coordinator and participant state machines for one evaluation round.

A round is an optional statistics phase (only when some requested metric needs
a global statistic) followed by the AM phase and a result broadcast. The
coordinator reads participant responses concurrently but folds them on the
calling thread only.
"""

from __future__ import annotations

import itertools
import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import FlamError, ProtocolError, RoundTimeoutError
from ..measures import (
    GLOBAL_MEAN,
    aggregate_ams,
    aggregate_mean_statistics,
    combined_plan,
    compute_am,
    compute_mean_statistic,
    metric_from_am,
)
from ..metrics import LabeledPredictions, MetricSpec, MetricValue, Task
from .messages import (
    AMRequest,
    AMResponse,
    COORDINATOR_ID,
    ErrorText,
    Phase,
    Registration,
    ResultBroadcast,
    RoundMessage,
    StatRequest,
    StatResponse,
)
from .transport import Connection, ConnectionClosed

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


@dataclass
class CoordinatorState:
    expected: set[int] = field(default_factory=set)
    received: dict[Phase, set[int]] = field(default_factory=dict)
    statistics: dict[str, float] = field(default_factory=dict)
    aggregated_am: object = None
    effective: set[int] = field(default_factory=set)


@dataclass
class ParticipantState:
    data: LabeledPredictions
    statistics: dict[str, float] = field(default_factory=dict)
    results: list[tuple[int, tuple[MetricValue, ...]]] = field(default_factory=list)


class Coordinator:
    """Holds no data; aggregates what registered participants report."""

    def __init__(
        self,
        task: Task | str,
        class_count: int | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        allow_partial: bool = False,
    ):
        self.task = Task(task)
        self.class_count = class_count if self.task is Task.CLASSIFICATION else None
        self.timeout = timeout
        self.allow_partial = allow_partial
        self.connections: dict[int, Connection] = {}
        self.state = CoordinatorState()
        self._rounds = itertools.count(1)

    def register(self, conn: Connection, timeout: float | None = None) -> int:
        """Read a registration from ``conn`` and admit the participant."""
        msg = conn.recv(self.timeout if timeout is None else timeout)
        if msg.phase is not Phase.REGISTER:
            raise ProtocolError(f"expected register, got {msg.phase.value}")
        reg: Registration = msg.payload
        pid = msg.participant_id
        if pid in self.connections:
            raise ProtocolError(f"participant {pid} registered twice")
        if reg.task is not self.task or reg.class_count != self.class_count:
            raise ProtocolError(
                f"participant {pid} declared ({reg.task.value}, C={reg.class_count}), "
                f"federation is ({self.task.value}, C={self.class_count})"
            )
        self.connections[pid] = conn
        self.state.expected.add(pid)
        logger.debug("registered participant %d", pid)
        return pid

    def _gather(self, pids: Iterable[int], phase: Phase) -> dict[int, RoundMessage]:
        pids = sorted(pids)
        inbox: queue.Queue = queue.Queue()

        def read(pid: int) -> None:
            try:
                inbox.put((pid, self.connections[pid].recv(self.timeout)))
            except BaseException as exc:  # handed to the folding thread
                inbox.put((pid, exc))

        threads = [threading.Thread(target=read, args=(pid,), daemon=True) for pid in pids]
        for t in threads:
            t.start()
        got: dict[int, RoundMessage] = {}
        missing: set[int] = set()
        failure: Exception | None = None
        for _ in pids:
            pid, item = inbox.get()
            if isinstance(item, TimeoutError):
                missing.add(pid)
            elif isinstance(item, ConnectionClosed):
                logger.warning("participant %d disconnected during %s", pid, phase.value)
                missing.add(pid)
            elif isinstance(item, BaseException):
                failure = failure or item
            elif item.phase is Phase.ERROR:
                failure = failure or ProtocolError(f"participant {pid} failed: {item.payload.text}")
            elif item.phase is not phase:
                failure = failure or ProtocolError(
                    f"participant {pid} sent {item.phase.value} during {phase.value}"
                )
            elif item.participant_id != pid or pid in got:
                failure = failure or ProtocolError(
                    f"duplicate or misattributed {phase.value} from participant {item.participant_id}"
                )
            else:
                got[pid] = item
        for t in threads:
            t.join()
        if failure is not None:
            raise failure
        for pid in got:
            if self.connections[pid].poll():
                raise ProtocolError(f"participant {pid} sent more than one {phase.value}")
        self.state.received[phase] = set(got)
        if missing:
            if not self.allow_partial or not got:
                raise RoundTimeoutError(phase.value, missing)
            logger.warning("continuing without participants %s", sorted(missing))
        return got

    def _broadcast(self, pids: Iterable[int], msg_for) -> None:
        for pid in sorted(pids):
            self.connections[pid].send(msg_for(pid))

    def _abort(self, round_id: int, text: str) -> None:
        for pid, conn in self.connections.items():
            try:
                conn.send(RoundMessage(Phase.ERROR, ErrorText(text), round_id, COORDINATOR_ID))
            except (ProtocolError, OSError):
                pass

    def run_round(self, specs: Sequence[MetricSpec], round_id: int | None = None) -> list[MetricValue]:
        """Evaluate every spec over the registered participants; one value per spec."""
        specs = tuple(specs)
        if not specs:
            return []
        for spec in specs:
            if spec.task is not self.task:
                raise ValueError(f"{spec.name} does not apply to a {self.task.value} federation")
        if not self.connections:
            raise RoundTimeoutError("register", set())
        round_id = next(self._rounds) if round_id is None else round_id
        try:
            return self._run(specs, round_id)
        except FlamError as exc:
            logger.error("round %d aborted: %s", round_id, exc)
            self._abort(round_id, str(exc))
            raise

    def _run(self, specs: tuple[MetricSpec, ...], round_id: int) -> list[MetricValue]:
        plan = combined_plan(specs)
        active = set(self.connections)
        self.state.received = {}
        while True:
            stats: dict[str, float] = {}
            if plan:
                request = RoundMessage(Phase.STAT_REQUEST, StatRequest(plan.phases), round_id)
                self._broadcast(active, lambda pid: request)
                replies = self._gather(active, Phase.STAT_RESPONSE)
                active = set(replies)
                for name in plan.phases:
                    total = aggregate_mean_statistics(
                        [replies[pid].payload.statistics[name] for pid in sorted(replies)]
                    )
                    stats[name] = total.mean
            request = RoundMessage(Phase.AM_REQUEST, AMRequest(specs, stats), round_id)
            self._broadcast(active, lambda pid: request)
            replies = self._gather(active, Phase.AM_RESPONSE)
            if plan and set(replies) != active:
                # statistics covered participants that have since dropped out
                active = set(replies)
                continue
            active = set(replies)
            break
        self.state.statistics = stats
        self.state.effective = active
        self.state.aggregated_am = aggregate_ams([replies[pid].payload.am for pid in sorted(replies)])
        values = tuple(metric_from_am(self.state.aggregated_am, s) for s in specs)
        result = RoundMessage(Phase.RESULT_BROADCAST, ResultBroadcast(values), round_id)
        self._broadcast(active, lambda pid: result)
        return list(values)

    def close(self) -> None:
        for conn in self.connections.values():
            conn.close()
        self.connections.clear()


class Participant:
    """Answers coordinator requests from local data only."""

    def __init__(self, participant_id: int, data: LabeledPredictions):
        self.participant_id = participant_id
        self.state = ParticipantState(data)

    def registration(self, version: int | None = None) -> RoundMessage:
        d = self.state.data
        msg = RoundMessage(
            Phase.REGISTER, Registration(d.task, d.class_count), 0, self.participant_id
        )
        if version is not None:
            msg = RoundMessage(msg.phase, msg.payload, 0, self.participant_id, version)
        return msg

    def handle(self, msg: RoundMessage) -> RoundMessage | None:
        """Response to one coordinator message, or ``None`` when none is due."""
        pid, rid = self.participant_id, msg.round_id
        if msg.phase is Phase.STAT_REQUEST:
            stats = {}
            for name in msg.payload.statistics:
                if name != GLOBAL_MEAN:
                    return RoundMessage(Phase.ERROR, ErrorText(f"unknown statistic {name!r}"), rid, pid)
                stats[name] = compute_mean_statistic(self.state.data)
            return RoundMessage(Phase.STAT_RESPONSE, StatResponse(stats), rid, pid)
        if msg.phase is Phase.AM_REQUEST:
            self.state.statistics = dict(msg.payload.statistics)
            try:
                am = compute_am(self.state.data, self.state.statistics)
            except (FlamError, ValueError) as exc:
                return RoundMessage(Phase.ERROR, ErrorText(str(exc)), rid, pid)
            return RoundMessage(Phase.AM_RESPONSE, AMResponse(am), rid, pid)
        if msg.phase is Phase.RESULT_BROADCAST:
            self.state.results.append((rid, msg.payload.values))
            return None
        if msg.phase is Phase.ERROR:
            raise ProtocolError(f"coordinator aborted round {rid}: {msg.payload.text}")
        return RoundMessage(Phase.ERROR, ErrorText(f"unexpected {msg.phase.value}"), rid, pid)

    def serve(
        self,
        conn: Connection,
        timeout: float | None = None,
        rounds: int | None = None,
        register: bool = True,
    ) -> list:
        """Answer requests on ``conn`` until it closes or ``rounds`` results arrive."""
        if register:
            conn.send(self.registration())
        while rounds is None or len(self.state.results) < rounds:
            try:
                msg = conn.recv(timeout)
            except ConnectionClosed:
                break
            reply = self.handle(msg)
            if reply is not None:
                conn.send(reply)
        return self.state.results
