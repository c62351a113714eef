"""Deterministic discrete-event engine for the transport comparison.

A single-threaded event loop drives one source node talking to one or more
destinations over point-to-point links. Four transport variants exist:

* udp      - fire and forget; packets may be lost, never retransmitted;
             the receive queue is plain FIFO.
* tcp      - fixed-size window of unacknowledged packets, one cumulative
             acknowledgement per consumed message, retransmission on a fixed
             timeout; delivers every message exactly once, in order; FIFO
             receive queue.
* udp_uqa  - udp delivery into an updatable (status-coalescing) queue.
* tcp_uqa  - tcp delivery into an updatable queue; the sender additionally
             pays a per-message bookkeeping cost for keeping its transport
             send queue updatable.

The TCP abstraction is deliberately small: no slow start, no AIMD. The two
effects that matter for the measurements are (a) acknowledgement traffic
loading both endpoints and (b) window pacing staggering arrivals when the
receiver falls behind, which a fixed window with consumption-driven
cumulative acks reproduces.

Receiver model: the consumer drains its queue one message at a time; after
each dequeue it is busy for ``receiver_delay_s`` (time spent on work other
than communication) plus a per-message application cost before the next
dequeue. Datagram transports carry a small application-level handling cost
(``udp_app_per_msg_s``): with no transport-layer stream service, the
consumer itself validates and orders raw datagrams, so its queue service
rate is slightly lower. Stream transports deliver kernel-processed in-order
data at no extra application cost.

Ties at equal simulation times resolve by priority band then insertion
order; receiver dequeues run in an earlier band than packet arrivals, so a
dequeue and an arrival at the same instant process the dequeue first.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .messages import Message
from .metrics import MetricsCollector
from .queues import EnqueueOutcome, UpdatableQueue

# Priority band for receiver service events: at equal times, dequeue first.
SERVICE_PRIORITY = -1
DEFAULT_PRIORITY = 0


class EventHandle:
    __slots__ = ("time", "fn", "cancelled")

    def __init__(self, time: float, fn: Callable[[float], None]):
        self.time = time
        self.fn = fn
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class SimClock:
    """Event loop with deterministic (time, priority, insertion) ordering."""

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[tuple[float, int, int, EventHandle]] = []
        self._counter = itertools.count()

    def schedule(
        self, at: float, fn: Callable[[float], None], priority: int = DEFAULT_PRIORITY
    ) -> EventHandle:
        if at < self.now:
            raise ValueError(f"cannot schedule at {at}; clock is at {self.now}")
        handle = EventHandle(at, fn)
        heapq.heappush(self._heap, (at, priority, next(self._counter), handle))
        return handle

    def run(self, until: float) -> None:
        """Fire every event with time <= until, then advance the clock to until."""
        if until < self.now:
            raise ValueError(f"cannot run to {until}; clock is at {self.now}")
        heap = self._heap
        while heap and heap[0][0] <= until:
            t, _, _, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = t
            handle.fn(t)
        self.now = until

    def pending_count(self) -> int:
        return sum(1 for *_rest, h in self._heap if not h.cancelled)


@dataclass(slots=True)
class LinkParams:
    propagation_delay_s: float = 0.010
    bandwidth_bps: float = 1_000_000.0
    loss_prob: float = 0.0

    def validate(self) -> None:
        if self.propagation_delay_s < 0:
            raise ValueError(
                f"propagation_delay_s must be >= 0, got {self.propagation_delay_s}"
            )
        if self.bandwidth_bps <= 0:
            raise ValueError(f"bandwidth_bps must be positive, got {self.bandwidth_bps}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob must be in [0, 1], got {self.loss_prob}")

    def serialization_s(self, size_bytes: float) -> float:
        return size_bytes * 8.0 / self.bandwidth_bps


@dataclass(slots=True)
class TcpModel:
    window_size: int = 4
    ack_size_bytes: int = 40
    rto_s: float = 1.0

    def validate(self) -> None:
        if self.window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {self.window_size}")
        if self.ack_size_bytes <= 0:
            raise ValueError(f"ack_size_bytes must be positive, got {self.ack_size_bytes}")
        if self.rto_s <= 0:
            raise ValueError(f"rto_s must be positive, got {self.rto_s}")


@dataclass(slots=True)
class ProcessingCosts:
    """Per-message processing costs outside raw link time.

    udp_app_per_msg_s: application-level datagram handling at the consumer
    (datagram transports only). uqa_update_cost_s: keyed-data bookkeeping a
    sender pays per message when its transport send queue is updatable
    (tcp_uqa only; a datagram sender keeps no send queue). Both appear in
    the throughput work accounting; uqa_receiver_busy_s additionally holds
    the receiver busy per updatable-queue insertion and is zero by default.
    """

    udp_app_per_msg_s: float = 0.002
    uqa_update_cost_s: float = 0.001
    uqa_receiver_busy_s: float = 0.0

    def validate(self) -> None:
        for name in ("udp_app_per_msg_s", "uqa_update_cost_s", "uqa_receiver_busy_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


class TransportKind(enum.Enum):
    TCP = "tcp"
    UDP = "udp"
    TCP_UQA = "tcp_uqa"
    UDP_UQA = "udp_uqa"

    @property
    def reliable(self) -> bool:
        return self in (TransportKind.TCP, TransportKind.TCP_UQA)

    @property
    def uses_uqa(self) -> bool:
        return self in (TransportKind.TCP_UQA, TransportKind.UDP_UQA)


class QueueMode(enum.Enum):
    FIFO = "fifo"
    UQA_TAIL = "uqa"
    UQA_KEYED = "keyed"


def queue_mode_for(kind: TransportKind, variant: str = "tail") -> QueueMode:
    if not kind.uses_uqa:
        return QueueMode.FIFO
    if variant == "keyed":
        return QueueMode.UQA_KEYED
    return QueueMode.UQA_TAIL


class Wire:
    """One direction of a link; serializes back-to-back transmissions."""

    __slots__ = ("link", "free_at")

    def __init__(self, link: LinkParams):
        self.link = link
        self.free_at = 0.0

    def transmit(self, now: float, size_bytes: float) -> float:
        """Occupy the wire and return the arrival time at the far end."""
        start = now if now > self.free_at else self.free_at
        self.free_at = start + self.link.serialization_s(size_bytes)
        return self.free_at + self.link.propagation_delay_s


class Receiver:
    """Consumer draining one queue.

    Drains one message at a time; after each dequeue it is busy for the
    receiver delay plus its per-message application cost. With zero delay it
    drains immediately upon arrival. ``on_consume`` fires on every dequeue
    (the reliable transports hook it to generate acknowledgements).
    """

    def __init__(
        self,
        clock: SimClock,
        receiver_delay_s: float,
        mode: QueueMode,
        collector: MetricsCollector,
        app_cost_s: float = 0.0,
        uqa_busy_s: float = 0.0,
    ):
        if receiver_delay_s < 0:
            raise ValueError(f"receiver_delay_s must be >= 0, got {receiver_delay_s}")
        self.clock = clock
        self.receiver_delay_s = receiver_delay_s
        self.mode = mode
        self.collector = collector
        self.app_cost_s = app_cost_s
        self.uqa_busy_s = uqa_busy_s
        self.queue = UpdatableQueue()
        self.busy = False
        self.on_consume: Optional[Callable[[Message, float], None]] = None
        self._pending_busy = 0.0

    def deliver(self, msg: Message, now: float) -> EnqueueOutcome:
        queue = self.queue
        if self.mode is QueueMode.UQA_TAIL:
            outcome = queue.enqueue_uqa(msg, now)
        elif self.mode is QueueMode.UQA_KEYED:
            outcome = queue.enqueue_keyed(msg, now)
        else:
            outcome = queue.enqueue_fifo(msg, now)
        collector = self.collector
        collector.record_enqueued(msg.size_bytes * 8.0)
        if outcome is EnqueueOutcome.REPLACED_TAIL:
            collector.record_replaced()
        if self.mode is not QueueMode.FIFO and self.uqa_busy_s:
            self._pending_busy += self.uqa_busy_s
        collector.record_queue_sample(now, len(queue))
        if not self.busy:
            self.busy = True
            self.clock.schedule(now, self._service, priority=SERVICE_PRIORITY)
        return outcome

    def _service(self, now: float) -> None:
        msg = self.queue.dequeue(now)
        if msg is None:
            self.busy = False
            return
        collector = self.collector
        collector.record_queue_sample(now, len(self.queue))
        collector.record_consumed(now - msg.t_enqueued)
        if self.on_consume is not None:
            self.on_consume(msg, now)
        hold = self.receiver_delay_s + self.app_cost_s + self._pending_busy
        self._pending_busy = 0.0
        self.clock.schedule(now + hold, self._service, priority=SERVICE_PRIORITY)


class UdpSender:
    """Unacknowledged datagram path: per-packet loss, no retransmission."""

    def __init__(
        self,
        clock: SimClock,
        link: LinkParams,
        receiver: Receiver,
        collector: MetricsCollector,
        rng: random.Random,
    ):
        self.clock = clock
        self.link = link
        self.wire = Wire(link)
        self.receiver = receiver
        self.collector = collector
        self.rng = rng

    def submit(self, msg: Message, now: float) -> None:
        collector = self.collector
        collector.record_send()
        bits = msg.size_bytes * 8.0
        collector.record_transmission(bits, first=True)
        collector.add_source_busy(self.link.serialization_s(msg.size_bytes))
        if self.link.loss_prob > 0.0 and self.rng.random() < self.link.loss_prob:
            collector.record_loss()
            return
        arrival = self.wire.transmit(now, msg.size_bytes)
        self.clock.schedule(arrival, lambda t, m=msg: self.receiver.deliver(m, t))


class TcpConnection:
    """Fixed-window reliable stream between the source and one destination.

    Transport sequence numbers are assigned at submission in FIFO order.
    Data packets are subject to link loss and retransmitted on a fixed
    timeout until covered; acknowledgements are not lost. The receiver-side
    transport delivers to the application queue exactly once, in order,
    buffering anything that arrives ahead of a gap. One cumulative
    acknowledgement is generated per consumed message; a coalesced-away
    status is covered by the next consumption's cumulative value, so its
    window slot is recovered without a dedicated ack packet.
    """

    def __init__(
        self,
        clock: SimClock,
        kind: TransportKind,
        link: LinkParams,
        tcp: TcpModel,
        costs: ProcessingCosts,
        receiver: Receiver,
        collector: MetricsCollector,
        rng: random.Random,
    ):
        self.clock = clock
        self.kind = kind
        self.link = link
        self.tcp = tcp
        self.costs = costs
        self.receiver = receiver
        self.collector = collector
        self.rng = rng
        self.data_wire = Wire(link)
        self.ack_wire = Wire(link)
        self.send_buffer: deque[tuple[int, Message]] = deque()
        self.next_seq = 1  # next transport seq to assign at submission
        self.next_tx = 1  # lowest transport seq not yet transmitted
        self.highest_acked = 0
        self.pending: dict[int, tuple[Message, Optional[EventHandle]]] = {}
        self.tx_seq_of: dict[int, int] = {}  # id(message) -> transport seq
        self.expected = 1  # receiver transport: next in-order seq
        self.ooo: dict[int, Message] = {}
        receiver.on_consume = self._on_consume

    # -- source side -------------------------------------------------------

    def submit(self, msg: Message, now: float) -> None:
        self.collector.record_send()
        if self.kind is TransportKind.TCP_UQA and self.costs.uqa_update_cost_s:
            self.collector.add_source_busy(self.costs.uqa_update_cost_s)
        seq = self.next_seq
        self.next_seq += 1
        self.tx_seq_of[id(msg)] = seq
        self.send_buffer.append((seq, msg))
        self._pump(now)

    def in_flight(self) -> int:
        return (self.next_tx - 1) - self.highest_acked

    def _pump(self, now: float) -> None:
        while self.send_buffer and self.in_flight() < self.tcp.window_size:
            seq, msg = self.send_buffer.popleft()
            self.next_tx = seq + 1
            self._transmit(seq, msg, now, first=True)

    def _transmit(self, seq: int, msg: Message, now: float, first: bool) -> None:
        collector = self.collector
        bits = msg.size_bytes * 8.0
        collector.record_transmission(bits, first=first)
        collector.add_source_busy(self.link.serialization_s(msg.size_bytes))
        if not (self.link.loss_prob > 0.0 and self.rng.random() < self.link.loss_prob):
            arrival = self.data_wire.transmit(now, msg.size_bytes)
            self.clock.schedule(
                arrival, lambda t, s=seq, m=msg: self._data_arrive(s, m, t)
            )
        handle = self.clock.schedule(
            now + self.tcp.rto_s, lambda t, s=seq: self._rto_fire(s, t)
        )
        self.pending[seq] = (msg, handle)

    def _rto_fire(self, seq: int, now: float) -> None:
        if seq <= self.highest_acked or seq not in self.pending:
            return
        msg, _ = self.pending[seq]
        self._transmit(seq, msg, now, first=False)

    # -- receiver-side transport --------------------------------------------

    def _data_arrive(self, seq: int, msg: Message, now: float) -> None:
        if seq < self.expected or seq in self.ooo:
            return  # duplicate of something already delivered or buffered
        if seq > self.expected:
            self.ooo[seq] = msg
            return
        self.receiver.deliver(msg, now)
        self.expected += 1
        while self.expected in self.ooo:
            self.receiver.deliver(self.ooo.pop(self.expected), now)
            self.expected += 1

    def _on_consume(self, msg: Message, now: float) -> None:
        cum = self.tx_seq_of[id(msg)]
        ack_bits = self.tcp.ack_size_bytes * 8.0
        self.collector.record_ack_generated(ack_bits)
        arrival = self.ack_wire.transmit(now, self.tcp.ack_size_bytes)
        self.clock.schedule(arrival, lambda t, c=cum: self._ack_arrive(c, t))

    # -- back at the source --------------------------------------------------

    def _ack_arrive(self, cum: int, now: float) -> None:
        self.collector.add_source_busy(self.link.serialization_s(self.tcp.ack_size_bytes))
        if cum > self.highest_acked:
            for seq in range(self.highest_acked + 1, cum + 1):
                msg, handle = self.pending.pop(seq)
                if handle is not None:
                    handle.cancel()
                self.tx_seq_of.pop(id(msg), None)
            self.highest_acked = cum
            self._pump(now)


@dataclass(slots=True)
class Connection:
    """One source-to-destination pipeline plus its measurement state."""

    sender: object
    receiver: Receiver
    collector: MetricsCollector
    schedule: list = field(default_factory=list)


def build_connection(
    clock: SimClock,
    kind: TransportKind,
    link: LinkParams,
    tcp: TcpModel,
    costs: ProcessingCosts,
    receiver_delay_s: float,
    queue_variant: str,
    rng: random.Random,
) -> Connection:
    """Assemble sender, receiver, and collector for one destination."""
    link.validate()
    tcp.validate()
    costs.validate()
    collector = MetricsCollector()
    mode = queue_mode_for(kind, queue_variant)
    app_cost = 0.0 if kind.reliable else costs.udp_app_per_msg_s
    uqa_busy = costs.uqa_receiver_busy_s if mode is not QueueMode.FIFO else 0.0
    receiver = Receiver(
        clock,
        receiver_delay_s,
        mode,
        collector,
        app_cost_s=app_cost,
        uqa_busy_s=uqa_busy,
    )
    sender: object
    if kind.reliable:
        sender = TcpConnection(clock, kind, link, tcp, costs, receiver, collector, rng)
    else:
        sender = UdpSender(clock, link, receiver, collector, rng)
    return Connection(sender=sender, receiver=receiver, collector=collector)
