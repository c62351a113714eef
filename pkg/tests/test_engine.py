import random

import pytest

from uqsim.engine import (
    LinkParams,
    ProcessingCosts,
    QueueMode,
    Receiver,
    SimClock,
    TcpModel,
    TransportKind,
    Wire,
    build_connection,
    queue_mode_for,
)
from uqsim.harness import ExperimentConfig, run_experiment
from uqsim.messages import Message, MessageKind
from uqsim.metrics import MetricsCollector

SER_512 = 512 * 8 / 1_000_000  # 0.004096 s at the default link rate
ACK_SER = 40 * 8 / 1_000_000  # 0.00032 s
PROP = 0.010


def status(seq, sender=0, size=512, t=0.0):
    return Message(seq=seq, sender=sender, kind=MessageKind.STATUS, size_bytes=size, t_created=t)


# -- clock ----------------------------------------------------------------------


def test_schedule_in_past_fails():
    clock = SimClock()
    clock.schedule(1.0, lambda t: None)
    clock.run(1.0)
    with pytest.raises(ValueError, match="schedule"):
        clock.schedule(0.5, lambda t: None)


def test_first_event_fires_first():
    clock = SimClock()
    fired = []
    clock.schedule(0.0, lambda t: fired.append("a"))
    clock.schedule(1.0, lambda t: fired.append("b"))
    clock.run(2.0)
    assert fired == ["a", "b"]


def test_equal_times_fire_in_insertion_order():
    clock = SimClock()
    fired = []
    clock.schedule(1.0, lambda t: fired.append("first"))
    clock.schedule(1.0, lambda t: fired.append("second"))
    clock.run(1.0)
    assert fired == ["first", "second"]


def test_priority_band_beats_insertion_order():
    clock = SimClock()
    fired = []
    clock.schedule(1.0, lambda t: fired.append("normal"), priority=0)
    clock.schedule(1.0, lambda t: fired.append("service"), priority=-1)
    clock.run(1.0)
    assert fired == ["service", "normal"]


def test_cancelled_event_never_fires():
    clock = SimClock()
    fired = []
    handle = clock.schedule(1.0, lambda t: fired.append("x"))
    handle.cancel()
    clock.run(2.0)
    assert fired == []


def test_run_boundary_is_inclusive():
    clock = SimClock()
    fired = []
    clock.schedule(1.0, lambda t: fired.append("at"))
    clock.schedule(1.0 + 1e-9, lambda t: fired.append("after"))
    clock.run(1.0)
    assert fired == ["at"]
    assert clock.now == 1.0


def test_run_with_no_events_advances_clock():
    clock = SimClock()
    clock.run(5.0)
    assert clock.now == 5.0


def test_events_scheduled_during_run_fire():
    clock = SimClock()
    fired = []
    clock.schedule(1.0, lambda t: clock.schedule(t, lambda t2: fired.append(t2)))
    clock.run(1.0)
    assert fired == [1.0]


# -- wire -----------------------------------------------------------------------


def test_wire_serializes_back_to_back():
    wire = Wire(LinkParams())
    first = wire.transmit(0.0, 512)
    second = wire.transmit(0.0, 512)
    assert first == pytest.approx(SER_512 + PROP)
    assert second == pytest.approx(2 * SER_512 + PROP)


def test_wire_idle_restart():
    wire = Wire(LinkParams())
    wire.transmit(0.0, 512)
    later = wire.transmit(1.0, 512)
    assert later == pytest.approx(1.0 + SER_512 + PROP)


# -- transports -------------------------------------------------------------------


def build(kind, *, delay=0.0, link=None, tcp=None, costs=None, variant="tail", seed=1):
    clock = SimClock()
    conn = build_connection(
        clock,
        kind,
        link or LinkParams(),
        tcp or TcpModel(),
        costs or ProcessingCosts(),
        delay,
        variant,
        random.Random(seed),
    )
    return clock, conn


def test_udp_arrival_time_is_serialization_plus_propagation():
    clock, conn = build(TransportKind.UDP)
    msg = status(1)
    conn.sender.submit(msg, 0.0)
    clock.run(1.0)
    assert msg.t_enqueued == pytest.approx(SER_512 + PROP)


def test_udp_certain_loss_delivers_nothing():
    clock, conn = build(TransportKind.UDP, link=LinkParams(loss_prob=1.0))
    for i in range(1000):
        conn.sender.submit(status(i + 1), 0.0)
    clock.run(5.0)
    report = conn.collector.finalize(5.0, final_queue_len=len(conn.receiver.queue))
    assert report.messages_lost == 1000
    assert report.delivered_to_queue == 0
    assert report.messages_delivered == 0


def test_udp_accounting_under_partial_loss():
    clock, conn = build(TransportKind.UDP, link=LinkParams(loss_prob=0.3), seed=5)
    for i in range(2000):
        msg = status(i + 1, t=i * 0.01)
        clock.schedule(msg.t_created, lambda t, m=msg: conn.sender.submit(m, t))
    clock.run(60.0)
    c = conn.collector
    assert c.messages_sent == 2000
    assert c.messages_sent == c.delivered_to_queue + c.messages_lost
    assert 0 < c.messages_lost < 2000


def test_tcp_window_one_staggers_arrivals_by_round_trip():
    # Hand trace, window 1, three packets submitted together at t=0:
    #   data arrives at ser+prop; consumed immediately (no delay); the ack
    #   returns after ack_ser+prop; only then may the next packet leave.
    # Arrival spacing is therefore exactly ser + ack_ser + 2*prop.
    clock, conn = build(TransportKind.TCP, tcp=TcpModel(window_size=1))
    messages = [status(1), status(2, sender=1), status(3, sender=2)]
    for msg in messages:
        conn.sender.submit(msg, 0.0)
    clock.run(5.0)
    arrivals = [m.t_enqueued for m in messages]
    round_trip = SER_512 + ACK_SER + 2 * PROP
    assert arrivals[0] == pytest.approx(SER_512 + PROP)
    assert arrivals[1] - arrivals[0] == pytest.approx(round_trip)
    assert arrivals[2] - arrivals[1] == pytest.approx(round_trip)


def test_tcp_delivers_exactly_once_in_order_under_loss():
    clock, conn = build(
        TransportKind.TCP, link=LinkParams(loss_prob=0.2), seed=11
    )
    consumed = []
    transport_hook = conn.receiver.on_consume
    conn.receiver.on_consume = lambda m, t: (consumed.append(m.seq), transport_hook(m, t))
    n = 200
    for i in range(n):
        msg = status(i + 1, t=i * 2.7)
        clock.schedule(msg.t_created, lambda t, m=msg: conn.sender.submit(m, t))
    clock.run(n * 2.7 + 60.0)
    assert conn.collector.delivered_to_queue == n
    assert consumed == list(range(1, n + 1))
    assert conn.collector.retransmissions > 0
    assert conn.collector.messages_lost == 0


def test_tcp_ack_count_equals_consumed_count():
    clock, conn = build(TransportKind.TCP, delay=0.05)
    for i in range(50):
        msg = status(i + 1, t=i * 0.2)
        clock.schedule(msg.t_created, lambda t, m=msg: conn.sender.submit(m, t))
    clock.run(60.0)
    c = conn.collector
    assert c.messages_delivered == 50
    assert c.acks_generated == c.messages_delivered


def test_causality_enqueue_after_created_plus_propagation():
    for kind in TransportKind:
        clock, conn = build(kind, delay=0.01)
        messages = [status(i + 1, t=i * 0.05) for i in range(100)]
        for msg in messages:
            clock.schedule(msg.t_created, lambda t, m=msg: conn.sender.submit(m, t))
        clock.run(30.0)
        for msg in messages:
            assert msg.t_enqueued is not None
            assert msg.t_enqueued >= msg.t_created + PROP - 1e-12


# -- receiver ---------------------------------------------------------------------


def make_receiver(mode=QueueMode.FIFO, delay=0.0, app_cost=0.0):
    clock = SimClock()
    collector = MetricsCollector()
    receiver = Receiver(clock, delay, mode, collector, app_cost_s=app_cost)
    return clock, receiver, collector


def test_zero_delay_drains_immediately():
    clock, receiver, collector = make_receiver(delay=0.0)
    for i in range(10):
        clock.schedule(i * 0.1, lambda t, m=status(i + 1): receiver.deliver(m, t))
    clock.run(2.0)
    report = collector.finalize(2.0)
    assert report.messages_delivered == 10
    assert report.peak_queue_len == 1  # transient occupancy only
    assert report.avg_queue_len == 0.0
    assert report.avg_time_in_queue_s == 0.0


def test_overloaded_fifo_grows_one_per_service_interval():
    # Arrivals every 0.05 s against a 0.1 s service delay: the backlog grows
    # by one message per 0.1 s. Forty arrivals by t = 1.96, twenty dequeues
    # (t = 0, 0.1, ..., 1.9) leave exactly twenty waiting.
    clock, receiver, collector = make_receiver(delay=0.1)
    for i in range(40):
        clock.schedule(i * 0.05, lambda t, m=status(i + 1): receiver.deliver(m, t))
    clock.run(1.96)
    assert len(receiver.queue) == 20
    assert collector.messages_delivered == 20


def test_overloaded_uqa_single_sender_stays_bounded():
    # Same overload, all statuses from one sender, coalescing insertion:
    # every arrival either lands in an empty queue or replaces the stored
    # tail, so the backlog never exceeds one message.
    clock, receiver, collector = make_receiver(mode=QueueMode.UQA_TAIL, delay=0.1)
    for i in range(40):
        clock.schedule(i * 0.05, lambda t, m=status(i + 1): receiver.deliver(m, t))
    clock.run(2.0)
    report = collector.finalize(2.0, final_queue_len=len(receiver.queue))
    assert report.peak_queue_len == 1
    assert len(receiver.queue) <= 1
    assert receiver.queue.replaced > 0
    assert report.avg_queue_len <= 1.0


def test_dequeue_processed_before_simultaneous_arrival():
    # A service tick and an arrival at the same instant: the stored message
    # leaves first, so the newcomer cannot coalesce with it.
    clock, receiver, _ = make_receiver(mode=QueueMode.UQA_TAIL, delay=1.0)
    clock.schedule(0.0, lambda t: receiver.deliver(status(1), t))  # consumed at t=0
    clock.schedule(0.5, lambda t: receiver.deliver(status(2), t))  # waits until t=1
    clock.schedule(1.0, lambda t: receiver.deliver(status(3), t))  # arrives at tick
    clock.run(3.0)
    assert receiver.queue.replaced == 0
    assert receiver.queue.dequeued == 3


def test_receiver_rejects_negative_delay():
    clock = SimClock()
    with pytest.raises(ValueError, match="receiver_delay_s"):
        Receiver(clock, -0.1, QueueMode.FIFO, MetricsCollector())


def test_queue_mode_selection():
    assert queue_mode_for(TransportKind.TCP) is QueueMode.FIFO
    assert queue_mode_for(TransportKind.UDP) is QueueMode.FIFO
    assert queue_mode_for(TransportKind.TCP_UQA) is QueueMode.UQA_TAIL
    assert queue_mode_for(TransportKind.UDP_UQA, "keyed") is QueueMode.UQA_KEYED


def test_udp_receiver_carries_app_cost_tcp_does_not():
    _, udp_conn = build(TransportKind.UDP)
    _, tcp_conn = build(TransportKind.TCP)
    assert udp_conn.receiver.app_cost_s == ProcessingCosts().udp_app_per_msg_s
    assert tcp_conn.receiver.app_cost_s == 0.0


# -- determinism -------------------------------------------------------------------


def test_identical_config_identical_report():
    cfg = ExperimentConfig(
        protocol=TransportKind.TCP_UQA,
        topology="one_to_one",
        packet_size_bytes=256,
        receiver_delay_s=0.05,
        seed=424242,
    )
    first = run_experiment(cfg).report
    second = run_experiment(cfg).report
    assert first == second
