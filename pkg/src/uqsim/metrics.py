"""Per-run measurement: throughputs, queue statistics, message accounting.

Definitions, chosen to make the four transports comparable:

* ``avg_client_throughput_bps`` - data bits the source put on the wire
  (first transmissions only) divided by the time the source spent on
  communication work: serializing data packets (retransmissions included),
  handling incoming acknowledgements, and updating its transport send queue
  where that transport keeps one. This is a work-rate, not bits over wall
  clock: every protocol sends the same bits in the same run, so dividing by
  run duration would erase the overhead differences the experiments are
  about.

* ``avg_server_throughput_bps`` - the receiving side's processed load:
  (data bits enqueued + acknowledgement bits generated) / run duration.
  Higher means the receiver was forced to do more protocol work for the
  same traffic; comparisons rank lower as better.

* ``avg_queue_len`` - time-weighted mean of the instantaneous queue length,
  sampled event-driven on every enqueue/dequeue (exact, no grid).

* ``avg_time_in_queue_s`` - mean of (t_dequeued - t_enqueued) over delivered
  messages only. Replaced (coalesced) messages were never delivered and are
  excluded; they still appear in ``messages_replaced`` so the accounting
  identity sent = delivered + replaced + lost + final queue holds.

Zero-duration or zero-traffic runs report zeros rather than NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass

LITTLES_EPSILON = 1e-12


@dataclass(slots=True)
class MetricsReport:
    avg_client_throughput_bps: float
    avg_server_throughput_bps: float
    avg_queue_len: float
    peak_queue_len: float
    avg_time_in_queue_s: float
    messages_sent: float
    messages_delivered: float
    messages_replaced: float
    messages_lost: float
    acks_generated: float
    run_duration_s: float
    # Secondary counters, not part of the results CSV.
    delivered_to_queue: float = 0.0
    final_queue_len: float = 0.0
    retransmissions: float = 0.0
    data_bits_sent: float = 0.0
    source_busy_s: float = 0.0

    def conservation_residual(self) -> float:
        """sent - (delivered + replaced + lost + final queue); 0 when conserved."""
        return self.messages_sent - (
            self.messages_delivered
            + self.messages_replaced
            + self.messages_lost
            + self.final_queue_len
        )

    @property
    def messages_in_transport(self) -> float:
        """Messages still in a send buffer, on the wire, or reorder-buffered.

        Zero whenever the run drained fully; equals the conservation residual
        because the queue's own counters always balance.
        """
        return self.messages_sent - self.messages_lost - self.delivered_to_queue


def littles_law_residual(report: MetricsReport, effective_arrival_rate: float) -> float:
    """Relative gap between L and lambda * W; a consistency check, not a metric.

    Uses the delivered-message rate and delivered-only waiting time, so it is
    meaningful for FIFO runs (no coalescing) and informational otherwise.
    """
    expected = effective_arrival_rate * report.avg_time_in_queue_s
    return abs(report.avg_queue_len - expected) / max(report.avg_queue_len, LITTLES_EPSILON)


class MetricsCollector:
    """Accumulates one destination's measurements during a run.

    Queue samples must arrive with non-decreasing timestamps; the integral of
    length over time and the peak are maintained incrementally.
    """

    def __init__(self) -> None:
        self.messages_sent = 0
        self.messages_lost = 0
        self.messages_replaced = 0
        self.messages_delivered = 0
        self.delivered_to_queue = 0
        self.acks_generated = 0
        self.retransmissions = 0
        self.data_bits_sent = 0.0
        self.data_bits_enqueued = 0.0
        self.ack_bits_generated = 0.0
        self.source_busy_s = 0.0
        self.wait_time_sum_s = 0.0
        self._len_integral = 0.0
        self._peak_len = 0
        self._last_sample_t = 0.0
        self._last_len = 0
        self._have_sample = False

    # -- source side -------------------------------------------------------

    def record_send(self) -> None:
        self.messages_sent += 1

    def record_transmission(self, bits: float, first: bool) -> None:
        if first:
            self.data_bits_sent += bits
        else:
            self.retransmissions += 1

    def record_loss(self) -> None:
        self.messages_lost += 1

    def add_source_busy(self, seconds: float) -> None:
        self.source_busy_s += seconds

    # -- receiver side -----------------------------------------------------

    def record_enqueued(self, bits: float) -> None:
        self.delivered_to_queue += 1
        self.data_bits_enqueued += bits

    def record_replaced(self) -> None:
        self.messages_replaced += 1

    def record_consumed(self, wait_s: float) -> None:
        self.messages_delivered += 1
        self.wait_time_sum_s += wait_s

    def record_ack_generated(self, bits: float) -> None:
        self.acks_generated += 1
        self.ack_bits_generated += bits

    def record_queue_sample(self, t: float, length: int) -> None:
        if self._have_sample:
            if t < self._last_sample_t:
                raise ValueError(
                    f"queue samples must be time-ordered: {t} < {self._last_sample_t}"
                )
            self._len_integral += self._last_len * (t - self._last_sample_t)
        self._last_sample_t = t
        self._last_len = length
        self._have_sample = True
        if length > self._peak_len:
            self._peak_len = length

    # -- finalize ----------------------------------------------------------

    def finalize(self, run_duration_s: float, final_queue_len: int = 0) -> MetricsReport:
        if run_duration_s < 0:
            raise ValueError(f"run_duration_s must be >= 0, got {run_duration_s}")
        len_integral = self._len_integral
        if self._have_sample and run_duration_s > self._last_sample_t:
            len_integral += self._last_len * (run_duration_s - self._last_sample_t)
        avg_len = len_integral / run_duration_s if run_duration_s > 0 else 0.0
        avg_wait = (
            self.wait_time_sum_s / self.messages_delivered
            if self.messages_delivered
            else 0.0
        )
        client_bps = (
            self.data_bits_sent / self.source_busy_s if self.source_busy_s > 0 else 0.0
        )
        server_bps = (
            (self.data_bits_enqueued + self.ack_bits_generated) / run_duration_s
            if run_duration_s > 0
            else 0.0
        )
        return MetricsReport(
            avg_client_throughput_bps=client_bps,
            avg_server_throughput_bps=server_bps,
            avg_queue_len=avg_len,
            peak_queue_len=float(self._peak_len),
            avg_time_in_queue_s=avg_wait,
            messages_sent=float(self.messages_sent),
            messages_delivered=float(self.messages_delivered),
            messages_replaced=float(self.messages_replaced),
            messages_lost=float(self.messages_lost),
            acks_generated=float(self.acks_generated),
            run_duration_s=run_duration_s,
            delivered_to_queue=float(self.delivered_to_queue),
            final_queue_len=float(final_queue_len),
            retransmissions=float(self.retransmissions),
            data_bits_sent=self.data_bits_sent,
            source_busy_s=self.source_busy_s,
        )


def mean_report(reports: list[MetricsReport]) -> MetricsReport:
    """Field-wise mean across destinations of a fan-out run."""
    if not reports:
        raise ValueError("mean_report needs at least one report")
    n = len(reports)

    def avg(attr: str) -> float:
        return sum(getattr(r, attr) for r in reports) / n

    return MetricsReport(
        avg_client_throughput_bps=avg("avg_client_throughput_bps"),
        avg_server_throughput_bps=avg("avg_server_throughput_bps"),
        avg_queue_len=avg("avg_queue_len"),
        peak_queue_len=avg("peak_queue_len"),
        avg_time_in_queue_s=avg("avg_time_in_queue_s"),
        messages_sent=avg("messages_sent"),
        messages_delivered=avg("messages_delivered"),
        messages_replaced=avg("messages_replaced"),
        messages_lost=avg("messages_lost"),
        acks_generated=avg("acks_generated"),
        run_duration_s=avg("run_duration_s"),
        delivered_to_queue=avg("delivered_to_queue"),
        final_queue_len=avg("final_queue_len"),
        retransmissions=avg("retransmissions"),
        data_bits_sent=avg("data_bits_sent"),
        source_busy_s=avg("source_busy_s"),
    )
