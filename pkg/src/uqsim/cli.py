"""Command-line harness.

Subcommands:
  run     - one experiment cell, summary to stdout, optional CSV row
  sweep   - the full default matrix; writes results, aggregate, and
            per-destination CSVs
  figures - per-figure CSVs (delay rows x protocol columns) from a sweep CSV
  replay  - push a trace file through a queue variant and print the final
            queue and its counters; optionally drain it through a receiver

Configuration comes from defaults, then an optional key=value file
(--config), then flags; later layers override earlier ones. --print-config
shows the effective settings and exits. Exit status is 0 on success and
nonzero with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .engine import (
    LinkParams,
    ProcessingCosts,
    QueueMode,
    Receiver,
    SimClock,
    TcpModel,
    TransportKind,
)
from .harness import (
    CSV_HEADER,
    DEFAULT_MASTER_SEED,
    FIGURE_SPECS,
    ExperimentConfig,
    cell_seed,
    format_number,
    format_value,
    littles_law_residual,
    parse_sweep_csv,
    result_row,
    run_experiment,
    run_sweep,
    sweep_rows,
    write_aggregate_csv,
    write_destination_csv,
    write_figure_csv,
    write_sweep_csv,
)
from .messages import format_trace_record, load_trace
from .metrics import MetricsCollector
from .queues import EnqueueOutcome, UpdatableQueue

# Flat setting name -> (type, default). The single source of truth for the
# config file, the flags, and --print-config.
SETTINGS: dict[str, tuple[type, object]] = {
    "protocol": (str, "udp"),
    "topology": (str, "one_to_one"),
    "packet_size_bytes": (int, 512),
    "receiver_delay_s": (float, 0.0),
    "message_count": (int, 1000),
    "run_duration_s": (float, None),
    "seed": (int, DEFAULT_MASTER_SEED),
    "n_destinations": (int, 4),
    "p_status": (float, 0.70),
    "schedule": (str, "poisson"),
    "send_window_fraction": (float, 0.9),
    "queue_variant": (str, "tail"),
    "propagation_delay_s": (float, 0.010),
    "bandwidth_bps": (float, 1_000_000.0),
    "loss_prob": (float, 0.0),
    "window_size": (int, 4),
    "ack_size_bytes": (int, 40),
    "rto_s": (float, 1.0),
    "udp_app_per_msg_s": (float, 0.002),
    "uqa_update_cost_s": (float, 0.001),
    "uqa_receiver_busy_s": (float, 0.0),
}


def load_config_file(path: str) -> dict[str, object]:
    settings: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SETTINGS:
            raise ValueError(f"{path}:{lineno}: unknown setting {key!r}")
        caster = SETTINGS[key][0]
        try:
            settings[key] = caster(value)
        except ValueError:
            raise ValueError(
                f"{path}:{lineno}: cannot parse {value!r} as {caster.__name__} for {key}"
            ) from None
    return settings


def effective_settings(args: argparse.Namespace) -> dict[str, object]:
    settings = {name: default for name, (_, default) in SETTINGS.items()}
    config_path = getattr(args, "config", None)
    if config_path:
        settings.update(load_config_file(config_path))
    for name in SETTINGS:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    return settings


def build_experiment_config(settings: dict[str, object], derived_seed: int) -> ExperimentConfig:
    try:
        protocol = TransportKind(str(settings["protocol"]))
    except ValueError:
        choices = ", ".join(kind.value for kind in TransportKind)
        raise ValueError(f"protocol must be one of: {choices}") from None
    return ExperimentConfig(
        protocol=protocol,
        topology=str(settings["topology"]),
        packet_size_bytes=int(settings["packet_size_bytes"]),  # type: ignore[arg-type]
        receiver_delay_s=float(settings["receiver_delay_s"]),  # type: ignore[arg-type]
        message_count=int(settings["message_count"]),  # type: ignore[arg-type]
        run_duration_s=(
            None if settings["run_duration_s"] is None else float(settings["run_duration_s"])  # type: ignore[arg-type]
        ),
        seed=derived_seed,
        n_destinations=int(settings["n_destinations"]),  # type: ignore[arg-type]
        p_status=float(settings["p_status"]),  # type: ignore[arg-type]
        schedule=str(settings["schedule"]),
        send_window_fraction=float(settings["send_window_fraction"]),  # type: ignore[arg-type]
        queue_variant=str(settings["queue_variant"]),
        link=LinkParams(
            propagation_delay_s=float(settings["propagation_delay_s"]),  # type: ignore[arg-type]
            bandwidth_bps=float(settings["bandwidth_bps"]),  # type: ignore[arg-type]
            loss_prob=float(settings["loss_prob"]),  # type: ignore[arg-type]
        ),
        tcp=TcpModel(
            window_size=int(settings["window_size"]),  # type: ignore[arg-type]
            ack_size_bytes=int(settings["ack_size_bytes"]),  # type: ignore[arg-type]
            rto_s=float(settings["rto_s"]),  # type: ignore[arg-type]
        ),
        costs=ProcessingCosts(
            udp_app_per_msg_s=float(settings["udp_app_per_msg_s"]),  # type: ignore[arg-type]
            uqa_update_cost_s=float(settings["uqa_update_cost_s"]),  # type: ignore[arg-type]
            uqa_receiver_busy_s=float(settings["uqa_receiver_busy_s"]),  # type: ignore[arg-type]
        ),
    )


def print_settings(settings: dict[str, object], extra: Optional[dict[str, object]] = None) -> None:
    merged = dict(settings)
    if extra:
        merged.update(extra)
    for key in sorted(merged):
        print(f"{key}={merged[key]}")


def _add_model_flags(parser: argparse.ArgumentParser, full: bool) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--loss", dest="loss_prob", type=float, default=None,
                        help="per-packet loss probability on the link")
    parser.add_argument("--window", dest="window_size", type=int, default=None,
                        help="tcp window size in packets")
    parser.add_argument("--queue-variant", dest="queue_variant",
                        choices=("tail", "keyed"), default=None,
                        help="updatable-queue replacement scope")
    parser.add_argument("--schedule", choices=("uniform", "poisson"), default=None,
                        help="send schedule shape")
    parser.add_argument("--config", default=None, help="key=value configuration file")
    parser.add_argument("--print-config", action="store_true",
                        help="print effective settings and exit")
    if full:
        parser.add_argument("--protocol", choices=[k.value for k in TransportKind],
                            default=None)
        parser.add_argument("--topology", choices=("one_to_one", "one_to_many"),
                            default=None)
        parser.add_argument("--packet-size", dest="packet_size_bytes", type=int,
                            default=None)
        parser.add_argument("--receiver-delay", dest="receiver_delay_s", type=float,
                            default=None)
        parser.add_argument("--messages", dest="message_count", type=int, default=None,
                            help="messages per destination")
        parser.add_argument("--duration", dest="run_duration_s", type=float,
                            default=None)


def cmd_run(args: argparse.Namespace) -> int:
    settings = effective_settings(args)
    master = int(settings["seed"])  # type: ignore[arg-type]
    derived = cell_seed(
        master,
        str(settings["topology"]),
        int(settings["packet_size_bytes"]),  # type: ignore[arg-type]
        float(settings["receiver_delay_s"]),  # type: ignore[arg-type]
    )
    if args.print_config:
        print_settings(settings, {"derived_cell_seed": derived})
        return 0
    config = build_experiment_config(settings, derived)
    result = run_experiment(config)
    row = result_row(result)
    for key, value in row.items():
        print(f"{key}: {format_value(value)}")
    if args.out:
        columns = CSV_HEADER.split(",")
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            fh.write(",".join(format_value(row[c]) for c in columns) + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    settings = effective_settings(args)
    if args.print_config:
        print_settings(settings, {"jobs": args.jobs, "out": args.out})
        return 0
    master = int(settings["seed"])  # type: ignore[arg-type]
    base = build_experiment_config(settings, derived_seed=0)
    sweep = run_sweep(master_seed=master, jobs=args.jobs, base=base)
    out = Path(args.out)
    aggregate_out = Path(args.aggregate_out) if args.aggregate_out else out.with_name(
        out.stem + "_aggregate" + out.suffix
    )
    destinations_out = (
        Path(args.destinations_out)
        if args.destinations_out
        else out.with_name(out.stem + "_destinations" + out.suffix)
    )
    write_sweep_csv(str(out), sweep)
    write_aggregate_csv(str(aggregate_out), sweep_rows(sweep))
    write_destination_csv(str(destinations_out), sweep)
    print(f"wrote {out} ({len(sweep.results)} cells)")
    print(f"wrote {aggregate_out}")
    print(f"wrote {destinations_out}")
    return 0


def cmd_figures(args: argparse.Namespace) -> int:
    rows = parse_sweep_csv(args.source)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    figures = args.figure if args.figure else sorted(FIGURE_SPECS)
    for figure in figures:
        path = out_dir / f"figure_{figure:02d}.csv"
        write_figure_csv(str(path), rows, figure)
        print(f"wrote {path}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    records = sorted(load_trace(args.trace), key=lambda rec: rec[0])
    mode = {
        "uqa": QueueMode.UQA_TAIL,
        "keyed": QueueMode.UQA_KEYED,
        "fifo": QueueMode.FIFO,
    }[args.queue_variant]
    collector = MetricsCollector()
    if args.receiver_delay is None:
        queue = UpdatableQueue()
        for t_send, msg in records:
            if mode is QueueMode.UQA_TAIL:
                outcome = queue.enqueue_uqa(msg, t_send)
            elif mode is QueueMode.UQA_KEYED:
                outcome = queue.enqueue_keyed(msg, t_send)
            else:
                outcome = queue.enqueue_fifo(msg, t_send)
            collector.record_enqueued(msg.size_bytes * 8.0)
            if outcome is EnqueueOutcome.REPLACED_TAIL:
                collector.record_replaced()
            collector.record_queue_sample(t_send, len(queue))
        duration = records[-1][0] if records else 0.0
        report = collector.finalize(duration, final_queue_len=len(queue))
    else:
        clock = SimClock()
        receiver = Receiver(clock, args.receiver_delay, mode, collector)
        for t_send, msg in records:
            clock.schedule(t_send, lambda now, m=msg, r=receiver: r.deliver(m, now))
        horizon = (records[-1][0] if records else 0.0) + args.receiver_delay * (
            len(records) + 1
        )
        clock.run(horizon)
        duration = horizon
        report = collector.finalize(duration, final_queue_len=len(receiver.queue))
        queue = receiver.queue
    print(f"final_queue_length: {len(queue)}")
    for msg in queue.snapshot():
        print(format_trace_record(msg.t_enqueued or 0.0, msg))
    print(f"inserted: {queue.inserted}")
    print(f"replaced: {queue.replaced}")
    print(f"dequeued: {queue.dequeued}")
    print(f"avg_queue_len: {format_number(report.avg_queue_len)}")
    print(f"peak_queue_len: {format_number(report.peak_queue_len)}")
    print(f"avg_time_in_queue_s: {format_number(report.avg_time_in_queue_s)}")
    rate = report.messages_delivered / duration if duration > 0 else 0.0
    print(f"littles_residual: {format_number(littles_law_residual(report, rate))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqsim",
        description="transport comparison harness over FIFO and updatable receive queues",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment cell")
    _add_model_flags(p_run, full=True)
    p_run.add_argument("--out", default=None, help="write the result as a one-row CSV")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the full experiment matrix")
    _add_model_flags(p_sweep, full=False)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    p_sweep.add_argument("--out", default="sweep_results.csv")
    p_sweep.add_argument("--aggregate-out", default=None)
    p_sweep.add_argument("--destinations-out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_fig = sub.add_parser("figures", help="emit per-figure CSV files from a sweep CSV")
    p_fig.add_argument("--from", dest="source", required=True, help="sweep results CSV")
    p_fig.add_argument("--out-dir", default="figures")
    p_fig.add_argument(
        "--figure",
        type=int,
        action="append",
        help=f"figure id in {sorted(FIGURE_SPECS)}; repeatable (default: all)",
    )
    p_fig.set_defaults(func=cmd_figures)

    p_replay = sub.add_parser("replay", help="replay a trace file through a queue variant")
    p_replay.add_argument("--trace", required=True)
    p_replay.add_argument(
        "--queue-variant", choices=("uqa", "fifo", "keyed"), default="uqa"
    )
    p_replay.add_argument(
        "--receiver-delay",
        type=float,
        default=None,
        help="drain through a receiver with this per-message delay",
    )
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
