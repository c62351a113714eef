import pytest

from uqsim.engine import LinkParams, TransportKind
from uqsim.harness import (
    AGGREGATE_HEADER,
    CSV_HEADER,
    DEFAULT_PACKET_SIZES,
    DEFAULT_RECEIVER_DELAYS,
    ExperimentConfig,
    aggregate_rows,
    cell_seed,
    default_configs,
    destination_schedules,
    figure_table,
    format_number,
    format_value,
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


def small_sweep(master=7, jobs=1):
    # One packet size and two delays: 16 cells, fast enough for unit tests.
    return run_sweep(master_seed=master, jobs=jobs, packet_sizes=(256,), receiver_delays=(0.0, 0.05))


def test_lossless_udp_delivers_everything():
    cfg = ExperimentConfig(
        protocol=TransportKind.UDP,
        topology="one_to_one",
        packet_size_bytes=256,
        receiver_delay_s=0.0,
        seed=cell_seed(7, "one_to_one", 256, 0.0),
    )
    report = run_experiment(cfg).report
    assert report.messages_sent == 1000
    assert report.messages_delivered == 1000
    assert report.messages_lost == 0
    assert report.conservation_residual() == 0


def test_paired_uqa_queue_never_longer_on_average():
    for size in DEFAULT_PACKET_SIZES:
        seed = cell_seed(11, "one_to_one", size, 0.1)
        reports = {}
        for protocol in (TransportKind.TCP, TransportKind.TCP_UQA):
            cfg = ExperimentConfig(
                protocol=protocol,
                packet_size_bytes=size,
                receiver_delay_s=0.1,
                seed=seed,
            )
            reports[protocol] = run_experiment(cfg).report
        assert (
            reports[TransportKind.TCP_UQA].avg_queue_len
            <= reports[TransportKind.TCP].avg_queue_len
        )


def test_all_status_fanin_coalesces_to_single_slot():
    cfg = ExperimentConfig(
        protocol=TransportKind.UDP_UQA,
        packet_size_bytes=512,
        receiver_delay_s=0.1,
        p_status=1.0,
        seed=cell_seed(3, "one_to_one", 512, 0.1),
    )
    report = run_experiment(cfg).report
    assert report.avg_queue_len <= 1.0 + 1e-9
    assert report.peak_queue_len <= 1
    assert report.messages_replaced > 0


def test_one_to_many_reports_per_destination():
    cfg = ExperimentConfig(
        protocol=TransportKind.UDP,
        topology="one_to_many",
        packet_size_bytes=256,
        receiver_delay_s=0.033,
        seed=cell_seed(5, "one_to_many", 256, 0.033),
    )
    result = run_experiment(cfg)
    assert len(result.per_destination) == 4
    for report in result.per_destination:
        assert report.messages_sent == 1000
        assert report.conservation_residual() == 0
    assert result.report.messages_sent == 1000


def test_one_to_many_uniform_round_robin_interleave():
    cfg = ExperimentConfig(
        protocol=TransportKind.UDP,
        topology="one_to_many",
        schedule="uniform",
        packet_size_bytes=256,
        receiver_delay_s=0.0,
        seed=1,
    )
    schedules = destination_schedules(cfg)
    assert len(schedules) == 4
    global_gap = (720.0 * 0.9) / (1000 * 4)
    for dest, schedule in enumerate(schedules):
        assert schedule[0][0] == pytest.approx(dest * global_gap)
        assert schedule[1][0] - schedule[0][0] == pytest.approx(4 * global_gap)
    merged = sorted(t for schedule in schedules for t, _ in schedule)
    gaps = {round(b - a, 12) for a, b in zip(merged, merged[1:])}
    assert gaps == {round(global_gap, 12)}


@pytest.mark.parametrize(
    "field,value,match",
    [
        ("topology", "ring", "topology"),
        ("packet_size_bytes", -5, "packet_size_bytes"),
        ("receiver_delay_s", -0.1, "receiver_delay_s"),
        ("n_destinations", 0, "n_destinations"),
        ("queue_variant", "heap", "queue_variant"),
        ("schedule", "burst", "schedule"),
        ("p_status", -0.2, "p_status"),
    ],
)
def test_invalid_config_names_offending_field(field, value, match):
    cfg = ExperimentConfig(protocol=TransportKind.UDP, seed=1)
    setattr(cfg, field, value)
    with pytest.raises(ValueError, match=match):
        run_experiment(cfg)


def test_bad_protocol_rejected():
    cfg = ExperimentConfig(protocol=TransportKind.UDP, seed=1)
    cfg.protocol = "udp"  # type: ignore[assignment]
    with pytest.raises(ValueError, match="protocol"):
        run_experiment(cfg)


def test_default_matrix_shape_and_order():
    configs = default_configs(master_seed=7)
    assert len(configs) == 96
    # Canonical order: protocol, topology, size, delay.
    first_block = configs[: len(DEFAULT_PACKET_SIZES) * len(DEFAULT_RECEIVER_DELAYS)]
    assert all(c.protocol is TransportKind.TCP for c in first_block)
    assert all(c.topology == "one_to_one" for c in first_block)
    assert [c.receiver_delay_s for c in configs[:4]] == list(DEFAULT_RECEIVER_DELAYS)
    assert configs[0].packet_size_bytes == 32
    assert configs[4].packet_size_bytes == 256


def test_cell_seeds_shared_across_protocols():
    configs = default_configs(master_seed=7)
    by_coords = {}
    for cfg in configs:
        key = (cfg.topology, cfg.packet_size_bytes, cfg.receiver_delay_s)
        by_coords.setdefault(key, set()).add(cfg.seed)
    # All four protocols of a comparison group share one seed.
    assert all(len(seeds) == 1 for seeds in by_coords.values())
    assert len({cfg.seed for cfg in configs}) == 24


def test_cell_seed_pure_function():
    assert cell_seed(7, "one_to_one", 512, 0.05) == cell_seed(7, "one_to_one", 512, 0.05)
    assert cell_seed(7, "one_to_one", 512, 0.05) != cell_seed(8, "one_to_one", 512, 0.05)
    assert cell_seed(7, "one_to_one", 512, 0.05) != cell_seed(7, "one_to_many", 512, 0.05)


def test_parallel_sweep_matches_serial():
    serial = small_sweep(jobs=1)
    parallel = small_sweep(jobs=4)
    assert sweep_rows(serial) == sweep_rows(parallel)


def test_sweep_failure_names_cell():
    bad = ExperimentConfig(protocol=TransportKind.UDP, link=LinkParams(loss_prob=2.0))
    with pytest.raises(RuntimeError, match="protocol=tcp topology=one_to_one packet_size=256"):
        run_sweep(master_seed=1, base=bad, packet_sizes=(256,), receiver_delays=(0.0,))


def test_aggregate_rows_average_packet_sizes():
    sweep = run_sweep(master_seed=7, packet_sizes=(32, 256), receiver_delays=(0.05,))
    rows = sweep_rows(sweep)
    agg = aggregate_rows(rows)
    assert len(agg) == 8  # 4 protocols x 1 delay x 2 topologies
    udp_rows = [
        r
        for r in rows
        if r["protocol"] == "udp" and r["topology"] == "one_to_one"
    ]
    expected = sum(float(r["avg_queue_len"]) for r in udp_rows) / len(udp_rows)
    got = next(
        r
        for r in agg
        if r["protocol"] == "udp" and r["topology"] == "one_to_one"
    )
    assert float(got["avg_queue_len"]) == pytest.approx(expected)


def test_csv_round_trip(tmp_path):
    sweep = small_sweep()
    path = tmp_path / "results.csv"
    write_sweep_csv(str(path), sweep)
    text = path.read_text()
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 16
    assert text.endswith("\n")
    parsed = parse_sweep_csv(str(path))
    assert len(parsed) == 16
    assert parsed[0]["protocol"] == "tcp"
    assert parsed[0]["seed"] == sweep.results[0].config.seed


def test_destination_csv_row_count(tmp_path):
    sweep = small_sweep()
    path = tmp_path / "dest.csv"
    write_destination_csv(str(path), sweep)
    lines = path.read_text().splitlines()
    one_to_one_cells = 8
    one_to_many_cells = 8
    assert len(lines) == 1 + one_to_one_cells + one_to_many_cells * 4
    assert lines[0].split(",")[5] == "destination"


def test_aggregate_csv_header(tmp_path):
    sweep = small_sweep()  # 16 cells; one size, so aggregation is identity
    path = tmp_path / "agg.csv"
    write_aggregate_csv(str(path), sweep_rows(sweep))
    lines = path.read_text().splitlines()
    assert lines[0] == AGGREGATE_HEADER
    assert len(lines) == 1 + 16


def test_figure_table_shape_and_metric():
    sweep = run_sweep(master_seed=7, packet_sizes=(32, 256), receiver_delays=(0.0, 0.05))
    rows = sweep_rows(sweep)
    table = figure_table(rows, 8)
    assert [entry["receiver_delay_s"] for entry in table] == [0.0, 0.05]
    assert set(table[0]) == {"receiver_delay_s", "tcp", "udp", "tcp_uqa", "udp_uqa"}
    agg = aggregate_rows(rows)
    expected = next(
        float(r["avg_queue_len"])
        for r in agg
        if r["protocol"] == "udp" and r["topology"] == "one_to_one"
        and float(r["receiver_delay_s"]) == 0.05
    )
    assert float(table[1]["udp"]) == pytest.approx(expected)
    # One-to-many figures pull from the fan-out rows.
    fanout = figure_table(rows, 11)
    expected_fanout = next(
        float(r["avg_queue_len"])
        for r in agg
        if r["protocol"] == "udp" and r["topology"] == "one_to_many"
        and float(r["receiver_delay_s"]) == 0.05
    )
    assert float(fanout[1]["udp"]) == pytest.approx(expected_fanout)


def test_figure_csv_and_unknown_id(tmp_path):
    sweep = small_sweep()
    rows = sweep_rows(sweep)
    path = tmp_path / "figure_08.csv"
    write_figure_csv(str(path), rows, 8)
    lines = path.read_text().splitlines()
    assert lines[0] == "receiver_delay_s,tcp,udp,tcp_uqa,udp_uqa"
    assert len(lines) == 1 + 2
    with pytest.raises(ValueError, match="unknown figure id"):
        figure_table(rows, 99)


def test_format_number():
    assert format_number(1000.0) == "1000"
    assert format_number(0.03312) == "0.03312"
    assert format_number(927536.2312) == "927536"
    assert format_number(1234567.891) == "1.23457e+06"


def test_format_value_keeps_large_ints_exact():
    assert format_value(6091131066709066476) == "6091131066709066476"
    assert format_value("udp") == "udp"
    assert format_value(0.5) == "0.5"


def test_result_row_columns_match_header():
    cfg = ExperimentConfig(protocol=TransportKind.UDP, seed=1, message_count=10)
    row = result_row(run_experiment(cfg))
    assert list(row) == CSV_HEADER.split(",")
