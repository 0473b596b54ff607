"""Benchmark harness: CSV shape, determinism, config validation."""

import pytest

from scfledger.bench import (
    BenchConfig,
    BenchResult,
    BenchRow,
    emit_csv,
    final_state_for_tps_workload,
    run_latency_sweep,
    run_tps_sweep,
)
from scfledger.errors import ConfigError


def small_latency_cfg(**overrides):
    defaults = dict(
        contract_group="user",
        block_sizes=(2, 4),
        requests_per_level=16,
        latency_concurrency=8,
        seed=11,
    )
    defaults.update(overrides)
    return BenchConfig(**defaults)


class TestEmitCsv:
    def test_empty_result_header_only(self, tmp_path):
        path = emit_csv(BenchResult(), tmp_path / "empty.csv")
        assert path.read_text() == (
            "group,op,mode,block_size,concurrency,mean_ms,p95_ms,tps,valid,invalid\n"
        )

    def test_stable_column_order(self, tmp_path):
        result = BenchResult(rows=[
            BenchRow("user", "add", "solo", 10, 50, 1.5, 2.0, 100.0, 50, 0)
        ])
        path = emit_csv(result, tmp_path / "one.csv")
        assert path.read_text().splitlines()[1] == "user,add,solo,10,50,1.500,2.000,100.000,50,0"

    def test_unwritable_path_raises(self, tmp_path):
        with pytest.raises(OSError):
            emit_csv(BenchResult(), tmp_path / "nope" / "deep" / "x.csv")


class TestConfigValidation:
    def test_zero_requests_rejected(self):
        with pytest.raises(ConfigError):
            run_latency_sweep(small_latency_cfg(requests_per_level=0))

    def test_unknown_group_rejected(self):
        with pytest.raises(ConfigError):
            run_latency_sweep(small_latency_cfg(contract_group="everything"))

    def test_bad_block_size_rejected(self):
        with pytest.raises(ConfigError):
            run_latency_sweep(small_latency_cfg(block_sizes=(0,)))


class TestLatencySweep:
    def test_rows_cover_ops_and_sizes(self):
        result = run_latency_sweep(small_latency_cfg())
        ops = {row.op for row in result.rows}
        sizes = {row.block_size for row in result.rows}
        assert ops == {"add", "query", "check"}
        assert sizes == {2, 4}

    def test_counts_add_up(self):
        cfg = small_latency_cfg()
        result = run_latency_sweep(cfg)
        for row in result.rows:
            assert row.valid + row.invalid == cfg.requests_per_level

    def test_deterministic_csv(self, tmp_path):
        a = emit_csv(run_latency_sweep(small_latency_cfg()), tmp_path / "a.csv")
        b = emit_csv(run_latency_sweep(small_latency_cfg()), tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_fiproject_group_runs(self):
        cfg = BenchConfig(
            contract_group="fiproject",
            block_sizes=(3,),
            requests_per_level=9,
            latency_concurrency=6,
        )
        result = run_latency_sweep(cfg)
        assert {row.op for row in result.rows} == {"add", "update", "query", "delete"}
        for row in result.rows:
            assert row.invalid == 0, row


class TestTpsSweep:
    def test_rows_per_mode_and_level(self):
        cfg = BenchConfig(
            contract_group="user",
            concurrency_levels=(4, 8),
            requests_per_level=16,
            seed=3,
        )
        result = run_tps_sweep(cfg, modes=["solo", "kafka:2"])
        assert len(result.rows) == 4
        assert {row.mode for row in result.rows} == {"solo", "kafka:2"}
        for row in result.rows:
            assert row.tps > 0 and row.valid == 16

    def test_modes_reach_identical_state(self):
        cfg = BenchConfig(contract_group="user", requests_per_level=20, seed=5)
        solo = final_state_for_tps_workload(cfg, "solo", 10)
        kafka = final_state_for_tps_workload(cfg, "kafka:4", 10)
        assert solo == kafka

    def test_reads_never_appear_in_blocks(self):
        from scfledger.bench import _BUILDERS, _Driver

        cfg = BenchConfig(
            contract_group="checkaccess", concurrency_levels=(4,), requests_per_level=12
        ).validate()
        workload = _BUILDERS["checkaccess"](cfg, 10, "solo")
        height_before = workload.node.height
        driver = _Driver(workload.node, workload.clock, cfg.exec_cost_ms)
        stats = driver.run_phase(workload.ops[0], 12, 4, 0)
        assert stats.valid == 12
        assert workload.node.height == height_before  # nothing entered a block
