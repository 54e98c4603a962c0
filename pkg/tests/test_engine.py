# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from pathlib import Path
from typing import Callable, Tuple

import pytest

from coreason_ghast.config import (
    ConfirmationConfig,
    OracleConfig,
    OutputConfig,
    ProtocolMode,
    ProtocolParams,
    ScenarioConfig,
    SimConfig,
)
from coreason_ghast.engine import ScenarioEngine, ScenarioEngineAsync, override, resolve_axis, run_once
from coreason_ghast.exceptions import ConfigError
from coreason_ghast.utils.formats import load_snapshot, parse_rows, parse_timeline, read_event_log, read_json

MakeSim = Callable[..., SimConfig]
MakeScenario = Callable[..., ScenarioConfig]

ANALYSIS_PROTOCOL = ProtocolParams(eta_d=1.0, eta_w=60, eta_a=180, eta_t=36, eta_b=16, s_m=2, s_h=4)


@pytest.fixture
def scenario(make_sim: MakeSim, tmp_path: Path) -> MakeScenario:
    """Small oracle-checked scenario writing into tmp_path."""

    def _make(**sim: object) -> ScenarioConfig:
        base = {"horizon": 10, "protocol": ANALYSIS_PROTOCOL}
        base.update(sim)
        return ScenarioConfig(
            sim=make_sim(**base),
            oracle=OracleConfig(enabled=True),
            output=OutputConfig(out_dir=str(tmp_path / "out")),
        )

    return _make


class TestRunOnce:
    def test_artifacts(self, scenario: MakeScenario, tmp_path: Path) -> None:
        """A run writes the event log, metrics and the oracle report."""
        outcome = run_once(scenario())
        assert set(outcome.files) == {"event_log", "metrics_csv", "metrics_json", "report"}
        for path in outcome.files.values():
            assert Path(path).parent == tmp_path / "out"
        events = read_event_log(Path(outcome.files["event_log"]))
        assert outcome.report is not None
        assert outcome.report.events_checked == len(events)
        assert read_json(Path(outcome.files["report"]))["events_checked"] == len(events)
        rows = parse_rows(Path(outcome.files["metrics_csv"]).read_text())
        assert len(rows) == outcome.metrics.honest_blocks == 40
        for row, record in zip(rows, outcome.metrics.blocks, strict=True):
            assert parse_timeline(row["pivot_timeline"] or "") == record.pivot_timeline
        assert read_json(Path(outcome.files["metrics_json"]))["rounds"] == 10

    def test_deterministic(self, scenario: MakeScenario, tmp_path: Path) -> None:
        """One seed, one trace."""
        first = run_once(scenario(seed=5), tmp_path / "a")
        second = run_once(scenario(seed=5), tmp_path / "b")
        assert Path(first.files["event_log"]).read_text() == Path(second.files["event_log"]).read_text()

    def test_snapshot(self, scenario: MakeScenario, tmp_path: Path) -> None:
        """A snapshot reloads to the generated graph."""
        cfg = scenario().model_copy(update={"output": OutputConfig(out_dir=str(tmp_path), snapshot="graph.txt")})
        outcome = run_once(cfg)
        graph = load_snapshot(Path(outcome.files["snapshot"]).read_text())
        assert len(graph) == 41

    def test_oracle_skipped_outside_ghast(self, scenario: MakeScenario) -> None:
        """The oracle only analyses GHAST runs."""
        outcome = run_once(scenario(mode=ProtocolMode.PLAIN_GHOST))
        assert outcome.report is None
        assert "report" not in outcome.files
        assert outcome.ok

    def test_confirmation(self, scenario: MakeScenario, tmp_path: Path) -> None:
        """Enabling confirmation fills in latencies."""
        cfg = scenario(mode=ProtocolMode.PLAIN_GHOST).model_copy(
            update={"confirmation": ConfirmationConfig(enabled=True, beta=0.0)}
        )
        outcome = run_once(cfg, tmp_path)
        assert outcome.metrics.confirmed_blocks > 0
        assert outcome.metrics.latency_p50 is not None


class TestAxes:
    @pytest.mark.parametrize(
        "axis, path",
        [
            ("beta", ("sim", "beta")),
            ("eta_w", ("sim", "protocol", "eta_w")),
            ("target_risk", ("confirmation", "target_risk")),
            ("group_split", ("adversary", "group_split")),
            ("sim.protocol.eta_t", ("sim", "protocol", "eta_t")),
        ],
    )
    def test_resolve(self, axis: str, path: Tuple[str, ...]) -> None:
        """Bare names are looked up section by section; dotted names are taken as given."""
        assert resolve_axis(ScenarioConfig(), axis) == path

    @pytest.mark.parametrize("axis", ["nope", "sim.nope", "mode", "oracle.enabled", "release_round"])
    def test_bad_axis(self, axis: str) -> None:
        """Unknown and non-numeric fields cannot be swept."""
        with pytest.raises(ConfigError):
            resolve_axis(ScenarioConfig(), axis)

    def test_override(self, scenario: MakeScenario) -> None:
        """Overrides keep integer fields integral and re-validate."""
        cfg = override(scenario(), {("sim", "d"): 2.0, ("sim", "seed"): 9})
        assert cfg.sim.d == 2
        assert isinstance(cfg.sim.d, int)
        assert cfg.sim.seed == 9
        with pytest.raises(ConfigError):
            override(scenario(), {("sim", "beta"): 0.3})


class TestSweep:
    def test_rows_and_table(self, scenario: MakeScenario, tmp_path: Path) -> None:
        """One row per value, seeds derived from the base seed, and a sweep table."""
        engine = ScenarioEngine(scenario(seed=3), max_workers=2)
        rows = engine.sweep("sim.d", [0, 1, 2], tmp_path / "sweep")
        assert [r.value for r in rows] == [0.0, 1.0, 2.0]
        assert [r.seed for r in rows] == [3, 4, 5]
        assert all(r.violations is not None for r in rows)
        table = parse_rows((tmp_path / "sweep" / "sweep.csv").read_text())
        assert [t["value"] for t in table] == ["0.0", "1.0", "2.0"]
        assert (tmp_path / "sweep" / "sim.d=1" / "events.log").exists()

    def test_empty(self, scenario: MakeScenario) -> None:
        """A sweep needs values."""
        with pytest.raises(ConfigError):
            ScenarioEngine(scenario()).sweep("sim.d", [])

    def test_invalid_value(self, scenario: MakeScenario, tmp_path: Path) -> None:
        """A value that breaks validation fails the sweep before anything runs."""
        with pytest.raises(ConfigError):
            ScenarioEngine(scenario()).sweep("beta", [0.0, 0.3], tmp_path)
        assert not (tmp_path / "sweep.csv").exists()


class TestEngine:
    def test_config_from_path(self, tmp_path: Path) -> None:
        """A path is loaded as a YAML scenario."""
        path = tmp_path / "s.yaml"
        path.write_text("sim:\n  m: 8\n")
        with ScenarioEngine(str(path)) as engine:
            assert engine.config.sim.m == 8

    def test_default_config(self) -> None:
        """No argument means the default scenario."""
        assert ScenarioEngine().config.sim.m == 32

    async def test_async_run(self, scenario: MakeScenario, tmp_path: Path) -> None:
        """The async engine runs scenarios in worker threads."""
        async with ScenarioEngineAsync(scenario()) as engine:
            outcome = await engine.run_scenario(out_dir=tmp_path)
        assert outcome.metrics.rounds == 10
        assert (tmp_path / "events.log").exists()
