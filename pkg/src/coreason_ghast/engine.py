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
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import anyio
from anyio import CapacityLimiter, to_thread
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from coreason_ghast.adversary import get_adversary
from coreason_ghast.config import ProtocolMode, ScenarioConfig, derived_seed, load_config
from coreason_ghast.exceptions import ConfigError, GhastError
from coreason_ghast.harness import ConfirmationTracker, EventListener, RoundObserver, Simulator
from coreason_ghast.metrics import (
    AggregateRow,
    BlockRecord,
    MetricsCollector,
    MetricsRecord,
    aggregate_row,
    collect_metrics,
)
from coreason_ghast.oracle import Oracle
from coreason_ghast.schemas import AssertionReport
from coreason_ghast.utils.formats import (
    format_rows,
    report_payload,
    write_event_log,
    write_json,
    write_snapshot,
    write_text,
)
from coreason_ghast.utils.logger import logger

_SECTIONS: Tuple[Tuple[str, ...], ...] = (("sim",), ("sim", "protocol"), ("confirmation",), ("adversary",), ("oracle",))


class RunOutcome(BaseModel):
    """Result of one scenario run.

    Attributes:
        metrics: Collected metrics.
        report: Oracle report, None when the oracle is off.
        files: Artifact name to written path.
    """

    model_config = ConfigDict(frozen=True)

    metrics: MetricsRecord
    report: Optional[AssertionReport] = None
    files: Dict[str, str] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.report is None or self.report.ok


def resolve_axis(cfg: ScenarioConfig, axis: str) -> Tuple[str, ...]:
    """Config path for a sweep axis: dotted ('sim.protocol.eta_w') or a bare field name ('beta').

    Raises:
        ConfigError: Unknown or non-numeric field.
    """
    data = cfg.model_dump()
    if "." in axis:
        path = tuple(axis.split("."))
    else:
        path = ()
        for section in _SECTIONS:
            node = data
            for key in section:
                node = node[key]
            if axis in node:
                path = (*section, axis)
                break
        if not path:
            raise ConfigError(f"unknown sweep axis {axis!r}")
    node = data
    for key in path:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        node = node[key]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"sweep axis {axis!r} is not numeric")
    return path


def override(cfg: ScenarioConfig, updates: Dict[Tuple[str, ...], Any]) -> ScenarioConfig:
    """Copy of cfg with nested fields replaced, re-validated.

    Raises:
        ConfigError: The updated scenario is invalid.
    """
    data = cfg.model_dump()
    for path, value in updates.items():
        node = data
        for key in path[:-1]:
            node = node[key]
        old = node.get(path[-1])
        if isinstance(old, int) and isinstance(value, float) and value.is_integer():
            value = int(value)
        node[path[-1]] = value
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"{'.'.join(str(x) for x in first['loc'])}: {first['msg']}") from e


def run_once(cfg: ScenarioConfig, out_dir: Optional[Path] = None) -> RunOutcome:
    """Run one scenario to its horizon and write its artifacts (blocking)."""
    out = Path(out_dir or cfg.output.out_dir)
    collector = MetricsCollector()
    observers: List[RoundObserver] = [collector]
    tracker: Optional[ConfirmationTracker] = None
    if cfg.confirmation.enabled:
        tracker = ConfirmationTracker(cfg.confirmation, cfg.sim)
        observers.append(tracker)

    sim = Simulator(cfg.sim, get_adversary(cfg.adversary), observers=observers)
    oracle: Optional[Oracle] = None
    if cfg.oracle.enabled:
        if cfg.sim.mode != ProtocolMode.GHAST:
            logger.warning(f"Oracle skipped: analysis applies to ghast mode, not {cfg.sim.mode.value}")
        else:
            s_m, s_h = cfg.analysis_thresholds()
            oracle = Oracle.for_world(
                sim.world,
                s_m,
                s_h,
                window=cfg.oracle.potential_window,
                containment_interval=cfg.oracle.containment_interval,
            )
            listener: EventListener = oracle
            sim.world.listeners.append(listener)

    with logger.contextualize(run=f"seed={cfg.sim.seed}"):
        sim.run()
    record = collect_metrics(sim.world, collector, tracker)

    files: Dict[str, str] = {}
    files["event_log"] = str(write_event_log(sim.world.event_log, out / cfg.output.event_log))
    block_fields = list(BlockRecord.model_fields)
    rows = [r.as_row() for r in record.blocks]
    files["metrics_csv"] = str(write_text(format_rows(rows, block_fields), out / cfg.output.metrics_csv))
    files["metrics_json"] = str(write_json(record.model_dump(mode="json"), out / cfg.output.metrics_json))
    report = None
    if oracle is not None:
        report = oracle.report
        files["report"] = str(write_json(report_payload(report), out / cfg.output.report))
        if report.ok:
            logger.info(f"Oracle: {report.events_checked} events checked, no violations")
        else:
            logger.error(f"Oracle: {len(report.violations)} violations: {report.counts()}")
    if cfg.output.snapshot:
        files["snapshot"] = str(write_snapshot(sim.world.universe, out / cfg.output.snapshot))
    return RunOutcome(metrics=record, report=report, files=files)


class ScenarioEngineAsync:
    """Async scenario runner; runs execute in worker threads.

    Attributes:
        config: The base scenario.
        limiter: Bound on concurrently running simulations.
    """

    def __init__(self, config: Optional[Union[ScenarioConfig, str]] = None, max_workers: int = 4) -> None:
        """Initialize the engine.

        Args:
            config: A ScenarioConfig or a path to a YAML scenario. If None, defaults are loaded.
            max_workers: Concurrent runs during a sweep.
        """
        if isinstance(config, str):
            self.config = load_config(config)
        elif isinstance(config, ScenarioConfig):
            self.config = config
        else:
            self.config = load_config()
        self.limiter = CapacityLimiter(max_workers)

    async def __aenter__(self) -> "ScenarioEngineAsync":
        return self

    async def __aexit__(self, *exc: Any) -> None:
        return None

    async def run_scenario(self, cfg: Optional[ScenarioConfig] = None, out_dir: Optional[Path] = None) -> RunOutcome:
        """Run one scenario and write its artifacts."""
        cfg = cfg or self.config
        logger.info(f"Running scenario seed={cfg.sim.seed} adversary={cfg.adversary.kind}")
        return await to_thread.run_sync(run_once, cfg, out_dir, limiter=self.limiter)

    async def sweep(self, axis: str, values: Sequence[float], out_dir: Optional[Path] = None) -> List[AggregateRow]:
        """Run the scenario once per axis value, in parallel, with seeds derived from the base seed.

        Raises:
            ConfigError: Empty value list or an invalid axis.
        """
        if not values:
            raise ConfigError("sweep needs at least one value")
        path = resolve_axis(self.config, axis)
        root = Path(out_dir or self.config.output.out_dir)
        configs = [
            override(self.config, {path: v, ("sim", "seed"): derived_seed(self.config.sim.seed, i)})
            for i, v in enumerate(values)
        ]
        results: List[Optional[AggregateRow]] = [None] * len(configs)
        errors: List[Tuple[int, GhastError]] = []

        async def _one(i: int) -> None:
            try:
                outcome = await self.run_scenario(configs[i], root / f"{axis}={values[i]}")
            except GhastError as e:
                logger.error(f"Sweep {axis}={values[i]} failed: {e}")
                errors.append((i, e))
                return
            violations = None if outcome.report is None else len(outcome.report.violations)
            results[i] = aggregate_row(axis, float(values[i]), outcome.metrics, violations)
            logger.info(f"Sweep {axis}={values[i]} done ({i + 1}/{len(configs)})")

        async with anyio.create_task_group() as tg:
            for i in range(len(configs)):
                tg.start_soon(_one, i)

        if errors:
            raise min(errors, key=lambda t: t[0])[1]

        rows = [r for r in results if r is not None]
        fields = list(AggregateRow.model_fields)
        write_text(format_rows([r.model_dump(mode="json") for r in rows], fields), root / "sweep.csv")
        return rows


class ScenarioEngine:
    """Synchronous facade for ScenarioEngineAsync."""

    def __init__(self, config: Optional[Union[ScenarioConfig, str]] = None, max_workers: int = 4) -> None:
        self._async = ScenarioEngineAsync(config, max_workers)

    @property
    def config(self) -> ScenarioConfig:
        return self._async.config

    def __enter__(self) -> "ScenarioEngine":
        return self

    def __exit__(self, *exc: Any) -> None:
        anyio.run(self._async.__aexit__, *exc)

    def run_scenario(self, cfg: Optional[ScenarioConfig] = None, out_dir: Optional[Path] = None) -> RunOutcome:
        """Run one scenario synchronously."""
        return anyio.run(self._async.run_scenario, cfg, out_dir)

    def sweep(self, axis: str, values: Sequence[float], out_dir: Optional[Path] = None) -> List[AggregateRow]:
        """Run a sweep synchronously."""
        return anyio.run(self._async.sweep, axis, values, out_dir)
