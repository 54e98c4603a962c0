# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

import math
import os
from contextvars import ContextVar
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Sequence, Tuple, Type

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from coreason_ghast.exceptions import ConfigError, IoError
from coreason_ghast.utils.logger import logger

CONFIG_PATH_ENV = "GHAST_CONFIG_PATH"
DEFAULT_CONFIG_PATH = "ghast_config.yaml"

# Explicit path handed from load_config to the YAML source for one construction.
_explicit_path: ContextVar[Optional[str]] = ContextVar("ghast_config_path", default=None)


def _config_path() -> str:
    return _explicit_path.get() or os.getenv(CONFIG_PATH_ENV, DEFAULT_CONFIG_PATH)


class ProtocolMode(str, Enum):
    """Consensus variant run by honest nodes."""

    GHAST = "ghast"
    PLAIN_GHOST = "plain_ghost"
    NAKAMOTO_REF = "nakamoto_ref"


class ProtocolParams(BaseModel):
    """Protocol parameters.

    Defaults are the production parameter set: heavy weight 600, timer ratio 360,
    dominance threshold 3 x 600 and age threshold 160.

    Attributes:
        eta_d: Puzzle difficulty, expected oracle queries per block.
        eta_w: Heavy-block ratio and weight.
        eta_a: Dominance threshold used by the liveness detector.
        eta_t: Timer-block ratio.
        eta_b: Timer-height age threshold.
        s_m: Malicious special-status threshold (analysis only). Derived from lambda when None.
        s_h: Honest special-status threshold (analysis only). Derived from lambda when None.
        design_beta: Adversary fraction the parameters were designed against.
    """

    model_config = ConfigDict(frozen=True)

    eta_d: float = Field(default=64.0, gt=0, description="Expected queries per block")
    eta_w: int = Field(default=600, ge=1)
    eta_a: int = Field(default=1800, ge=0)
    eta_t: int = Field(default=360, ge=1)
    eta_b: int = Field(default=160, ge=0)
    s_m: Optional[float] = Field(default=None, ge=0)
    s_h: Optional[float] = Field(default=None, ge=0)
    design_beta: float = Field(default=0.4, ge=0.0, lt=0.5)

    @model_validator(mode="after")
    def _thresholds_fit_heavy_weight(self) -> "ProtocolParams":
        if self.s_m is not None and self.s_h is not None and 2 * self.s_h + 2 * self.s_m > self.eta_w:
            raise ValueError(f"2*s_h + 2*s_m = {2 * self.s_h + 2 * self.s_m} exceeds eta_w={self.eta_w}")
        return self

    def thresholds(self, lam: float) -> Tuple[float, float]:
        """Resolve (s_m, s_h), defaulting to 1.5*lambda and 3*lambda."""
        s_m = self.s_m if self.s_m is not None else 1.5 * lam
        s_h = self.s_h if self.s_h is not None else 3.0 * lam
        return s_m, s_h


class SimConfig(BaseModel):
    """Round-based simulation settings.

    Attributes:
        m: Number of nodes.
        beta: Adversary power fraction; beta * m nodes are corrupted.
        d: Maximum delivery delay in rounds.
        horizon: Number of rounds to run.
        seed: Seed for digests and mining draws.
        mode: Consensus variant.
        protocol: Protocol parameters.
        strict_validity: Check the parent rule on every honest insert.
        adaptive_corruption: Let the adversary re-pick corrupted nodes each round.
        admissibility_checks: Assert delivery deadlines every round.
    """

    model_config = ConfigDict(frozen=True)

    m: int = Field(default=32, gt=0)
    beta: float = Field(default=0.0, ge=0.0, lt=0.5)
    d: int = Field(default=1, ge=0)
    horizon: int = Field(default=1000, gt=0)
    seed: int = Field(default=0, ge=0)
    mode: ProtocolMode = ProtocolMode.GHAST
    protocol: ProtocolParams = Field(default_factory=ProtocolParams)
    strict_validity: bool = False
    adaptive_corruption: bool = False
    admissibility_checks: bool = True

    @model_validator(mode="after")
    def _integral_budget(self) -> "SimConfig":
        budget = self.beta * self.m
        if abs(budget - round(budget)) > 1e-9:
            raise ValueError(f"beta * m = {budget} must be an integer number of corrupted nodes")
        return self

    @property
    def corrupted(self) -> int:
        return int(round(self.beta * self.m))

    @property
    def honest(self) -> int:
        return self.m - self.corrupted

    @property
    def lam(self) -> float:
        """Expected number of blocks per delay window, m * (d + 1) / eta_d."""
        return self.m * (self.d + 1) / self.protocol.eta_d

    @property
    def effective_protocol(self) -> ProtocolParams:
        """Parameters as seen by the weight rule; non-GHAST modes pin eta_w to 1."""
        if self.mode == ProtocolMode.GHAST:
            return self.protocol
        return self.protocol.model_copy(update={"eta_w": 1})


class AdversaryConfig(BaseModel):
    """Adversary selection.

    Attributes:
        kind: Built-in adversary.
        script_path: Command script for the 'script' adversary.
        release_round: Round at which the withholding adversary publishes everything; None never.
        group_split: Fraction of honest nodes in group X for the balance attack.
        honest_delivery: Delay policy for honest blocks outside the balance attack.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["null", "withhold", "balance", "script"] = "null"
    script_path: Optional[str] = None
    release_round: Optional[int] = Field(default=None, ge=0)
    group_split: float = Field(default=0.5, gt=0.0, lt=1.0)
    honest_delivery: Literal["next_round", "deadline"] = "next_round"

    @model_validator(mode="after")
    def _script_needs_path(self) -> "AdversaryConfig":
        if self.kind == "script" and not self.script_path:
            raise ValueError("adversary.script_path is required for kind 'script'")
        return self


class OracleConfig(BaseModel):
    """Analysis oracle settings.

    Attributes:
        enabled: Run the oracle alongside the simulation.
        potential_window: Check potentials only on the last W chain-C blocks; None checks all.
        containment_interval: Rounds between full local-graph containment scans.
    """

    model_config = ConfigDict(frozen=True)

    enabled: bool = False
    potential_window: Optional[int] = Field(default=None, gt=0)
    containment_interval: int = Field(default=1, gt=0)


class ConfirmationConfig(BaseModel):
    """Confirmation policy settings.

    Attributes:
        enabled: Track confirmations during simulation.
        target_risk: Risk below which a pivot block counts as confirmed.
        beta: Adversary fraction assumed by the risk bound.
        theta: Block horizon for the no-adaptation assumption.
        slice_size: Chain blocks per assumption-break slice.
        z_gap: Heuristic bound on timer-height lead over the parent's view.
        interval: Rounds between confirmation passes.
        typeset_forms: Use the literal printed formulas instead of the corrected ones.
    """

    model_config = ConfigDict(frozen=True)

    enabled: bool = False
    target_risk: float = Field(default=2e-5, gt=0.0, lt=1.0)
    beta: float = Field(default=0.1, ge=0.0, lt=0.5)
    theta: int = Field(default=20000, ge=0)
    slice_size: int = Field(default=50, gt=0)
    z_gap: int = Field(default=10, ge=0)
    interval: int = Field(default=1, gt=0)
    typeset_forms: bool = False


class OutputConfig(BaseModel):
    """Artifact locations, relative to out_dir."""

    model_config = ConfigDict(frozen=True)

    out_dir: str = "ghast_out"
    event_log: str = "events.log"
    metrics_csv: str = "metrics.csv"
    metrics_json: str = "metrics.json"
    report: str = "oracle_report.json"
    snapshot: Optional[str] = None


class YamlConfigSettingsSource(PydanticBaseSettingsSource):
    """A settings source that loads a scenario from a YAML file.

    The path is the one given to load_config, else GHAST_CONFIG_PATH, else 'ghast_config.yaml'.
    """

    def __init__(self, settings_cls: Type[BaseSettings], config_path: Optional[str] = None) -> None:
        super().__init__(settings_cls)
        self.config_path = config_path or _config_path()

    def get_field_value(self, field: Any, field_name: str) -> Tuple[Any, str, bool]:
        return None, "", False  # pragma: no cover

    def __call__(self) -> Dict[str, Any]:
        """Load the YAML file and return it as a dict.

        Returns:
            Dict[str, Any]: The raw configuration mapping.

        Raises:
            ConfigError: If the file is not valid YAML or not a mapping.
        """
        config_path = self.config_path
        path = Path(config_path)

        if not path.exists():
            if config_path != DEFAULT_CONFIG_PATH:
                logger.warning(f"Config file not found at {config_path}")
            return {}

        try:
            with open(path, "r") as f:
                data = yaml.safe_load(f)
        except yaml.MarkedYAMLError as e:
            mark = e.problem_mark
            raise ConfigError(
                f"invalid YAML: {e.problem}",
                line=mark.line + 1 if mark is not None else None,
                column=mark.column + 1 if mark is not None else None,
            ) from e
        except yaml.YAMLError as e:  # pragma: no cover
            raise ConfigError(f"invalid YAML: {e}") from e

        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError("top level of the config file must be a mapping", line=1)
        return data


class ScenarioConfig(BaseSettings):
    """Root configuration of a scenario run.

    Sources, highest priority first: init arguments, GHAST__ environment variables
    (nested with '__', e.g. GHAST__SIM__BETA), the YAML file.

    Attributes:
        sim: Simulation settings and protocol parameters.
        adversary: Adversary selection.
        oracle: Analysis oracle settings.
        confirmation: Confirmation policy.
        output: Artifact paths.
    """

    model_config = SettingsConfigDict(
        env_prefix="GHAST__",
        env_nested_delimiter="__",
        frozen=True,
        extra="ignore",
    )

    sim: SimConfig = Field(default_factory=SimConfig)
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    confirmation: ConfirmationConfig = Field(default_factory=ConfirmationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _analysis_constraints(self) -> "ScenarioConfig":
        if not self.oracle.enabled or self.sim.mode != ProtocolMode.GHAST:
            return self
        p = self.sim.protocol
        s_m, s_h = self.analysis_thresholds()
        if 2 * s_h + 2 * s_m > p.eta_w:
            raise ValueError(f"oracle requires 2*s_h + 2*s_m <= eta_w, got {2 * s_h + 2 * s_m} > {p.eta_w}")
        if p.eta_a < 2 * s_m + 2 * s_h + 2 * p.eta_w:
            raise ValueError(
                f"oracle requires eta_a >= 2*s_m + 2*s_h + 2*eta_w = {2 * s_m + 2 * s_h + 2 * p.eta_w}, got {p.eta_a}"
            )
        return self

    def analysis_thresholds(self) -> Tuple[float, float]:
        """(s_m, s_h) resolved against this scenario's lambda."""
        return self.sim.protocol.thresholds(self.sim.lam)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        """Init arguments, then environment, then YAML, then defaults."""
        return (
            init_settings,
            env_settings,
            YamlConfigSettingsSource(settings_cls),
        )


def _locate(path: Path, loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the YAML key addressed by a pydantic error location."""
    try:
        node = yaml.compose(path.read_text())
    except (OSError, yaml.YAMLError):  # pragma: no cover
        return None
    line: Optional[int] = None
    for key in loc:
        if not isinstance(node, yaml.MappingNode):
            break
        for k, v in node.value:
            if k.value == str(key):
                line = k.start_mark.line + 1
                node = v
                break
        else:
            break
    return line


def load_config(config_path: Optional[str] = None, **overrides: Any) -> ScenarioConfig:
    """Load and validate a scenario.

    Args:
        config_path: Optional path to a YAML scenario file.
        **overrides: Section overrides passed as init arguments.

    Returns:
        ScenarioConfig: The validated scenario.

    Raises:
        IoError: If an explicit config path does not exist.
        ConfigError: If the file or the merged values are invalid.
    """
    if config_path and not Path(config_path).exists():
        raise IoError(f"config file not found: {config_path}")
    token = _explicit_path.set(config_path or None)
    try:
        return ScenarioConfig(**overrides)
    except ValidationError as e:
        first = e.errors()[0]
        loc = tuple(first["loc"])
        where = ".".join(str(x) for x in loc) or "<root>"
        line = None
        path = Path(_config_path())
        if loc and path.exists():
            line = _locate(path, loc)
        raise ConfigError(f"{where}: {first['msg']}", line=line) from e
    finally:
        _explicit_path.reset(token)


def derived_seed(seed: int, index: int) -> int:
    """Seed of the index-th run of a sweep."""
    return seed + index


def expected_blocks_quantile(mean: float, sigmas: float = 6.0) -> int:
    """Upper quantile used to pad counts of blocks a node may not have seen yet."""
    return int(math.ceil(mean + sigmas * math.sqrt(max(mean, 0.0))))
