# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from coreason_ghast.adversaries import delivery_plan, private_parent, release_everything, split_groups
from coreason_ghast.config import AdversaryConfig
from coreason_ghast.exceptions import ConfigError, IoError
from coreason_ghast.harness import World
from coreason_ghast.interfaces import BaseAdversary
from coreason_ghast.schemas import AdversaryAction, Block, BlockId, MiningTemplate
from coreason_ghast.utils.digest import GENESIS_ID
from coreason_ghast.utils.logger import logger

MineTarget = Literal["pivot", "genesis", "private"]


class ScriptCommand(BaseModel):
    """One scripted instruction, applied at the start of `round`.

    Attributes:
        round: Round at which the command takes effect.
        verb: mine_on, withhold, release_all or release_to.
        arg: Target for mine_on (pivot, genesis, private) or group for release_to (X, Y).
        line: Source line, for error messages.
    """

    model_config = ConfigDict(frozen=True)

    round: int = Field(..., ge=0)
    verb: Literal["mine_on", "withhold", "release_all", "release_to"]
    arg: Optional[str] = None
    line: int = 0


_ARGS: Dict[str, Tuple[str, ...]] = {
    "mine_on": ("pivot", "genesis", "private"),
    "withhold": (),
    "release_all": (),
    "release_to": ("X", "Y"),
}


def parse_script(text: str) -> List[ScriptCommand]:
    """Parse `<round> <verb> [arg]` lines; '#' starts a comment.

    Raises:
        ConfigError: A malformed line, with its line number.
    """
    commands: List[ScriptCommand] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3) or not parts[0].isdigit():
            raise ConfigError(f"expected '<round> <command> [arg]', got {raw.strip()!r}", line=no, column=1)
        verb = parts[1]
        if verb not in _ARGS:
            raise ConfigError(f"unknown command {verb!r}", line=no, column=raw.index(verb) + 1)
        arg = parts[2] if len(parts) == 3 else None
        allowed = _ARGS[verb]
        if (arg is None) != (not allowed) or (arg is not None and arg not in allowed):
            raise ConfigError(f"command {verb!r} takes {allowed or 'no argument'}, got {arg!r}", line=no)
        commands.append(ScriptCommand(round=int(parts[0]), verb=verb, arg=arg, line=no))  # type: ignore[arg-type]
    return sorted(commands, key=lambda c: (c.round, c.line))


@lru_cache(maxsize=32)
def load_script(path: str) -> Tuple[ScriptCommand, ...]:
    """Cached parse of a script file.

    Raises:
        IoError: The file cannot be read.
        ConfigError: The file is malformed.
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise IoError(f"cannot read adversary script {path}: {e}") from e
    return tuple(parse_script(text))


def reset_script_cache() -> None:
    """Clear cached scripts."""
    load_script.cache_clear()


class ScriptedAdversary(BaseAdversary):
    """Follows a round-indexed command script.

    Starts by mining on the pivot and publishing everything at once. `withhold`
    stops publishing until a release command.

    Attributes:
        config: Adversary settings.
        commands: Parsed script, ordered by round.
        target: Current mining target.
        withholding: Whether new blocks are kept private.
        private_tip: Last block mined in private mode.
    """

    def __init__(self, config: AdversaryConfig, commands: Optional[Tuple[ScriptCommand, ...]] = None) -> None:
        self.config = config
        if commands is None:
            assert config.script_path is not None
            commands = load_script(config.script_path)
        self.commands = list(commands)
        self.target: MineTarget = "pivot"
        self.withholding = False
        self.private_tip: Optional[BlockId] = None
        self._next = 0

    def act(self, world: World) -> List[AdversaryAction]:
        actions: List[AdversaryAction] = []
        while self._next < len(self.commands) and self.commands[self._next].round <= world.round:
            cmd = self.commands[self._next]
            self._next += 1
            logger.debug(f"Round {world.round}: script line {cmd.line}: {cmd.verb} {cmd.arg or ''}")
            if cmd.verb == "mine_on":
                self.target = cmd.arg  # type: ignore[assignment]
            elif cmd.verb == "withhold":
                self.withholding = True
            elif cmd.verb == "release_all":
                actions.extend(release_everything(world))
            else:
                x, y = split_groups(world, self.config.group_split)
                group = x if cmd.arg == "X" else y
                if group:
                    actions.extend(release_everything(world, group))
        if not self.withholding:
            actions.extend(release_everything(world))
        return actions

    def schedule_honest(self, world: World, block: Block) -> Dict[int, int]:
        return delivery_plan(world, self.config.honest_delivery)

    def mining_template(self, world: World) -> MiningTemplate:
        if self.target == "genesis":
            return MiningTemplate(parent=GENESIS_ID)
        if self.target == "private":
            return MiningTemplate(parent=private_parent(world, self.private_tip))
        parent, refs = world.honest_template(world.universe)
        return MiningTemplate(parent=parent, refs=refs)

    def on_mined(self, world: World, block: Block) -> None:
        self.private_tip = block.id
