"""Scenario files: parsing, execution, and the run report.

Line-oriented grammar, `#` starts a comment:

    spawn controller <id> slice=<s>
    spawn app <id> category=<c> contr=<id>
    spawn switch <id> slice=<s> [contr=<id>]
    connect <switch> <contr>
    flow <app> <contr> <switch> <content-hex>
    attack <kind> <target> at <tick>
    run <ticks>

Lines before the first `run` execute at tick 0; each `run N` advances the
scenario clock by N ticks. Category values use underscores for spaces
(`category=traffic_engineering`). One topology resource is declared per slice
mentioned anywhere in the script, and every app automatically requests all
resources two ticks after it spawns, which exercises the access-control path.

The report is plain text with a stable field order, ending in a key=value
summary block meant for machines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ledger import dump_chain, verify_chain
from .simnet import (
    AdversaryConfig,
    AdversaryKind,
    CATEGORIES,
    EntityKind,
    SimConfig,
    World,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass
class ScenarioAction:
    tick: int
    line: int
    verb: str
    args: dict


@dataclass
class Scenario:
    name: str
    actions: list = field(default_factory=list)
    attacks: list = field(default_factory=list)  # (AdversaryConfig, line)
    entity_ids: list = field(default_factory=list)
    slices: list = field(default_factory=list)
    total_ticks: int = 0


def _column_of(line_text: str, token_index: int) -> int:
    pos = 0
    for i, token in enumerate(line_text.split()):
        found = line_text.find(token, pos)
        if i == token_index:
            return found + 1
        pos = found + len(token)
    return 1


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    scenario = Scenario(name)
    clock = 0
    last_event_tick = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        verb = tokens[0]

        def fail(msg, col_token=0):
            raise ParseError(msg, lineno, _column_of(raw, col_token))

        if verb == "run":
            if len(tokens) != 2 or not tokens[1].isdigit():
                fail("expected: run <ticks>", len(tokens) - 1)
            clock += int(tokens[1])
        elif verb == "spawn":
            if len(tokens) < 3:
                fail("expected: spawn <kind> <id> [key=value ...]")
            kind_token, entity_id = tokens[1], tokens[2]
            kinds = {k.value: k for k in EntityKind}
            if kind_token not in kinds:
                fail(f"unknown entity kind {kind_token!r}", 1)
            opts = {}
            for i, token in enumerate(tokens[3:], start=3):
                if "=" not in token:
                    fail(f"expected key=value, got {token!r}", i)
                key, value = token.split("=", 1)
                if key not in ("slice", "category", "contr"):
                    fail(f"unknown option {key!r}", i)
                opts[key] = value
            if "category" in opts:
                opts["category"] = opts["category"].replace("_", " ")
                if opts["category"] not in CATEGORIES:
                    fail(f"unknown category {opts['category']!r}")
            if kind_token == "app" and "category" not in opts:
                fail("apps need category=<c>")
            if kind_token == "app" and "contr" not in opts:
                fail("apps need contr=<id>")
            if kind_token in ("controller", "switch") and "slice" not in opts:
                fail(f"{kind_token}s need slice=<s>")
            scenario.actions.append(
                ScenarioAction(clock, lineno, "spawn", {"kind": kinds[kind_token],
                                                        "id": entity_id, **opts})
            )
            scenario.entity_ids.append(entity_id)
            if "slice" in opts and opts["slice"] not in scenario.slices:
                scenario.slices.append(opts["slice"])
            if kind_token == "app":
                scenario.actions.append(
                    ScenarioAction(clock + 2, lineno, "resources", {"id": entity_id})
                )
                last_event_tick = max(last_event_tick, clock + 2)
            last_event_tick = max(last_event_tick, clock)
        elif verb == "connect":
            if len(tokens) != 3:
                fail("expected: connect <switch> <contr>")
            scenario.actions.append(
                ScenarioAction(clock, lineno, "connect",
                               {"switch": tokens[1], "contr": tokens[2]})
            )
            last_event_tick = max(last_event_tick, clock)
        elif verb == "flow":
            if len(tokens) != 5:
                fail("expected: flow <app> <contr> <switch> <content-hex>")
            try:
                content = bytes.fromhex(tokens[4])
            except ValueError:
                fail(f"bad hex content {tokens[4]!r}", 4)
            scenario.actions.append(
                ScenarioAction(clock, lineno, "flow",
                               {"app": tokens[1], "contr": tokens[2],
                                "switch": tokens[3], "content": content})
            )
            last_event_tick = max(last_event_tick, clock)
        elif verb == "attack":
            if len(tokens) != 5 or tokens[3] != "at" or not tokens[4].isdigit():
                fail("expected: attack <kind> <target> at <tick>")
            kinds = {k.value: k for k in AdversaryKind}
            if tokens[1] not in kinds:
                fail(f"unknown attack kind {tokens[1]!r}", 1)
            tick = int(tokens[4])
            scenario.attacks.append(
                (AdversaryConfig(kinds[tokens[1]], tokens[2], (tick,)), lineno)
            )
            last_event_tick = max(last_event_tick, tick)
        else:
            fail(f"unknown directive {verb!r}")
    scenario.total_ticks = max(clock, last_event_tick + 1)
    return scenario


@dataclass
class ScenarioResult:
    report_text: str
    world: World
    exit_hint: int  # 0 ok, 2 undetected labeled attack


def run_scenario(text: str, config: SimConfig, name: str = "scenario") -> ScenarioResult:
    scenario = parse_scenario(text, name)
    world = World(config, universe_hint=tuple(scenario.entity_ids))
    for resource_slice in scenario.slices:
        world.add_resource(f"td-{resource_slice}", resource_slice)
    for adversary, _line in scenario.attacks:
        world.inject_adversary(adversary)

    by_tick: dict[int, list] = {}
    for action in scenario.actions:
        by_tick.setdefault(action.tick, []).append(action)

    for tick in range(scenario.total_ticks):
        callbacks = [_action_callback(a) for a in by_tick.get(tick, ())]
        world.step(callbacks)

    _finalize_attacks(world)
    report = render_report(scenario, config, world)
    undetected = sum(1 for a in world.attacks if a.executed and a.detected is False)
    exit_hint = 2 if undetected or world.safety_violations else 0
    return ScenarioResult(report, world, exit_hint)


def _finalize_attacks(world: World) -> None:
    """Resolve attack records still undecided at the end of the run."""
    for attack in world.attacks:
        if not attack.executed or attack.detected is not None:
            continue
        if attack.kind is AdversaryKind.BYZANTINE_VALIDATOR:
            attack.detected = world.safety_violations == 0
            attack.detail = "safety held" if attack.detected else "safety violated"
        elif attack.kind is AdversaryKind.CRASH_CONTROLLER:
            attack.detected = False
            attack.detail = "no failure notification before end of run"
        else:
            attack.detected = False
            attack.detail = "no verdict recorded"


def _action_callback(action: ScenarioAction):
    args = action.args

    def run(world: World):
        if action.verb == "spawn":
            world.spawn_entity(
                args["kind"], args["id"],
                slice_name=args.get("slice", ""),
                category=args.get("category", ""),
                contr_id=args.get("contr", ""),
            )
        elif action.verb == "connect":
            world.connect_switch(args["switch"], args["contr"])
        elif action.verb == "flow":
            world.submit_flow(args["app"], args["contr"], args["switch"], args["content"])
        elif action.verb == "resources":
            world.request_resources(args["id"])

    return run


def render_report(scenario: Scenario, config: SimConfig, world: World) -> str:
    lines = [
        "chainsdn scenario report",
        f"scenario={scenario.name}",
        f"seed={config.seed} tier={config.tier} validators={config.validators} "
        f"byzantine={config.byzantine} window={config.window} difficulty={config.difficulty}",
        "== log ==",
    ]
    lines.extend(world.report_rows)
    lines.append("== attacks ==")
    for attack in world.attacks:
        detected = "n/a" if attack.detected is None else str(attack.detected).lower()
        lines.append(
            f"attack kind={attack.kind.value} target={attack.target} tick={attack.tick} "
            f"executed={str(attack.executed).lower()} detected={detected} detail={attack.detail}"
        )
    lines.append("== summary ==")
    chain = world.ledger.chain
    verdict = verify_chain(chain, world.params)
    tx_total = sum(len(b.tx_list) for b in chain)
    lines.append(f"ticks={world.tick + 1}")
    lines.append(f"blocks={len(chain)}")
    lines.append(f"transactions={tx_total}")
    lines.append(f"max_txs_per_round={max((len(b.tx_list) for b in chain), default=0)}")
    for key in sorted(world.verdict_counts):
        lines.append(f"{key}={world.verdict_counts[key]}")
    for kind in AdversaryKind:
        executed = [a for a in world.attacks if a.kind is kind and a.executed]
        if executed:
            detected = sum(1 for a in executed if a.detected)
            lines.append(f"{kind.value}_detected={detected}/{len(executed)}")
    lines.append(f"notifications={len(world.notifications)}")
    undetected = sum(1 for a in world.attacks if a.executed and a.detected is False)
    lines.append(f"undetected_attacks={undetected}")
    lines.append(f"safety_violations={world.safety_violations}")
    lines.append(f"chain_verified={str(verdict.ok).lower()}")
    return "\n".join(lines) + "\n"


def dump_world_chain(world: World) -> bytes:
    return dump_chain(world.ledger.chain)
