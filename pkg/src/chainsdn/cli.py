"""Operator entry point: run scenarios, inspect/verify chain dumps, audit flows.

Exit codes follow sysexits conventions where they exist:
  0   success
  1   audit target not found
  2   a labeled attack went undetected (CI tripwire)
  64  usage / scenario parse error
  65  corrupt dump data
  74  I/O error
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .crypto import SIM_GROUP, TEST_GROUP
from .encoding import DecodeError
from .ledger import load_chain, verify_chain
from .protocols import NotFound, audit_network
from .scenario import ParseError, dump_world_chain, run_scenario
from .simnet import SimConfig
from .txgraph import AuditIndex

EX_OK = 0
EX_NOTFOUND = 1
EX_UNDETECTED = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_IOERR = 74


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainsdn",
        description="Simulated ledger-backed SDN control plane",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", help="execute a scenario, write report and chain dump")
    run.add_argument("scenario", help="scenario file")
    run.add_argument("--seed", type=int, default=0, help="64-bit simulation seed")
    run.add_argument("--window", type=int, default=6, help="failure-detection block window")
    run.add_argument("--difficulty", type=int, default=16, help="switch puzzle difficulty bits")
    run.add_argument("--validators", type=int, default=4, help="consensus validator count")
    run.add_argument("--byzantine", type=int, default=0, help="byzantine validator count")
    run.add_argument("--tier", choices=("test", "sim"), default="sim", help="crypto group tier")
    run.add_argument("--out-dir", default=".", help="directory for report and dump files")

    verify = sub.add_parser("verify", help="check a chain dump end to end")
    verify.add_argument("dump", help="chain dump file")
    verify.add_argument("--tier", choices=("test", "sim"), default="sim")

    inspect = sub.add_parser("inspect", help="print a block-by-block chain summary")
    inspect.add_argument("dump", help="chain dump file")

    audit = sub.add_parser("audit", help="print the provenance trail of a flow or event")
    audit.add_argument("dump", help="chain dump file")
    audit.add_argument("query", help="flow id or event id")
    audit.add_argument("--tier", choices=("test", "sim"), default="sim")

    return parser


def _load_dump(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EX_IOERR)
    try:
        return load_chain(data)
    except (DecodeError, ValueError) as exc:
        print(f"error: corrupt dump: {exc}", file=sys.stderr)
        raise SystemExit(EX_DATAERR)


def _group_for(tier: str):
    return TEST_GROUP if tier == "test" else SIM_GROUP


def cmd_run(args) -> int:
    try:
        text = Path(args.scenario).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {args.scenario}: {exc}", file=sys.stderr)
        return EX_IOERR
    config = SimConfig(
        seed=args.seed,
        window=args.window,
        difficulty=args.difficulty,
        validators=args.validators,
        byzantine=args.byzantine,
        tier=args.tier,
    )
    if config.window < 1:
        print("error: --window must be >= 1", file=sys.stderr)
        return EX_USAGE
    if config.byzantine > (config.validators - 1) // 3:
        print("error: --byzantine must be <= (validators-1)/3", file=sys.stderr)
        return EX_USAGE
    try:
        result = run_scenario(text, config, name=Path(args.scenario).name)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.scenario).stem
        report_path = out_dir / f"{stem}.report.txt"
        dump_path = out_dir / f"{stem}.chain"
        report_path.write_text(result.report_text, encoding="utf-8")
        dump_path.write_bytes(dump_world_chain(result.world))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EX_IOERR
    print(result.report_text, end="")
    print(f"report={report_path}")
    print(f"dump={dump_path}")
    return result.exit_hint


def cmd_verify(args) -> int:
    chain = _load_dump(args.dump)
    verdict = verify_chain(chain, _group_for(args.tier))
    if verdict.ok:
        print(f"ok: {len(chain)} blocks")
        return EX_OK
    print(f"FAIL at height {verdict.failure_height}: {verdict.detail}")
    return EX_DATAERR


def cmd_inspect(args) -> int:
    chain = _load_dump(args.dump)
    for block in chain:
        kinds: dict[str, int] = {}
        for tx in block.tx_list:
            kinds[type(tx).__name__] = kinds.get(type(tx).__name__, 0) + 1
        detail = " ".join(f"{k}={v}" for k, v in sorted(kinds.items()))
        print(
            f"height={block.height} time={block.timestamp} "
            f"txs={len(block.tx_list)} hash={block.block_hash.hex()[:16]} {detail}".rstrip()
        )
    print(f"total blocks={len(chain)} txs={sum(len(b.tx_list) for b in chain)}")
    return EX_OK


def cmd_audit(args) -> int:
    chain = _load_dump(args.dump)
    verdict = verify_chain(chain, _group_for(args.tier))
    if not verdict.ok:
        print(f"error: dump fails verification at height {verdict.failure_height}", file=sys.stderr)
        return EX_DATAERR
    index = AuditIndex()
    index.index_chain(chain)
    try:
        trail = audit_network(args.query, index)
    except NotFound:
        print(f"not found: {args.query}")
        return EX_NOTFOUND
    for step in format_trail(trail):
        print(step)
    return EX_OK


def format_trail(trail) -> list:
    out = []
    for step in trail:
        tx = step.tx
        fields = []
        for name in ("id_app", "id_contr", "id_switch", "id_flow", "id_event"):
            value = getattr(tx, name, None)
            if value:
                fields.append(f"{name}={value}")
        out.append(
            f"height={step.height} {step.kind} tx={step.id_tx.hex()[:16]} " + " ".join(fields)
        )
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "verify": cmd_verify,
        "inspect": cmd_inspect,
        "audit": cmd_audit,
    }
    return handlers[args.subcommand](args)


if __name__ == "__main__":
    sys.exit(main())
