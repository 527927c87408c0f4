"""Command-line front end.

Subcommands cover the full life cycle: authority setup, vehicle registration,
dataset export for the operator, honest session runs, cost/pad-length tables,
and scripted adversary scenarios.  Every artifact embeds the seed and
configuration that produced it, so reruns are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from dwpt_auth import keyfiles, netsim, protocol
from dwpt_auth.errors import DuplicateRegistration, EmptyRegistry, ProtocolRejection
from dwpt_auth.netsim import TimingModel
from dwpt_auth.registration import (
    export_cspa_dataset,
    ra_setup,
    register_vehicle,
    storage_report,
)
from dwpt_auth.ring import TIERS

_TIMING_MODES = ("rounded-table", "cycle-accurate")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return netsim.parse_config(Path(path).read_text())


def _setting(args_value, config: dict, key: str, default, cast=str):
    """CLI flag wins, then config file, then the built-in default."""
    if args_value is not None:
        return args_value
    if key in config:
        return cast(config[key])
    return default


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_setup(args) -> int:
    config = _load_config(args.config)
    tier = _setting(args.params_tier, config, "tier", "default")
    seed = _setting(args.seed, config, "seed", "0")
    if tier not in TIERS:
        print(f"error: unknown tier {tier!r}", file=sys.stderr)
        return 2
    out = _out_dir(args)
    path = out / "authority.bin"
    if path.exists() and not args.force:
        print(f"error: {path} exists (use --force to overwrite)", file=sys.stderr)
        return 1
    params = TIERS[tier]
    ra = ra_setup(params, seed, cspa_identity=args.cspa_id.encode())
    keyfiles.save_authority(path, ra)
    print(
        f"authority written: {path} (tier={tier}, N={params.N}, q={params.q}, "
        f"seed={seed})"
    )
    return 0


def cmd_register(args) -> int:
    config = _load_config(args.config)
    count = _setting(args.count, config, "count", 4, int)
    ra = keyfiles.load_authority(args.authority)
    try:
        creds = register_vehicle(ra, args.vehicle_id.encode(), count)
    except DuplicateRegistration as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    keyfiles.save_authority(args.authority, ra)
    out = _out_dir(args) if args.out else Path(args.authority).parent
    vpath = out / f"vehicle-{args.vehicle_id}.bin"
    keyfiles.save_vehicle(vpath, creds)
    est = storage_report(ra)
    print(
        f"vehicle {args.vehicle_id} registered: {count} pseudonyms, "
        f"credentials at {vpath} "
        f"({est['serialized_vehicle_bytes'][args.vehicle_id]} bytes)"
    )
    return 0


def cmd_export_dataset(args) -> int:
    ra = keyfiles.load_authority(args.authority)
    try:
        ds = export_cspa_dataset(ra)
    except EmptyRegistry as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = _out_dir(args) if args.out else Path(args.authority).parent
    path = out / "dataset.bin"
    keyfiles.save_dataset(path, ds)
    print(f"dataset written: {path} ({len(ds.entries)} pseudonyms)")
    return 0


def cmd_run(args) -> int:
    config = _load_config(args.config)
    seed = _setting(args.seed, config, "seed", "0")
    n_pads = _setting(args.n_pads, config, "n_pads", 1, int)
    freshness = _setting(args.freshness_ms, config, "freshness_ms", protocol.FRESHNESS_WINDOW_MS, int)
    mode = _setting(args.timing_mode, config, "timing_mode", "rounded-table")
    if mode not in _TIMING_MODES:
        print(f"error: unknown timing mode {mode!r}", file=sys.stderr)
        return 2
    ra = keyfiles.load_authority(args.authority)
    creds = keyfiles.load_vehicle(args.vehicle)
    if creds.vehicle_id not in ra.vehicles:
        print("error: vehicle is not registered with this authority", file=sys.stderr)
        return 1
    trace = netsim.simulate_session(
        ra,
        creds,
        n_pads=n_pads,
        seed=seed,
        timing=TimingModel.for_mode(mode),
        entry_index=args.pseudonym_index,
        freshness_ms=freshness,
    )
    out = _out_dir(args)
    tpath = out / "transcript.jsonl"
    tpath.write_text(trace.to_jsonl())
    summary = trace.summary()
    if trace.completed:
        # Burn the pseudonym on both sides so a rerun is rejected.
        pseudonym = creds.entries[trace.used_entry_index].pseudonym
        ra.consumed.add(pseudonym)
        keyfiles.save_authority(args.authority, ra)
        keyfiles.save_vehicle(args.vehicle, creds)
        print(
            f"session complete: {trace.accepted_pads}/{n_pads} pads accepted, "
            f"first-pad computation {summary['computation_through_first_pad_ms']:.2f} ms, "
            f"total {summary['total_computation_ms']:.2f} ms, "
            f"transcript at {tpath}"
        )
        return 0
    print(
        f"session rejected: {trace.rejection} "
        f"(transcript at {tpath})",
        file=sys.stderr,
    )
    return 1


def cmd_costs(args) -> int:
    config = _load_config(args.config)
    mode = _setting(args.timing_mode, config, "timing_mode", "rounded-table")
    if mode not in _TIMING_MODES:
        print(f"error: unknown timing mode {mode!r}", file=sys.stderr)
        return 2
    timing = TimingModel.for_mode(mode)
    out = _out_dir(args)
    header = {
        "timing_mode": mode,
        "pad_counts": " ".join(str(n) for n in args.n_pads),
        "speeds_kmh": " ".join(str(v) for v in args.speeds),
    }
    written = []
    for n in args.n_pads:
        path = out / f"message_costs_n{n}.csv"
        netsim.write_message_costs_csv(path, n, timing, {**header, "n_pads": n})
        written.append(path)
    grid_path = out / "pad_lengths.csv"
    netsim.write_pad_length_csv(grid_path, args.speeds, args.n_pads, timing, header)
    written.append(grid_path)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_attack(args) -> int:
    config = _load_config(args.config)
    seed = _setting(args.seed, config, "seed", "0")
    n_pads = _setting(args.n_pads, config, "n_pads", 3, int)
    ra = keyfiles.load_authority(args.authority)
    creds = keyfiles.load_vehicle(args.vehicle)
    scenarios = (
        sorted(netsim.SCENARIOS) if args.scenario == "all" else [args.scenario]
    )
    out = _out_dir(args)
    all_passed = True
    for name in scenarios:
        try:
            report = netsim.run_adversary(
                name, ra, creds, n_pads=n_pads, seed=f"{seed}:{name}"
            )
        except (ProtocolRejection, EmptyRegistry) as exc:
            print(f"error: scenario {name} could not run: {exc}", file=sys.stderr)
            return 1
        path = out / f"attack_{name}.jsonl"
        path.write_text(report.to_jsonl())
        status = "PASS" if report.passed else "FAIL"
        print(f"{status} {name}: {len(report.actions)} adversary actions, "
              f"{report.accepted_count} accepted")
        for action in report.actions:
            mark = "ACCEPTED" if action.accepted else "rejected"
            print(f"  - {action.description} -> {mark} ({action.reason})")
        all_passed = all_passed and report.passed
    return 0 if all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dwpt-auth",
        description="Post-quantum authentication for dynamic wireless EV charging",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("setup", help="generate authority state")
    p.add_argument("--params-tier", choices=sorted(TIERS), default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--cspa-id", default="CSPA-1")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("register", help="register a vehicle and issue pseudonyms")
    p.add_argument("--authority", required=True)
    p.add_argument("--vehicle-id", required=True)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("export-dataset", help="export the CSPA pseudonym dataset")
    p.add_argument("--authority", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_export_dataset)

    p = sub.add_parser("run", help="simulate one honest charging session")
    p.add_argument("--authority", required=True)
    p.add_argument("--vehicle", required=True)
    p.add_argument("--n-pads", type=int, default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--pseudonym-index", type=int, default=None)
    p.add_argument("--freshness-ms", type=int, default=None)
    p.add_argument("--timing-mode", choices=_TIMING_MODES, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("costs", help="write cost tables and pad-length grids")
    p.add_argument("--n-pads", type=_int_list, required=True,
                   help="comma-separated pad counts, e.g. 10,50,100")
    p.add_argument("--speeds", type=_int_list, required=True,
                   help="comma-separated speeds in km/h")
    p.add_argument("--timing-mode", choices=_TIMING_MODES, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_costs)

    p = sub.add_parser("attack", help="run scripted adversary scenarios")
    p.add_argument("--scenario", required=True,
                   choices=sorted(netsim.SCENARIOS) + ["all"])
    p.add_argument("--authority", required=True)
    p.add_argument("--vehicle", required=True)
    p.add_argument("--n-pads", type=int, default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_attack)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
