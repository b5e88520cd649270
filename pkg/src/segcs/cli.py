"""Command-line entry point: ``segcs {mse,fig3,rip-scan,validate-family}``.

Exit codes: 0 success, 2 configuration error, 3 solver failures beyond the
configured budget.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import harness
from .errors import ConfigError
from .permutations import build_family, family_to_json, validate_family

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

log = logging.getLogger("segcs")


def _out_dir(args, default: str) -> Path:
    p = Path(args.out or default)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_mse(args) -> int:
    cfg_dict = harness.load_json(args.config) if args.config else {}
    seed = harness._env_seed(args.seed)
    if seed is not None:
        cfg_dict["master_seed"] = seed
    if args.trials is not None:
        cfg_dict["trials"] = args.trials
    if args.workers is not None:
        cfg_dict["workers"] = args.workers
    cfg = harness.ExperimentConfig.from_dict(cfg_dict)
    out = _out_dir(args, cfg.output_dir)
    t0 = time.perf_counter()
    table = harness.run_mse_experiment(cfg)
    wall = time.perf_counter() - t0
    table.to_csv(out / "mse.csv")
    harness.write_manifest(out / "manifest.json", cfg.to_dict(), cfg.master_seed, wall)
    print(table.to_csv(), end="")
    bad = table.over_budget(cfg.failure_budget)
    if bad:
        for row in bad:
            log.error("%s snr=%s ka/k=%s: %d of %d trials failed", row["scheme"], row["snr_db"], row["ka_over_k"], row["failures"], row["trials"])
        return EXIT_BUDGET
    return EXIT_OK


def cmd_fig3(args) -> int:
    d = harness.load_json(args.config) if args.config else {}
    known = {"snr_db_grid", "K", "K_a", "M", "output_dir"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown fig3 keys {sorted(extra)}")
    out = _out_dir(args, d.get("output_dir", "results"))
    t0 = time.perf_counter()
    rows = harness.run_fig3_sweep(d.get("snr_db_grid"), K=d.get("K", 16), K_a=d.get("K_a"), M=d.get("M", 8), out=out / "fig3.csv")
    harness.write_manifest(out / "manifest.json", d, None, time.perf_counter() - t0)
    violations = sum(1 for _, c1e, two_c1 in rows if not c1e < two_c1)
    print(f"{len(rows)} SNR points, {violations} with C1e >= 2 C1 -> {out / 'fig3.csv'}")
    return EXIT_OK


def cmd_rip_scan(args) -> int:
    d = harness.load_json(args.config) if args.config else {}
    d.pop("output_dir", None)
    if args.seed is not None:
        d["seeds"] = [args.seed + i for i in range(args.trials or 1)]
    elif args.trials is not None:
        d["seeds"] = list(range(args.trials))
    cfg = harness.RipScanConfig.from_dict(d)
    out = _out_dir(args, "results")
    t0 = time.perf_counter()
    report = harness.rip_scan(cfg)
    (out / "rip_scan.json").write_text(json.dumps(report, indent=2))
    harness.write_manifest(out / "manifest.json", report["config"], cfg.seeds, time.perf_counter() - t0)
    failed = [r["seed"] for r in report["results"] if not r["null_space"]["containment"]]
    print(f"{len(report['results'])} seeds scanned, containment failures: {failed or 'none'}")
    return EXIT_OK


def cmd_validate_family(args) -> int:
    d = harness.load_json(args.config) if args.config else {}
    try:
        K, M = int(d.get("K", args.K)), int(d.get("M", args.M))
        I = int(d.get("I", args.I))
        fam = build_family(K, M, I, strict=bool(d.get("strict", args.strict)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    rep = validate_family(fam)
    payload = {
        "K": K,
        "M": M,
        "requested": I,
        "generators": list(fam.generators),
        "shortfall": fam.shortfall,
        "family": json.loads(family_to_json(fam)),
        "report": rep.to_dict(),
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        out = _out_dir(args, args.out)
        (out / "family.json").write_text(text)
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segcs", description="Segmented compressed sampling experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="master seed (overrides config and SEGCS_SEED)")
        sp.add_argument("--trials", type=int, help="override trial count")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("mse", help="Monte-Carlo MSE over schemes, SNRs and K_a/K")
    common(sp)
    sp.add_argument("--workers", type=int, help="process pool size")
    sp.set_defaults(func=cmd_mse)

    sp = sub.add_parser("fig3", help="C1e versus 2 C1 over SNR")
    common(sp)
    sp.set_defaults(func=cmd_fig3)

    sp = sub.add_parser("rip-scan", help="isometry constants, partitions and null-space checks")
    common(sp)
    sp.set_defaults(func=cmd_rip_scan)

    sp = sub.add_parser("validate-family", help="build and check a cyclic permutation family")
    common(sp)
    sp.add_argument("--K", type=int, default=8)
    sp.add_argument("--M", type=int, default=4)
    sp.add_argument("--I", type=int, default=7)
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_validate_family)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
