"""Entry point for the ``lab`` command."""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, LabError
from ..kato import from_cli_name, validate
from . import instances
from .config import apply_override, load_document
from .scenarios import list_scenarios, resolve_config, run_scenario

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


def _parse_dims(text):
    try:
        dims = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("dims must look like d,ka,kb")
    if len(dims) != 3 or dims[0] < 1 or not all(0 <= k <= dims[0] for k in dims[1:]):
        raise argparse.ArgumentTypeError("dims must be d,ka,kb with 0 <= ka, kb <= d")
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario from a JSON config")
    run.add_argument("config", help="path to the config JSON document")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                     help="override a config leaf, e.g. n_grid.k_hi=14")

    sub.add_parser("list", help="list registered scenarios")

    gen = sub.add_parser("gen", help="write a random instance file")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--dims", type=_parse_dims, required=True, help="d,ka,kb")
    gen.add_argument("--spectrum-bound", type=float, default=5.0)
    gen.add_argument("--out", required=True)

    vk = sub.add_parser("validate-kato", help="check a Kato-function (exp, res, res^k, cos)")
    vk.add_argument("name")
    return parser


def cmd_run(args) -> int:
    try:
        doc = load_document(args.config)
        for item in args.overrides:
            doc = apply_override(doc, item)
        cfg = resolve_config(doc)
        result = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in result.files:
        print(path)
    if not result.ok:
        for v in result.violations:
            print(f"invariant violated: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        instance = instances.gen_random_instance(args.seed, args.dims, args.spectrum_bound)
    except (ValueError, LabError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(instance.to_json(), fh, sort_keys=True, indent=1)
    print(instance.instance_id)
    return EXIT_OK


def cmd_validate_kato(args) -> int:
    try:
        f = from_cli_name(args.name)
    except KeyError:
        print(f"unknown Kato-function {args.name!r}", file=sys.stderr)
        return EXIT_CONFIG
    rep = validate(f)
    est = rep.boundary_deriv_estimate
    print(f"{f.name}: {'PASS' if rep.passed else 'FAIL'}")
    print(f"  max |f| on grid      {rep.max_modulus:.6g}")
    print(f"  f'(+0) estimate      {est.real:.10g}{est.imag:+.3g}j  (|est + 1| = {abs(est + 1):.3g})")
    for cond, point, value in rep.failures.values():
        print(f"  violated {cond:<12} at z = {point:.4g}: {value:.4g}")
    return EXIT_OK if rep.passed else EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, desc in list_scenarios():
            print(f"{name:<26} {desc}")
        return EXIT_OK
    if args.command == "run":
        return cmd_run(args)
    if args.command == "gen":
        return cmd_gen(args)
    return cmd_validate_kato(args)


if __name__ == "__main__":
    sys.exit(main())
