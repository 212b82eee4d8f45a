import argparse
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from config.settings import Settings, apply_overrides, get_settings
from numerics.kernels import lfa
from lab.app.factories.build_services import build_core_services
from lab.scenarios import get_scenario, list_scenarios


@dataclass
class RunConfig:
    scenarios: List[str]
    out_dir: Path
    overrides: Dict[str, str] = field(default_factory=dict)
    formats: List[str] = field(default_factory=lambda: ["csv", "markdown"])
    activation: bool = False


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _parse_overrides(pairs: Sequence[str]) -> Dict[str, str]:
    overrides = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"Override '{pair}' is not of the form key=value")
        overrides[key.strip()] = value.strip()
    return overrides


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"Expected a comma-separated list of numbers, got '{text}'")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", text).strip("_")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adsc-lab", description="Convection-diffusion stabilization benchmarks")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="Run one or more registered scenarios")
    run.add_argument("scenarios", nargs="+", help="Scenario names (see 'list')")
    run.add_argument("--out", default=None, help="Output directory (default: OUTPUT_DIR)")
    run.add_argument("--format", default=None, help="Comma-separated formats: csv, markdown")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="Configuration override, repeatable (e.g. --set omega=0.5)")
    run.add_argument("--activation", action="store_true",
                     help="Also write the final ADSC activation of every row")

    sub.add_parser("list", help="List registered scenarios")

    lfa_cmd = sub.add_parser("lfa", help="Modal symbol diagnostics and exports")
    lfa_cmd.add_argument("--ne", type=int, default=45)
    lfa_cmd.add_argument("--eps", type=float, default=2e-3)
    lfa_cmd.add_argument("--beta", default="1,0.6", help="Convection direction, normalized to unit length")
    lfa_cmd.add_argument("--target", type=float, default=None, help="Target rho for the modal balance")
    lfa_cmd.add_argument("--footprint-density", type=int, default=None)
    lfa_cmd.add_argument("--out", default=None, help="Write rho-map and footprint CSVs here")

    check = sub.add_parser("check", help="Run the seeded property suite")
    check.add_argument("--seed", type=int, default=None)
    return parser


def run_command(settings: Settings, config: RunConfig) -> int:
    services = build_core_services(settings)
    benchmark = services["benchmark_service"]
    export = services["export_service"]
    failed = False
    for name in config.scenarios:
        scenario = get_scenario(name)
        rows = benchmark.run_scenario(scenario)
        modal_rows = benchmark.modal_table(scenario) if scenario.modal_table else None
        for path in export.emit(scenario, rows, config.out_dir, config.formats,
                                config.overrides, modal_rows):
            logging.info(f"Scenario '{name}' written to {path}")
        if config.activation:
            for row in rows:
                if row.activation is not None:
                    export.export_activation_csv(
                        row.activation, row.mesh,
                        config.out_dir / "activation" / f"{name}_{row.method}_{_slug(row.label)}.csv")
        failed = failed or any(row.failed for row in rows)
    return 1 if failed else 0


def lfa_command(settings: Settings, args) -> int:
    beta = _parse_floats(args.beta)
    if len(beta) not in (1, 2):
        raise UsageError("--beta needs one or two components")
    norm = math.sqrt(sum(b * b for b in beta))
    if norm == 0.0:
        raise UsageError("--beta must be nonzero")
    beta = tuple(b / norm for b in beta)
    if args.ne < 2:
        raise UsageError("--ne must be at least 2")
    if args.eps <= 0.0:
        raise UsageError("--eps must be positive")

    modal = lfa.modal_set(args.eps, beta, args.ne)
    params = settings.adsc_params
    target = settings.RHO_TARGET if args.target is None else args.target
    raw, projected = lfa.gamma0_balance(modal, modal.peclet, target, params.gamma_min, params.gamma_max)
    corner = lfa.corner_profile(args.eps, beta, modal.h, beta)
    print(f"Ne={args.ne} eps={args.eps:g} beta=({', '.join(f'{b:.6f}' for b in beta)})")
    print(lfa.describe(modal))
    print(f"gamma0_balance raw={raw:.4f} projected={projected:.4f} (target rho={target:g})")
    print(f"corner slopes right={corner['right_slope']:.4f} left={corner['left_slope']:.4f} "
          f"expected=+/-{corner['expected_slope']:.4f}")

    if args.out:
        services = build_core_services(settings)
        export = services["export_service"]
        out = Path(args.out)
        density = args.footprint_density or settings.FOOTPRINT_DENSITY
        points, jacobian = lfa.footprint_sample(args.eps, beta, modal.h, density)
        export.export_rho_map_csv(modal, out / f"rho_map_Ne{args.ne}.csv")
        export.export_footprint_csv(points, jacobian, out / f"footprint_Ne{args.ne}.csv")
    return 0


def check_command(settings: Settings, seed: Optional[int]) -> int:
    services = build_core_services(settings)
    outcomes = services["property_check_service"].run_all(settings.RNG_SEED if seed is None else seed)
    for outcome in outcomes:
        print(f"{'PASS' if outcome.passed else 'FAIL'} {outcome.name}: {outcome.detail}")
    return 0 if all(outcome.passed for outcome in outcomes) else 1


def main(argv: Optional[Sequence[str]] = None, settings: Optional[Settings] = None) -> int:
    """Command-line entry point; returns 0 on success, 1 on failed runs, 2 on usage errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)

    settings = settings or get_settings()
    try:
        if args.command == "list":
            for name in list_scenarios():
                print(f"{name}\t{get_scenario(name).title}")
            return 0
        if args.command == "lfa":
            return lfa_command(settings, args)
        if args.command == "check":
            return check_command(settings, args.seed)

        known = set(list_scenarios())
        unknown = [name for name in args.scenarios if name not in known]
        if unknown:
            raise UsageError(f"Unknown scenario(s): {', '.join(unknown)}. Known: {', '.join(sorted(known))}")
        overrides = _parse_overrides(args.overrides)
        try:
            settings = apply_overrides(settings, overrides)
        except ValueError as e:
            raise UsageError(f"Invalid override: {e}")
        formats = settings.emit_formats
        if args.format:
            formats = [fmt.strip().lower() for fmt in args.format.split(",") if fmt.strip()]
            bad = [fmt for fmt in formats if fmt not in ("csv", "markdown")]
            if bad:
                raise UsageError(f"Unknown output format(s): {', '.join(bad)}")
        config = RunConfig(scenarios=list(args.scenarios),
                           out_dir=Path(args.out or settings.OUTPUT_DIR),
                           overrides=overrides, formats=formats,
                           activation=args.activation)
        return run_command(settings, config)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 2
