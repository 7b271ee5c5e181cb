#!/usr/bin/env python3
"""
ab-shift-lab - (alpha, beta)-shifts, Markov diagrams and generic sets
Batch command-line launcher
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

sys.path.insert(0, str(Path(__file__).parent))

from diagram_module.diagram_cache import load_diagram  # noqa: E402
from diagram_module.markov_diagram import (Diagram, export_diagram, language, language_counts,  # noqa: E402
                                            transition_matrix)
from entropy_module.entropy_calculator import (ENTROPY_COLUMNS, entropy_rows, markov_entropy_rate,  # noqa: E402
                                               spectral_radius)
from generic_module.moran import birkhoff_check, count_prefixes, generic_prefix  # noqa: E402
from generic_module.saturation import saturation_report  # noqa: E402
from generic_module.schedule import ScheduleSettings, auto_schedule, block_ratios  # noqa: E402
from measure_module.approximation import delta_sweep, ergodic_approximation  # noqa: E402
from measure_module.cylinder_measures import parry_measure  # noqa: E402
from measure_module.serialization import parse_measure_expression, to_record, vertex_list  # noqa: E402
from shared_utils.config_manager import LOG_LEVELS, OUTPUT_FORMATS, RunConfig, load_run_config  # noqa: E402
from shared_utils.errors import BudgetError, InvalidParam, ValidationError  # noqa: E402
from shared_utils.helpers import format_value, render_table, to_json, write_output  # noqa: E402
from shift_module.params import parse_number  # noqa: E402
from shift_module.transformation import format_word, itinerary, nudge, orbit, partition  # noqa: E402

logger = logging.getLogger("ab_shift_lab")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3

# flag dest -> RunConfig key
CONFIG_FLAGS = [
    "alpha", "beta", "tol", "depth", "vertex_budget", "metric_depth", "seed", "format", "threads",
    "eps", "delta", "levels", "max_halvings", "power_tol", "power_max_iter", "s_step",
    "block_length", "enumeration_budget", "min_block_length", "bracket_tol", "cache_dir", "log_level",
]


@dataclass
class CommandResult:
    summary: Dict[str, Any] = field(default_factory=dict)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    columns: Optional[List[str]] = None
    text: Optional[str] = None

    def render(self, fmt: str) -> str:
        if fmt == "json":
            payload: Dict[str, Any] = dict(self.summary)
            if self.rows:
                payload["rows"] = self.rows
            return to_json(payload)
        if fmt == "csv":
            if self.rows:
                return render_table(self.rows, "csv", self.columns)
            return render_table([self.summary], "csv")
        if self.text is not None:
            return self.text
        lines = [f"{key}: {_text_value(value)}" for key, value in self.summary.items()]
        if self.rows:
            lines.append("")
            lines.append(render_table(self.rows, "text", self.columns).rstrip("\n"))
        return "\n".join(lines) + "\n"


def _text_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value) if value else "none"
    return format_value(value)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("run configuration")
    group.add_argument("--alpha", help="alpha in [0, 1), decimal or p/q")
    group.add_argument("--beta", help="beta > 2, decimal or p/q")
    group.add_argument("--tol", type=float, help="float-mode tolerance")
    group.add_argument("--depth", type=int, help="diagram depth")
    group.add_argument("--vertex-budget", dest="vertex_budget", type=int)
    group.add_argument("--metric-depth", "-M", dest="metric_depth", type=int, help="depth M of D_M")
    group.add_argument("--seed", type=int)
    group.add_argument("--format", choices=OUTPUT_FORMATS)
    group.add_argument("--threads", type=int)
    group.add_argument("--eps", type=float)
    group.add_argument("--delta", type=float)
    group.add_argument("--levels", type=int)
    group.add_argument("--max-halvings", dest="max_halvings", type=int)
    group.add_argument("--power-tol", dest="power_tol", type=float)
    group.add_argument("--power-max-iter", dest="power_max_iter", type=int)
    group.add_argument("--s-step", dest="s_step", type=float)
    group.add_argument("--block-length", dest="block_length", type=int)
    group.add_argument("--enumeration-budget", dest="enumeration_budget", type=int)
    group.add_argument("--min-block-length", dest="min_block_length", type=int)
    group.add_argument("--bracket-tol", dest="bracket_tol", type=float)
    group.add_argument("--cache-dir", dest="cache_dir")
    group.add_argument("--log-level", dest="log_level", type=str.upper, choices=LOG_LEVELS)
    group.add_argument("--config", help="config file of `key = value` lines")
    group.add_argument("--out", help="write output to FILE instead of stdout")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="ab-shift-lab",
                                     description="Symbolic dynamics of (alpha, beta)-transformations")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    sub.add_parser("alphabet", parents=[common], help="alphabet size and branch partition")

    for name, helptext in (("orbit", "points x, Tx, ..., T^n x"), ("itinerary", "first n symbols of x")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--x", required=True, help="start point, decimal or p/q")
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--nudge", action="store_true", help="offset x by one quantum first")

    sub.add_parser("diagram", parents=[common], help="build and export the Markov diagram")

    p = sub.add_parser("language", parents=[common], help="words of length n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", action="store_true", help="only count the words")

    p = sub.add_parser("entropy", parents=[common], help="growth, spectral and block entropies")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--measure", help="optional measure expression")
    p.add_argument("--block-n", dest="block_n", type=int, default=8)

    p = sub.add_parser("parry", parents=[common], help="maximal-entropy measure on a subdiagram")
    p.add_argument("--vertices", "-F", dest="vertices", default="base",
                   help="'base', vertex ids, or base labels like [2],[3]")

    p = sub.add_parser("approx", parents=[common], help="ergodic approximation of a mixture")
    p.add_argument("--measure", required=True)
    p.add_argument("--sweep", type=int, help="report this many halvings of delta instead")

    for name, helptext in (("generic", "schedule, generic prefix and checkpoints"),
                           ("saturate", "full saturation report")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--measure", required=True)
        if name == "generic":
            p.add_argument("--selector", help="comma-separated Gamma'_k indices (default: seeded)")
    return parser


def _diagram(config: RunConfig, depth: Optional[int] = None) -> Diagram:
    return load_diagram(config.params(), max(config.depth, depth or 0), config.vertex_budget,
                        config.cache_dir)


def _measure(expr: str, diagram: Diagram, config: RunConfig):
    return parse_measure_expression(expr, diagram, config.power_tol, config.power_max_iter)


def cmd_alphabet(args, config: RunConfig) -> CommandResult:
    params = config.params()
    rows = [{"j": j, "lo": part.lo, "hi": part.hi} for j, part in enumerate(partition(params), start=1)]
    return CommandResult({"alpha": params.alpha, "beta": params.beta, "k": params.k,
                          "mode": params.mode.value}, rows, ["j", "lo", "hi"])


def _start_point(args, config: RunConfig):
    params = config.params()
    x = params.num(parse_number(args.x))
    return params, (nudge(x, params) if args.nudge else x)


def cmd_orbit(args, config: RunConfig) -> CommandResult:
    params, x = _start_point(args, config)
    rows = [{"i": i, "x": value} for i, value in enumerate(orbit(x, args.n, params))]
    return CommandResult({"x": x, "n": args.n}, rows, ["i", "x"])


def cmd_itinerary(args, config: RunConfig) -> CommandResult:
    params, x = _start_point(args, config)
    word = itinerary(x, args.n, params)
    return CommandResult({"x": x, "n": args.n, "itinerary": format_word(word)})


def cmd_diagram(args, config: RunConfig) -> CommandResult:
    diagram = _diagram(config)
    rows = [{"id": v.id, "label": v.label, "lo": v.interval.lo, "hi": v.interval.hi, "depth": v.depth,
             "successors": " ".join(str(t) for t in diagram.successors_of(v.id))}
            for v in diagram.vertices]
    summary = {"vertices": len(diagram), "depth_built": diagram.depth_built}
    return CommandResult(summary, rows, text=export_diagram(diagram))


def cmd_language(args, config: RunConfig) -> CommandResult:
    diagram = _diagram(config, args.n)
    if args.count:
        return CommandResult({"n": args.n, "count": language_counts(diagram, args.n)})
    words = sorted(language(diagram, args.n, limit=config.enumeration_budget))
    return CommandResult({"n": args.n, "count": len(words)},
                         [{"word": format_word(w)} for w in words], ["word"])


def cmd_entropy(args, config: RunConfig) -> CommandResult:
    diagram = _diagram(config, args.n)
    mu = _measure(args.measure, diagram, config) if args.measure else None
    rows = entropy_rows(diagram, args.n, mu, args.block_n, config.power_tol, config.power_max_iter)
    return CommandResult({"n": args.n}, rows, ENTROPY_COLUMNS)


def cmd_parry(args, config: RunConfig) -> CommandResult:
    diagram = _diagram(config)
    F = vertex_list(args.vertices, diagram)
    mu = parry_measure(F, diagram, config.power_tol, config.power_max_iter)
    lam = spectral_radius(transition_matrix(F, diagram), config.power_tol, config.power_max_iter)
    rows = [{"vertex": v, "label": diagram.label(v), "pi": float(p)} for v, p in zip(mu.vertices, mu.pi)]
    return CommandResult({"F": list(F), "lambda": lam, "entropy": markov_entropy_rate(mu),
                          "record": to_record(mu)}, rows, ["vertex", "label", "pi"])


def cmd_approx(args, config: RunConfig) -> CommandResult:
    diagram = _diagram(config)
    mu = _measure(args.measure, diagram, config)
    if args.sweep is not None:
        reports = delta_sweep(mu, config.delta, args.sweep, config.metric_depth, diagram)
        return CommandResult({"measure": args.measure, "M": config.metric_depth},
                             [r.to_dict() for r in reports])
    F, rho, report = ergodic_approximation(mu, config.eps, config.delta, config.metric_depth, diagram,
                                           config.max_halvings)
    rows = [{"delta": d, "distance": dist, "entropy_gap": gap} for d, dist, gap in report.sweep]
    return CommandResult({**report.to_dict(), "F": list(F), "record": to_record(rho)}, rows)


def _selector(args, config: RunConfig):
    if not args.selector:
        return config.seed
    try:
        return [int(v) for v in args.selector.split(",") if v.strip()]
    except ValueError:
        raise InvalidParam(f"Selector must be comma-separated integers, got {args.selector!r}")


def cmd_generic(args, config: RunConfig) -> CommandResult:
    diagram = _diagram(config)
    mu = _measure(args.measure, diagram, config)
    schedule = auto_schedule(mu, config.eps, config.levels, config.metric_depth, diagram,
                             ScheduleSettings.from_config(config))
    prefix = generic_prefix(schedule, _selector(args, config), None, diagram)
    checks = {c.k: c for c in birkhoff_check(prefix.word, mu, schedule, config.metric_depth)}
    rows = [{**row, "deviation": checks[row["k"]].segment_deviation, "bound": checks[row["k"]].bound,
             "within_bound": checks[row["k"]].within_bound} for row in schedule.rows()]
    counting = count_prefixes(schedule, len(schedule.expanded))
    summary = {
        "seed": prefix.seed, "indices": list(prefix.indices), "length": len(prefix),
        "count_exponent": counting.exponent, "count_target": counting.target,
        "block_ratios": block_ratios(schedule)["marks"], "prefix": format_word(prefix.word),
    }
    return CommandResult(summary, rows)


def cmd_saturate(args, config: RunConfig) -> CommandResult:
    diagram = _diagram(config)
    mu = _measure(args.measure, diagram, config)
    report = saturation_report(mu, diagram, config.eps, config.levels, config.metric_depth,
                               seed=config.seed, s_step=config.s_step, bracket_tol=config.bracket_tol,
                               settings=ScheduleSettings.from_config(config))
    return CommandResult(report.summary(), report.table())


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], CommandResult]] = {
    "alphabet": cmd_alphabet,
    "orbit": cmd_orbit,
    "itinerary": cmd_itinerary,
    "diagram": cmd_diagram,
    "language": cmd_language,
    "entropy": cmd_entropy,
    "parry": cmd_parry,
    "approx": cmd_approx,
    "generic": cmd_generic,
    "saturate": cmd_saturate,
}


def _check_counts(args) -> None:
    """Range-check the per-command integer flags"""
    for name, minimum in (("n", 0), ("sweep", 0), ("block_n", 1)):
        value = getattr(args, name, None)
        if value is not None and value < minimum:
            raise InvalidParam(f"--{name.replace('_', '-')} must be >= {minimum}, got {value}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)

    try:
        flags = {key: getattr(args, key, None) for key in CONFIG_FLAGS}
        config = load_run_config(args.config, flags)
        _check_counts(args)
        logging.basicConfig(level=getattr(logging, config.log_level.upper()), stream=sys.stderr,
                            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        logger.info(f"Running {args.command} with {config.params().describe()}")
        result = COMMANDS[args.command](args, config)
        write_output(result.render(config.format), args.out)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetError as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
