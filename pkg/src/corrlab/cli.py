"""Command-line entry point.

One command drives every part of the package: realizability checks, the
inequality sweeps, the delayed-choice and source-model simulations, and the
three-station experiment in-process or across four processes.  Input is a
small ``key = value`` config (or a named preset), output is a structured
report with a stable field order: a ``[provenance]`` block that is itself a
valid config reproducing the run, followed by a ``[result]`` block.

Exit codes: 0 success, 2 domain/config error, 3 capacity error, 4 network
or protocol failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import __version__
from .aspect import (
    ROW_LABELS,
    estimate_gamma,
    gamma_max_matrix,
    matrix_from_covariances,
    qm_matrix,
    random_source_model,
    reorder_demonstration,
    sample_delayed_choice,
    simulate_source_model,
)
from .dist import DEFAULT_PRECISION, qm_covariance, rationalize
from .errors import CapacityError, DomainError, ProtocolError
from .ghz import (
    NODES,
    REGIME_ORDER,
    default_assignment,
    default_schedule,
    marginal_balance,
    run_all_regimes,
)
from .ghznet import (
    coordinator_run,
    node_serve,
    schedule_from_wire,
    schedule_to_wire,
    verify_transcript,
)
from .inequalities import (
    BellTriple,
    ChshQuad,
    bell_check_all,
    chsh_check_all,
    chsh_value,
)
from .realizability import (
    check_realizability,
    four_cycle_system,
    triangle_system,
    verify_certificate,
)

MODES = (
    "check",
    "bell",
    "chsh",
    "aspect",
    "source",
    "ghz",
    "ghz-net-coordinator",
    "ghz-net-node",
)

STOCHASTIC_MODES = {"aspect", "source", "ghz", "ghz-net-coordinator"}

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_CAPACITY = 3
EXIT_NETWORK = 4


class ConfigError(DomainError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    mode: str
    seed: int | None = None
    trials: int | None = None
    sigmas: list[Fraction] | None = None
    angles: list[float] | None = None  # radians
    matrix: str | None = None
    precision: Fraction = DEFAULT_PRECISION
    lambdas: int = 8
    rademacher: tuple[int, int, int] = (1, 2, 3)
    schedule: str | None = None  # wire-format schedule override
    role: str | None = None
    listen: str | None = None
    nodes: list[str] | None = None


def _parse_rational(text: str) -> Fraction:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(text))


def _parse_angle(text: str) -> float:
    text = text.strip()
    for suffix, factor in (("deg", math.pi / 180), ("rad", 1.0)):
        if text.endswith(suffix):
            return float(text[: -len(suffix)].strip()) * factor
    raise ValueError(f"angle {text!r} needs a 'deg' or 'rad' suffix")


def parse_config(text: str, require_seed: bool = True) -> ExperimentConfig:
    """Parse the documented key = value format, collecting all errors.

    ``require_seed`` is dropped when the caller can supply a seed some other
    way, e.g. the command-line override flag.
    """
    values: dict[str, str] = {}
    problems: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
        values[key] = value

    known = {
        "mode", "seed", "trials", "sigmas", "angles", "matrix", "precision",
        "lambdas", "rademacher", "schedule", "role", "listen", "nodes", "version",
    }
    for key in values:
        if key not in known:
            problems.append(f"unknown key {key!r}")
    values.pop("version", None)  # provenance echo, carries no settings

    mode = values.get("mode")
    if mode is None:
        problems.append("missing mandatory key 'mode'")
    elif mode not in MODES:
        problems.append(f"unknown mode {mode!r}")

    config = ExperimentConfig(mode=mode or "check")

    def take(key, convert, describe):
        if key not in values:
            return None
        try:
            return convert(values[key])
        except (ValueError, ZeroDivisionError) as exc:
            problems.append(f"{key}: {describe}: {exc}")
            return None

    config.seed = take("seed", int, "malformed integer")
    config.trials = take("trials", int, "malformed integer")
    config.lambdas = take("lambdas", int, "malformed integer") or config.lambdas
    config.matrix = values.get("matrix")
    config.role = values.get("role")
    config.listen = values.get("listen")
    config.schedule = values.get("schedule")
    if "nodes" in values:
        config.nodes = [part.strip() for part in values["nodes"].split(",")]
    precision = take("precision", _parse_rational, "malformed rational")
    if precision is not None:
        if precision <= 0:
            problems.append("precision must be positive")
        else:
            config.precision = precision
    if "rademacher" in values:
        indices = take(
            "rademacher",
            lambda v: tuple(int(p) for p in v.split(",")),
            "malformed index list",
        )
        if indices is not None:
            if len(indices) == 3 and len(set(indices)) == 3 and min(indices) >= 1:
                config.rademacher = indices
            else:
                problems.append("rademacher needs three distinct indices >= 1")

    if "sigmas" in values and "angles" in values:
        problems.append("'sigmas' and 'angles' conflict; give one of them")
    if "sigmas" in values:
        sigmas = []
        for part in values["sigmas"].split(","):
            try:
                sigma = _parse_rational(part)
            except (ValueError, ZeroDivisionError) as exc:
                problems.append(f"sigmas: malformed rational {part.strip()!r}: {exc}")
                continue
            if abs(sigma) > 1:
                problems.append(f"sigmas: {sigma} outside [-1, 1]")
            sigmas.append(sigma)
        config.sigmas = sigmas
    if "angles" in values:
        angles = []
        for part in values["angles"].split(","):
            try:
                angles.append(_parse_angle(part))
            except ValueError as exc:
                problems.append(f"angles: {exc}")
        config.angles = angles

    if require_seed and mode in STOCHASTIC_MODES and config.seed is None:
        problems.append(f"mode {mode!r} is stochastic: 'seed' is mandatory")
    if problems:
        raise ConfigError(problems)
    return config


_SQRT_HALF = 1 / math.sqrt(2)


def preset_config(name: str) -> ExperimentConfig:
    """Built-in configurations reproducing the headline results."""
    r = rationalize(_SQRT_HALF)
    if name == "vorobev-table1":
        return ExperimentConfig(mode="check", sigmas=[r, r, Fraction(0)])
    if name == "chsh-qm":
        return ExperimentConfig(mode="chsh", sigmas=[r, r, r, -r])
    if name == "gamma-max":
        return ExperimentConfig(
            mode="aspect", matrix="gamma-max", trials=1_000_000, seed=20260824
        )
    if name == "ghz-table5":
        return ExperimentConfig(mode="ghz", trials=100_000, seed=20260824)
    raise DomainError(f"unknown preset {name!r} (have: vorobev-table1, chsh-qm, gamma-max, ghz-table5)")


@dataclass
class Report:
    provenance: list[tuple[str, str]] = field(default_factory=list)
    results: list[tuple[str, str]] = field(default_factory=list)
    summary: str = ""

    def provenance_text(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.provenance)

    def render(self) -> str:
        lines = ["[provenance]"]
        lines.extend(f"{k} = {v}" for k, v in self.provenance)
        lines.append("[result]")
        lines.extend(f"{k} = {v}" for k, v in self.results)
        return "\n".join(lines) + "\n"


def _frac_text(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}" if value.denominator != 1 else str(value.numerator)


def _provenance(config: ExperimentConfig) -> list[tuple[str, str]]:
    pairs = [("version", __version__), ("mode", config.mode)]
    if config.sigmas is not None:
        pairs.append(("sigmas", ", ".join(_frac_text(s) for s in config.sigmas)))
    if config.angles is not None:
        pairs.append(("angles", ", ".join(f"{a!r} rad" for a in config.angles)))
    if config.matrix is not None:
        pairs.append(("matrix", config.matrix))
    if config.trials is not None:
        pairs.append(("trials", str(config.trials)))
    if config.seed is not None:
        pairs.append(("seed", str(config.seed)))
    if config.precision != DEFAULT_PRECISION:
        pairs.append(("precision", _frac_text(config.precision)))
    if config.rademacher != (1, 2, 3):
        pairs.append(("rademacher", ", ".join(map(str, config.rademacher))))
    if config.schedule is not None:
        pairs.append(("schedule", config.schedule))
    if config.nodes is not None:
        pairs.append(("nodes", ", ".join(config.nodes)))
    if config.role is not None:
        pairs.append(("role", config.role))
    if config.listen is not None:
        pairs.append(("listen", config.listen))
    return pairs


def _sigmas_for(config: ExperimentConfig, count: int) -> list[Fraction]:
    if config.sigmas is not None:
        if len(config.sigmas) != count:
            raise DomainError(f"mode {config.mode!r} needs {count} covariances")
        return config.sigmas
    if config.angles is not None:
        if len(config.angles) != count:
            raise DomainError(f"mode {config.mode!r} needs {count} angles")
        return [qm_covariance(a, config.precision) for a in config.angles]
    raise DomainError(f"mode {config.mode!r} needs 'sigmas' or 'angles'")


def _realizability_lines(system, results: list[tuple[str, str]]):
    outcome = check_realizability(system)
    results.append(("verdict", outcome.verdict))
    results.append(("margin", _frac_text(outcome.margin)))
    results.append(("margin_float", f"{float(outcome.margin):.9f}"))
    if outcome.feasible:
        atoms = sorted(outcome.witness.atoms.items())
        results.append(
            ("witness", "; ".join(
                f"{''.join('+' if v > 0 else '-' for v in atom)}:{_frac_text(mass)}"
                for atom, mass in atoms
            ))
        )
    else:
        results.append(
            ("certificate", "; ".join(_frac_text(y) for y in outcome.certificate))
        )
        results.append(
            ("certificate_note", "margin is the implementation-defined minimal L1 cell violation")
        )
    results.append(("certificate_verified", str(verify_certificate(system, outcome)).lower()))
    return outcome


def run(config: ExperimentConfig, out_path: str | None = None) -> Report:
    """Dispatch a validated config to its mode runner."""
    report = Report(provenance=_provenance(config))
    runner = {
        "check": _run_check,
        "bell": _run_bell,
        "chsh": _run_chsh,
        "aspect": _run_aspect,
        "source": _run_source,
        "ghz": _run_ghz,
        "ghz-net-coordinator": _run_coordinator,
        "ghz-net-node": _run_node,
    }[config.mode]
    runner(config, report, out_path)
    return report


def _run_check(config, report, out_path):
    sigmas = config.sigmas
    if sigmas is None and config.angles is not None:
        sigmas = [qm_covariance(a, config.precision) for a in config.angles]
    if sigmas is None or len(sigmas) not in (3, 4):
        raise DomainError("check mode needs 3 or 4 covariances (or angles)")
    system = triangle_system(sigmas) if len(sigmas) == 3 else four_cycle_system(sigmas)
    outcome = _realizability_lines(system, report.results)
    report.summary = f"{outcome.verdict} (margin {float(outcome.margin):.6f})"


def _run_bell(config, report, out_path):
    triple = BellTriple(*_sigmas_for(config, 3))
    verdicts = bell_check_all(triple)
    for v in verdicts:
        report.results.append(
            (f"bell[{v.variant}]",
             f"|{_frac_text(v.lhs)}| <= {_frac_text(v.bound)} : "
             + ("satisfied" if v.satisfied else "VIOLATED"))
        )
    report.results.append(
        ("all_variants_satisfied", str(all(v.satisfied for v in verdicts)).lower())
    )
    outcome = _realizability_lines(triangle_system(list(triple.as_tuple())), report.results)
    violated = sum(1 for v in verdicts if not v.satisfied)
    report.summary = (
        f"{violated}/{len(verdicts)} variants violated; realizability {outcome.verdict}"
    )


def _run_chsh(config, report, out_path):
    quad = ChshQuad(*_sigmas_for(config, 4))
    value = chsh_value(quad)
    report.results.append(("chsh_value", _frac_text(value)))
    report.results.append(("chsh_value_float", f"{float(value):.9f}"))
    for v in chsh_check_all(quad):
        report.results.append(
            (f"chsh[{v.variant}]",
             f"|{_frac_text(v.lhs)}| <= 2 : " + ("satisfied" if v.satisfied else "VIOLATED"))
        )
    outcome = _realizability_lines(four_cycle_system(list(quad.as_tuple())), report.results)
    report.summary = f"chsh value {float(value):.4f}; realizability {outcome.verdict}"


def _aspect_matrix(config):
    if config.matrix == "gamma-max":
        return gamma_max_matrix()
    if config.matrix is not None:
        raise DomainError(f"unknown matrix {config.matrix!r}")
    if config.angles is not None:
        return qm_matrix(config.angles)
    if config.sigmas is not None:
        return matrix_from_covariances(_sigmas_for(config, 4))
    raise DomainError("aspect mode needs 'angles', 'sigmas' or matrix = gamma-max")


def _run_aspect(config, report, out_path):
    matrix = _aspect_matrix(config)
    trials = config.trials or 1_000_000
    records = sample_delayed_choice(matrix, trials, config.seed)
    estimate = estimate_gamma(records)
    population = sum(
        (matrix.row_covariance(label) for label in ROW_LABELS[:3]), Fraction(0)
    ) - matrix.row_covariance("dc")
    for label in ROW_LABELS:
        report.results.append(
            (f"row[{label}]",
             f"n={estimate.row_counts[label]} mean={estimate.row_means[label]:+.6f}")
        )
    report.results.append(("gamma", f"{estimate.gamma:.6f}"))
    report.results.append(("standard_error", f"{estimate.standard_error:.6f}"))
    report.results.append(("population_gamma", f"{float(population):.6f}"))
    report.summary = f"gamma = {estimate.gamma:.4f} ± {estimate.standard_error:.4f}"


def _run_source(config, report, out_path):
    trials = config.trials or 100_000
    model = random_source_model(config.seed, config.lambdas)
    estimate = simulate_source_model(model, trials, config.seed)
    reorder = reorder_demonstration(model, trials, config.seed)
    report.results.append(("support_size", str(len(model.support))))
    report.results.append(("gamma", f"{estimate.gamma:.6f}"))
    report.results.append(("standard_error", f"{estimate.standard_error:.6f}"))
    bound_ok = abs(estimate.gamma) <= 2 + 5 * estimate.standard_error
    report.results.append(("within_bound", str(bound_ok).lower()))
    report.results.append(("quadruples", str(reorder.quadruples)))
    report.results.append(("discarded_trials", str(reorder.discarded)))
    report.results.append(
        ("quadruple_gammas", ", ".join(map(str, reorder.gammas_seen)))
    )
    report.results.append(
        ("all_quadruples_pm2", str(reorder.all_plus_minus_two).lower())
    )
    report.results.append(
        ("grouping_note", "greedy arrival-order grouping; remainder discarded")
    )
    report.summary = (
        f"gamma = {estimate.gamma:.4f} ± {estimate.standard_error:.4f}; "
        f"quadruple gammas {list(reorder.gammas_seen)}"
    )


def _ghz_schedule(config):
    return schedule_from_wire(config.schedule) if config.schedule else default_schedule()


def _run_ghz(config, report, out_path):
    schedule = _ghz_schedule(config)
    assignment = default_assignment(config.rademacher)
    trials = config.trials or 100_000
    by_regime = run_all_regimes(schedule, trials, config.seed, assignment)
    products_exact = True
    for regime in REGIME_ORDER:
        trials_list = by_regime[regime]
        counts = {}
        for trial in trials_list:
            counts[trial.product] = counts.get(trial.product, 0) + 1
        report.results.append(
            (f"product[{regime.value}]",
             ", ".join(f"{p:+d}:{n}" for p, n in sorted(counts.items())))
        )
        if set(counts) != {1 if regime.value == "xxx" else -1}:
            products_exact = False
    report.results.append(("products_exact", str(products_exact).lower()))
    for node in NODES:
        balances = ", ".join(
            f"{regime.value}:{marginal_balance(by_regime[regime], node):.4f}"
            for regime in REGIME_ORDER
        )
        report.results.append((f"balance[node{node}]", balances))
    report.summary = f"products exact: {products_exact} ({trials} trials/regime)"


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _run_coordinator(config, report, out_path):
    if not config.nodes or len(config.nodes) != 3:
        raise DomainError("ghz-net-coordinator needs 'nodes' with three host:port entries")
    schedule = _ghz_schedule(config)
    trials = config.trials or 100
    endpoints = [_parse_endpoint(n) for n in config.nodes]
    transcript = coordinator_run(schedule, trials, config.seed, endpoints)
    if out_path:
        transcript.save(out_path)
        report.results.append(("transcript", out_path))
    report.results.append(("trials_completed", str(len(transcript.trials))))
    report.results.append(("void_trials", str(len(transcript.void_trials))))
    report.results.append(("aborted", transcript.aborted_reason or "no"))
    if transcript.aborted_reason:
        report.summary = f"session aborted: {transcript.aborted_reason}"
        raise ProtocolError(transcript.aborted_reason)
    verification = verify_transcript(transcript, default_assignment(config.rademacher))
    report.results.append(("replay_mismatches", str(len(verification.mismatches))))
    report.results.append(
        ("forwarding_violations", str(len(verification.forwarding_violations)))
    )
    for regime, counts in sorted(verification.product_counts.items()):
        report.results.append(
            (f"product[{regime}]", ", ".join(f"{p:+d}:{n}" for p, n in sorted(counts.items())))
        )
    report.summary = (
        f"{len(transcript.trials)} trials, replay ok: {verification.ok}"
    )


def _run_node(config, report, out_path):
    if config.role not in ("node1", "node2", "node3"):
        raise DomainError("ghz-net-node needs role = node1|node2|node3")
    if not config.listen:
        raise DomainError("ghz-net-node needs listen = host:port")
    node_id = int(config.role[-1])

    def announce(address):
        print(f"listening {address[0]}:{address[1]}", flush=True)

    node_serve(node_id, default_assignment(config.rademacher), _parse_endpoint(config.listen), announce)
    report.results.append(("served", "done"))
    report.summary = f"node {node_id} session complete"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrlab",
        description="Joint-distribution realizability checks and locality experiments.",
    )
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--preset", help="named built-in configuration")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--trials", type=int, help="override the config trial count")
    parser.add_argument("--out", help="write the report (or transcript) to this path")
    parser.add_argument("--summary", action="store_true", help="print the one-line summary only")
    parser.add_argument("--role", help="ghz-net role: coordinator or nodeN")
    parser.add_argument("--listen", help="ghz-net-node listen address host:port")
    parser.add_argument("--nodes", help="ghz-net-coordinator node addresses, comma separated")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config and args.preset:
            raise DomainError("--config and --preset are mutually exclusive")
        if args.config:
            with open(args.config, "r", encoding="utf-8") as handle:
                config = parse_config(handle.read(), require_seed=args.seed is None)
        elif args.preset:
            config = preset_config(args.preset)
        else:
            raise DomainError("one of --config or --preset is required")
        if args.seed is not None:
            config.seed = args.seed
        if args.trials is not None:
            config.trials = args.trials
        if args.role is not None:
            config.role = args.role
        if args.listen is not None:
            config.listen = args.listen
        if args.nodes is not None:
            config.nodes = [part.strip() for part in args.nodes.split(",")]
        if config.mode in STOCHASTIC_MODES and config.seed is None:
            raise DomainError(f"mode {config.mode!r} is stochastic: a seed is required")

        report = run(config, out_path=args.out)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_DOMAIN
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ProtocolError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN

    text = report.render()
    if args.out and config.mode != "ghz-net-coordinator":
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    if args.summary:
        print(report.summary)
    else:
        sys.stdout.write(text)
        if report.summary:
            print(f"# {report.summary}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
