"""Command-line experiment harness.

Subcommands: `topology` (generate and inspect a network), `run` (simulate
one scenario with repetitions, write matrix/heatmap/report files),
`sweep` (anonymity and overhead curves over path lengths and technique
parameters), `attack` (empirical adversary trials), `report` (recompute
the reference result table and reconcile it).

Configuration is an INI file; every key can also be set on the command
line as a flag of the same name.  All output files start with a
provenance comment block holding the resolved configuration and seed, so
a run can be reproduced byte for byte from any of its outputs.  Exit
codes: 0 success, 1 configuration error, 2 reconciliation failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from statistics import fmean

from .adversary import attack_trials, observe, unlinkability_score, verdicts_to_csv
from .metrics import (
    REFERENCE_RESULTS,
    REFERENCE_SCENARIOS,
    reconcile,
    reference_reconciliations,
    report_csv_header,
    report_from_run,
    report_to_csv_row,
    report_to_text,
)
from .protocols import (
    VARIANT_KINDS,
    PlacementError,
    ProtocolVariant,
    ScenarioSettings,
    build_scenario,
)
from .rng import child_seed, substream
from .routing import UnreachableError, hop_distance, hop_distances
from .simengine import (
    ascii_heatmap,
    matrix_to_csv,
    mean_matrix,
    run,
    transmission_matrix,
)
from .topology import TopologyParams, average_degree, generate, load_topology, topology_to_text

__all__ = ["ConfigError", "main", "resolve_config"]


class ConfigError(Exception):
    """Configuration cannot be parsed or describes an infeasible setup."""


def _parse_int(text: str) -> int:
    return int(text, 10)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    items = [piece.strip() for piece in text.split(",")]
    return tuple(int(piece, 10) for piece in items if piece)


def _parse_str(text: str) -> str:
    return text.strip()


# section, key, parser, default.  Keys are globally unique so every one
# can double as a command-line flag.
SCHEMA = (
    ("topology", "rows", _parse_int, 20),
    ("topology", "cols", _parse_int, 20),
    ("topology", "spacing", _parse_float, 100.0),
    ("topology", "perturbation", _parse_float, 0.25),
    ("topology", "tx_range", _parse_float, 145.0),
    ("topology", "qudg_factor", _parse_float, 0.25),
    ("topology", "topology_file", _parse_str, ""),
    ("scenario", "variant", _parse_str, "extrout_baseline"),
    ("scenario", "count", _parse_int, 1),
    ("scenario", "residual_rate", _parse_int, 0),
    ("scenario", "source", _parse_int, 0),
    ("scenario", "dest", _parse_int, 0),
    ("scenario", "target_hops", _parse_int, 8),
    ("scenario", "source_ext", _parse_int, -1),
    ("scenario", "dest_ext", _parse_int, -1),
    ("scenario", "ext_low", _parse_int, 2),
    ("scenario", "ext_high", _parse_int, 5),
    ("scenario", "strict", _parse_bool, True),
    ("scenario", "source_rate", _parse_int, 1),
    ("run", "seed", _parse_int, 1),
    ("run", "reps", _parse_int, 20),
    ("run", "budget", _parse_int, 7000),
    ("run", "out", _parse_str, "out"),
    ("run", "attack_trials", _parse_int, 0),
    ("run", "reference", _parse_str, ""),
    ("sweep", "hop_targets", _parse_int_list, tuple(range(3, 17))),
    ("sweep", "pairs_per_target", _parse_int, 20),
    ("sweep", "frontier_hops", _parse_int, 12),
    ("sweep", "duplicate_counts", _parse_int_list, (1, 2, 3, 4, 5)),
    ("sweep", "fake_counts", _parse_int_list, (1,)),
    ("sweep", "nfake_counts", _parse_int_list, (1, 3, 5, 7, 9)),
    ("attack", "trials", _parse_int, 1000),
    ("attack", "cover", _parse_str, "auto"),
    ("attack", "threshold", _parse_float, 0.0),
)

_SECTION_OF = {key: section for section, key, _, _ in SCHEMA}
_PARSER_OF = {key: parse for _, key, parse, _ in SCHEMA}


def resolve_config(config_path: str | None,
                   overrides: dict[str, str]) -> dict:
    """Defaults, then INI file, then command-line overrides."""
    cfg = {key: default for _, key, _, default in SCHEMA}
    if config_path:
        parser = configparser.ConfigParser()
        try:
            read = parser.read(config_path)
        except configparser.Error as exc:
            raise ConfigError(f"{config_path}: {exc}") from exc
        if not read:
            raise ConfigError(f"config file not found: {config_path}")
        for section in parser.sections():
            for key, raw in parser.items(section):
                if _SECTION_OF.get(key) != section:
                    raise ConfigError(
                        f"{config_path}: unknown key [{section}] {key}")
                try:
                    cfg[key] = _PARSER_OF[key](raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"{config_path}: bad value for {key}: {exc}") from exc
    for key, raw in overrides.items():
        if raw is None:
            continue
        try:
            cfg[key] = _PARSER_OF[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for --{key}: {exc}") from exc
    if cfg["reps"] < 1:
        raise ConfigError("reps must be >= 1")
    if cfg["budget"] < 1:
        raise ConfigError("budget must be >= 1")
    if (cfg["source"] > 0) != (cfg["dest"] > 0):
        raise ConfigError("set both source and dest, or neither")
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(item) for item in value)
    return str(value)


def _provenance(cfg: dict, command: str) -> str:
    lines = [f"# command={command}"]
    for section, key, _, _ in SCHEMA:
        lines.append(f"# {section}.{key}={_format_value(cfg[key])}")
    return "\n".join(lines) + "\n"


def _write(path: Path, provenance: str, body: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(provenance + body, encoding="utf-8")


def _mean_exact(values) -> float:
    """Mean that returns the common value untouched when all are equal."""
    values = list(values)
    if not values:
        raise ValueError("no values to average")
    if all(value == values[0] for value in values):
        return values[0]
    return fmean(values)


def _topology(cfg: dict):
    if cfg["topology_file"]:
        return load_topology(cfg["topology_file"])
    params = TopologyParams(
        grid_rows=cfg["rows"],
        grid_cols=cfg["cols"],
        spacing=cfg["spacing"],
        perturbation=cfg["perturbation"],
        tx_range=cfg["tx_range"],
        qudg_factor=cfg["qudg_factor"],
        seed=cfg["seed"],
    )
    return generate(params)


def _make_variant(cfg: dict) -> ProtocolVariant:
    kind = cfg["variant"]
    if kind not in VARIANT_KINDS:
        raise ConfigError(
            f"unknown variant {kind!r}, expected one of {VARIANT_KINDS}")
    parameterised = kind in ("extrout_duplicates", "extrout_fake",
                             "nfake_pairs")
    return ProtocolVariant(
        kind=kind,
        count=cfg["count"] if parameterised else 0,
        residual_cover_rate=cfg["residual_rate"],
    )


def _make_settings(cfg: dict) -> ScenarioSettings:
    return ScenarioSettings(
        source_ext=None if cfg["source_ext"] < 0 else cfg["source_ext"],
        dest_ext=None if cfg["dest_ext"] < 0 else cfg["dest_ext"],
        ext_low=cfg["ext_low"],
        ext_high=cfg["ext_high"],
        strict=cfg["strict"],
        source_rate=cfg["source_rate"],
        packet_budget=cfg["budget"],
    )


def _sample_pair(topo, target_hops: int, rng, bfs_cache: dict,
                 limit: int | None = None) -> tuple[int, int]:
    """Draw random node pairs until one sits at the target hop distance."""
    nodes = sorted(topo.nodes)
    if limit is None:
        limit = 50 * len(nodes)
    for _ in range(limit):
        source = nodes[rng.randrange(len(nodes))]
        dest = nodes[rng.randrange(len(nodes))]
        if source == dest:
            continue
        if source not in bfs_cache:
            bfs_cache[source] = hop_distances(topo, source)
        if bfs_cache[source].get(dest) == target_hops:
            return source, dest
    raise ConfigError(
        f"no node pair at {target_hops} hops found in {limit} samples; "
        "check connectivity or pick endpoints explicitly")


def _pick_endpoints(topo, cfg: dict, rng) -> tuple[int, int]:
    if cfg["source"] > 0:
        source, dest = cfg["source"], cfg["dest"]
        for node in (source, dest):
            if node not in topo.adjacency:
                raise ConfigError(f"node {node} not in topology")
        if source == dest:
            raise ConfigError("source and dest must differ")
        try:
            hop_distance(topo, source, dest)
        except UnreachableError as exc:
            raise ConfigError(str(exc)) from exc
        return source, dest
    return _sample_pair(topo, cfg["target_hops"], rng, {})


def _workers(jobs: int) -> int:
    return max(1, min(8, jobs))


def cmd_topology(cfg: dict) -> int:
    topo = _topology(cfg)
    out = Path(cfg["out"])
    path = out / "topology.txt"
    _write(path, _provenance(cfg, "topology"), topology_to_text(topo))
    degree = average_degree(topo)
    print(f"nodes={topo.node_count} links={len(topo.links)} "
          f"average_degree={degree:.3f}")
    print(f"wrote {path}")
    return 0


def _run_rep(topo, source, dest, variant, settings, seed: int, rep: int):
    rng = substream(seed, f"rep-{rep}")
    plan = build_scenario(topo, source, dest, variant, settings, rng)
    trace = run(plan)
    matrix = transmission_matrix(trace, topo.params)
    unlink = unlinkability_score(observe(trace, topo))
    report = report_from_run(plan, trace, unlinkability=unlink)
    return plan, trace, matrix, report


def cmd_run(cfg: dict) -> int:
    topo = _topology(cfg)
    seed = cfg["seed"]
    source, dest = _pick_endpoints(topo, cfg, substream(seed, "pairs"))
    variant = _make_variant(cfg)
    settings = _make_settings(cfg)
    reps = cfg["reps"]
    with ThreadPoolExecutor(max_workers=_workers(reps)) as pool:
        futures = [pool.submit(_run_rep, topo, source, dest, variant,
                               settings, seed, rep) for rep in range(reps)]
        results = [future.result() for future in futures]

    failures = []
    for rep, (_, _, _, report) in enumerate(results):
        record = reconcile(report)
        if not record.passed:
            failures.append(f"rep {rep}: " + "; ".join(record.failures))

    plan0, trace0, _, report0 = results[0]
    empirical = None
    ci = None
    if cfg["attack_trials"] > 0:
        def factory(rng):
            return build_scenario(topo, source, dest, variant, settings, rng)
        summary = attack_trials(factory, cfg["attack_trials"],
                                seed=child_seed(seed, "attack"))
        empirical = summary.empirical_anonymity
        ci = summary.empirical_anonymity_ci()
    headline = report_from_run(plan0, trace0, anonymity_empirical=empirical,
                               empirical_ci=ci,
                               unlinkability=report0.unlinkability)

    reference = None
    notes = ()
    if cfg["reference"]:
        name = cfg["reference"]
        if name not in REFERENCE_RESULTS:
            raise ConfigError(
                f"unknown reference {name!r}, expected one of "
                f"{sorted(REFERENCE_RESULTS)}")
        reference = REFERENCE_RESULTS[name]
        note = REFERENCE_SCENARIOS[name].get("note")
        notes = (note,) if note else ()
    record = reconcile(headline, reference=reference, notes=notes)
    if not record.passed:
        failures.append("; ".join(record.failures))

    out = Path(cfg["out"])
    provenance = _provenance(cfg, "run")
    averaged = mean_matrix([matrix for _, _, matrix, _ in results])
    _write(out / "matrix.csv", provenance, matrix_to_csv(averaged))
    _write(out / "heatmap.txt", provenance, ascii_heatmap(averaged) + "\n")

    text = report_to_text(headline, record)
    text += f"repetitions        {reps}\n"
    tof_mean = _mean_exact(r.tof_measured for _, _, _, r in results)
    text += f"tof measured mean  {tof_mean:.6f}\n"
    unlink_mean = _mean_exact(r.unlinkability for _, _, _, r in results)
    text += f"unlinkability mean {unlink_mean:.6f}\n"
    _write(out / "report.txt", provenance, text)

    rows = [report_csv_header()]
    rows += [report_to_csv_row(report) for _, _, _, report in results]
    _write(out / "report.csv", provenance, "\n".join(rows) + "\n")

    for name in ("matrix.csv", "heatmap.txt", "report.txt", "report.csv"):
        print(f"wrote {out / name}")
    if failures:
        for failure in failures:
            print(f"reconciliation failure: {failure}", file=sys.stderr)
        return 2
    print("reconciliation pass")
    return 0


def _sweep_hop_row(topo, target: int, cfg: dict, variant, settings,
                   bfs_cache: dict) -> list[str]:
    seed = cfg["seed"]
    rng = substream(seed, f"hops-{target}")
    reports = []
    skipped = 0
    for index in range(cfg["pairs_per_target"]):
        try:
            source, dest = _sample_pair(topo, target, rng, bfs_cache)
        except ConfigError:
            break
        pair_rng = substream(seed, f"hops-{target}-pair-{index}")
        try:
            plan = build_scenario(topo, source, dest, variant, settings,
                                  pair_rng)
        except PlacementError:
            skipped += 1
            continue
        main = plan.main
        if main is not None and (
                main.source_extension != plan.requested_source_ext
                or main.dest_extension != plan.requested_dest_ext):
            skipped += 1  # truncated extension would smear the averages
            continue
        if plan.duplicate_shortfall:
            skipped += 1
            continue
        reports.append(report_from_run(plan, run(plan)))
    note = f"skipped={skipped}" if skipped else ""
    if not reports:
        return [str(target), "0", "", "", "", "", note or "insufficient"]
    return [
        str(target),
        str(len(reports)),
        repr(_mean_exact(r.anonymity_single for r in reports)),
        repr(_mean_exact(r.anonymity_pair for r in reports)),
        repr(_mean_exact(r.tof_analytical for r in reports)),
        repr(_mean_exact(r.tof_measured for r in reports)),
        note,
    ]


def _frontier_points(cfg: dict) -> list[tuple[str, int]]:
    points = [("no_privacy", 0), ("extrout_baseline", 0)]
    points += [("extrout_duplicates", n) for n in cfg["duplicate_counts"]]
    points += [("extrout_fake", n) for n in cfg["fake_counts"]]
    points += [("nfake_pairs", n) for n in cfg["nfake_counts"]]
    return points


def _frontier_row(topo, source: int, dest: int, kind: str, count: int,
                  cfg: dict, settings) -> list[str]:
    seed = cfg["seed"]
    variant = ProtocolVariant(kind=kind, count=count,
                              residual_cover_rate=cfg["residual_rate"])
    reports = []
    shortfall = 0
    failed = 0
    for rep in range(cfg["reps"]):
        rng = substream(seed, f"point-{kind}-{count}-rep-{rep}")
        try:
            plan = build_scenario(topo, source, dest, variant, settings, rng)
        except PlacementError:
            failed += 1
            continue
        shortfall = max(shortfall, plan.duplicate_shortfall)
        reports.append(report_from_run(plan, run(plan)))
    notes = []
    if failed:
        notes.append(f"placement_failed={failed}")
    if shortfall:
        notes.append(f"duplicate_shortfall={shortfall}")
    note = " ".join(notes)
    if not reports:
        return [kind, str(count), "", "", "", "", note or "insufficient"]
    return [
        kind,
        str(count),
        repr(_mean_exact(r.anonymity_single for r in reports)),
        repr(_mean_exact(r.anonymity_pair for r in reports)),
        repr(_mean_exact(r.tof_analytical for r in reports)),
        repr(_mean_exact(r.tof_measured for r in reports)),
        note,
    ]


def cmd_sweep(cfg: dict) -> int:
    if not cfg["hop_targets"]:
        raise ConfigError("hop_targets must be nonempty")
    topo = _topology(cfg)
    seed = cfg["seed"]
    variant = _make_variant(cfg)
    settings = _make_settings(cfg)
    out = Path(cfg["out"])
    provenance = _provenance(cfg, "sweep")

    bfs_cache: dict[int, dict[int, int]] = {}
    header = ("hops,pairs_used,anonymity_single,anonymity_pair,"
              "tof_analytical,tof_measured,note")
    with ThreadPoolExecutor(max_workers=_workers(len(cfg["hop_targets"]))) as pool:
        futures = [pool.submit(_sweep_hop_row, topo, target, cfg, variant,
                               settings, bfs_cache)
                   for target in cfg["hop_targets"]]
        rows = [",".join(future.result()) for future in futures]
    _write(out / "anonymity_vs_L.csv", provenance,
           header + "\n" + "\n".join(rows) + "\n")

    frontier_source, frontier_dest = _pick_endpoints(
        topo, {**cfg, "target_hops": cfg["frontier_hops"]},
        substream(seed, "frontier"))
    header = ("technique,parameter,anonymity_single,anonymity_pair,"
              "tof_analytical,tof_measured,note")
    points = _frontier_points(cfg)
    with ThreadPoolExecutor(max_workers=_workers(len(points))) as pool:
        futures = [pool.submit(_frontier_row, topo, frontier_source,
                               frontier_dest, kind, count, cfg, settings)
                   for kind, count in points]
        rows = [",".join(future.result()) for future in futures]
    _write(out / "anonymity_vs_tof.csv", provenance,
           header + "\n" + "\n".join(rows) + "\n")

    print(f"wrote {out / 'anonymity_vs_L.csv'}")
    print(f"wrote {out / 'anonymity_vs_tof.csv'}")
    return 0


def _analytical_source_success(plan) -> float:
    """Expected source-guess rate for a branch-then-node guesser."""
    branches = 1 + len(plan.duplicates) + len(plan.fake_paths)
    if plan.variant.uses_cover:
        assert plan.main is not None
        return 1.0 / (branches * plan.main.route.hops)
    return 1.0 / branches


def cmd_attack(cfg: dict) -> int:
    if cfg["trials"] < 100:
        raise ConfigError("attack needs at least 100 trials")
    cover_key = cfg["cover"].lower()
    if cover_key == "auto":
        cover = None
    else:
        try:
            cover = _parse_bool(cover_key)
        except ValueError as exc:
            raise ConfigError(f"bad value for cover: {exc}") from exc
    threshold = cfg["threshold"] if cfg["threshold"] > 0 else None

    topo = _topology(cfg)
    seed = cfg["seed"]
    source, dest = _pick_endpoints(topo, cfg, substream(seed, "pairs"))
    variant = _make_variant(cfg)
    settings = _make_settings(cfg)

    def factory(rng):
        return build_scenario(topo, source, dest, variant, settings, rng)

    summary = attack_trials(factory, cfg["trials"],
                            seed=child_seed(seed, "attack"),
                            cover_traffic=cover, threshold=threshold)
    plan0 = factory(substream(child_seed(seed, "attack"), "scenario-0"))
    expected = _analytical_source_success(plan0)
    on_path = fmean(1.0 if v.on_real_path else 0.0 for v in summary.verdicts)

    out = Path(cfg["out"])
    provenance = _provenance(cfg, "attack")
    _write(out / "attack.csv", provenance, verdicts_to_csv(summary))
    lines = [
        f"trials             {summary.trials}",
        f"source success     {summary.source_rate:.6f} "
        f"(95% CI [{summary.source_ci[0]:.6f}, {summary.source_ci[1]:.6f}])",
        f"dest success       {summary.dest_rate:.6f} "
        f"(95% CI [{summary.dest_ci[0]:.6f}, {summary.dest_ci[1]:.6f}])",
        f"pair success       {summary.pair_rate:.6f} "
        f"(95% CI [{summary.pair_ci[0]:.6f}, {summary.pair_ci[1]:.6f}])",
        f"guessed on path    {on_path:.6f}",
        f"analytical source  {expected:.6f}",
        f"empirical anonymity {summary.empirical_anonymity:.6f}",
    ]
    _write(out / "attack.txt", provenance, "\n".join(lines) + "\n")
    print(f"wrote {out / 'attack.csv'}")
    print(f"wrote {out / 'attack.txt'}")
    print(f"source success {summary.source_rate:.6f}, "
          f"analytical {expected:.6f}")
    return 0


def cmd_report(cfg: dict) -> int:
    out = Path(cfg["out"])
    blocks = []
    failed = False
    for name, (report, record) in reference_reconciliations().items():
        blocks.append(f"[{name}]\n" + report_to_text(report, record))
        verdict = "pass" if record.passed else "FAIL"
        suffix = f" ({len(record.flags)} flag(s))" if record.flags else ""
        print(f"{name}: {verdict}{suffix}")
        failed = failed or not record.passed
    _write(out / "reference_report.txt", _provenance(cfg, "report"),
           "\n".join(blocks))
    print(f"wrote {out / 'reference_report.txt'}")
    return 2 if failed else 0


COMMANDS = {
    "topology": cmd_topology,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "attack": cmd_attack,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors, not exit 2
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="extrout",
                     description="location-privacy simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "topology": "generate a network and report degree statistics",
        "run": "simulate one scenario and write matrix/report files",
        "sweep": "produce anonymity and overhead curve CSVs",
        "attack": "run empirical adversary trials",
        "report": "reconcile the reference result table",
    }
    for name, text in helps.items():
        command = sub.add_parser(name, help=text)
        command.add_argument("--config", default=None,
                             help="INI configuration file")
        for _, key, _, _ in SCHEMA:
            command.add_argument(f"--{key.replace('_', '-')}", dest=key,
                                 default=None, metavar="VALUE")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        overrides = {key: getattr(args, key) for _, key, _, _ in SCHEMA}
        cfg = resolve_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (UnreachableError, PlacementError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
