"""Command-line front end.

Subcommands: ``simulate`` (Monte Carlo experiment from an INI config),
``sweep`` (simulate across several fusion periods), ``fuse-demo`` (fuse two
PMB documents and show the fused hypotheses) and ``gospa`` (metric between
two point-set files).  Exit status: 0 on success, 1 for usage or
configuration problems, 2 for numerical failures at run time.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .filtering import FilterParams, MeasurementModel, ncv_motion_model
from .fusion import FusionParams, fuse_gci
from .gospa import GospaParams, gospa
from .rfs import pmb_from_dict, pmbm_to_dict
from .simulation import (
    VARIANTS,
    MonteCarloResult,
    ScenarioConfig,
    monte_carlo,
    summary_dict,
)

__all__ = ["main"]


class ConfigError(Exception):
    """Bad configuration file, override or input document."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to status 2; we reserve
        self.print_usage(sys.stderr)  # that for numerical failures.
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _bundled(name: str):
    return resources.files("pmbfuse").joinpath("data", name)


def _load_raw_config(path: str | None, overrides: list[str]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(_bundled("benchmark.cfg").read_text())
    known = {s: set(parser[s]) for s in parser.sections()}
    if path is not None:
        user = configparser.ConfigParser(interpolation=None)
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        user.read(path)
        for section in user.sections():
            if section not in known:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in user[section].items():
                if key not in known[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                parser[section][key] = value
    for item in overrides:
        try:
            dotted, value = item.split("=", 1)
            section, key = dotted.strip().split(".", 1)
        except ValueError:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if section not in known or key not in known[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        parser[section][key] = value
    return parser


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_label(label: str) -> tuple[str, str]:
    label = label.strip().lower()
    if label == "cpmbm":
        return "cpmbm", "gci"
    for rule in ("gci", "aa"):
        if label.endswith("-" + rule):
            variant = label[: -len(rule) - 1]
            if variant in VARIANTS:
                return variant, rule
    raise ConfigError(f"unknown variant label {label!r}")


def build_configs(raw: configparser.ConfigParser) -> list[ScenarioConfig]:
    """Turn a parsed INI document into one ScenarioConfig per variant."""
    try:
        sc, mo, me = raw["scenario"], raw["motion"], raw["measurement"]
        fi, fu, go = raw["filter"], raw["fusion"], raw["gospa"]
        birth_mean = _floats(mo["birth_mean"])
        birth_cov = np.diag(_floats(mo["birth_cov_diag"]))
        motion = ncv_motion_model(
            tau=mo.getfloat("tau"),
            accel_noise=mo.getfloat("accel_noise"),
            survival_prob=mo.getfloat("survival"),
            birth_mean=birth_mean,
            birth_cov=birth_cov,
            birth_expected_first=mo.getfloat("births_first"),
            birth_expected_rest=mo.getfloat("births_rest"),
        )
        region = _floats(me["region"])
        measurement = MeasurementModel(
            observation=np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]),
            noise=me.getfloat("noise_var") * np.eye(2),
            detection_prob=me.getfloat("detection"),
            clutter_rate=me.getfloat("clutter_rate"),
            region=((region[0], region[1]), (region[2], region[3])),
        )
        filter_params = FilterParams(
            ppp_prune=fi.getfloat("ppp_prune"),
            ppp_merge=fi.getfloat("ppp_merge"),
            ppp_max=fi.getint("ppp_max"),
            mb_prune=fi.getfloat("mb_prune"),
            bern_exist_prune=fi.getfloat("exist_prune"),
            gate=fi.getfloat("gate"),
            murty_k=fi.getint("murty_k"),
        )
        fusion_params = FusionParams(
            omega=fu.getfloat("omega"),
            gate=fu.getfloat("gate"),
            murty_k=fu.getint("murty_k"),
        )
        gospa_params = GospaParams(go.getfloat("cutoff"), go.getfloat("order"))
        configs = []
        for label in sc["variants"].split(","):
            variant, rule = _parse_label(label)
            configs.append(
                ScenarioConfig(
                    variant=variant,
                    rule=rule,
                    steps=sc.getint("steps"),
                    n_runs=sc.getint("runs"),
                    n_agents=sc.getint("agents"),
                    seed=sc.getint("seed"),
                    fusion_period=sc.getint("fusion_period"),
                    truth_mode=sc["truth"],
                    motion=motion,
                    measurement=measurement,
                    filter_params=filter_params,
                    fusion_params=fusion_params,
                    aa_gate=fu.getfloat("aa_gate"),
                    gospa_params=gospa_params,
                )
            )
        return configs
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc


def _write_results_csv(path: Path, mc: MonteCarloResult) -> None:
    lines = ["# pmbfuse results v1", "run,agent,step,total,localisation,missed,false"]
    for result in mc.runs:
        for agent, row in enumerate(result.gospa):
            for step, g in enumerate(row, start=1):
                lines.append(
                    f"{result.run},{agent},{step},"
                    f"{float(g.total)!r},{float(g.localisation)!r},"
                    f"{float(g.missed)!r},{float(g.false)!r}"
                )
    path.write_text("\n".join(lines) + "\n")


def _run_experiments(configs, jobs: int, quiet: bool) -> list[MonteCarloResult]:
    results = []
    for cfg in configs:
        if not quiet:
            print(f"running {cfg.label} ({cfg.n_runs} runs)...", file=sys.stderr)
        progress = None
        if not quiet:
            def progress(r, _label=cfg.label):
                print(f"  {_label} run {r.run}: {r.wall_clock:.1f}s", file=sys.stderr)
        results.append(monte_carlo(cfg, jobs=jobs, progress=progress))
    return results


def _cmd_simulate(args) -> int:
    raw = _load_raw_config(args.config, args.override)
    configs = build_configs(raw)
    results = _run_experiments(configs, args.jobs, args.quiet)
    print(f"{'variant':<16} {'overall RMS GOSPA':>18}")
    for mc in results:
        print(f"{mc.config.label:<16} {mc.overall:>18.4f}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        summary = {"results": [summary_dict(mc) for mc in results]}
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        for mc in results:
            _write_results_csv(out / f"results-{mc.config.label}.csv", mc)
        if not args.quiet:
            print(f"wrote {out / 'summary.json'}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    raw = _load_raw_config(args.config, args.override)
    try:
        periods = [int(tok) for tok in args.periods.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"bad period list {args.periods!r}")
    if not periods or min(periods) < 1:
        raise ConfigError("periods must be positive integers")
    table: dict[str, dict[int, float]] = {}
    for period in periods:
        raw["scenario"]["fusion_period"] = str(period)
        for cfg in build_configs(raw):
            if cfg.label in table and cfg.variant == "cpmbm":
                continue  # the centralised filter does not fuse
            mc = _run_experiments([cfg], args.jobs, args.quiet)[0]
            if cfg.variant == "cpmbm":
                table[cfg.label] = {p: mc.overall for p in periods}
            else:
                table.setdefault(cfg.label, {})[period] = mc.overall
    print(f"{'variant':<16}" + "".join(f" {f'N_f={p}':>12}" for p in periods))
    for label, row in table.items():
        print(f"{label:<16}" + "".join(f" {row[p]:>12.4f}" for p in periods))
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        doc = {
            "periods": periods,
            "overall_rms_gospa": {label: {str(p): v for p, v in row.items()} for label, row in table.items()},
        }
        (out / "sweep.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def _load_points(path: str) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")
    points = doc.get("points", doc) if isinstance(doc, dict) else doc
    arr = np.asarray(points, dtype=float)
    if arr.size and arr.ndim != 2:
        raise ConfigError(f"{path} must hold a list of points")
    return arr


def _cmd_gospa(args) -> int:
    try:
        params = GospaParams(args.cutoff, args.order)
    except ValueError as exc:
        raise ConfigError(str(exc))
    result = gospa(_load_points(args.truth), _load_points(args.estimates), params)
    print(f"total         {result.total!r}")
    print(f"localisation  {result.localisation!r}")
    print(f"missed        {result.missed!r}")
    print(f"false         {result.false!r}")
    return 0


def _read_pmb(src):
    try:
        text = Path(src).read_text() if isinstance(src, str) else src.read_text()
        return pmb_from_dict(json.loads(text))
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load PMB document {src}: {exc}")


def _cmd_fuse_demo(args) -> int:
    pmb1 = _read_pmb(args.pmb1 or _bundled("demo_pmb1.json"))
    pmb2 = _read_pmb(args.pmb2 or _bundled("demo_pmb2.json"))
    try:
        params = FusionParams(args.omega, args.gate, args.k)
    except ValueError as exc:
        raise ConfigError(str(exc))
    fused = fuse_gci(pmb1, pmb2, params, FilterParams())
    n1 = len(pmb1.bernoullis)
    print(f"fused {n1} + {len(pmb2.bernoullis)} components into {len(fused.tracks)} tracks, "
          f"{len(fused.globals_)} global hypotheses")
    print()
    print(f"{'weight':>10}  pairing")
    for g in sorted(fused.globals_, key=lambda g: -g.weight):
        pairs = []
        for i in range(n1):
            h = fused.tracks[i][g.local_indices[i]]
            if h.assigned is not None:
                pairs.append(f"(1.{i + 1}, 2.{h.assigned + 1})")
        print(f"{g.weight:>10.6f}  {' '.join(pairs) if pairs else '(no pairings)'}")
    top = fused.argmax_global()
    print()
    print("heaviest hypothesis components (existence > 0):")
    print(f"{'r':>8}  mean")
    for i, k in enumerate(top.local_indices):
        b = fused.tracks[i][k].bernoulli
        if b.r > 0.0:
            mean = " ".join(f"{v:8.3f}" for v in b.density.mean)
            print(f"{b.r:>8.4f}  [{mean}]")
    if args.output:
        Path(args.output).write_text(json.dumps(pmbm_to_dict(fused), indent=2, sort_keys=True) + "\n")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="pmbfuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--config", help="INI config file (defaults to the bundled benchmark)")
    sim.add_argument("--output", help="directory for summary.json and per-variant CSVs")
    sim.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                     help="override a config value (repeatable)")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    sim.add_argument("--quiet", action="store_true", help="suppress progress output")
    sim.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="simulate across fusion periods")
    sweep.add_argument("--config", help="INI config file")
    sweep.add_argument("--periods", default="1,5,10", help="comma-separated fusion periods")
    sweep.add_argument("--output", help="directory for sweep.json")
    sweep.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--quiet", action="store_true")
    sweep.set_defaults(func=_cmd_sweep)

    demo = sub.add_parser("fuse-demo", help="fuse two PMB JSON documents")
    demo.add_argument("--pmb1", help="first PMB (defaults to a bundled example)")
    demo.add_argument("--pmb2", help="second PMB")
    demo.add_argument("--omega", type=float, default=0.5)
    demo.add_argument("--gate", type=float, default=math.inf,
                      help="squared Mahalanobis pairing gate (default: none)")
    demo.add_argument("--k", type=int, default=100, help="global hypotheses to keep")
    demo.add_argument("--output", help="write the fused density as JSON")
    demo.set_defaults(func=_cmd_fuse_demo)

    met = sub.add_parser("gospa", help="GOSPA metric between two point-set files")
    met.add_argument("truth", help="JSON file with a list of points")
    met.add_argument("estimates", help="JSON file with a list of points")
    met.add_argument("--cutoff", type=float, default=10.0)
    met.add_argument("--order", type=float, default=2.0)
    met.set_defaults(func=_cmd_gospa)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"pmbfuse: {exc}", file=sys.stderr)
        return 1
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        print(f"pmbfuse: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
