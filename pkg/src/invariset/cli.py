"""
Command line front end.

    invariset <size|phase1|phase2|verify|bounds|demo> [options]

Settings are layered: built-in defaults, then the config echoed by an earlier
phase in the same output directory, then ``--config FILE``, then flags.

Exit codes: 0 success, 2 invalid parameters or missing artifacts, 3 a run hit
its hard cap (Phase I) or round cap (Phase II), 4 verification requested for
a system without a white-box oracle.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .dynamics import EXAMPLES, ConstraintBox, external_system, example_system
from .horizon import Phase1Config, estimate_horizon
from .identify import Phase2Config, identify_set
from .oracle import GridOracle, bound_table, sandwich_measures, violation_S_k, write_grid_csv
from .sampling import (
    hoeffding_sample_size,
    phase1_sample_size,
    phase1_sample_size_conservative,
    sample_uniform,
    scenario_confidence,
    scenario_sample_size,
)

log = logging.getLogger("invariset")

EXIT_OK, EXIT_USAGE, EXIT_CAP, EXIT_NO_ORACLE = 0, 2, 3, 4

# smaller of the two tolerances shown for each example
DEFAULT_DELTA_BAR = {"example1": 0.01, "lure": 0.2, "chatala": 0.03, "pwa": 0.05}


class UsageError(ValueError):
    pass


def parse_box(text: str) -> ConstraintBox:
    """``"lo1:hi1,lo2:hi2"`` -> box."""
    try:
        pairs = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
        lo, hi = zip(*pairs)
    except ValueError:
        raise UsageError(f"bad box {text!r}; expected lo:hi,lo:hi,...") from None
    return ConstraintBox(lo, hi)


def format_box(box: ConstraintBox) -> str:
    return ",".join(f"{lo!r}:{hi!r}" for lo, hi in zip(box.lower.tolist(), box.upper.tolist()))


@dataclass
class RunConfig:
    system: str = "example1"
    box: Optional[str] = None
    epsilon: float = 1e-3
    beta: float = 0.05
    eps_tilde: float = 1e-3
    beta_tilde: float = 0.01
    delta_bar: Optional[float] = None
    d: int = 1
    n_delta: Optional[int] = None
    max_rounds: int = 500
    seed: int = 0
    delta_traj: Optional[float] = None
    tbar: int = 100
    max_steps: int = 10_000
    grid: int = 500
    n_mc: int = 100_000
    out: str = "runs/default"

    @classmethod
    def from_layers(cls, *layers: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        merged = {}
        for layer in layers:
            for key, value in layer.items():
                if value is None:
                    continue
                if key not in types:
                    raise UsageError(f"unknown setting {key!r}")
                merged[key] = value
        cfg = cls(**{k: _convert(types[k], v) for k, v in merged.items()})
        cfg.validate()
        return cfg

    @property
    def is_extern(self) -> bool:
        return self.system.startswith("extern:")

    def resolve_box(self) -> ConstraintBox:
        if self.box is not None:
            return parse_box(self.box)
        if self.is_extern:
            raise UsageError("external systems need --box")
        return EXAMPLES[self.system].default_box

    def resolve_delta_bar(self) -> float:
        if self.delta_bar is not None:
            return self.delta_bar
        if self.is_extern:
            raise UsageError("external systems need --delta-bar")
        return DEFAULT_DELTA_BAR[self.system]

    def make_system(self):
        if self.is_extern:
            return external_system(self.system[len("extern:"):])
        return example_system(self.system)[0]

    def validate(self):
        if not self.is_extern and self.system not in EXAMPLES:
            raise UsageError(f"unknown system {self.system!r}")
        for name in ("epsilon", "beta", "eps_tilde", "beta_tilde"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise UsageError(f"{name} must lie in (0, 1), got {v}")
        if self.delta_bar is not None and not self.delta_bar > 0:
            raise UsageError("delta_bar must be positive")
        if self.d < 1 or self.max_rounds < 1 or self.n_mc < 1 or self.grid < 2:
            raise UsageError("d, max_rounds, n_mc must be >= 1 and grid >= 2")
        if self.n_delta is not None and self.n_delta < self.d:
            raise UsageError("n_delta must be >= d")
        if not 0 <= self.seed < 1 << 64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        try:
            box = self.resolve_box()
            Phase1Config(self.delta_traj, self.tbar, self.max_steps).resolved(box)
        except UsageError:
            if self.box is not None:
                raise
        except ValueError as err:
            raise UsageError(str(err)) from None
        if not self.is_extern and self.box is not None:
            if EXAMPLES[self.system]().dim() != parse_box(self.box).dim:
                raise UsageError("box dimension does not match the system")

    def phase1_config(self) -> Phase1Config:
        return Phase1Config(self.delta_traj, self.tbar, self.max_steps)

    def phase2_config(self) -> Phase2Config:
        return Phase2Config(self.resolve_delta_bar(), self.eps_tilde, self.beta_tilde, self.d,
                            self.max_rounds, self.n_delta)

    def echo(self) -> dict:
        d = asdict(self)
        d["box"] = self.box if self.box is not None else (
            None if self.is_extern else format_box(self.resolve_box()))
        return d


def _convert(tp, value):
    if value is None or not isinstance(value, str):
        return value
    tp = str(tp)
    if value.lower() in ("none", ""):
        return None
    if "int" in tp:
        return int(float(value)) if "e" in value.lower() else int(value)
    if "float" in tp:
        return float(value)
    return value


# --- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run settings")
    g.add_argument("--config", help="flat key = value settings file")
    g.add_argument("--system", help="example1 | lure | chatala | pwa | extern:<command>")
    g.add_argument("--box", help="constraint box as lo:hi,lo:hi,...")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--eps-tilde", dest="eps_tilde", type=float)
    g.add_argument("--beta-tilde", dest="beta_tilde", type=float)
    g.add_argument("--delta-bar", dest="delta_bar", type=float)
    g.add_argument("--d", type=int, help="scenario dimension used in the test-set confidence")
    g.add_argument("--n-delta", dest="n_delta", type=int, help="fixed test-set size per round")
    g.add_argument("--max-rounds", dest="max_rounds", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--tbar", type=int, help="minimum horizon before the recurrence test")
    g.add_argument("--delta-traj", dest="delta_traj", type=float)
    g.add_argument("--max-steps", dest="max_steps", type=int, help="hard cap on Phase I steps")
    g.add_argument("--grid", type=int, help="grid resolution per axis for verification")
    g.add_argument("--n-mc", dest="n_mc", type=int)
    g.add_argument("--out", help="run directory")
    g.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="invariset", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("size", parents=[common], help="sample sizes for the requested guarantees")
    sub.add_parser("phase1", parents=[common], help="sample and estimate the invariance horizon")
    sub.add_parser("phase2", parents=[common], help="identify inner/outer approximations")
    sub.add_parser("verify", parents=[common], help="grid and Monte-Carlo checks (built-in systems)")
    b = sub.add_parser("bounds", parents=[common], help="tabulate failure bounds over N")
    b.add_argument("--n-range", dest="n_range", default="1000:10000:1000", help="start:stop[:step], inclusive")
    demo = sub.add_parser("demo", parents=[common], help="full pipeline with the published settings")
    demo.add_argument("example", choices=sorted(EXAMPLES))
    return p


SETTING_KEYS = {f.name for f in fields(RunConfig)}


def _config_from_args(args, extra_layers=()) -> RunConfig:
    file_layer = io.read_flat_config(args.config) if args.config else {}
    flag_layer = {k: v for k, v in vars(args).items() if k in SETTING_KEYS and v is not None}
    if getattr(args, "example", None):
        flag_layer.setdefault("system", args.example)
        flag_layer.setdefault("out", f"runs/{args.example}")
    return RunConfig.from_layers(*extra_layers, file_layer, flag_layer)


def _previous_echo(args) -> dict:
    """Config echoed by Phase I in the output directory named on the command line or in the file."""
    out = args.out
    if out is None and args.config:
        out = io.read_flat_config(args.config).get("out")
    path = Path(out or RunConfig.out) / "horizon.json"
    if path.exists():
        return io.read_json(path).get("config", {})
    return {}


# --- commands ------------------------------------------------------------------


def cmd_size(cfg: RunConfig, stream=sys.stdout) -> int:
    n_delta = cfg.n_delta if cfg.n_delta is not None else scenario_sample_size(cfg.eps_tilde, cfg.beta_tilde, cfg.d)
    beta_delta = scenario_confidence(n_delta, cfg.eps_tilde, cfg.d)
    rows = [
        ("N", phase1_sample_size(cfg.epsilon, cfg.beta), f"(1-eps)^N <= beta, eps={cfg.epsilon!r}, beta={cfg.beta!r}"),
        ("N_conservative", phase1_sample_size_conservative(cfg.epsilon, cfg.beta), "(1/eps)(1-eps)^N <= beta"),
        ("N_hoeffding", hoeffding_sample_size(cfg.epsilon, cfg.beta), "(2/eps)exp(-2N eps^2) <= beta"),
        ("N_delta", n_delta,
         f"beta_delta={beta_delta:.6g} {'<' if beta_delta < cfg.beta_tilde else '>='} beta_tilde={cfg.beta_tilde!r}"
         f" (d={cfg.d}, eps_tilde={cfg.eps_tilde!r})"),
    ]
    for name, value, note in rows:
        print(f"{name:<15} {value:>10}  {note}", file=stream)
    return EXIT_OK


def cmd_phase1(cfg: RunConfig, stream=sys.stdout) -> int:
    box = cfg.resolve_box()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    n = phase1_sample_size(cfg.epsilon, cfg.beta)
    omega = sample_uniform(box, n, cfg.seed)
    system = cfg.make_system()
    t0 = time.perf_counter()
    try:
        report = estimate_horizon(system, omega, box, cfg.phase1_config())
    finally:
        if hasattr(system, "close"):
            system.close()
    elapsed = time.perf_counter() - t0

    io.write_points(out / "omega.csv", omega.points)
    doc = {"config": cfg.echo(), **io.horizon_to_dict(report), "timings": {"phase1_seconds": elapsed}}
    io.write_json(out / "horizon.json", doc)
    print(f"N = {n}", file=stream)
    print(f"t_bar = {report.t_bar}", file=stream)
    print(f"t_star = {report.t_star}", file=stream)
    print(f"terminated_by = {report.terminated_by}", file=stream)
    return EXIT_CAP if report.hit_hard_cap else EXIT_OK


def cmd_phase2(cfg: RunConfig, stream=sys.stdout) -> int:
    out = Path(cfg.out)
    if not (out / "omega.csv").exists() or not (out / "horizon.json").exists():
        raise UsageError(f"{out}: run phase1 first (omega.csv / horizon.json missing)")
    box = cfg.resolve_box()
    omega = io.read_points(out / "omega.csv")
    hdoc = io.read_json(out / "horizon.json")
    horizon = io.horizon_from_dict(hdoc)
    p2 = cfg.phase2_config()
    system = cfg.make_system()

    def show(rnd):
        print(f"round: n_reference={rnd.n_reference} delta_star={rnd.delta_star!r}", file=stream)

    t0 = time.perf_counter()
    try:
        result = identify_set(system, omega, horizon, box, p2, cfg.seed, callback=show)
    finally:
        if hasattr(system, "close"):
            system.close()
    elapsed = time.perf_counter() - t0

    io.write_classifier(out / "classifier.csv", result.reference, result.delta_star, box)
    report = {
        "config": cfg.echo(),
        "N": horizon.n,
        "t_bar": horizon.t_bar,
        "t_star": horizon.t_star,
        "theta": hdoc["theta"],
        "phase1_terminated_by": horizon.terminated_by,
        "n_delta": result.n_delta,
        "beta_delta": result.beta_delta,
        "rounds": [{"n_reference": r.n_reference, "delta_star": r.delta_star,
                    "n_test_inside": r.n_test_inside, "n_test_outside": r.n_test_outside}
                   for r in result.rounds],
        "delta_star": result.delta_star,
        "n_reference": len(result.reference),
        "converged": result.converged,
        "verification": None,
        "timings": {**hdoc.get("timings", {}), "phase2_seconds": elapsed},
    }
    io.write_json(out / "report.json", report)
    print(f"delta_star = {result.delta_star!r} after {len(result.rounds)} rounds "
          f"(reference {len(result.reference)} points)", file=stream)
    return EXIT_OK if result.converged else EXIT_CAP


def cmd_verify(cfg: RunConfig, stream=sys.stdout) -> int:
    if cfg.is_extern:
        print("verify needs a built-in system: no white-box oracle for external simulators", file=sys.stderr)
        return EXIT_NO_ORACLE
    out = Path(cfg.out)
    if not (out / "classifier.csv").exists():
        raise UsageError(f"{out}: run phase2 first (classifier.csv missing)")
    loaded = io.read_classifier(out / "classifier.csv")
    box, t_star = loaded.box, loaded.reference.t_star
    system = cfg.make_system()

    t0 = time.perf_counter()
    grid = GridOracle(system, box, cfg.grid, k_max=max(2 * t_star, t_star + 10))
    in_o = grid.mask(t_star)
    in_inner = loaded.inner.contains(grid.centers)
    in_outer = loaded.outer.contains(grid.centers)
    write_grid_csv(out / "grid.csv", grid.centers, in_o, in_inner, in_outer)

    sw = sandwich_measures(loaded.inner, loaded.outer, system, box, t_star, cfg.n_mc, cfg.seed)
    s_k = violation_S_k(system, box, t_star, cfg.n_mc, cfg.seed)
    elapsed = time.perf_counter() - t0

    def bound(est):
        return cfg.eps_tilde + 3 * est.sigma

    verification = {
        "grid_resolution": cfg.grid,
        "grid_fixed_point": grid.fixed_point(),
        "grid_measure_O_t_star": float(in_o.mean()),
        "grid_inner_not_in_outer": int(np.sum(in_inner & ~in_outer)),
        "n_mc": cfg.n_mc,
        "inner_excess": sw.inner_excess.point_estimate,
        "inner_excess_sigma": sw.inner_excess.sigma,
        "outer_deficit": sw.outer_deficit.point_estimate,
        "outer_deficit_sigma": sw.outer_deficit.sigma,
        "inner_excess_ok": sw.inner_excess.point_estimate <= bound(sw.inner_excess),
        "outer_deficit_ok": sw.outer_deficit.point_estimate <= bound(sw.outer_deficit),
        "measure_inner": sw.measure_inner,
        "measure_outer": sw.measure_outer,
        "measure_O_t_star": sw.measure_target,
        "S_t_star": s_k.point_estimate,
        "S_t_star_sigma": s_k.sigma,
    }
    report_path = out / "report.json"
    report = io.read_json(report_path) if report_path.exists() else {"config": cfg.echo()}
    report["verification"] = verification
    report.setdefault("timings", {})["verify_seconds"] = elapsed
    io.write_json(report_path, report)
    for key in ("grid_fixed_point", "inner_excess", "outer_deficit", "S_t_star", "grid_inner_not_in_outer"):
        print(f"{key} = {verification[key]}", file=stream)
    return EXIT_OK


def parse_n_range(text: str):
    try:
        parts = [int(float(p)) for p in text.split(":")]
    except ValueError:
        raise UsageError(f"bad n-range {text!r}") from None
    if len(parts) == 2:
        parts.append(max(1, (parts[1] - parts[0]) // 10 or 1))
    if len(parts) != 3 or parts[0] < 1 or parts[1] < parts[0] or parts[2] < 1:
        raise UsageError(f"bad n-range {text!r}; expected start:stop[:step] with 1 <= start <= stop")
    return range(parts[0], parts[1] + 1, parts[2])


def cmd_bounds(cfg: RunConfig, n_range: str, stream=sys.stdout, write_file: bool = False) -> int:
    lines = ["N,thm1,thm2,hoeffding"]
    for n in parse_n_range(n_range):
        row = bound_table(cfg.epsilon, n)
        lines.append(f"{n},{row.thm1!r},{row.thm2!r},{row.hoeffding!r}")
    text = "\n".join(lines) + "\n"
    stream.write(text)
    if write_file:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bounds.csv").write_text(text)
    return EXIT_OK


def cmd_demo(cfg: RunConfig, stream=sys.stdout) -> int:
    code = cmd_phase1(cfg, stream)
    if code != EXIT_OK:
        return code
    code = cmd_phase2(cfg, stream)
    if code != EXIT_OK:
        return code
    return cmd_verify(cfg, stream)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    stream = sys.stdout
    try:
        layers = [_previous_echo(args)] if args.command in ("phase2", "verify") else []
        cfg = _config_from_args(args, layers)
        if args.command == "size":
            return cmd_size(cfg, stream)
        if args.command == "phase1":
            return cmd_phase1(cfg, stream)
        if args.command == "phase2":
            return cmd_phase2(cfg, stream)
        if args.command == "verify":
            return cmd_verify(cfg, stream)
        if args.command == "bounds":
            return cmd_bounds(cfg, args.n_range, stream, write_file=args.out is not None)
        if args.command == "demo":
            return cmd_demo(cfg, stream)
    except (UsageError, ValueError) as err:
        print(f"invariset: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    parser.error(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
