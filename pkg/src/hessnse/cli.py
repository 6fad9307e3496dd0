"""Command-line entry point: ``hessnse <subcommand> [--config FILE] [--out DIR]``.

Exit codes: 0 success, 2 invalid config or usage, 3 a verification
criterion failed, 4 numerical failure (CFL violation or discrete
blow-up), 5 missing or unreadable input.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import config as cfgmod
from .fields import generate_test_field, make_grid
from .identities import IDENTITY_CHECKS, kukavica_ziane_residual
from .inequalities import FACTOR_LABELS, BumpFamily, lemma_sweep
from .io import format_float, read_trajectory, write_rows, write_trajectory
from .monitor import CriterionConfig, MissingDiagnostics, evaluate_criterion, summary_text
from .norms import MixedNormAccumulator, hessian_key, serrin_alpha
from .solver import BlowupError, CFLViolation, energy_report, integrate, temporal_convergence

log = logging.getLogger("hessnse")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFICATION = 3
EXIT_NUMERICAL = 4
EXIT_INPUT = 5


class NumericalFailure(RuntimeError):
    """Carries the files already written when a run ends on a numerical failure."""

    def __init__(self, message: str, files: list[Path]):
        super().__init__(message)
        self.files = files


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, help="base seed for every seeded component")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hessnse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hessnse {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("verify-identities", parents=[common],
                       help="certify the trilinear identities on random solenoidal fields")
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--n-values", type=_ints)

    p = sub.add_parser("verify-inequalities", parents=[common],
                       help="ratio sweep for the anisotropic trilinear inequalities")
    p.add_argument("--lemma", action="append", choices=["2.2", "2.3"])
    p.add_argument("--r", dest="r_values", type=_floats, help="comma-separated r values")
    p.add_argument("--family-size", type=int)
    p.add_argument("--n", type=int)

    p = sub.add_parser("simulate", parents=[common], help="run the pseudospectral solver")
    p.add_argument("--kind")
    p.add_argument("--n", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--snapshot-stride", type=int)
    p.add_argument("--betas", type=_floats)
    p.add_argument("--save-snapshots", action="store_true", default=None)

    p = sub.add_parser("monitor", parents=[common],
                       help="evaluate criterion quantities on a simulate output directory")
    p.add_argument("--run", type=Path, help="directory written by simulate (default: --out)")
    p.add_argument("--betas", type=_floats)
    p.add_argument("--triple", type=_ints)
    p.add_argument("--tau", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--recompute", action="store_true",
                   help="recompute Hessian norms from stored snapshots")

    p = sub.add_parser("convergence", parents=[common], help="temporal convergence study")
    p.add_argument("--kind")
    p.add_argument("--dts", type=_floats)

    p = sub.add_parser("defaults", help="print the default configuration")
    p.add_argument("--markdown", action="store_true", help="print the reference page instead")
    return parser


def _apply_overrides(cfg: cfgmod.RunConfig, args) -> cfgmod.RunConfig:
    if args.out is not None:
        cfg.output.directory = str(args.out)
    if args.seed is not None:
        cfg.initial_condition.seed = args.seed
        cfg.inequalities.seed = args.seed
        cfg.identities.seeds = [args.seed + m for m in range(len(cfg.identities.seeds))]
    cmd = args.subcommand
    cfg.subcommand = cmd
    if cmd == "verify-identities":
        if args.seeds:
            cfg.identities.seeds = args.seeds
        if args.n_values:
            cfg.identities.n_values = args.n_values
    elif cmd == "verify-inequalities":
        if args.lemma:
            cfg.inequalities.lemmas = args.lemma
        if args.r_values:
            cfg.inequalities.r_values = args.r_values
        if args.family_size is not None:
            cfg.inequalities.family_size = args.family_size
        if args.n is not None:
            cfg.inequalities.n = args.n
    elif cmd == "simulate":
        for name, target in (("kind", (cfg.initial_condition, "kind")),
                             ("n", (cfg.grid, "n")), ("nu", (cfg.grid, "nu")),
                             ("dt", (cfg.time, "dt")), ("t_end", (cfg.time, "t_end")),
                             ("snapshot_stride", (cfg.time, "snapshot_stride")),
                             ("betas", (cfg.criterion, "betas")),
                             ("save_snapshots", (cfg.output, "save_snapshots"))):
            value = getattr(args, name)
            if value is not None:
                setattr(*target, value)
    elif cmd == "monitor":
        for name, target in (("betas", "betas"), ("triple", "triple"), ("tau", "tau"),
                             ("epsilon", "epsilon")):
            value = getattr(args, name)
            if value is not None:
                setattr(cfg.criterion, target, value)
    elif cmd == "convergence":
        if args.kind is not None:
            cfg.convergence.kind = args.kind
        if args.dts:
            cfg.convergence.dts = args.dts
    return cfg.validate()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, cfg: cfgmod.RunConfig, files: list[Path], status: str) -> Path:
    cfg_path = out / f"config-{cfg.subcommand}.yaml"
    cfg_path.write_text(cfg.to_yaml())
    files = sorted(set(files) | {cfg_path})
    manifest = {
        "subcommand": cfg.subcommand,
        "status": status,
        "config_sha256": cfg.digest(),
        "seeds": {
            "initial_condition": cfg.initial_condition.seed,
            "identities": list(cfg.identities.seeds),
            "inequalities": cfg.inequalities.seed,
        },
        "versions": {
            "hessnse": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "files": {str(p.relative_to(out)): _sha256(p) for p in files},
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = out / f"manifest-{cfg.subcommand}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# Subcommands. Each returns (written files, failure message or None).


def run_verify_identities(cfg: cfgmod.RunConfig, out: Path):
    c = cfg.identities
    rows, failures = [], []
    for n in c.n_values:
        grid = make_grid(n, cfg.grid.nu)
        for seed in c.seeds:
            u = generate_test_field("random_solenoidal", seed, grid)
            for name, check in IDENTITY_CHECKS.items():
                rep = check(u)
                ok = rep.rel_residual <= c.tolerance
                rows.append([name, seed, n, rep.lhs, rep.rhs, rep.abs_residual,
                             rep.rel_residual, rep.sign, int(ok)])
                if not ok:
                    failures.append(f"{name} seed={seed} n={n} rel={rep.rel_residual:.3e}")
            w = generate_test_field("random_unprojected", seed, grid)
            rep = kukavica_ziane_residual(w, check=False)
            ok = rep.rel_residual > c.negative_control_threshold
            rows.append(["negative_control_kukavica_ziane", seed, n, rep.lhs, rep.rhs,
                         rep.abs_residual, rep.rel_residual, rep.sign, int(ok)])
            if not ok:
                failures.append(f"negative control seed={seed} n={n} rel={rep.rel_residual:.3e}")
    path = out / "identities.csv"
    write_rows(path, ["identity", "seed", "n", "lhs", "rhs", "abs_residual", "rel_residual",
                      "sign", "pass"], rows)
    return [path], "; ".join(failures) or None


def run_verify_inequalities(cfg: cfgmod.RunConfig, out: Path):
    c = cfg.inequalities
    grid = make_grid(c.n, cfg.grid.nu)
    family = BumpFamily(c.family_size, c.seed)
    r_values = [float(r) for r in c.r_values]
    lemmas = [str(x) for x in c.lemmas]
    header = ["row_type", "lemma", "r", "index", "lhs", "rhs_product", "ratio", *FACTOR_LABELS]
    rows, failures = [], []
    best = {(lemma, r): (-1.0, None) for lemma in lemmas for r in r_values}
    for index in range(family.count):
        f, g, h = family.triple(index, grid)
        for lemma in lemmas:
            for rep in lemma_sweep(f, g, h, r_values, lemma):
                rows.append(["triple", lemma, rep.r, index, rep.lhs, rep.rhs_product, rep.ratio,
                             *[rep.factor_norms[k] for k in FACTOR_LABELS]])
                if not math.isfinite(rep.ratio):
                    failures.append(f"lemma {lemma} r={rep.r} triple {index}: ratio not finite")
                if rep.ratio > best[(lemma, rep.r)][0]:
                    best[(lemma, rep.r)] = (rep.ratio, index)
    for (lemma, r), (sup, idx) in best.items():
        rows.append(["summary", lemma, r, idx, "", "", sup] + [""] * len(FACTOR_LABELS))
    path = out / "inequalities.csv"
    write_rows(path, header, rows)
    return [path], "; ".join(failures) or None


def run_simulate(cfg: cfgmod.RunConfig, out: Path):
    ic = cfg.initial_condition
    grid = make_grid(cfg.grid.n, cfg.grid.nu)
    u0 = generate_test_field(ic.kind, ic.seed, grid, amplitude=ic.amplitude, kmax=ic.kmax,
                             decay=ic.decay)
    crit = cfg.criterion
    triples = [(1, 2, 3)]
    if tuple(crit.triple) != (1, 2, 3):
        triples.append(tuple(crit.triple))
    t = cfg.time
    traj = integrate(u0, t.dt, t.t_end, sample_stride=t.sample_stride,
                     snapshot_stride=t.snapshot_stride, betas=[float(b) for b in crit.betas],
                     triples=triples, serrin_betas=[float(b) for b in crit.serrin_betas],
                     keep_snapshots=cfg.output.save_snapshots, cfl=t.cfl)
    files = write_trajectory(traj, out)
    rep = energy_report(traj, traj.samples[0].t, traj.end_time)
    path = out / "energy.csv"
    write_rows(path, [f.name for f in dataclasses.fields(rep)] + ["relative_defect"],
               [[getattr(rep, f.name) for f in dataclasses.fields(rep)] + [rep.relative_defect]])
    files.append(path)
    if traj.blowup:
        raise NumericalFailure(f"discrete blow-up at t={traj.blowup_time!r}", files)
    return files, None


def run_monitor(cfg: cfgmod.RunConfig, out: Path, run_dir: Path, recompute: bool):
    if not (run_dir / "trajectory.json").exists():
        raise FileNotFoundError(f"{run_dir} does not contain a simulate output")
    traj = read_trajectory(run_dir, load_snapshots=True)
    crit = cfg.criterion
    config = CriterionConfig(betas=tuple(crit.betas), triple=tuple(crit.triple), tau=crit.tau,
                             epsilon=crit.epsilon, serrin_betas=tuple(crit.serrin_betas))
    report = evaluate_criterion(traj, config, recompute=recompute)
    files = []
    rows = []
    for beta, res in report.per_beta.items():
        b = format_float(beta)
        rows += [
            ["criterion_integral", b, res.alpha, res.integral],
            ["criterion_mixed_norm", b, res.alpha, res.mixed_norm],
            ["component1_integral", b, res.alpha, res.component_integrals[0]],
            ["component2_integral", b, res.alpha, res.component_integrals[1]],
            ["smallness_quantity", b, res.alpha, res.smallness],
            ["smallness_verdict", b, res.alpha, int(res.verdict)],
        ]
    for beta, val in report.serrin.items():
        rows.append(["serrin_integral", format_float(beta), serrin_alpha(beta), val])
    path = out / "criterion.csv"
    write_rows(path, ["quantity", "beta", "alpha", "value"], rows)
    files.append(path)

    series_header = ["t"] + [hessian_key(config.triple, b) for b in config.betas]
    series_rows = [[t] + [report.per_beta[b].series[m] for b in config.betas]
                   for m, t in enumerate(report.times)]
    path = out / "criterion_series.csv"
    write_rows(path, series_header, series_rows)
    files.append(path)

    for beta, res in report.per_beta.items():
        acc = MixedNormAccumulator(res.alpha)
        for t, v in zip(report.times, res.series):
            acc.append(t, v)
        path = out / f"mixed_norm_b{format_float(beta)}.csv"
        acc.write_csv(path)
        files.append(path)

    for beta, series in report.gronwall.items():
        keys = ["t_mid", "growth", "dissipation", "lhs", "driver", "ratio"]
        path = out / f"gronwall_b{format_float(beta)}.csv"
        write_rows(path, keys, zip(*(series[k] for k in keys)))
        files.append(path)

    path = out / "summary.txt"
    path.write_text(summary_text(report))
    files.append(path)
    return files, None


def run_convergence(cfg: cfgmod.RunConfig, out: Path):
    c = cfg.convergence
    study = temporal_convergence(c.kind, c.n, c.nu, c.t_end, c.dts, c.dt_ref, cfl=cfg.time.cfl)
    path = out / "convergence.csv"
    write_rows(path, ["dt", "error"], [[dt, err] for dt, err in zip(study.dts, study.errors)])
    lo, hi = c.order_range
    ok = lo <= study.order <= hi
    summary = out / "convergence_summary.csv"
    write_rows(summary, ["kind", "reference_dt", "order", "order_low", "order_high", "pass"],
               [[study.kind, study.reference_dt, study.order, float(lo), float(hi), int(ok)]])
    failure = None if ok else f"fitted order {study.order:.3f} outside [{lo}, {hi}]"
    return [path, summary], failure


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.subcommand == "defaults":
        text = cfgmod.reference_markdown() if args.markdown else cfgmod.RunConfig().to_yaml()
        sys.stdout.write(text)
        return EXIT_OK
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
        cfg = _apply_overrides(cfg, args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    code, status = EXIT_OK, "ok"
    try:
        if args.subcommand == "verify-identities":
            files, failure = run_verify_identities(cfg, out)
        elif args.subcommand == "verify-inequalities":
            files, failure = run_verify_inequalities(cfg, out)
        elif args.subcommand == "simulate":
            files, failure = run_simulate(cfg, out)
        elif args.subcommand == "monitor":
            files, failure = run_monitor(cfg, out, args.run or out, args.recompute)
        else:
            files, failure = run_convergence(cfg, out)
        if failure:
            print(f"verification failed: {failure}", file=sys.stderr)
            code, status = EXIT_VERIFICATION, "verification_failed"
    except NumericalFailure as exc:
        files = exc.files
        print(f"numerical failure: {exc}", file=sys.stderr)
        code, status = EXIT_NUMERICAL, "blowup"
    except BlowupError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code, status = EXIT_NUMERICAL, "blowup"
    except CFLViolation as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code, status = EXIT_NUMERICAL, "cfl_violation"
    except (FileNotFoundError, MissingDiagnostics) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_manifest(out, cfg, files, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
