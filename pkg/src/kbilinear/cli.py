"""Command-line driver: data collection, fitting and the benchmark experiments.

Every command reads one YAML config. Outputs go to ``--out`` (or the
config's ``out``) and are deterministic given the config and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bounds as bnd
from . import dataset as ds
from .config import ExperimentConfig, dump_defaults, load_config
from .errors import ConfigError, KBilinearError
from .kernel import KernelSpec
from .regress import fit_all
from .surrogate import BilinearSurrogate, build_baseline, build_kedmd, residual, save_model
from .system import SamplingConfig, flow, get_system

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

BENCHMARK_CSV = "benchmark_prediction.csv"
BENCHMARK_COLUMNS = ["method", "d", "t", "mean_err", "min_err", "max_err"]
METHODS = ("kedmd", "kernel_baseline", "monomial_baseline")


def _kernel(cfg: ExperimentConfig) -> KernelSpec:
    return KernelSpec(n=cfg.kernel.n, s=cfg.kernel.s, scale=cfg.kernel.scale)


def _sampling(cfg: ExperimentConfig, dt: float | None = None) -> SamplingConfig:
    return SamplingConfig(cfg.sampling.dt if dt is None else dt, cfg.sampling.substeps)


def _system(cfg: ExperimentConfig):
    system = get_system(cfg.system)
    if system.n != cfg.kernel.n:
        raise ConfigError(f"kernel.n = {cfg.kernel.n} but system {cfg.system!r} has n = {system.n}")
    return system


def _generate(cfg: ExperimentConfig, d: int, seed: int, dt: float | None = None) -> ds.Dataset:
    return ds.generate(
        _system(cfg),
        _sampling(cfg, dt),
        _kernel(cfg),
        d,
        d_j=cfg.data.d_j,
        seed=seed,
        sigma_threshold=cfg.data.sigma_threshold,
        fill_resolution=cfg.data.fill_resolution,
    )


# -- commands ----------------------------------------------------------------


def cmd_collect(cfg: ExperimentConfig, out: Path, seed: int) -> Path:
    data = _generate(cfg, cfg.data.d, seed)
    h = data.centers.fill_distance
    print(f"centers d = {data.centers.d}, triplets = {data.n_triplets}")
    print(f"fill distance h_X = {h:.6g}")
    for t in data.triplets:
        print(f"  center {t.center_index}: x = {np.array2string(t.center, precision=6)}, sigma_min = {t.sigma_min:.6g}")
    if h >= 0.5 * cfg.kernel.scale:
        raise ConfigError(
            f"fill distance {h:.6g} is not below half the kernel scale ({0.5 * cfg.kernel.scale:.6g}); increase data.d"
        )
    path = ds.save(data, out / "dataset")
    print(f"dataset written to {path}")
    return path


def fit_dataset(data: ds.Dataset) -> BilinearSurrogate:
    return build_kedmd(data.centers, fit_all(data.triplets), data.kernel)


def cmd_fit(cfg: ExperimentConfig, out: Path, dataset_path: Path) -> Path:
    data = ds.load(dataset_path)
    model = fit_dataset(data)
    rep = model.build_report
    print(f"kernel matrix condition estimate = {rep['condition']:.6e}")
    print(f"interpolation residual = {rep['interpolation_residual']:.3e}")
    print(f"equilibrium residual = {rep['equilibrium_residual']:.3e}")
    path = save_model(model, out / "model.json")
    print(f"model written to {path}")
    return path


def benchmark_rows(cfg: ExperimentConfig, seed: int) -> list[list]:
    """Open-loop lifted prediction errors from ``x(0) = 0`` for every d and method.

    The same input realizations drive every d and method.
    """
    system = _system(cfg)
    sampling = _sampling(cfg)
    bench = cfg.benchmark
    T, R = int(bench.horizon), int(bench.realizations)
    box = system.input_box
    rng = np.random.default_rng([seed, 1])
    lo, hi = np.asarray(box.lo), np.asarray(box.hi)
    inputs = lo + (hi - lo) * rng.random((R, T, system.m))

    # true trajectories do not depend on d or method
    x = np.zeros((R, T + 1, system.n))
    for t in range(T):
        x[:, t + 1] = flow(system, sampling, x[:, t], inputs[:, t])

    rows = []
    for d in bench.d_list:
        data = _generate(cfg, int(d), seed)
        kedmd = fit_dataset(data)
        X, U, Xp = data.pooled()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            models = {
                "kedmd": kedmd,
                "kernel_baseline": build_baseline(X, U, Xp, "kernel", data.kernel, data.centers),
                "monomial_baseline": build_baseline(X, U, Xp, "monomial"),
            }
        for name in METHODS:
            model = models[name]
            pred = model.rollout(np.zeros((R, system.n)), inputs).states
            truth = model.lift(x.reshape(-1, system.n)).reshape(R, T + 1, -1)
            err = np.full((R, T + 1), np.inf)
            k = pred.shape[1]
            err[:, :k] = np.linalg.norm(pred - truth[:, :k], axis=2)
            for t in range(T + 1):
                col = err[:, t]
                rows.append([name, int(d), t, float(col.mean()), float(col.min()), float(col.max())])
    return rows


def write_benchmark(rows: list[list], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCHMARK_COLUMNS)
        for method, d, t, mean, lo, hi in rows:
            w.writerow([method, d, t, ds.fmt(mean), ds.fmt(lo), ds.fmt(hi)])
    return path


def time_averaged(rows: list[list]) -> dict[tuple[str, int], float]:
    acc: dict[tuple[str, int], list[float]] = {}
    for method, d, _, mean, _, _ in rows:
        acc.setdefault((method, d), []).append(mean)
    return {k: float(np.mean(v)) for k, v in acc.items()}


def cmd_benchmark_prediction(cfg: ExperimentConfig, out: Path, seed: int) -> Path:
    rows = benchmark_rows(cfg, seed)
    path = write_benchmark(rows, out / BENCHMARK_CSV)
    for (method, d), v in sorted(time_averaged(rows).items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"{method:>18s} d={d:<3d} time-averaged mean error = {v:.6e}")
    print(f"benchmark written to {path}")
    return path


def scaling_report(cfg: ExperimentConfig, seed: int) -> bnd.ValidationReport:
    system = _system(cfg)
    kernel = _kernel(cfg)
    sc = cfg.scaling
    common = dict(d_j=cfg.data.d_j, seed=seed, substeps=cfg.sampling.substeps, sigma_threshold=cfg.data.sigma_threshold)
    dt_study = bnd.dt_scaling_study(system, kernel, sc.d, sc.dt_list, nu=sc.grid_u, **common)
    fill_study = bnd.fill_scaling_study(system, kernel, sc.d_list, sc.dt_fill, nx=sc.grid_x, nu=sc.grid_u, **common)

    # bound margin and C1 calibration for the configured base model
    sampling = _sampling(cfg)
    data = _generate(cfg, sc.d, seed)
    model = fit_dataset(data)
    constants = bnd.constants_for(
        model,
        data.triplets,
        system,
        sampling,
        data.centers.fill_distance,
        C1=cfg.bounds.C1,
        C2=cfg.bounds.C2,
        h0=cfg.bounds.h0,
    )
    report = bnd.validate_empirically(
        model,
        system,
        sampling,
        bnd.validation_grid(system, sc.grid_x, sc.grid_u),
        constants,
        dt_study,
        fill_study,
    )

    # origin check for every configuration that was fitted
    origin = {}
    for dt in sc.dt_list:
        m = fit_dataset(_generate(cfg, sc.d, seed, dt))
        origin[f"dt={dt!r},d={sc.d}"] = _origin_residual(m, system, _sampling(cfg, dt))
    for d in sc.d_list:
        m = fit_dataset(_generate(cfg, int(d), seed, sc.dt_fill))
        origin[f"dt={sc.dt_fill!r},d={d}"] = _origin_residual(m, system, _sampling(cfg, sc.dt_fill))
    report.rows["origin_residuals"] = origin
    bad = [k for k, v in origin.items() if v >= 1e-8]
    if bad:
        report.flags.append(f"origin residual >= 1e-8 for {', '.join(bad)}")
    return report


def _origin_residual(model, system, sampling) -> float:
    r = residual(model, system, sampling, np.zeros(system.n), np.zeros(system.m))
    return float(np.linalg.norm(r))


def cmd_scaling_study(cfg: ExperimentConfig, out: Path, seed: int) -> Path:
    report = scaling_report(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "scaling_report.json", out / "scaling_grid.csv")
    with open(out / "scaling_report.json") as fh:
        doc = json.load(fh)
    doc["origin_residuals"] = report.rows["origin_residuals"]
    with open(out / "scaling_report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "scaling_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["study", "parameter", "value", "max_residual"])
        for study in (report.dt_scaling, report.fill_scaling):
            for v, r in zip(study.values, study.measured):
                w.writerow([f"{study.parameter}_scaling", study.parameter, v, ds.fmt(r)])
    print(f"dt-scaling slope at centers = {report.dt_scaling.slope:.4f}")
    fs = report.fill_scaling
    print(f"fill-scaling max residuals (d = {fs.values}) = {[f'{v:.4e}' for v in fs.measured]}")
    print(f"bound margin with C1 = {report.C1}, C2 = {report.C2}: {report.bound_margin:.4e}")
    if report.calibrated_C1 is None:
        print("calibrated C1: none (bound fails at x = 0 for the given C2)")
    else:
        print(f"calibrated C1 = {report.calibrated_C1:.6e}")
    for flag in report.flags:
        print(f"warning: {flag}", file=sys.stderr)
    print(f"report written to {out / 'scaling_report.json'}")
    return out / "scaling_report.json"


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kbilinear",
        description="Bilinear kernel-EDMD surrogates with residual bounds.",
        epilog="Config defaults (YAML):\n\n" + dump_defaults(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "collect": "sample the true system at kernel centers and write a dataset",
        "fit": "fit a kernel-EDMD surrogate from a dataset",
        "benchmark-prediction": "open-loop prediction errors of kEDMD and two baselines",
        "scaling-study": "residual scaling in dt and fill distance, bound margins and C1 calibration",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: config 'out')")
        p.add_argument("--seed", type=int, default=None, help="overrides data.seed")
        if name == "fit":
            p.add_argument("--dataset", type=Path, default=None, help="dataset directory (default: <out>/dataset)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not args.config.is_file():
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: invalid config {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out if args.out is not None else Path(cfg.out)
    seed = cfg.data.seed if args.seed is None else args.seed
    commands = {
        "collect": lambda: cmd_collect(cfg, out, seed),
        "fit": lambda: cmd_fit(cfg, out, args.dataset or out / "dataset"),
        "benchmark-prediction": lambda: cmd_benchmark_prediction(cfg, out, seed),
        "scaling-study": lambda: cmd_scaling_study(cfg, out, seed),
    }
    code = EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            commands[args.command]()
        except (KBilinearError, KeyError, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_FAILURE
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
