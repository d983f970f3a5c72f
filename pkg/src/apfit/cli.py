"""Command line front end.

Subcommands:

* ``fit``     : configure and run a fit, write export files
* ``generate``: produce synthetic voltage files from a model (self-fit data)
* ``bench``   : repeat a fit and report wall-time statistics
* ``models``  : list models or show one model's parameter catalog

Exit codes: 0 success, 2 configuration/validation problems, 1 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .dataio import (ApdDataset, DataError, VoltageDataset, load_voltage_file,
                     normalize, parse_apd_list)
from .models import ModelId, model_spec, reference_params
from .orchestrator import (ConfigError, FitConfig, bench, build_job,
                           config_from_dict, config_to_dict,
                           export_convergence_csv, export_parameters,
                           export_run_details, export_trace_csv, run_fit)
from .pso import PsoHyper
from .simulator import PacingConfig, simulate
from .stimulus import BiphasicStimulus, SquareStimulus

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _write_atomic(path: str | Path, text: str) -> None:
    """Write via a temp file and rename so partial files never appear."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                               prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _parse_data_flag(arg: str) -> tuple[str, float, float]:
    """``path:cl_ms[:weight]`` (split from the right; paths may hold colons)."""
    parts = arg.rsplit(":", 2)
    if len(parts) == 3 and _is_float(parts[1]) and _is_float(parts[2]):
        return parts[0], float(parts[1]), float(parts[2])
    parts = arg.rsplit(":", 1)
    if len(parts) == 2 and _is_float(parts[1]):
        return parts[0], float(parts[1]), 1.0
    raise DataError(f"--data expects path:cl_ms[:weight], got {arg!r}")


def _parse_apd_flag(arg: str) -> tuple[str, float, float, float]:
    """``list:cl_ms:threshold[:weight]`` with a comma-separated APD list."""
    parts = arg.rsplit(":", 3)
    if len(parts) == 4 and all(_is_float(p) for p in parts[1:]):
        return parts[0], float(parts[1]), float(parts[2]), float(parts[3])
    parts = arg.rsplit(":", 2)
    if len(parts) == 3 and all(_is_float(p) for p in parts[1:]):
        return parts[0], float(parts[1]), float(parts[2]), 1.0
    raise DataError(
        f"--apd expects \"a,b,...\":cl_ms:threshold[:weight], got {arg!r}")


def _parse_fix(arg: str) -> tuple[str, float]:
    name, sep, value = arg.partition("=")
    if not sep or not _is_float(value):
        raise DataError(f"--fix expects NAME=VALUE, got {arg!r}")
    return name, float(value)


def _parse_bounds(arg: str) -> tuple[str, float, float]:
    name, sep, rest = arg.partition("=")
    lo, sep2, hi = rest.partition(":")
    if not sep or not sep2 or not (_is_float(lo) and _is_float(hi)):
        raise DataError(f"--bounds expects NAME=MIN:MAX, got {arg!r}")
    return name, float(lo), float(hi)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=[m.value for m in ModelId],
                   help="cell model to fit")
    p.add_argument("--data", action="append", metavar="PATH:CL[:WEIGHT]",
                   help="voltage file with its cycle length (repeatable)")
    p.add_argument("--apd", action="append",
                   metavar="LIST:CL:THRESHOLD[:WEIGHT]",
                   help="comma-separated APD targets (repeatable)")
    p.add_argument("--num-stimuli", type=int, help="recorded beats per fit")
    p.add_argument("--pre-stimuli", type=int,
                   help="wash-in beats before recording")
    p.add_argument("--sample-interval", type=float,
                   help="data sample interval in ms")
    p.add_argument("--dt", type=float, help="Euler time step in ms")
    p.add_argument("--normalize-to", type=float,
                   help="data normalization target; 0 bypasses")
    p.add_argument("--stim", choices=["square", "biphasic"],
                   help="stimulus shape")
    p.add_argument("--stim-magnitude", type=float,
                   help="square stimulus magnitude (1/ms)")
    p.add_argument("--stim-duration", type=float,
                   help="stimulus duration (ms)")
    p.add_argument("--stim-imag", type=float,
                   help="biphasic magnitude (1/ms)")
    p.add_argument("--stim-a", type=float, help="biphasic timescale (ms)")
    p.add_argument("--stim-b", type=float, help="biphasic offset 1")
    p.add_argument("--stim-c", type=float, help="biphasic offset 2")
    p.add_argument("--particles", type=int, help="swarm size")
    p.add_argument("--iterations", type=int, help="swarm iterations")
    p.add_argument("--phi1", type=float, help="personal-best uniform max")
    p.add_argument("--phi2", type=float, help="global-best uniform max")
    p.add_argument("--chi", type=float,
                   help="constriction coefficient override")
    p.add_argument("--gamma", type=float, help="learning rate")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--threads", type=int,
                   help="worker threads (default: all cores)")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE",
                   help="hold a parameter at a value (repeatable)")
    p.add_argument("--bounds", action="append", metavar="NAME=MIN:MAX",
                   help="override a parameter's search range (repeatable)")
    p.add_argument("--config", metavar="PATH",
                   help="config/run-details JSON; explicit flags win")


def _config_from_args(args: argparse.Namespace) -> FitConfig:
    doc: dict = {}
    if args.config:
        text = Path(args.config).read_text()
        doc = json.loads(text)
        if "config" in doc:  # run-details documents embed the config
            doc = doc["config"]
    base = config_from_dict(doc) if doc else None

    model = args.model or (base.model.value if base else None)
    if model is None:
        raise ConfigError([("model", "required (flag --model or --config)")])
    spec = model_spec(model)

    datasets: list = []
    if args.data or args.apd:
        for flag in args.data or []:
            path, cl, weight = _parse_data_flag(flag)
            samples = load_voltage_file(Path(path).read_bytes())
            datasets.append(VoltageDataset(samples, cl, weight,
                                           source_name=Path(path).name))
        for flag in args.apd or []:
            text, cl, threshold, weight = _parse_apd_flag(flag)
            targets = parse_apd_list(text)
            datasets.append(ApdDataset(tuple(targets), threshold, cl, weight))
    elif base is not None:
        datasets = list(base.datasets)

    def pick(flag_value, base_value, default):
        if flag_value is not None:
            return flag_value
        if base is not None:
            return base_value
        return default

    stim_kind = args.stim or (
        ("biphasic" if isinstance(base.stimulus, BiphasicStimulus)
         else "square") if base else "square")
    if stim_kind == "square":
        base_stim = (base.stimulus if base is not None
                     and isinstance(base.stimulus, SquareStimulus)
                     else SquareStimulus())
        stimulus = SquareStimulus(
            magnitude=pick(args.stim_magnitude, base_stim.magnitude, 0.2),
            duration=pick(args.stim_duration, base_stim.duration, 2.0))
    else:
        base_stim = (base.stimulus if base is not None
                     and isinstance(base.stimulus, BiphasicStimulus)
                     else BiphasicStimulus())
        stimulus = BiphasicStimulus(
            i_mag=pick(args.stim_imag, base_stim.i_mag, 0.4),
            a=pick(args.stim_a, base_stim.a, 0.725),
            b=pick(args.stim_b, base_stim.b, 7.0),
            c=pick(args.stim_c, base_stim.c, 6.72),
            duration=pick(args.stim_duration, base_stim.duration, 10.0))

    fixed_values = dict(base.fixed_values) if base else {}
    fit_mask = dict(base.fit_mask) if base and base.fit_mask else {}
    bounds = dict(base.bounds) if base else {}
    for flag in args.fix or []:
        name, value = _parse_fix(flag)
        spec.index_of(name)  # raises KeyError for unknown parameters
        fixed_values[name] = value
        fit_mask[name] = False
    for flag in args.bounds or []:
        name, lo, hi = _parse_bounds(flag)
        spec.index_of(name)
        bounds[name] = (lo, hi)
        fit_mask.setdefault(name, True)

    base_hyper = base.hyper if base else PsoHyper()
    hyper = PsoHyper(
        phi1=pick(args.phi1, base_hyper.phi1, 2.05),
        phi2=pick(args.phi2, base_hyper.phi2, 2.05),
        chi=args.chi if args.chi is not None else base_hyper.chi,
        gamma=pick(args.gamma, base_hyper.gamma, 0.05),
        particles=pick(args.particles, base_hyper.particles, 4096),
        iterations=pick(args.iterations, base_hyper.iterations, 32),
    )
    return FitConfig(
        model=ModelId(model),
        datasets=tuple(datasets),
        normalize_to=(args.normalize_to if args.normalize_to is not None
                      else (base.normalize_to if base else None)),
        num_stimuli=pick(args.num_stimuli, base.num_stimuli if base else None, 1),
        pre_stimuli=pick(args.pre_stimuli, base.pre_stimuli if base else None, 0),
        dt=pick(args.dt, base.dt if base else None, 0.02),
        sample_interval=pick(args.sample_interval,
                             base.sample_interval if base else None, 1.0),
        stimulus=stimulus,
        fit_mask=fit_mask or None,
        fixed_values=fixed_values,
        bounds=bounds,
        hyper=hyper,
        seed=pick(args.seed, base.seed if base else None, 0),
    )


def _apply_threads(args: argparse.Namespace) -> None:
    if getattr(args, "threads", None):
        import numba
        numba.set_num_threads(max(1, args.threads))


def cmd_fit(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    job = build_job(config)  # validation errors surface before compute
    _apply_threads(args)
    result = run_fit(job)
    if args.out_params:
        _write_atomic(args.out_params, export_parameters(result))
    if args.out_details:
        _write_atomic(args.out_details, export_run_details(result))
    if args.out_trace:
        _write_atomic(args.out_trace, export_trace_csv(result))
    if args.out_convergence:
        _write_atomic(args.out_convergence, export_convergence_csv(result))
    print(f"final error: {result.best_error:.6g}")
    print(f"wall time: {result.wall_time_s:.2f} s "
          f"({result.iterations_completed} iterations)")
    for name, value in result.best_params_by_name.items():
        print(f"  {name} = {value:.3f}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    model = ModelId(args.model)
    spec = model_spec(model)
    if args.params:
        params = _load_params_file(model, Path(args.params))
    else:
        params = reference_params(model)
    stim_kind = args.stim or "square"
    if stim_kind == "square":
        stimulus = SquareStimulus(
            magnitude=args.stim_magnitude if args.stim_magnitude is not None else 0.2,
            duration=args.stim_duration if args.stim_duration is not None else 2.0)
    else:
        stimulus = BiphasicStimulus(
            i_mag=args.stim_imag if args.stim_imag is not None else 0.4,
            a=args.stim_a if args.stim_a is not None else 0.725,
            b=args.stim_b if args.stim_b is not None else 7.0,
            c=args.stim_c if args.stim_c is not None else 6.72,
            duration=args.stim_duration if args.stim_duration is not None else 10.0)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix or model.value
    written = []
    for cl in args.cl:
        pacing = PacingConfig(cl, args.num_stimuli, args.pre_stimuli,
                              args.dt, args.sample_interval)
        trace = simulate(model, params, stimulus, pacing)
        if trace.diverged:
            print(f"error: simulation diverged at CL {cl:g} ms",
                  file=sys.stderr)
            return EXIT_RUNTIME
        samples = trace.samples
        if args.normalize_to != 0:
            samples = normalize(samples, args.normalize_to)
        path = out_dir / f"{prefix}_cl{cl:g}.txt"
        _write_atomic(path, "".join(f"{float(v)!r}\n" for v in samples))
        written.append(path)
    params_path = out_dir / f"{prefix}_params.tsv"
    _write_atomic(params_path, "".join(
        f"{name}\t{float(v)!r}\n"
        for name, v in zip(spec.parameter_names, params)))
    for path in written + [params_path]:
        print(f"wrote {path}")
    return EXIT_OK


def _load_params_file(model: ModelId, path: Path) -> np.ndarray:
    """Read a name<TAB>value parameter file (the export format)."""
    spec = model_spec(model)
    values: dict[str, float] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or not _is_float(parts[1]):
            raise DataError(f"{path}:{lineno}: expected 'name value'")
        values[parts[0]] = float(parts[1])
    missing = [n for n in spec.parameter_names if n not in values]
    if missing:
        raise DataError(f"{path}: missing parameters: {', '.join(missing)}")
    return np.array([values[n] for n in spec.parameter_names])


def cmd_bench(args: argparse.Namespace) -> int:
    from dataclasses import replace

    config = _config_from_args(args)
    build_job(config)
    _apply_threads(args)
    for particles in (args.bench_particles or [config.hyper.particles]):
        cfg = replace(config,
                      hyper=replace(config.hyper, particles=particles))
        report = bench(cfg, args.repeats)
        print(report.format(), end="")
    return EXIT_OK


def cmd_models(args: argparse.Namespace) -> int:
    if args.model:
        spec = model_spec(args.model)
        print(f"{spec.id.value}: {spec.n_parameters} parameters, "
              f"states {', '.join(spec.state_labels)}, "
              f"normalize-to default {spec.default_normalize_to:g}")
        width = max(len(n) for n in spec.parameter_names)
        for name, disp, (lo, hi) in zip(spec.parameter_names,
                                        spec.display_names,
                                        spec.default_bounds):
            fixed = "  (fixed)" if lo == hi else ""
            print(f"  {name:<{width}}  {disp:<8} [{lo:g}, {hi:g}]{fixed}")
    else:
        for mid in ModelId:
            spec = model_spec(mid)
            print(f"{mid.value:6s} {spec.n_parameters:3d} parameters, "
                  f"normalize-to {spec.default_normalize_to:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apfit",
        description="Fit cardiac action-potential models to voltage/APD data "
                    "with particle swarm optimization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="run a fit and write exports")
    _add_config_flags(p_fit)
    p_fit.add_argument("--out-params", metavar="PATH",
                       help="write fitted parameters (TSV)")
    p_fit.add_argument("--out-details", metavar="PATH",
                       help="write run details (JSON)")
    p_fit.add_argument("--out-trace", metavar="PATH",
                       help="write best-fit trace vs data (CSV)")
    p_fit.add_argument("--out-convergence", metavar="PATH",
                       help="write per-iteration lowest error (CSV)")
    p_fit.set_defaults(func=cmd_fit)

    p_gen = sub.add_parser("generate",
                           help="generate synthetic voltage data files")
    p_gen.add_argument("--model", required=True,
                       choices=[m.value for m in ModelId])
    p_gen.add_argument("--cl", type=float, action="append", required=True,
                       help="cycle length in ms (repeatable)")
    p_gen.add_argument("--params", metavar="PATH",
                       help="name<TAB>value file; default: built-in reference")
    p_gen.add_argument("--num-stimuli", type=int, default=2)
    p_gen.add_argument("--pre-stimuli", type=int, default=4)
    p_gen.add_argument("--sample-interval", type=float, default=1.0)
    p_gen.add_argument("--dt", type=float, default=0.02)
    p_gen.add_argument("--normalize-to", type=float, default=0.0,
                       help="0 keeps raw model units (default)")
    p_gen.add_argument("--stim", choices=["square", "biphasic"])
    p_gen.add_argument("--stim-magnitude", type=float)
    p_gen.add_argument("--stim-duration", type=float)
    p_gen.add_argument("--stim-imag", type=float)
    p_gen.add_argument("--stim-a", type=float)
    p_gen.add_argument("--stim-b", type=float)
    p_gen.add_argument("--stim-c", type=float)
    p_gen.add_argument("--out-dir", default=".")
    p_gen.add_argument("--prefix", help="output file prefix (default: model)")
    p_gen.set_defaults(func=cmd_generate)

    p_bench = sub.add_parser("bench", help="time repeated fits")
    _add_config_flags(p_bench)
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--bench-particles", type=int, action="append",
                         help="particle counts to sweep (repeatable)")
    p_bench.set_defaults(func=cmd_bench)

    p_models = sub.add_parser("models", help="list model catalogs")
    p_models.add_argument("--model", choices=[m.value for m in ModelId])
    p_models.set_defaults(func=cmd_models)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, KeyError, FileNotFoundError, json.JSONDecodeError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
