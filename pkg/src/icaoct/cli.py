"""Command-line interface wiring the simulation, stacking, dataset,
training and analytics modules together.

Exit codes: 0 success, 2 usage error, 1 runtime error. Outputs are
written to a temporary file and renamed, so a failing command never
leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import analytics, dataset, io, optics, regressor, stack


class CliError(Exception):
    """Runtime failure with a one-line diagnostic."""


@contextlib.contextmanager
def _atomic(path):
    """Yield a temp path in the target directory; rename on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _parse_pair(text: str, flag: str) -> tuple[float, float]:
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except ValueError:
        raise CliError(f"{flag} expects 'a:b', got {text!r}") from None


def _object_from_args(args) -> optics.ObjectModel:
    if args.object_file:
        try:
            spec = json.loads(Path(args.object_file).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read object file {args.object_file}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"malformed object file {args.object_file}: {exc}") from None
        return optics.ObjectModel(spec["interfaces"], spec["regions"],
                                  spec.get("tail_gvd", 0.0))
    interfaces = [_parse_pair(t, "--iface") for t in args.iface or []]
    regions = [_parse_pair(t, "--region") for t in args.region or []]
    try:
        return optics.ObjectModel(interfaces, regions, args.tail_gvd)
    except ValueError as exc:
        raise CliError(f"invalid object: {exc}") from None


def _grid_from_args(args) -> optics.SpectralGrid:
    try:
        return optics.make_grid(args.n_samples, args.center_nm * 1e-9,
                                args.span_nm * 1e-9)
    except optics.InvalidGridError as exc:
        raise CliError(f"invalid grid: {exc}") from None


def _load_spectrum(path, grid) -> optics.Spectrum:
    try:
        values = io.load_spectrum_csv(path)
    except OSError as exc:
        raise CliError(f"cannot read spectrum {path}: {exc}") from None
    return optics.resample_to_grid(values, grid)


def _add_grid_flags(p):
    p.add_argument("--n-samples", type=int, default=1024)
    p.add_argument("--center-nm", type=float, default=840.0)
    p.add_argument("--span-nm", type=float, default=160.0)


def _cmd_simulate(args) -> int:
    grid = _grid_from_args(args)
    obj = _object_from_args(args)
    spectrum = optics.synthesize_spectrum(obj, grid, args.autocorr)
    if args.snr_db is not None:
        spectrum = optics.add_noise(
            spectrum, optics.NoiseSpec(args.snr_db, args.noise_seed))
    with _atomic(args.out) as tmp:
        io.save_spectrum_csv(spectrum.values, tmp)
    return 0


def _cmd_stack(args) -> int:
    grid = _grid_from_args(args)
    spectrum = _load_spectrum(args.infile, grid)
    rows = stack.build_stack(spectrum, args.fragments)
    if not (args.out_pgm or args.out_raw):
        raise CliError("nothing to do: pass --out-pgm and/or --out-raw")
    if args.out_pgm:
        with _atomic(args.out_pgm) as tmp:
            io.export_pgm(rows, tmp)
    if args.out_raw:
        with _atomic(args.out_raw) as tmp:
            io.save_stack_raw(rows, tmp)
            os.replace(f"{tmp}.hdr", f"{args.out_raw}.hdr")
    return 0


def _cmd_dataset(args) -> int:
    grid = _grid_from_args(args)
    noise = None
    if args.snr_db is not None:
        noise = optics.NoiseSpec(args.snr_db, args.noise_seed)
    try:
        cfg = dataset.SamplerConfig(
            max_interfaces=args.max_interfaces, min_gap=args.min_gap,
            position_range=(args.position_min, args.position_max),
            include_autocorr=args.include_autocorr, noise=noise)
    except ValueError as exc:
        raise CliError(f"invalid sampler configuration: {exc}") from None
    workers = dataset.default_workers()
    with _atomic(args.out) as tmp:
        dataset.generate_dataset(tmp, args.count, args.base_seed, cfg, grid,
                                 fragments=args.fragments, workers=workers)
    return 0


def _cmd_train(args) -> int:
    try:
        header, stacks, labels = dataset.load_dataset(args.data)
    except OSError as exc:
        raise CliError(f"cannot read dataset {args.data}: {exc}") from None
    except dataset.DatasetFormatError as exc:
        raise CliError(f"{args.data}: {exc}") from None
    if args.config:
        try:
            cfg = regressor.RegressorConfig.from_json(
                Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
    else:
        cfg = regressor.RegressorConfig(
            rows=header.rows, cols=header.cols, output_len=header.profile_len)
    if (cfg.rows, cfg.cols) != (header.rows, header.cols):
        raise CliError(
            f"config input {cfg.rows}x{cfg.cols} does not match dataset "
            f"{header.rows}x{header.cols}")
    val = None
    if args.val_data:
        _, vs, vl = dataset.load_dataset(args.val_data)
        val = (vs, vl)
    model = regressor.init_model(cfg, args.seed)
    history = regressor.train(model, (stacks, labels), args.epochs, cfg,
                              val_data=val, seed=args.seed,
                              log=lambda msg: print(msg, file=sys.stderr))
    with _atomic(args.out) as tmp:
        regressor.save_checkpoint(model, tmp)
    if args.history:
        with _atomic(args.history) as tmp:
            io.export_csv({
                "epoch": list(range(1, len(history.train_loss) + 1)),
                "train_loss": history.train_loss,
                "val_loss": history.val_loss,
                "seconds": history.seconds,
            }, tmp)
    return 0


def _cmd_predict(args) -> int:
    try:
        model = regressor.load_checkpoint(args.model)
    except OSError as exc:
        raise CliError(f"cannot read model {args.model}: {exc}") from None
    try:
        header, stacks, _ = dataset.load_dataset(args.infile)
    except OSError as exc:
        raise CliError(f"cannot read dataset {args.infile}: {exc}") from None
    if (model.cfg.rows, model.cfg.cols) != (header.rows, header.cols):
        raise CliError(
            f"model input {model.cfg.rows}x{model.cfg.cols} does not match "
            f"dataset {header.rows}x{header.cols}")
    profiles = regressor.predict(model, stacks)
    table = {"pixel": list(range(model.cfg.output_len))}
    for i, p in enumerate(profiles):
        table[f"profile_{i}"] = p
    with _atomic(args.out) as tmp:
        io.export_csv(table, tmp)
    return 0


def _cmd_estimate_gvd(args) -> int:
    try:
        value = analytics.estimate_layer_gvd(args.lfront, args.lobj,
                                             args.bfront, args.bseg2)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(f"{value:.2f}")
    return 0


def _cmd_filter_ac(args) -> int:
    grid = _grid_from_args(args)
    spectrum = _load_spectrum(args.infile, grid)
    regions = []
    for part in args.zero.split(","):
        lo, hi = _parse_pair(part, "--zero")
        regions.append((int(lo), int(hi)))
    try:
        filtered = analytics.remove_autocorr_peaks(spectrum, regions)
    except ValueError as exc:
        raise CliError(f"invalid --zero regions: {exc}") from None
    with _atomic(args.out) as tmp:
        io.save_spectrum_csv(filtered.values, tmp)
    return 0


def _cmd_map(args) -> int:
    directory = Path(args.bscan_dir)
    if not directory.is_dir():
        raise CliError(f"not a directory: {args.bscan_dir}")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise CliError(f"no profile CSV files in {args.bscan_dir}")
    profiles = []
    for f in files:
        columns = io.read_csv_columns(f)
        names = [n for n in columns if n != "pixel"]
        profiles.extend(columns[n] for n in names)
    try:
        dmap = analytics.build_dispersion_map(profiles)
    except ValueError as exc:
        raise CliError(f"cannot assemble map: {exc}") from None
    with _atomic(f"{args.out}.pgm") as tmp:
        io.export_unit_pgm(np.clip(dmap, 0.0, 1.0), tmp)
    with _atomic(f"{args.out}.csv") as tmp:
        io.export_csv(
            {f"row_{i}": dmap[i] for i in range(dmap.shape[0])}, tmp)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icaoct",
        description="Intensity-correlation OCT simulation and GVD profiling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize an interference spectrum")
    _add_grid_flags(p)
    p.add_argument("--iface", action="append", metavar="POS:REFL",
                   help="interface position (bins) and reflectivity; repeatable")
    p.add_argument("--region", action="append", metavar="EXTENT:GVD",
                   help="region extent (bins) and GVD density fs^2/mm; repeatable")
    p.add_argument("--tail-gvd", type=float, default=0.0)
    p.add_argument("--object-file", help="JSON object description instead of flags")
    p.add_argument("--autocorr", action="store_true",
                   help="include object self-interference terms")
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("stack", help="build the FFT stack of a spectrum")
    _add_grid_flags(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--fragments", type=int, default=50)
    p.add_argument("--out-pgm")
    p.add_argument("--out-raw")
    p.set_defaults(func=_cmd_stack)

    p = sub.add_parser("dataset", help="generate a labelled ICAD dataset")
    _add_grid_flags(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--base-seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fragments", type=int, default=50)
    p.add_argument("--max-interfaces", type=int, default=12)
    p.add_argument("--min-gap", type=int, default=8)
    p.add_argument("--position-min", type=int, default=16)
    p.add_argument("--position-max", type=int, default=1000)
    p.add_argument("--include-autocorr", action="store_true")
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--noise-seed", type=int, default=0)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("train", help="train the regressor on an ICAD dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--config", help="JSON RegressorConfig; defaults fit the data")
    p.add_argument("--val-data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="ICAM checkpoint path")
    p.add_argument("--history", help="per-epoch loss CSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict profiles for ICAD stacks")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("estimate-gvd",
                       help="invert the correction formula for a layer GVD")
    p.add_argument("--lfront", type=float, required=True)
    p.add_argument("--lobj", type=float, required=True)
    p.add_argument("--bfront", type=float, required=True)
    p.add_argument("--bseg2", type=float, required=True)
    p.set_defaults(func=_cmd_estimate_gvd)

    p = sub.add_parser("filter-ac", help="zero A-scan bins and return the spectrum")
    _add_grid_flags(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--zero", required=True, metavar="A:B[,C:D...]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter_ac)

    p = sub.add_parser("map", help="assemble profile CSVs into a dispersion map")
    p.add_argument("--bscan-dir", required=True)
    p.add_argument("--out", required=True, help="output basename (.pgm/.csv added)")
    p.set_defaults(func=_cmd_map)
    return parser


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
