import argparse
import logging
import os
import sys
import time
from typing import List, Optional, Tuple

from core.config import ConfigLoader, TrainingConfig
from core.errors import (
    ConfigurationError,
    MissingDataError,
    PointSetFormatError,
    QkcError,
    TrainingDivergedError,
)
from core.manifest import RunManifest
from core.point_io import DatasetScanner, point_header, point_rows, read_point_set
from kernels.base import PointKernel
from kernels.correlation import kc_landscape
from kernels.gaussian import GaussianKernel, GaussianKernelParams
from qkc import __version__
from quantum.born_machine import DEFAULT_GAMMA, forward, save_checkpoint
from quantum.quantum_kernel import QuantumFeatureMapConfig, QuantumKernel, gram
from registration.evaluation import (
    estimate_rotation,
    noise_curve,
    prepare_pair,
    register,
    sweep_angles,
    sweep_evaluate,
)
from registration.geometry import PointSet, normalize_to_unit_cube
from registration.shapes import make_polygon, synthetic_fish
from utils.format_utils import DEFAULT_NOISE_RATIOS, parse_ratios
from utils.statistics import Statistics
from writers.base import write_bytes
from writers.document import JsonWriter
from writers.table import CsvWriter


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BAD_ARGUMENTS = 2
EXIT_DIVERGED = 3
EXIT_MISSING_DATA = 4

# サブコマンドごとの必須入力 (コマンドライン引数か設定ファイルで与える)
REQUIRED_INPUTS = {
    'train': ('model', 'scene'),
    'register': ('model', 'scene'),
    'sweep-kc': ('shape',),
    'gram': ('points',),
}


def _add_global_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('Global options')
    group.add_argument("--seed", type=int, metavar="N", help="Master random seed (default: 0)")
    group.add_argument("--out", metavar="DIR", help="Output directory (default: qkc-out)")
    group.add_argument(
        "--config", "-c",
        metavar="FILE",
        dest="config_file",
        help="Configuration file (YAML/JSON, or a manifest.json from an earlier run)"
    )
    group.add_argument("--threads", type=int, metavar="N", help="Parallel jobs for sweeps (default: 1)")
    group.add_argument("--debug", "-d", action="store_true", default=None, help="Show debug information")


def _add_kernel_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('Kernel options')
    group.add_argument("--kernel", choices=['gaussian', 'quantum'], help="Point kernel (default: gaussian)")
    group.add_argument("--sigma2", type=float, metavar="S",
                       help="Gaussian bandwidth sigma^2 (default: 0.01 in 2D, 0.05 in 3D)")
    group.add_argument("--alpha", type=float, help="Gaussian amplitude (default: 1)")
    _add_feature_map_options(group)


def _add_feature_map_options(group) -> None:
    group.add_argument("--variant", choices=['coyle', 'havlicek'], help="Quantum feature map (default: coyle)")
    group.add_argument("--encoding", choices=['binned', 'continuous2d'],
                       help="Coordinate encoding for the quantum kernel (default: binned)")
    group.add_argument("--bits", type=int, metavar="B", help="Bits per axis for binned encoding (default: 3)")
    group.add_argument("--estimator", choices=['exact', 'sampled'],
                       help="Quantum kernel estimator (default: exact)")
    group.add_argument("--shots", type=int, metavar="R", help="Shots per sampled kernel entry (default: 10000)")


def _add_training_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('Training options')
    group.add_argument("--qubits", "-n", type=int, metavar="N", help="Number of qubits (default: 4)")
    group.add_argument("--iters", type=int, metavar="N", help="Training iterations (default: 200)")
    group.add_argument("--batch", type=int, metavar="N", help="Samples per estimate in sampled mode (default: 1000)")
    group.add_argument("--lr", type=float, help="Initial learning rate (default: 0.02)")
    group.add_argument("--decay-every", type=int, metavar="N", help="Learning-rate decay period (default: 50)")
    group.add_argument("--decay-factor", type=float, metavar="F", help="Learning-rate decay factor (default: 0.5)")
    group.add_argument("--mode", choices=['exact', 'sampled'], help="Loss/gradient estimation (default: exact)")
    group.add_argument("--gamma", type=float, help="Measurement-layer angle (default: pi/4)")
    group.add_argument("--axis", choices=['x', 'y', 'z'], help="Rotation axis for 3D inputs (default: z)")
    group.add_argument("--snapshot-every", type=int, metavar="N",
                       help="Record the output distribution every N iterations (default: 0 = off)")


def _add_shape_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('Shape selection')
    group.add_argument("--fish", nargs='?', const='', metavar="FILE", help="Fish shape (x,y CSV)")
    group.add_argument("--synthetic-fallback", action="store_true", default=None,
                       help="Use the synthetic fish curve when the fish data is not available")
    group.add_argument("--shape", metavar="FILE", help="Single shape file")
    group.add_argument("--polygon", type=int, metavar="K", help="Regular K-gon with 10 points per side")
    group.add_argument("--dataset", metavar="DIR", help="Directory of shape files")
    group.add_argument("--glob", "-g", nargs='+', metavar="PATTERN",
                       help="Shape file patterns inside --dataset (e.g. '*.off')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkc",
        description="Rigid point-set registration with a simulated Ising Born machine "
                    "trained on a kernel-correlation loss.",
        epilog="Examples:\n"
               "  qkc train square.csv square_rot.csv --qubits 4 --sigma2 0.01\n"
               "  qkc register model.csv scene.csv --kernel quantum --variant coyle --bits 3\n"
               "  qkc sweep-kc square.csv --grid 1024\n"
               "  qkc benchmark --fish fish.csv --qubits 4\n"
               "  qkc benchmark --fish --synthetic-fallback --qubits 6\n"
               "  qkc benchmark --dataset shapes/ --glob '*.off' --axis z\n"
               "  qkc noise --fish --synthetic-fallback --ratios 0.05:0.5:0.05\n"
               "  qkc gram pentagon.csv --bits 3 --estimator sampled --shots 10000\n"
               "  qkc train -c out/manifest.json                # Re-run from a manifest\n",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    train = commands.add_parser("train", help="Train the circuit on a model/scene pair")
    train.add_argument("model", nargs="?", metavar="MODEL", help="Model point-set file")
    train.add_argument("scene", nargs="?", metavar="SCENE", help="Scene point-set file")
    _add_training_options(train)
    _add_kernel_options(train)
    _add_global_options(train)
    train.set_defaults(func=cmd_train)

    reg = commands.add_parser("register", help="Register a model onto a scene")
    reg.add_argument("model", nargs="?", metavar="MODEL", help="Model point-set file")
    reg.add_argument("scene", nargs="?", metavar="SCENE", help="Scene point-set file")
    _add_training_options(reg)
    _add_kernel_options(reg)
    _add_global_options(reg)
    reg.set_defaults(func=cmd_register)

    sweep = commands.add_parser("sweep-kc", help="Kernel correlation over rotation angles")
    sweep.add_argument("shape", nargs="?", metavar="SHAPE", help="Model point-set file")
    sweep.add_argument("--scene", metavar="FILE", help="Scene file (default: the shape itself)")
    sweep.add_argument("--grid", type=int, metavar="K", help="K uniform angles instead of the bin medians")
    _add_training_options(sweep)
    _add_kernel_options(sweep)
    _add_global_options(sweep)
    sweep.set_defaults(func=cmd_sweep_kc)

    bench = commands.add_parser("benchmark", help="Sweep ground-truth angles and report alignment errors")
    _add_shape_options(bench)
    bench.add_argument("--sweep", metavar="GRID", help="'bins' (default) or 'uniform:K'")
    _add_training_options(bench)
    _add_kernel_options(bench)
    _add_global_options(bench)
    bench.set_defaults(func=cmd_benchmark)

    noise = commands.add_parser("noise", help="Alignment error against the noise ratio")
    _add_shape_options(noise)
    noise.add_argument("--ratios", metavar="LIST", help="'0.05,0.1' or 'start:stop:step' (default: 0.05:0.5:0.05)")
    noise.add_argument("--runs", type=int, metavar="N", help="Seeded runs per ratio (default: 50)")
    noise.add_argument("--noise-mode", choices=['outliers', 'jitter'], help="Noise model (default: outliers)")
    noise.add_argument("--sigma-noise", type=float, metavar="S",
                       help="Noise standard deviation (default: 0.3 x shape radius)")
    _add_training_options(noise)
    _add_kernel_options(noise)
    _add_global_options(noise)
    noise.set_defaults(func=cmd_noise)

    gram_parser = commands.add_parser("gram", help="Quantum kernel Gram matrix")
    gram_parser.add_argument("points", nargs="?", metavar="POINTS", help="Point-set file")
    gram_parser.add_argument("--ys", metavar="FILE", help="Second point set (default: POINTS)")
    gram_parser.add_argument("--format", choices=['csv', 'bin', 'both'], help="Output format (default: csv)")
    gram_parser.add_argument("--raw", action="store_true", default=None,
                             help="Use coordinates as given instead of normalising into the unit cube")
    group = gram_parser.add_argument_group('Kernel options')
    _add_feature_map_options(group)
    _add_global_options(gram_parser)
    gram_parser.set_defaults(func=cmd_gram)

    return parser


def build_kernel(args: argparse.Namespace, dims: int) -> PointKernel:
    if args.kernel == 'quantum':
        cfg = QuantumFeatureMapConfig(variant=args.variant, mode=args.encoding,
                                      bits_per_axis=args.bits, dims=dims)
        return QuantumKernel(cfg, estimator=args.estimator, shots=args.shots, seed=args.seed)
    if args.sigma2 is None:
        params = GaussianKernelParams.for_dims(dims, alpha=args.alpha)
        args.sigma2 = params.sigma_sq
    else:
        params = GaussianKernelParams(alpha=args.alpha, sigma_sq=args.sigma2)
    return GaussianKernel(params)


def _resolved_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ('func', 'config_file')}


def _gamma(args: argparse.Namespace) -> float:
    return DEFAULT_GAMMA if args.gamma is None else args.gamma


def _axis(args: argparse.Namespace, dims: int) -> Optional[str]:
    return args.axis if dims == 3 else None


def _read_pair(args: argparse.Namespace, manifest: RunManifest) -> Tuple[PointSet, PointSet]:
    model = read_point_set(args.model, seed=args.seed)
    scene = read_point_set(args.scene, seed=args.seed)
    manifest.add_input(args.model)
    manifest.add_input(args.scene)
    logger.info("Model: %d points, scene: %d points (%dD)", len(model), len(scene), model.dims)
    return model, scene


def _write_training_outputs(out: str, estimate, snapshot_every: int) -> None:
    save_checkpoint(estimate.params, os.path.join(out, 'params.json'))
    CsvWriter(['iter', 'loss', 'lr', 'ms']).write(os.path.join(out, 'trace.csv'), estimate.trace.rows())
    dist = forward(estimate.params)
    CsvWriter(['bin', 'angle_rad', 'prob']).write(
        os.path.join(out, 'distribution.csv'),
        [(i, a, p) for i, (a, p) in enumerate(zip(dist.angles, dist.probabilities))],
    )
    if snapshot_every:
        CsvWriter(['iter', 'bin', 'prob']).write(
            os.path.join(out, 'snapshots.csv'), estimate.trace.snapshot_rows()
        )


def cmd_train(args: argparse.Namespace, manifest: RunManifest) -> None:
    model, scene = _read_pair(args, manifest)
    kernel = build_kernel(args, model.dims)
    cfg = TrainingConfig.from_mapping(vars(args))
    estimate = estimate_rotation(model, scene, args.qubits, kernel, cfg,
                                 axis=_axis(args, model.dims), gamma=_gamma(args))
    _write_training_outputs(args.out, estimate, cfg.snapshot_every)
    print(f"Estimated rotation: {estimate.angle:.17g} rad", file=sys.stderr)
    print(f"\nDone! {cfg.iterations} iterations written to '{args.out}'", file=sys.stderr)


def cmd_register(args: argparse.Namespace, manifest: RunManifest) -> None:
    model, scene = _read_pair(args, manifest)
    kernel = build_kernel(args, model.dims)
    cfg = TrainingConfig.from_mapping(vars(args))
    result = register(model, scene, args.qubits, kernel, cfg,
                      axis=_axis(args, model.dims), gamma=_gamma(args))
    _write_training_outputs(args.out, result.estimate, cfg.snapshot_every)
    JsonWriter().write(os.path.join(args.out, 'transform.json'), result.transform.to_dict())
    CsvWriter(point_header(model.dims)).write(os.path.join(args.out, 'aligned.csv'), point_rows(result.aligned))
    print(f"Estimated rotation: {result.transform.angle:.17g} rad", file=sys.stderr)
    print(f"\nDone! Registration written to '{args.out}'", file=sys.stderr)


def cmd_sweep_kc(args: argparse.Namespace, manifest: RunManifest) -> None:
    model = read_point_set(args.shape, seed=args.seed)
    manifest.add_input(args.shape)
    scene = model
    if args.scene:
        scene = read_point_set(args.scene, seed=args.seed)
        manifest.add_input(args.scene)
    kernel = build_kernel(args, model.dims)
    pair = prepare_pair(model, scene, kernel)
    angles = sweep_angles(f"uniform:{args.grid}" if args.grid else 'bins', args.qubits)
    landscape = kc_landscape(pair.model, pair.scene, angles, kernel,
                             axis=_axis(args, model.dims), pivot=pair.pivot)
    CsvWriter(['angle_rad', 'kc_value']).write(os.path.join(args.out, 'landscape.csv'), landscape.rows())
    maxima = landscape.local_maxima()
    logger.info("Local maxima: %d at %s", len(maxima), [round(float(landscape.angles[i]), 6) for i in maxima])
    print(f"\nDone! {len(angles)} angles written to '{args.out}'", file=sys.stderr)


def _load_shapes(args: argparse.Namespace, manifest: RunManifest) -> List[Tuple[str, PointSet]]:
    """--dataset, --shape, --polygon, --fish の順に評価対象の形状を決める"""
    if args.dataset:
        if not os.path.isdir(args.dataset):
            raise MissingDataError(f"Dataset directory does not exist: {args.dataset}")
        scanner = DatasetScanner(args.glob, bool(args.debug))
        paths = scanner.scan(args.dataset)
        logger.info("Found %d shape files (%d scanned)", len(paths), scanner.get_stats()['scanned'])
        if not paths:
            raise MissingDataError(f"No shape files matched in {args.dataset}")
        shapes = []
        for path in paths:
            shapes.append((os.path.relpath(path, args.dataset), read_point_set(path, seed=args.seed)))
            manifest.add_input(path)
        return shapes
    if args.shape:
        shape = read_point_set(args.shape, seed=args.seed)
        manifest.add_input(args.shape)
        return [(shape.label, shape)]
    if args.polygon:
        shape = make_polygon(args.polygon, 10)
        return [(shape.label, shape)]
    if args.fish is not None:
        if args.fish and os.path.isfile(args.fish):
            shape = read_point_set(args.fish, seed=args.seed, label='fish')
            manifest.add_input(args.fish)
            return [('fish', shape)]
        if args.synthetic_fallback:
            logger.warning("Fish data not available, using the synthetic fish curve (non-canonical)")
            shape = synthetic_fish()
            return [(shape.label, shape)]
        raise MissingDataError(
            f"Fish data not found{': ' + args.fish if args.fish else ''} "
            "(pass a CSV file or use --synthetic-fallback)"
        )
    raise ConfigurationError("no shape selected (use --fish, --shape, --polygon or --dataset)")


def cmd_benchmark(args: argparse.Namespace, manifest: RunManifest) -> None:
    shapes = _load_shapes(args, manifest)
    cfg = TrainingConfig.from_mapping(vars(args))
    angles = sweep_angles(args.sweep, args.qubits)
    reports = {}
    for name, shape in shapes:
        start = time.perf_counter()
        kernel = build_kernel(args, shape.dims)
        report = sweep_evaluate(shape, args.qubits, kernel, cfg, angles=angles,
                                axis=_axis(args, shape.dims), gamma=_gamma(args), threads=args.threads)
        reports[name] = report.to_dict()
        Statistics.print_report(f"Benchmark: {name}", reports[name], time.perf_counter() - start)
    if len(reports) == 1:
        document = next(iter(reports.values()))
        document['shape'] = next(iter(reports))
    else:
        document = {'shapes': reports}
    JsonWriter().write(os.path.join(args.out, 'report.json'), document)
    print(f"Done! {len(reports)} shape(s) evaluated, report written to '{args.out}'", file=sys.stderr)


def cmd_noise(args: argparse.Namespace, manifest: RunManifest) -> None:
    shapes = _load_shapes(args, manifest)
    if len(shapes) != 1:
        raise ConfigurationError("the noise curve takes exactly one shape")
    try:
        ratios = parse_ratios(args.ratios) if args.ratios else list(DEFAULT_NOISE_RATIOS)
    except ValueError as e:
        raise ConfigurationError(str(e)) from e
    args.ratios = ','.join(format(r, '.17g') for r in ratios)
    name, shape = shapes[0]
    cfg = TrainingConfig.from_mapping(vars(args))
    curve = noise_curve(shape, ratios, args.qubits, build_kernel(args, shape.dims), cfg,
                        runs=args.runs, sigma_noise=args.sigma_noise, mode=args.noise_mode,
                        axis=_axis(args, shape.dims), gamma=_gamma(args), threads=args.threads)
    CsvWriter(['ratio', 'mean_e2d', 'std_e2d']).write(os.path.join(args.out, 'noise.csv'), curve.rows())
    summary = dict(curve.summary(), shape=name, noise_mode=args.noise_mode)
    JsonWriter().write(os.path.join(args.out, 'noise_summary.json'), summary)
    print(f"Done! {len(ratios)} noise ratios written to '{args.out}'", file=sys.stderr)


def cmd_gram(args: argparse.Namespace, manifest: RunManifest) -> None:
    xs = read_point_set(args.points, seed=args.seed)
    manifest.add_input(args.points)
    ys = xs
    if args.ys:
        ys = read_point_set(args.ys, seed=args.seed)
        manifest.add_input(args.ys)
    if not args.raw:
        xs, ys, _ = normalize_to_unit_cube(xs, ys)
    cfg = QuantumFeatureMapConfig(variant=args.variant, mode=args.encoding,
                                  bits_per_axis=args.bits, dims=xs.dims)
    logger.info("Quantum feature map on %d qubits (%s, %s)", cfg.n_qubits, cfg.variant, cfg.mode)
    kernel = QuantumKernel(cfg)
    matrix = gram(xs, ys, cfg, estimator=args.estimator, shots=args.shots, seed=args.seed, kernel=kernel)
    if kernel.clamped_count:
        logger.warning("%d points had coordinates clamped into [0, 1)", kernel.clamped_count)
    if args.format in ('csv', 'both'):
        CsvWriter(['i', 'j', 'value']).write(os.path.join(args.out, 'gram.csv'), matrix.entries())
    if args.format in ('bin', 'both'):
        write_bytes(os.path.join(args.out, 'gram.bin'), matrix.to_bytes())
    print(f"Done! {matrix.rows}x{matrix.cols} Gram matrix written to '{args.out}'", file=sys.stderr)


def _configure_logging(debug: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        format='[%(levelname)s] %(message)s',
        level=logging.DEBUG if debug else logging.INFO,
        force=True,
    )


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # 設定ファイルを読み込み (コマンドライン > 設定ファイル > 既定値)
    config = ConfigLoader.load(args.config_file)
    args = ConfigLoader.merge_with_args(config, args)
    args = ConfigLoader.apply_defaults(args)
    _configure_logging(bool(args.debug))

    # 入力ファイルのチェック (設定ファイルマージ後に実施)
    for name in REQUIRED_INPUTS.get(args.command, ()):
        if not getattr(args, name):
            parser.error(f"{name.upper()} is required (either via command line or config file)")

    if hasattr(args, 'qubits') and args.qubits < 1:
        parser.error("--qubits must be at least 1")
    if args.threads < 1 and args.threads != -1:
        parser.error("--threads must be a positive integer (or -1 for all cores)")

    manifest = RunManifest(
        command=args.command,
        config=_resolved_config(args),
        seed=args.seed,
        version=__version__,
    )
    try:
        args.func(args, manifest)
    except TrainingDivergedError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except MissingDataError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_MISSING_DATA
    except PointSetFormatError as e:
        print(f"Error: Cannot read point set {e.path}: {e.reason}", file=sys.stderr)
        return EXIT_BAD_ARGUMENTS
    except (QkcError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_BAD_ARGUMENTS
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_BAD_ARGUMENTS

    # 解決済みの値 (sigma2 など) を記録し直す
    manifest.config = _resolved_config(args)
    manifest.write(args.out)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
