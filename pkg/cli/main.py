"""
Command-line entry point: ``python -m cli <command> ...``.

Exit codes: 0 success, 2 malformed input file, 3 invalid configuration or
flags, 4 numerical failure, 1 anything else.
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from cli.commands import (
    cmd_synth, cmd_cluster, cmd_eval, cmd_toy_train, cmd_ablate, CLI_SPACES, VARIANTS,
)
from cli.manifest import RunManifest, require_inputs_unchanged
from datagen.tree import TreeSpec
from geometry import DEFAULT_CLIP_RADIUS
from losses import DEFAULT_TAU, DEFAULT_LAMBDA
from losses.toy_train import DEFAULT_EPOCHS, DEFAULT_LR, DEFAULT_JITTER, DEFAULT_NEIGHBORS
from clustering.kmeans import DEFAULT_RESTARTS, DEFAULT_MAX_ITERS
from utils.config import ConfigManager, TOOLKIT_VERSION
from utils.error_handling import ErrorHandler, HypGCDError, ValidationError, EXIT_OK

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors (exit 3), not argparse's exit 2."""

    def error(self, message: str):
        raise ValidationError(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _str_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def _branching(text: str):
    try:
        values = tuple(int(item) for item in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or comma-separated integers, got {text!r}")
    return values[0] if len(values) == 1 else values


def _add_common(parser: argparse.ArgumentParser, seed: bool = True) -> None:
    if seed:
        parser.add_argument('--seed', type=int, default=None,
                            help='Random seed (HYPGCD_DEFAULT_SEED when omitted)')
    parser.add_argument('--manifest', default=None,
                        help='Manifest path (default: <out>.manifest.json)')


def _add_training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--tau', type=float, default=DEFAULT_TAU, help='Softmax temperature')
    parser.add_argument('--lambda', dest='lam', type=float, default=DEFAULT_LAMBDA,
                        help='Weight of the self-supervised losses (supervised weight is 1 - lambda)')
    parser.add_argument('--epochs', type=int, default=DEFAULT_EPOCHS)
    parser.add_argument('--lr', type=float, default=DEFAULT_LR, help='Per-sample step size')
    parser.add_argument('--curvature', type=float, default=None, help='Curvature κ > 0 (default 0.05)')
    parser.add_argument('--jitter', type=float, default=DEFAULT_JITTER, help='View jitter scale')
    parser.add_argument('--neighbors', type=int, default=DEFAULT_NEIGHBORS,
                        help='Input neighbours averaged into the second view (1: jitter only)')
    parser.add_argument('--batch-size', type=int, default=None, help='Mini-batch size (full batch by default)')
    parser.add_argument('--fixed-alpha', action='store_true',
                        help='Keep alpha at 1 instead of decaying it to 0')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='hypgcd', description='Hyperbolic clustering and GCD evaluation toolkit')
    parser.add_argument('--version', action='version', version=f"%(prog)s {TOOLKIT_VERSION}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')
    sub = parser.add_subparsers(dest='command', required=True)

    synth = sub.add_parser('synth', help='Generate a synthetic hierarchical GCD dataset')
    defaults = TreeSpec()
    synth.add_argument('--depth', type=int, default=defaults.depth)
    synth.add_argument('--branching', type=_branching, default=defaults.branching,
                       help='Children per node, one value or one per level')
    synth.add_argument('--points-per-leaf', type=int, default=defaults.points_per_leaf)
    synth.add_argument('--dispersion', type=_float_list, default=None,
                       help='depth + 1 strictly decreasing scales (levels, then samples)')
    synth.add_argument('--dim', type=int, default=defaults.dim)
    synth.add_argument('--old-fraction', type=float, default=0.5)
    synth.add_argument('--labeled-fraction', type=float, default=0.5)
    synth.add_argument('--out', required=True, help='Embedding file to write')
    _add_common(synth)
    synth.set_defaults(handler=cmd_synth)

    cluster = sub.add_parser('cluster', help='Run (semi-supervised) K-Means on an embedding file')
    cluster.add_argument('--input', required=True)
    cluster.add_argument('--space', choices=CLI_SPACES, default='lorentz')
    cluster.add_argument('--curvature', type=float, default=None,
                         help='Curvature κ > 0 for hyperbolic spaces (file value or 0.05)')
    cluster.add_argument('--clip', type=float, default=DEFAULT_CLIP_RADIUS,
                         help='Clip radius for tangent inputs (inf disables clipping)')
    cluster.add_argument('--k', type=int, default=None, help='Clusters (default: classes in the file)')
    cluster.add_argument('--semi-supervised', action='store_true')
    cluster.add_argument('--restarts', type=int, default=None,
                         help=f"K-Means initializations (default {DEFAULT_RESTARTS}, 1 with --semi-supervised)")
    cluster.add_argument('--max-iters', type=int, default=DEFAULT_MAX_ITERS)
    cluster.add_argument('--no-reseed', action='store_true', help='Leave empty clusters empty')
    cluster.add_argument('--threads', type=int, default=None, help='Worker threads (HYPGCD_NUM_THREADS)')
    cluster.add_argument('--out', required=True, help='Assignments file to write')
    _add_common(cluster)
    cluster.set_defaults(handler=cmd_cluster)

    evaluate = sub.add_parser('eval', help='Clustering accuracy and homogeneity of assignments')
    evaluate.add_argument('--assignments', required=True)
    evaluate.add_argument('--truth', required=True, help='Embedding file with labels and split')
    evaluate.add_argument('--levels', action='store_true', help='Homogeneity per label level')
    evaluate.add_argument('--out', required=True, help='Report to write (JSON)')
    _add_common(evaluate, seed=False)
    evaluate.set_defaults(handler=cmd_eval)

    train = sub.add_parser('toy-train', help='Train free embeddings with the hyperbolic contrastive loss')
    train.add_argument('--input', required=True, help='Tangent embedding file')
    train.add_argument('--clip', type=float, default=DEFAULT_CLIP_RADIUS,
                       help='Clip radius (inf disables clipping)')
    _add_training(train)
    train.add_argument('--best', action='store_true',
                       help='Write the lowest-loss embeddings instead of the last ones')
    train.add_argument('--out', required=True, help='Trained embedding file to write')
    _add_common(train)
    train.set_defaults(handler=cmd_toy_train)

    ablate = sub.add_parser('ablate', help='Compare spaces, clip radii and K-Means variants over seeds')
    ablate.add_argument('--input', default=None, help='Tangent embedding file (synthetic data when omitted)')
    ablate.add_argument('--depth', type=int, default=defaults.depth)
    ablate.add_argument('--branching', type=_branching, default=defaults.branching)
    ablate.add_argument('--points-per-leaf', type=int, default=defaults.points_per_leaf)
    ablate.add_argument('--dim', type=int, default=defaults.dim)
    ablate.add_argument('--spaces', type=_str_list, default=['lorentz', 'euclidean'])
    ablate.add_argument('--clips', type=_float_list, default=[DEFAULT_CLIP_RADIUS, float('inf')])
    ablate.add_argument('--variants', type=_str_list, default=['semi'],
                        help=f"Comma-separated subset of {VARIANTS}")
    ablate.add_argument('--seeds', type=int, default=1, help='Number of paired seeds')
    ablate.add_argument('--restarts', type=int, default=None,
                        help=f"K-Means initializations (default {DEFAULT_RESTARTS} for kmeans, 1 for semi)")
    ablate.add_argument('--no-reseed', action='store_true')
    ablate.add_argument('--threads', type=int, default=None)
    ablate.add_argument('--euclidean-input', choices=('raw', 'trained'), default='trained',
                        help='Cluster trained (default) or untrained tangent vectors in the euclidean space')
    _add_training(ablate)
    ablate.add_argument('--out', required=True, help='Per-seed table to write (TSV)')
    _add_common(ablate)
    ablate.set_defaults(handler=cmd_ablate)

    rerun = sub.add_parser('rerun', help='Replay a run manifest and verify its outputs')
    rerun.add_argument('manifest', help='Manifest written by an earlier command')
    rerun.set_defaults(handler=None)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = ConfigManager.get_log_level()
    logging.getLogger().setLevel(level)


def _rerun(path: str) -> List[str]:
    """
    Replay the argument vector of a manifest and compare output digests.

    Raises:
        ValidationError: If the inputs changed since the run
        HypGCDError: If the replayed outputs differ
    """
    manifest = RunManifest.load(path)
    require_inputs_unchanged(manifest)
    args = build_parser().parse_args(manifest.argv)
    if args.handler is None:
        raise ValidationError("A manifest cannot replay another rerun")
    args.argv = list(manifest.argv)
    outputs = args.handler(args)
    differing = manifest.changed_files(manifest.output_digests)
    if differing:
        raise HypGCDError(f"Replayed outputs differ from the manifest: {differing}")
    logger.info(f"Rerun of {manifest.command} reproduced {len(outputs)} output(s) bit-exactly")
    return outputs


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv (Optional[Sequence[str]]): Arguments without the program name
            (``sys.argv[1:]`` when omitted)

    Returns:
        int: Process exit code
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args)
        if args.command == 'rerun':
            _rerun(args.manifest)
        else:
            args.argv = argv
            outputs = args.handler(args)
            for path in outputs:
                print(path)
    except HypGCDError as e:
        logger.error(e.message)
        return ErrorHandler.exit_code_for(e)
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return ErrorHandler.exit_code_for(e)
    return EXIT_OK
