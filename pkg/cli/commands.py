"""
CLI subcommands: synth, cluster, eval, toy-train and ablate.

Each ``cmd_*`` takes the parsed arguments (with ``argv`` attached by
``cli.main``), writes its outputs plus a run manifest, and returns the list of
files it wrote.
"""

import argparse
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from cli.embedding_file import (
    EmbeddingData, read_embeddings, write_embeddings,
    read_assignments, write_assignments, write_table,
)
from cli.manifest import RunManifest, manifest_path, write_json
from clustering import KMeansConfig, ClusteringResult, make_space, kmeans, semi_supervised_kmeans
from datagen import TreeSpec, synthetic_gcd
from geometry import (
    Curvature, DEFAULT_KAPPA, DEFAULT_CLIP_RADIUS, clip_euclidean, exp_map_lorentz,
    check_on_manifold, poincare_to_lorentz, klein_to_lorentz, lorentz_to_poincare,
)
from losses import LossWeights, TrainResult, toy_train
from metrics import EvalInput, EvalReport, clustering_accuracy, granularity_eval
from utils.config import ConfigManager
from utils.error_handling import ValidationError

logger = logging.getLogger(__name__)

CLI_SPACES = ('euclidean', 'lorentz', 'poincare')
SPACE_MODEL = {'euclidean': 'euclidean', 'lorentz': 'lorentz', 'poincare': 'poincare_via_klein'}
VARIANTS = ('semi', 'kmeans')
SUMMARY_METRICS = ('acc_all', 'acc_old', 'acc_new', 'homogeneity', 'largest_cluster_fraction')


def resolve_seed(seed: Optional[int]) -> int:
    return ConfigManager.get_default_seed() if seed is None else int(seed)


def embed_points(data: EmbeddingData, space: str, curvature: Optional[float] = None,
                 clip: float = DEFAULT_CLIP_RADIUS) -> Tuple[np.ndarray, Optional[Curvature]]:
    """
    Coordinates of ``data`` in the model used by ``space``.

    Tangent vectors are clipped and mapped onto the hyperboloid for the
    hyperbolic spaces; Poincaré coordinates are then taken from the Lorentz
    point, so every space sees the same geometry. Hyperbolic inputs are
    converted between models.

    Args:
        data (EmbeddingData): Input rows
        space (str): ``euclidean``, ``lorentz`` or ``poincare``
        curvature (Optional[float]): κ; the file's curvature or the default when omitted
        clip (float): Clip radius for tangent inputs

    Returns:
        Tuple[np.ndarray, Optional[Curvature]]: Points and the curvature used

    Raises:
        ValidationError: For curvature with the euclidean space, a curvature
            that contradicts the file, or non-tangent input to the euclidean space
        ManifoldError: If Lorentz input rows are off the hyperboloid
    """
    if space not in CLI_SPACES:
        raise ValidationError(f"Unknown space {space!r}; expected one of {CLI_SPACES}")
    model = data.header.model
    if space == 'euclidean':
        if curvature is not None:
            raise ValidationError("--curvature requires a hyperbolic space (lorentz or poincare)")
        if model != 'tangent':
            raise ValidationError(f"The euclidean space clusters tangent vectors; the input holds {model} points")
        return data.points, None

    if curvature is not None and data.header.curvature is not None and model != 'tangent' \
            and float(curvature) != data.header.curvature:
        raise ValidationError(
            f"--curvature {curvature} contradicts the file's curvature {data.header.curvature}")
    kappa = curvature if curvature is not None else (data.header.curvature or DEFAULT_KAPPA)
    k = Curvature(float(kappa))

    if model == space:
        return (check_on_manifold(data.points, k) if model == 'lorentz' else data.points), k
    if model == 'tangent':
        lorentz = exp_map_lorentz(clip_euclidean(data.points, clip), k)
    elif model == 'lorentz':
        lorentz = check_on_manifold(data.points, k)
    elif model == 'poincare':
        lorentz = poincare_to_lorentz(data.points, k)
    else:
        lorentz = klein_to_lorentz(data.points, k)
    return (lorentz if space == 'lorentz' else lorentz_to_poincare(lorentz, k)), k


def run_clustering(data: EmbeddingData, space: str, k: Optional[int], seed: int, *,
                   semi_supervised: bool = False, curvature: Optional[float] = None,
                   clip: float = DEFAULT_CLIP_RADIUS, restarts: Optional[int] = None, reseed: bool = True,
                   max_iters: int = 300, threads: Optional[int] = None) -> Tuple[ClusteringResult, Optional[Curvature]]:
    """Embed ``data`` for ``space`` and run (semi-supervised) K-Means."""
    points, kappa = embed_points(data, space, curvature, clip)
    k = k or data.class_count
    if not k:
        raise ValidationError("--k is required when the input carries no labels")
    cfg = KMeansConfig(k=k, max_iters=max_iters, seed=seed, restarts=restarts, reseed=reseed,
                       num_threads=threads)
    metric = make_space(SPACE_MODEL[space], kappa)
    if semi_supervised:
        result = semi_supervised_kmeans(data.to_dataset(points), cfg, metric)
    else:
        result = kmeans(points, cfg, metric)
    logger.info(f"{space} clustering: objective={result.objective:.6g} "
                f"largest cluster={result.largest_cluster_fraction:.3f}")
    return result, kappa


def evaluate(data: EmbeddingData, predicted: np.ndarray, levels: bool = False) -> EvalReport:
    """
    GCD evaluation of ``predicted`` against the labels of ``data``.

    The unlabeled rows are evaluated; every one of them needs a label.
    """
    eval_mask = ~data.is_labeled
    if np.any(data.labels[eval_mask] < 0):
        raise ValidationError("Every evaluated (unlabeled) row needs a ground-truth label")
    report = clustering_accuracy(EvalInput(predicted, data.labels, data.is_old, eval_mask))
    if levels:
        if data.header.levels == 0:
            raise ValidationError("--levels needs level labels in the truth file")
        report.level_homogeneity = granularity_eval(predicted, data.level_labels, eval_mask)
    return report


def cmd_synth(args: argparse.Namespace) -> List[str]:
    seed = resolve_seed(args.seed)
    spec = TreeSpec(depth=args.depth, branching=args.branching, points_per_leaf=args.points_per_leaf,
                    dispersion=args.dispersion, dim=args.dim, seed=seed)
    data = synthetic_gcd(spec, args.old_fraction, args.labeled_fraction)
    manifest = RunManifest.start('synth', args.argv, {
        'depth': spec.depth, 'branching': spec.branching_per_level,
        'points_per_leaf': spec.points_per_leaf, 'dispersion': spec.dispersion, 'dim': spec.dim,
        'old_fraction': args.old_fraction, 'labeled_fraction': args.labeled_fraction,
    }, [seed])
    write_embeddings(args.out, EmbeddingData.from_synthetic(data))
    manifest.finish([args.out], manifest_path(args.out, args.manifest))
    return [args.out]


def cmd_cluster(args: argparse.Namespace) -> List[str]:
    seed = resolve_seed(args.seed)
    data = read_embeddings(args.input)
    config = {
        'space': args.space, 'curvature': args.curvature, 'k': args.k, 'clip': args.clip,
        'semi_supervised': args.semi_supervised, 'restarts': args.restarts,
        'reseed': not args.no_reseed, 'max_iters': args.max_iters,
    }
    manifest = RunManifest.start('cluster', args.argv, config, [seed], [args.input])
    result, kappa = run_clustering(
        data, args.space, args.k, seed, semi_supervised=args.semi_supervised,
        curvature=args.curvature, clip=args.clip, restarts=args.restarts,
        reseed=not args.no_reseed, max_iters=args.max_iters, threads=args.threads)

    trace_path = args.out + '.trace.tsv'
    report_path = args.out + '.report.json'
    write_assignments(args.out, data.ids, result.assignments, space=args.space, k=result.k)
    write_table(trace_path, ['iteration', 'objective'],
                [(i + 1, v) for i, v in enumerate(result.objective_trace)])
    write_json(report_path, {
        'space': args.space,
        'curvature': None if kappa is None else kappa.kappa,
        'k': result.k,
        'objective': result.objective,
        'iterations': result.iterations,
        'converged': result.converged,
        'restart': result.restart,
        'cluster_sizes': result.cluster_sizes,
        'largest_cluster_fraction': result.largest_cluster_fraction,
        'class_to_cluster': result.class_to_cluster,
    })
    outputs = [args.out, trace_path, report_path]
    manifest.finish(outputs, manifest_path(args.out, args.manifest))
    return outputs


def cmd_eval(args: argparse.Namespace) -> List[str]:
    truth = read_embeddings(args.truth)
    assigned = read_assignments(args.assignments)
    index = {row_id: i for i, row_id in enumerate(truth.ids)}
    missing = [row_id for row_id in assigned.ids if row_id not in index]
    if missing or len(assigned.ids) != len(truth.ids):
        raise ValidationError(
            f"Assignments and truth cover different rows ({len(missing)} unknown id(s))")
    predicted = np.empty(len(truth.ids), dtype=np.int64)
    predicted[[index[row_id] for row_id in assigned.ids]] = assigned.clusters

    manifest = RunManifest.start('eval', args.argv, {'levels': args.levels}, [],
                                 [args.assignments, args.truth])
    report = evaluate(truth, predicted, args.levels)
    write_json(args.out, report.to_dict())
    outputs = [args.out]
    if args.levels:
        levels_path = args.out + '.levels.tsv'
        write_table(levels_path, ['level', 'homogeneity'],
                    [(i + 1, h) for i, h in enumerate(report.level_homogeneity)])
        outputs.append(levels_path)
    logger.info(f"acc all={report.acc_all:.4f} old={report.acc_old:.4f} new={report.acc_new:.4f} "
                f"homogeneity={report.homogeneity:.4f}")
    manifest.finish(outputs, manifest_path(args.out, args.manifest))
    return outputs


def _train(data: EmbeddingData, args: argparse.Namespace, clip: float, seed: int) -> TrainResult:
    if data.header.model != 'tangent':
        raise ValidationError(f"Toy training needs tangent vectors; the input holds {data.header.model} points")
    result = toy_train(
        data.to_dataset(), epochs=args.epochs, lr=args.lr,
        weights=LossWeights(lam=args.lam), seed=seed, tau=args.tau, clip_radius=clip,
        curvature=Curvature(args.curvature if args.curvature is not None else DEFAULT_KAPPA),
        jitter=args.jitter, neighbors=args.neighbors, decay_alpha=not args.fixed_alpha,
        batch_size=args.batch_size)
    return result


def cmd_toy_train(args: argparse.Namespace) -> List[str]:
    seed = resolve_seed(args.seed)
    data = read_embeddings(args.input)
    config = {
        'tau': args.tau, 'lambda': args.lam, 'clip': args.clip, 'epochs': args.epochs, 'lr': args.lr,
        'curvature': args.curvature, 'jitter': args.jitter, 'neighbors': args.neighbors,
        'fixed_alpha': args.fixed_alpha, 'batch_size': args.batch_size, 'best': args.best,
    }
    manifest = RunManifest.start('toy-train', args.argv, config, [seed], [args.input])
    result = _train(data, args, args.clip, seed)
    trained = result.best_embeddings if args.best else result.embeddings
    logger.info(f"Best loss {result.best_loss:.6f} at epoch {result.best_epoch}")

    loss_path = args.out + '.loss.tsv'
    write_embeddings(args.out, data.with_points(trained, 'tangent'))
    write_table(loss_path, ['epoch', 'loss'], list(enumerate(result.loss_trace)))
    outputs = [args.out, loss_path]
    manifest.finish(outputs, manifest_path(args.out, args.manifest))
    return outputs


def _finite_stats(values: List[float]) -> Dict[str, Optional[float]]:
    finite = np.array([v for v in values if np.isfinite(v)], dtype=np.float64)
    if finite.size == 0:
        return {'mean': None, 'std': None, 'n': 0}
    return {'mean': float(np.mean(finite)), 'std': float(np.std(finite)), 'n': int(finite.size)}


def _ablation_data(args: argparse.Namespace, seed: int) -> EmbeddingData:
    if args.input:
        return read_embeddings(args.input)
    spec = TreeSpec(depth=args.depth, branching=args.branching, points_per_leaf=args.points_per_leaf,
                    dim=args.dim, seed=seed)
    return EmbeddingData.from_synthetic(synthetic_gcd(spec))


def cmd_ablate(args: argparse.Namespace) -> List[str]:
    """
    Grid of {space x clip radius x K-Means variant} over paired seeds.

    Per seed the same data and training run feed every space, so hyperbolic
    minus euclidean deltas are paired. The euclidean space clusters the
    trained tangent vectors unless ``--euclidean-input raw``.
    """
    base = resolve_seed(args.seed)
    seeds = [base + i for i in range(args.seeds)]
    for space in args.spaces:
        if space not in CLI_SPACES:
            raise ValidationError(f"Unknown space {space!r}; expected one of {CLI_SPACES}")
    for variant in args.variants:
        if variant not in VARIANTS:
            raise ValidationError(f"Unknown variant {variant!r}; expected one of {VARIANTS}")
    config = {
        'spaces': args.spaces, 'clips': args.clips, 'variants': args.variants,
        'epochs': args.epochs, 'lr': args.lr, 'tau': args.tau, 'lambda': args.lam,
        'jitter': args.jitter, 'neighbors': args.neighbors, 'curvature': args.curvature,
        'restarts': args.restarts, 'reseed': not args.no_reseed,
        'euclidean_input': args.euclidean_input,
    }
    manifest = RunManifest.start('ablate', args.argv, config, seeds, [args.input] if args.input else [])

    rows = []
    levels = 0
    for seed in seeds:
        data = _ablation_data(args, seed)
        levels = data.header.levels
        raw_cache: Dict[str, Tuple[ClusteringResult, EvalReport]] = {}
        for clip in args.clips:
            trained = data.with_points(_train(data, args, clip, seed).embeddings, 'tangent')
            for space in args.spaces:
                for variant in args.variants:
                    use_raw = space == 'euclidean' and args.euclidean_input == 'raw'
                    if use_raw and variant in raw_cache:
                        result, report = raw_cache[variant]
                    else:
                        source = data if use_raw else trained
                        result, _ = run_clustering(
                            source, space, None, seed, semi_supervised=variant == 'semi',
                            curvature=None if space == 'euclidean' else args.curvature, clip=clip,
                            restarts=args.restarts, reseed=not args.no_reseed, threads=args.threads)
                        report = evaluate(source, result.assignments, levels > 0)
                        if use_raw:
                            raw_cache[variant] = (result, report)
                    rows.append({
                        'seed': seed, 'clip': clip, 'space': space, 'variant': variant,
                        'acc_all': report.acc_all, 'acc_old': report.acc_old, 'acc_new': report.acc_new,
                        'homogeneity': report.homogeneity,
                        'level_homogeneity': list(report.level_homogeneity),
                        'largest_cluster_fraction': result.largest_cluster_fraction,
                        'objective': result.objective,
                    })

    level_columns = [f"homogeneity_level{i + 1}" for i in range(levels)]
    columns = ['seed', 'clip', 'space', 'variant', 'acc_all', 'acc_old', 'acc_new', 'homogeneity'] \
        + level_columns + ['largest_cluster_fraction', 'objective']
    write_table(args.out, columns, [
        [r['seed'], r['clip'], r['space'], r['variant'], r['acc_all'], r['acc_old'], r['acc_new'],
         r['homogeneity']] + r['level_homogeneity'] + [r['largest_cluster_fraction'], r['objective']]
        for r in rows])

    summary_path = args.out + '.summary.json'
    write_json(summary_path, {'seeds': seeds, 'cells': _summarize(rows, levels)})
    outputs = [args.out, summary_path]
    manifest.finish(outputs, manifest_path(args.out, args.manifest))
    return outputs


def _summarize(rows: List[dict], levels: int) -> List[dict]:
    """Mean/std per cell plus paired deltas against the euclidean cell of the same clip and variant."""
    cells = []
    keys = sorted({(r['clip'], r['space'], r['variant']) for r in rows}, key=str)
    by_key = {}
    for r in rows:
        by_key.setdefault((r['clip'], r['space'], r['variant']), {})[r['seed']] = r
    for clip, space, variant in keys:
        members = by_key[(clip, space, variant)]
        cell = {'clip': 'inf' if np.isinf(clip) else clip, 'space': space, 'variant': variant}
        for metric in SUMMARY_METRICS:
            cell[metric] = _finite_stats([m[metric] for m in members.values()])
        for level in range(levels):
            cell[f"homogeneity_level{level + 1}"] = _finite_stats(
                [m['level_homogeneity'][level] for m in members.values()])

        baseline = by_key.get((clip, 'euclidean', variant))
        if space != 'euclidean' and baseline:
            paired = [s for s in members if s in baseline]
            deltas = [members[s]['acc_all'] - baseline[s]['acc_all'] for s in paired]
            cell['delta_acc_all_vs_euclidean'] = {
                'per_seed': dict(zip(paired, deltas)),
                'wins': sum(1 for d in deltas if d >= 0.0),
                **_finite_stats(deltas),
            }
            if levels:
                coarse = [members[s]['level_homogeneity'][0] - baseline[s]['level_homogeneity'][0]
                          for s in paired]
                cell['delta_coarse_homogeneity_vs_euclidean'] = _finite_stats(coarse)
        cells.append(cell)
    return cells
