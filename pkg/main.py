"""
BetterGNN CLI
Punto de entrada: python main.py <subcomando> [opciones]

Cada subcomando imprime un resultado JSON en stdout; los logs van a stderr.
Códigos de salida: 0 éxito, 1 error de uso, 2 error de datos o de modelo, 3 chequeo fallido.
"""
import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from ablation import run_ablation_seeds
from config import MODEL_KINDS, REWIRING_MODES, BetterGNNConfig, resolve_synth_config, resolve_train_config
from dataset_store import load_dataset, read_summaries, save_dataset, write_summaries
from errors import CheckFailed, DataError, ModelError, UsageError
from model import build_model, load_checkpoint, save_checkpoint
from nn_core import grad_check
from propagation_graph import batch_graphs, split_dataset
from report_store import CsvStore, epoch_log_store, write_topo_report
from synth import generate, toy_dataset
from topo_features import augment_dataset, summarize_dataset
from topology_analysis import build_report, compare_classes, redundant_feature_pairs
from training import compare_models, evaluate, prepare_dataset, train


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK = 3


class CliParser(argparse.ArgumentParser):
    """ArgumentParser que lanza UsageError en lugar de terminar el proceso."""

    def error(self, message: str):
        raise UsageError(f'{message}\n{self.format_usage()}')


def _seed_list(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(',') if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'lista de semillas inválida: {raw!r}') from e


def _model_list(raw: str) -> List[str]:
    kinds = [part.strip() for part in raw.split(',') if part.strip()]
    unknown = [kind for kind in kinds if kind not in MODEL_KINDS]
    if unknown or not kinds:
        raise argparse.ArgumentTypeError(f'modelos desconocidos: {unknown} (opciones: {MODEL_KINDS})')
    return kinds


def _add_train_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--model', dest='model_kind', choices=MODEL_KINDS, help='Tipo de modelo')
    parser.add_argument('--epochs', type=int, help='Cantidad de épocas')
    parser.add_argument('--lr', dest='learning_rate', type=float, help='Learning rate de Adam')
    parser.add_argument('--weight-decay', type=float, help='Weight decay L2 acoplado')
    parser.add_argument('--batch-size', type=int, help='Grafos por batch')
    parser.add_argument('--hidden-dim', type=int, help='Ancho oculto')
    parser.add_argument('--dropout', dest='dropout_rate', type=float, help='Tasa de dropout (BetterGNN)')
    parser.add_argument('--concat-news', action='store_const', const=True, help='Concatenar la raíz (baselines)')


def _train_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    names = ('model_kind', 'epochs', 'learning_rate', 'weight_decay', 'batch_size',
             'hidden_dim', 'dropout_rate', 'concat_news', 'seed', 'rewiring')
    return {name: getattr(args, name, None) for name in names}


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument('--seed', type=int, help='Semilla (flag > --config > entorno > default)')
    common.add_argument('--config', help='Archivo KEY=VALUE con la configuración')

    parser = CliParser(prog='main.py', description='BetterGNN: detección de fake news con GNN y features topológicas')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen', parents=[common], help='Genera un dataset sintético')
    p.add_argument('--out', required=True, help='Archivo de dataset de salida')
    p.add_argument('--graphs', dest='graphs_per_class', type=int, help='Grafos por clase')
    p.add_argument('--min-nodes', type=int)
    p.add_argument('--max-nodes', type=int)
    p.add_argument('--feat-dim', type=int)
    p.add_argument('--structure-signal', type=float)
    p.add_argument('--feature-signal', type=float)
    p.add_argument('--base-closure', type=float)

    p = sub.add_parser('augment', parents=[common], help='Agrega centralidad y clustering a las features')
    p.add_argument('--dataset', required=True)
    p.add_argument('--out', required=True)

    p = sub.add_parser('summarize', parents=[common], help='Resume la topología de cada grafo en un CSV')
    p.add_argument('--dataset', required=True)
    p.add_argument('--out', required=True)

    p = sub.add_parser('analyze', parents=[common], help='Reporte topológico desde un CSV de resúmenes')
    p.add_argument('--summaries', required=True)
    p.add_argument('--out-dir', required=True)

    p = sub.add_parser('train', parents=[common], help='Entrena un modelo')
    p.add_argument('--dataset', required=True)
    p.add_argument('--out-dir', required=True, help='Directorio para best.npz, last.npz y epochs.csv')
    p.add_argument('--resume', action='store_true', help='Continuar desde last.npz del out-dir')
    _add_train_flags(p)

    p = sub.add_parser('eval', parents=[common], help='Evalúa un checkpoint')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--dataset', required=True)
    p.add_argument('--split', default='test', choices=('train', 'val', 'test'))

    p = sub.add_parser('ablate', parents=[common], help='Ablación original / solo features / solo estructura')
    p.add_argument('--dataset', required=True)
    p.add_argument('--seeds', type=_seed_list, help='Semillas separadas por coma (default: --seed)')
    p.add_argument('--rewiring', choices=REWIRING_MODES)
    p.add_argument('--out', help='CSV opcional con una fila por semilla')
    _add_train_flags(p)

    p = sub.add_parser('gradcheck', parents=[common], help='Chequeo de gradientes sobre un batch de juguete')
    p.add_argument('--model', dest='model_kind', choices=MODEL_KINDS, default='better_gnn')
    p.add_argument('--hidden-dim', type=int, default=8)
    p.add_argument('--concat-news', action='store_true')
    p.add_argument('--epsilon', type=float, default=1e-5)
    p.add_argument('--tolerance', type=float, default=1e-4)
    p.add_argument('--samples', type=int, default=100)

    p = sub.add_parser('compare', parents=[common], help='Compara BetterGNN contra los baselines')
    p.add_argument('--dataset', required=True)
    p.add_argument('--models', type=_model_list, default=list(MODEL_KINDS))
    _add_train_flags(p)

    return parser


# ========== Subcomandos ==========

def cmd_gen(args: argparse.Namespace) -> Dict[str, Any]:
    names = ('graphs_per_class', 'min_nodes', 'max_nodes', 'feat_dim',
             'structure_signal', 'feature_signal', 'base_closure', 'seed')
    config = resolve_synth_config(args.config, {name: getattr(args, name) for name in names})
    ds = generate(config)
    save_dataset(ds, args.out)
    return {'path': args.out, 'num_graphs': len(ds), 'feat_dim': ds.feat_dim, 'config': config.to_dict()}


def cmd_augment(args: argparse.Namespace) -> Dict[str, Any]:
    ds = load_dataset(args.dataset)
    if ds.augmented:
        raise DataError(f'El dataset {args.dataset} ya está aumentado')
    augmented = augment_dataset(ds)
    save_dataset(augmented, args.out)
    return {'path': args.out, 'num_graphs': len(augmented), 'feat_dim': augmented.feat_dim}


def cmd_summarize(args: argparse.Namespace) -> Dict[str, Any]:
    summaries = summarize_dataset(load_dataset(args.dataset))
    write_summaries(summaries, args.out)
    return {'path': args.out, 'num_graphs': len(summaries)}


def cmd_analyze(args: argparse.Namespace) -> Dict[str, Any]:
    report = build_report(read_summaries(args.summaries))
    files = write_topo_report(report, args.out_dir)
    try:
        comparisons = [c.__dict__ for c in compare_classes(report)]
    except DataError as e:
        logger.warning(f'Sin comparación entre clases: {e}')
        comparisons = []
    return {
        'num_graphs': report.num_graphs,
        'comparisons': comparisons,
        'redundant_pairs': [list(pair) for pair in redundant_feature_pairs(report)],
        'degenerate_features': report.degenerate_features,
        'files': files,
    }


def _with_splits(ds, fractions, seed):
    return ds if ds.splits else split_dataset(ds, tuple(fractions), seed)


def cmd_train(args: argparse.Namespace) -> Dict[str, Any]:
    config = resolve_train_config(args.config, _train_overrides(args))
    ds = _with_splits(load_dataset(args.dataset), config.split_fractions, config.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    best_path = os.path.join(args.out_dir, 'best.npz')
    last_path = os.path.join(args.out_dir, 'last.npz')

    resume_from = best_so_far = None
    if args.resume:
        if not os.path.exists(last_path):
            raise UsageError(f'--resume: no existe {last_path}')
        resume_from = load_checkpoint(last_path)
        best_so_far = load_checkpoint(best_path) if os.path.exists(best_path) else None

    previous = resume_from.train_state.get('log', []) if resume_from is not None else []
    store = epoch_log_store(args.out_dir, previous)
    result = train(ds, config, resume_from, best_so_far, on_epoch=lambda entry, _: store.append_row(entry.to_dict()))
    save_checkpoint(result.best, best_path)
    save_checkpoint(result.last, last_path)

    output: Dict[str, Any] = {
        'model_kind': config.model_kind,
        'best_epoch': result.best.epoch,
        'last_epoch': result.last.epoch,
        'best_val_macro_f1': result.best.metrics.get('val_macro_f1'),
        'config': config.to_dict(),
        'files': {'best': best_path, 'last': last_path, 'epochs': store.file_path},
    }
    if ds.subset('test'):
        output['test'] = evaluate(result.best, ds, 'test').to_dict()
    return output


def cmd_eval(args: argparse.Namespace) -> Dict[str, Any]:
    checkpoint = load_checkpoint(args.checkpoint)
    saved = checkpoint.train_state.get('config', {})
    config = resolve_train_config(args.config, {'seed': args.seed})
    fractions = saved.get('split_fractions', config.split_fractions)
    seed = args.seed if args.seed is not None else saved.get('seed', config.seed)
    ds = _with_splits(load_dataset(args.dataset), fractions, seed)
    return evaluate(checkpoint, ds, args.split).to_dict()


def cmd_ablate(args: argparse.Namespace) -> Dict[str, Any]:
    config = resolve_train_config(args.config, _train_overrides(args))
    seeds = args.seeds or [config.seed]
    reports, mean = run_ablation_seeds(load_dataset(args.dataset), config, seeds)
    output = {'reports': [r.to_dict() for r in reports], 'mean': mean.to_dict()}
    if args.out:
        if os.path.exists(args.out):
            os.remove(args.out)
        store = CsvStore(args.out, reports[0].CSV_FIELDS)
        store.append_rows(r.to_row() for r in reports + [mean])
        output['path'] = args.out
    return output


def cmd_gradcheck(args: argparse.Namespace) -> Dict[str, Any]:
    seed = args.seed if args.seed is not None else resolve_train_config(args.config).seed
    ds = prepare_dataset(toy_dataset(seed), args.model_kind)
    batch = batch_graphs(ds.graphs)
    model = build_model(args.model_kind, ds.feat_dim, args.hidden_dim, 0.0, seed, args.concat_news)
    report = grad_check(model, batch, args.epsilon, args.tolerance, args.samples, seed)
    return {'model_kind': args.model_kind, **report.to_dict()}


def cmd_compare(args: argparse.Namespace) -> Dict[str, Any]:
    config = resolve_train_config(args.config, _train_overrides(args))
    comparison = compare_models(load_dataset(args.dataset), config, args.models)
    return {
        'reference': comparison['reference'],
        'reports': {kind: report.to_dict() for kind, report in comparison['reports'].items()},
        'deltas': comparison['deltas'],
    }


COMMANDS = {
    'gen': cmd_gen,
    'augment': cmd_augment,
    'summarize': cmd_summarize,
    'analyze': cmd_analyze,
    'train': cmd_train,
    'eval': cmd_eval,
    'ablate': cmd_ablate,
    'gradcheck': cmd_gradcheck,
    'compare': cmd_compare,
}


def _emit(command: str, status: str, payload: Dict[str, Any]):
    print(json.dumps({'command': command, 'status': status, **payload}, ensure_ascii=False, indent=2))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Ejecuta el CLI.

    Args:
        argv: Argumentos (default: sys.argv[1:])

    Returns:
        Código de salida
    """
    logging.basicConfig(
        level=getattr(logging, BetterGNNConfig.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )

    command = '?'
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        _emit(command, 'ok', COMMANDS[command](args))
        return EXIT_OK
    except UsageError as e:
        print(f'Error de uso: {e}', file=sys.stderr)
        return EXIT_USAGE
    except CheckFailed as e:
        logger.error(str(e))
        _emit(command, 'failed', e.report.to_dict() if e.report is not None else {'error': str(e)})
        return EXIT_CHECK
    except (DataError, ModelError) as e:
        logger.error(f'{type(e).__name__}: {e}')
        _emit(command, 'error', {'error': type(e).__name__, 'message': str(e)})
        return EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
