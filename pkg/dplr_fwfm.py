#!/usr/bin/env python3
"""
DPLR FwFM - linha de comando
Treino, avaliação, poda, decomposição, benchmark, inspeção e conversão de datasets.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from loguru import logger

# Adiciona o diretório src ao path
sys.path.append(str(Path(__file__).parent / "src"))

from src.bench import run_grid, summarize
from src.config import settings
from src.data_processor import encode_row
from src.decompose import (error_spectrum, posthoc_dplr, prune, representative_vectors,
                           sparsity_percent)
from src.errors import DataError, FwfmError
from src.exporter import ReportExporter
from src.importer import DatasetImporter, convert_avazu, convert_movielens, load_schema, read_rows
from src.models import BenchGrid, EvalReport, PruneBudget, TrainConfig
from src.params import KIND_CODES, KIND_LABELS, DenseSym, Dplr, ModelParams, PrunedSparse
from src.serialization import SCHEMA_SUFFIX, load_model, save_model
from src.trainer import Trainer, evaluate, grid_search_lr, train_pruned


def configure_logging() -> None:
    logger.remove()
    logger.add(sys.stderr, level=settings.log_level)
    logger.add(
        settings.log_file,
        rotation="1 day",
        retention="30 days",
        level=settings.log_level,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}"
    )


def print_config(args: argparse.Namespace, effective: Optional[dict] = None) -> None:
    """Argumentos da linha de comando com os valores efetivos (defaults de settings) por cima"""
    resolved = {k: v for k, v in vars(args).items() if k != 'func'}
    resolved.update(effective or {})
    print(json.dumps(resolved, ensure_ascii=False, default=str))


def print_report(prefix: str, report: EvalReport) -> None:
    if report.mse is not None:
        print(f"{prefix} mse={report.mse:.4f} count={report.count}")
        return
    auc = f"{report.auc:.4f}" if report.auc is not None else "indefinida"
    print(f"{prefix} logloss={report.logloss:.4f} auc={auc} count={report.count}")


def default_loss(params_or_task) -> str:
    task = params_or_task if isinstance(params_or_task, str) else params_or_task.schema.task
    return 'mse' if task == 'regression' else 'logloss'


def first_sample_vectors(params: ModelParams, data: Optional[str]):
    """V representativo: primeira linha de --data ou a média dos embeddings"""
    if not data:
        return representative_vectors(params)
    rows = read_rows(data, params.schema)
    if not rows:
        raise DataError(f"{data} sem linhas")
    return representative_vectors(params, encode_row(rows[0], params.schema, 0))


def require_dense(params: ModelParams, command: str) -> DenseSym:
    if not isinstance(params.interaction, DenseSym):
        raise DataError(f"{command} exige um modelo FwFM denso, recebido {KIND_LABELS[KIND_CODES[params.variant]]}")
    return params.interaction


def with_interaction(params: ModelParams, interaction) -> ModelParams:
    return ModelParams(b0=params.b0, b=params.b, W=params.W, schema=params.schema, interaction=interaction)


def cmd_train(args: argparse.Namespace) -> int:
    schema = load_schema(args.schema)
    loss = args.loss or default_loss(schema.task)
    config = TrainConfig(
        variant=args.variant, rank=args.rank, dim=args.dim, loss=loss,
        learning_rate=args.lr or settings.learning_rate, epochs=args.epochs,
        batch_size=args.batch or settings.batch_size, optimizer=args.optimizer,
        seed=args.seed, weight_decay=args.weight_decay, keep=args.keep,
    )
    print_config(args, config.model_dump())

    prepared = DatasetImporter(schema, args.min_count).prepare(args.data, config.seed)
    if args.lr_grid:
        lr, params, results = grid_search_lr(prepared.train, prepared.validation, prepared.schema, config)
        print(" ".join(f"lr={k:g}:{v:.4f}" for k, v in results.items()) + f" best={lr:g}")
        history = []
    elif config.variant == 'pruned':
        params, trainer = train_pruned(prepared.train, prepared.schema, config, prepared.validation)
        history = trainer.history
    else:
        trainer = Trainer(prepared.schema, config)
        params = trainer.fit(prepared.train, prepared.validation)
        history = trainer.history

    save_model(params, args.model_out)
    if args.log_out and history:
        ReportExporter().export_training_log(history, args.log_out)
    if len(prepared.validation):
        print_report("validation", evaluate(prepared.validation, params, loss))
    if len(prepared.test):
        print_report("test", evaluate(prepared.test, params, loss))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if not Path(args.model + SCHEMA_SUFFIX).exists():
        raise DataError(f"Schema do modelo ausente: {args.model}{SCHEMA_SUFFIX}")
    params = load_model(args.model)
    loss = args.loss or default_loss(params)
    print_config(args, {'loss': loss})
    data = DatasetImporter(params.schema).load_encoded(args.data)
    report = evaluate(data, params, loss)
    print_report("eval", report)
    if args.metrics_out:
        ReportExporter().export_metrics(report, args.metrics_out)
    if report.auc_error:
        raise DataError(report.auc_error)
    return 0


def cmd_prune(args: argparse.Namespace) -> int:
    params = load_model(args.model)
    dense = require_dense(params, "prune")
    print_config(args)
    if args.keep is not None:
        budget = PruneBudget(keep=args.keep)
    else:
        budget = PruneBudget(rank_equivalent=args.rank_equivalent)
    pruned = prune(dense, budget)
    save_model(with_interaction(params, pruned), args.out)
    print(f"q={pruned.q} sparsity={sparsity_percent(pruned.q, params.m):.4f}%")
    if args.spectrum_out:
        report = error_spectrum(dense, pruned, first_sample_vectors(params, args.data))
        ReportExporter().export_spectrum(report, args.spectrum_out)
        print(f"bound={report.bound:.4f} trace={report.trace_value:.4f}")
    return 0


def cmd_decompose(args: argparse.Namespace) -> int:
    params = load_model(args.model)
    dense = require_dense(params, "decompose")
    print_config(args)
    result = posthoc_dplr(dense, args.rank, args.iters, args.tol)
    save_model(with_interaction(params, result.model), args.out)
    print(f"rank={args.rank} iterations={len(result.history)} "
          f"error={result.error:.4e} conversion_error={result.conversion_error:.4e}")
    if args.spectrum_out:
        report = error_spectrum(dense, result.model, first_sample_vectors(params, args.data))
        ReportExporter().export_spectrum(report, args.spectrum_out)
        print(f"bound={report.bound:.4f} trace={report.trace_value:.4f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    grid = BenchGrid(
        m=args.fields or settings.bench_fields,
        context_counts=args.context_counts or settings.bench_context_counts,
        ranks=args.ranks or settings.bench_ranks,
        auction_sizes=args.auction_sizes or settings.bench_auction_sizes,
        repetitions=args.reps or settings.bench_repetitions,
        auctions_per_measurement=args.auctions or settings.bench_auctions_per_measurement,
        k=args.dim or settings.bench_dim,
        seed=args.seed,
        engines=args.engines or ["dplr", "pruned", "fwfm"],
    )
    print_config(args, grid.model_dump())
    records = run_grid(grid)
    exporter = ReportExporter()
    exporter.export_bench_records(records, args.out)
    summary = summarize(records)
    summary_path = args.summary_out or str(Path(args.out).with_suffix('')) + "_summary.csv"
    exporter.export_bench_summary(summary, summary_path)
    print(f"records={len(records)} configs={len(summary)}")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    print_config(args)
    params = load_model(args.model)
    interaction = params.interaction
    counts = params.parameter_count()
    print(f"kind={KIND_LABELS[KIND_CODES[params.variant]]}")
    print(f"m={params.m} m_c={params.m_c} k={params.k} n={params.n}")
    if isinstance(interaction, Dplr):
        print(f"rho={interaction.rho}")
    elif isinstance(interaction, PrunedSparse):
        print(f"q={interaction.q} sparsity={sparsity_percent(interaction.q, params.m):.4f}%")
    print(f"params_base={counts['base']} params_interaction={counts['interaction']} "
          f"params_total={counts['total']}")
    if isinstance(interaction, Dplr):
        print(f"d_norm={float(np.linalg.norm(interaction.d)):.4f}")
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    print_config(args)
    if args.format == 'movielens':
        convert_movielens(args.source, args.out)
    else:
        convert_avazu(args.source, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Modelos FwFM com interação diagonal mais posto baixo (DPLR).")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='Treina um modelo a partir de um arquivo delimitado.')
    p.add_argument('--data', required=True)
    p.add_argument('--schema', required=True)
    p.add_argument('--model-out', required=True)
    p.add_argument('--variant', choices=list(KIND_CODES), default='dplr')
    p.add_argument('--rank', type=int, default=1)
    p.add_argument('--dim', type=int, default=8)
    p.add_argument('--lr', type=float, default=None)
    p.add_argument('--lr-grid', action='store_true', help='Busca a taxa de aprendizado na grade configurada.')
    p.add_argument('--epochs', type=int, default=5)
    p.add_argument('--batch', type=int, default=None)
    p.add_argument('--seed', type=int, default=settings.seed)
    p.add_argument('--loss', choices=['logloss', 'mse'], default=None)
    p.add_argument('--optimizer', choices=['adam', 'sgd'], default='adam')
    p.add_argument('--weight-decay', type=float, default=0.0)
    p.add_argument('--keep', type=int, default=None, help='Entradas mantidas na variante pruned.')
    p.add_argument('--min-count', type=int, default=None)
    p.add_argument('--log-out', default=None, help='TSV com uma linha por época.')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', help='Avalia um modelo em um arquivo delimitado.')
    p.add_argument('--data', required=True)
    p.add_argument('--model', required=True)
    p.add_argument('--loss', choices=['logloss', 'mse'], default=None)
    p.add_argument('--metrics-out', default=None, help='JSON com o relatório de avaliação.')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('prune', help='Poda por magnitude de um modelo FwFM denso.')
    p.add_argument('--model', required=True)
    budget = p.add_mutually_exclusive_group(required=True)
    budget.add_argument('--keep', type=int)
    budget.add_argument('--rank-equivalent', type=int)
    p.add_argument('--out', required=True)
    p.add_argument('--spectrum-out', default=None)
    p.add_argument('--data', default=None, help='Arquivo cuja primeira linha fornece V para o espectro.')
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser('decompose', help='Aproximação DPLR a posteriori de um modelo FwFM denso.')
    p.add_argument('--model', required=True)
    p.add_argument('--rank', type=int, required=True)
    p.add_argument('--iters', type=int, default=settings.posthoc_max_iters)
    p.add_argument('--tol', type=float, default=settings.posthoc_tol)
    p.add_argument('--out', required=True)
    p.add_argument('--spectrum-out', default=None)
    p.add_argument('--data', default=None, help='Arquivo cuja primeira linha fornece V para o espectro.')
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser('bench', help='Benchmark sintético de latência.')
    p.add_argument('--fields', type=int, default=None)
    p.add_argument('--context-counts', type=int, nargs='+', default=None)
    p.add_argument('--ranks', type=int, nargs='+', default=None)
    p.add_argument('--auction-sizes', type=int, nargs='+', default=None)
    p.add_argument('--reps', type=int, default=None)
    p.add_argument('--auctions', type=int, default=None, help='Leilões por medição.')
    p.add_argument('--dim', type=int, default=None)
    p.add_argument('--engines', nargs='+', choices=list(KIND_CODES), default=None)
    p.add_argument('--seed', type=int, default=settings.seed)
    p.add_argument('--out', required=True)
    p.add_argument('--summary-out', default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('inspect', help='Resumo legível de um arquivo de modelo.')
    p.add_argument('--model', required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser('convert', help='Converte MovieLens-1M ou Avazu para TSV com rótulo primeiro.')
    p.add_argument('--format', choices=['movielens', 'avazu'], required=True)
    p.add_argument('--source', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Função principal: devolve o código de saída"""
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return args.func(args)
    except FwfmError as e:
        logger.error(f"❌ {e}")
        print(f"erro: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        # validação pydantic de argumentos
        logger.error(f"❌ {e}")
        print(f"erro: {e}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
