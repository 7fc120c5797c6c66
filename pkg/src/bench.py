"""
Benchmark sintético de latência de leilões
Modelos aleatórios sobre m campos, contextos de tamanho variável, DPLR contra podas de mesmo orçamento
"""

import time
from typing import Iterator, List, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from tqdm import tqdm

from .errors import DataError, NumericError
from .fwfm import pairwise_bruteforce
from .models import BenchGrid, BenchRecord, FieldSchema
from .params import FieldVectors, random_params
from .ranking import OpCounter, RankingEngine

ENGINE_CODES = {'dplr': 0, 'pruned': 1, 'fm': 2, 'fwfm': 3}
LOW_RESOLUTION_NS = 1_000
GROUP_COLUMNS = ['engine', 'rank_or_keep', 'm', 'context_fields', 'auction_size']


def engine_configs(grid: BenchGrid) -> Iterator[Tuple[str, int, int]]:
    """(motor, posto do modelo, posto ou q registrado) para cada motor da grade"""
    for engine in grid.engines:
        if engine == 'dplr':
            for rank in grid.ranks:
                yield engine, rank, rank
        elif engine == 'pruned':
            for rank in grid.ranks:
                yield engine, rank, rank * (grid.m + 1)
        elif engine == 'fwfm':
            yield engine, 1, grid.m * (grid.m - 1) // 2
        else:
            yield engine, 1, 0


def build_engine(grid: BenchGrid, engine: str, rank: int, keep: int, m_c: int) -> RankingEngine:
    schema = FieldSchema.synthetic([1] * grid.m, m_c)
    seed = int(np.random.default_rng([grid.seed, ENGINE_CODES[engine], rank, m_c]).integers(2 ** 31))
    params = random_params(schema, engine, grid.k, rank=rank, keep=keep, seed=seed)
    return RankingEngine.for_params(params)


def correctness_gate(engine: RankingEngine, rng: np.random.Generator, k: int) -> int:
    """
    Valida um item e um lote contra o oráculo força-bruta e devolve a contagem de operações por item

    Raises:
        NumericError: divergência acima de 1e-9 relativo
    """
    V = rng.normal(size=(engine.m, k))
    cache = engine.cache_from_vectors(V[:engine.m_c], 0.0)
    counter = OpCounter()
    fast = engine.item_pairwise(cache, V[engine.m_c:], counter)
    batched = engine.items_pairwise(cache, V[None, engine.m_c:])[0]
    oracle = pairwise_bruteforce(FieldVectors(V=V), engine.params.interaction)
    scale = max(1.0, abs(oracle))
    if abs(fast - oracle) > 1e-9 * scale or abs(batched - oracle) > 1e-9 * scale:
        raise NumericError(f"Motor {engine.name} diverge do oráculo: {fast} / {batched} != {oracle}")
    return counter.count


def _draw_auctions(rng: np.random.Generator, count: int, size: int, m: int, m_c: int,
                   k: int) -> Tuple[np.ndarray, np.ndarray]:
    return rng.normal(size=(count, m_c, k)), rng.normal(size=(count, size, m - m_c, k))


def _time_auctions(engine: RankingEngine, contexts: np.ndarray, items: np.ndarray) -> int:
    start = time.perf_counter_ns()
    for V_C, V_items in zip(contexts, items):
        cache = engine.cache_from_vectors(V_C, 0.0)
        engine.items_pairwise(cache, V_items)
    return time.perf_counter_ns() - start


def run_grid(grid: BenchGrid) -> List[BenchRecord]:
    """
    Executa a grade completa

    Cada medição pontua auctions_per_measurement leilões e divide o tempo;
    vetores novos são sorteados por leilão, fora da região cronometrada.
    """
    records: List[BenchRecord] = []
    configs = [(engine, rank, keep, m_c)
               for engine, rank, keep in engine_configs(grid)
               for m_c in grid.context_counts]
    count = grid.auctions_per_measurement

    for engine_name, rank, keep, m_c in tqdm(configs, desc="benchmark", leave=False):
        engine = build_engine(grid, engine_name, rank, keep, m_c)
        rng = np.random.default_rng([grid.seed, ENGINE_CODES[engine_name], rank, m_c, 1])
        ops = correctness_gate(engine, rng, grid.k)

        for size in grid.auction_sizes:
            contexts, items = _draw_auctions(rng, 1, size, grid.m, m_c, grid.k)
            _time_auctions(engine, contexts, items)  # aquecimento
            for rep in range(grid.repetitions):
                contexts, items = _draw_auctions(rng, count, size, grid.m, m_c, grid.k)
                elapsed = max(_time_auctions(engine, contexts, items), 1)
                per_auction = max(elapsed // count, 1)
                low_resolution = elapsed / count < LOW_RESOLUTION_NS
                if low_resolution:
                    logger.warning(f"Medição abaixo de 1µs: {engine_name} m_c={m_c} leilão={size}")
                records.append(BenchRecord(
                    engine=engine_name, rank_or_keep=keep, m=grid.m, context_fields=m_c,
                    auction_size=size, rep=rep, total_ns=per_auction,
                    per_item_ns=elapsed / count / size, per_item_ops=ops,
                    low_resolution=low_resolution,
                ))
        logger.debug(f"{engine_name} rank_or_keep={keep} m_c={m_c}: {ops} ops/item")
    logger.info(f"Benchmark concluído: {len(records)} registros")
    return records


def records_frame(records: Sequence[BenchRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in records])


def summarize(records: Sequence[BenchRecord]) -> pd.DataFrame:
    """
    Média e erro padrão (desvio amostral / √reps) por configuração

    Raises:
        DataError: configuração com menos de dois registros
    """
    if not records:
        raise DataError("Nenhum registro para resumir")
    df = records_frame(records)
    grouped = df.groupby(GROUP_COLUMNS, sort=False)
    summary = grouped.agg(
        reps=('rep', 'count'),
        total_ns_mean=('total_ns', 'mean'),
        total_ns_std=('total_ns', 'std'),
        per_item_ns_mean=('per_item_ns', 'mean'),
        per_item_ns_std=('per_item_ns', 'std'),
        per_item_ops=('per_item_ops', 'first'),
    ).reset_index()
    if (summary['reps'] < 2).any():
        raise DataError("Erro padrão exige ao menos dois registros por configuração")
    root = np.sqrt(summary['reps'])
    summary['total_ns_se'] = summary.pop('total_ns_std') / root
    summary['per_item_ns_se'] = summary.pop('per_item_ns_std') / root
    return summary[GROUP_COLUMNS + ['reps', 'total_ns_mean', 'total_ns_se',
                                    'per_item_ns_mean', 'per_item_ns_se', 'per_item_ops']]
