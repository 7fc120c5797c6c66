"""
Motor de ranking com cache de contexto
Pontua leilões (um contexto, N itens) para as quatro variantes, com contagem de multiplicações-acumulações
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, DimensionError
from .models import Auction, FieldEntries
from .params import DenseSym, Dplr, FmImplicit, ModelParams, PrunedSparse


class OpCounter:
    """Contador de multiplicações-acumulações"""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def reset(self) -> None:
        self.count = 0


def _tick(counter: Optional[OpCounter], n: int) -> None:
    if counter is not None:
        counter.add(n)


@dataclass(frozen=True)
class ContextCache:
    """Quantidades do contexto calculadas uma vez por leilão"""

    linear: float          # b0 + parte linear do contexto
    vectors: np.ndarray    # V_C (m_c, k)
    parts: Dict[str, Any] = field(default_factory=dict)
    engine: Optional["RankingEngine"] = field(default=None, repr=False, compare=False)


class RankingEngine(ABC):
    """Base dos motores: coleta de vetores de campo e pontuação de itens"""

    name = "base"

    def __init__(self, params: ModelParams):
        self.params = params
        self.m = params.m
        self.m_c = params.m_c
        self.k = params.k
        self.offsets = params.schema.offsets
        self.vocab_sizes = params.schema.vocab_sizes

    @staticmethod
    def for_params(params: ModelParams) -> "RankingEngine":
        """Motor adequado à variante de interação do modelo"""
        interaction = params.interaction
        if isinstance(interaction, FmImplicit):
            return FmEngine(params)
        if isinstance(interaction, DenseSym):
            return DenseEngine(params)
        if isinstance(interaction, PrunedSparse):
            return PrunedEngine(params)
        return DplrEngine(params)

    def gather(self, fragment: Sequence[FieldEntries], first_field: int,
               counter: Optional[OpCounter] = None) -> Tuple[np.ndarray, float]:
        """Vetores de campo e soma linear de um fragmento (contexto ou item)"""
        V = np.zeros((len(fragment), self.k))
        linear = 0.0
        for row, entries in enumerate(fragment):
            f = first_field + row
            for local_id, weight in entries:
                if not 0 <= local_id < self.vocab_sizes[f]:
                    raise DataError(f"Id {local_id} fora do vocabulário do campo {f}")
                gid = self.offsets[f] + local_id
                V[row] += weight * self.params.W[gid].astype(np.float64)
                linear += weight * float(self.params.b[gid])
            _tick(counter, len(entries) * (self.k + 1))
        return V, linear

    def build_context_cache(self, context: Sequence[FieldEntries],
                            counter: Optional[OpCounter] = None) -> ContextCache:
        if len(context) != self.m_c:
            raise DimensionError(f"Contexto com {len(context)} campos, esperado m_c={self.m_c}")
        V_C, linear = self.gather(context, 0, counter)
        cache = self.cache_from_vectors(V_C, float(self.params.b0) + linear, counter)
        return replace(cache, engine=self)

    def score_item(self, cache: ContextCache, item: Sequence[FieldEntries],
                   counter: Optional[OpCounter] = None) -> float:
        """Escore completo de um item: linear do contexto e do item mais o termo par-a-par"""
        if len(item) != self.m - self.m_c:
            raise DimensionError(f"Item com {len(item)} campos, esperado {self.m - self.m_c}")
        V_I, linear = self.gather(item, self.m_c, counter)
        return cache.linear + linear + self.item_pairwise(cache, V_I, counter)

    def score_auction(self, auction: Auction) -> np.ndarray:
        """Constrói o cache uma vez e pontua os itens na ordem de entrada"""
        if not auction.items:
            raise DataError("Leilão vazio: nenhum item para pontuar")
        cache = self.build_context_cache(auction.context)
        gathered = []
        for item in auction.items:
            if len(item) != self.m - self.m_c:
                raise DimensionError(f"Item com {len(item)} campos, esperado {self.m - self.m_c}")
            gathered.append(self.gather(item, self.m_c))
        V_items = np.stack([v for v, _ in gathered])
        linear = np.array([lin for _, lin in gathered])
        return cache.linear + linear + self.items_pairwise(cache, V_items)

    @abstractmethod
    def cache_from_vectors(self, V_C: np.ndarray, linear: float,
                           counter: Optional[OpCounter] = None) -> ContextCache:
        """Cache a partir dos vetores de campo do contexto"""

    @abstractmethod
    def item_pairwise(self, cache: ContextCache, V_I: np.ndarray,
                      counter: Optional[OpCounter] = None) -> float:
        """Termo par-a-par de um item (|I|, k), instrumentado"""

    @abstractmethod
    def items_pairwise(self, cache: ContextCache, V_items: np.ndarray) -> np.ndarray:
        """Termo par-a-par de N itens (N, |I|, k) de uma vez"""


class FmEngine(RankingEngine):
    """FM: cache de Σ v_i e Σ ‖v_i‖² do contexto"""

    name = "fm"

    def cache_from_vectors(self, V_C, linear, counter=None):
        _tick(counter, 2 * V_C.size)
        return ContextCache(linear=linear, vectors=V_C, parts={
            'sum': V_C.sum(axis=0), 'sq': float(np.einsum('ik,ik->', V_C, V_C))})

    def item_pairwise(self, cache, V_I, counter=None):
        s = cache.parts['sum'] + V_I.sum(axis=0)
        sq = cache.parts['sq'] + float(np.einsum('ik,ik->', V_I, V_I))
        _tick(counter, 2 * V_I.size + self.k)
        return 0.5 * (float(np.dot(s, s)) - sq)

    def items_pairwise(self, cache, V_items):
        s = cache.parts['sum'] + V_items.sum(axis=1)
        sq = cache.parts['sq'] + np.einsum('nik,nik->n', V_items, V_items)
        return 0.5 * (np.einsum('nk,nk->n', s, s) - sq)


class DplrEngine(RankingEngine):
    """DPLR com contexto em cache: P_C = U_C·V_C e s_C = Σ_C d_i‖v_i‖²"""

    name = "dplr"

    def __init__(self, params: ModelParams):
        super().__init__(params)
        dplr = params.interaction
        U = dplr.U.astype(np.float64)
        self.rho = dplr.rho
        self.U_C, self.U_I = U[:, :self.m_c], U[:, self.m_c:]
        self.d_C, self.d_I = dplr.d[:self.m_c], dplr.d[self.m_c:]
        self.e = dplr.e.astype(np.float64)

    def cache_from_vectors(self, V_C, linear, counter=None):
        P_C = self.U_C @ V_C
        sq = np.einsum('ik,ik->i', V_C, V_C)
        _tick(counter, self.rho * V_C.size + V_C.size + len(V_C))
        return ContextCache(linear=linear, vectors=V_C, parts={
            'P': P_C, 's': float(np.dot(self.d_C, sq))})

    def item_pairwise(self, cache, V_I, counter=None):
        sq = np.einsum('ik,ik->i', V_I, V_I)
        P = cache.parts['P'] + self.U_I @ V_I
        low_rank = float(np.dot(self.e, np.einsum('rk,rk->r', P, P)))
        n_items = len(V_I)
        _tick(counter, n_items * self.k + n_items + self.rho * n_items * self.k + self.rho * self.k + self.rho)
        return 0.5 * (cache.parts['s'] + float(np.dot(self.d_I, sq)) + low_rank)

    def items_pairwise(self, cache, V_items):
        sq = np.einsum('nik,nik->ni', V_items, V_items)
        P = cache.parts['P'][None] + np.einsum('ri,nik->nrk', self.U_I, V_items)
        low_rank = np.einsum('nrk,nrk->nr', P, P) @ self.e
        return 0.5 * (cache.parts['s'] + sq @ self.d_I + low_rank)


class DenseEngine(RankingEngine):
    """FwFM densa: par contexto-contexto em cache, cruzados e item-item por item"""

    name = "fwfm"

    def __init__(self, params: ModelParams):
        super().__init__(params)
        R = params.interaction.R.astype(np.float64)
        self.R_CC = R[:self.m_c, :self.m_c]
        self.R_CI = R[:self.m_c, self.m_c:]
        self.R_II = R[self.m_c:, self.m_c:]

    def cache_from_vectors(self, V_C, linear, counter=None):
        gram = V_C @ V_C.T
        m_c = len(V_C)
        _tick(counter, m_c * (m_c - 1) // 2 * (self.k + 1))
        return ContextCache(linear=linear, vectors=V_C, parts={
            'cc': 0.5 * float(np.sum(gram * self.R_CC))})

    def item_pairwise(self, cache, V_I, counter=None):
        cross = float(np.sum((cache.vectors @ V_I.T) * self.R_CI))
        inner = 0.5 * float(np.sum((V_I @ V_I.T) * self.R_II))
        n_items = len(V_I)
        _tick(counter, (len(cache.vectors) * n_items + n_items * (n_items - 1) // 2) * (self.k + 1))
        return cache.parts['cc'] + cross + inner

    def items_pairwise(self, cache, V_items):
        cross = np.einsum('ck,njk,cj->n', cache.vectors, V_items, self.R_CI, optimize=True)
        inner = 0.5 * np.einsum('nik,njk,ij->n', V_items, V_items, self.R_II, optimize=True)
        return cache.parts['cc'] + cross + inner


class PrunedEngine(RankingEngine):
    """FwFM podada: pares classificados uma vez em contexto-contexto, cruzados e item-item"""

    name = "pruned"

    def __init__(self, params: ModelParams):
        super().__init__(params)
        pruned = params.interaction
        i, j = pruned.pairs[:, 0], pruned.pairs[:, 1]
        values = pruned.values.astype(np.float64)
        m_c = self.m_c
        cc = (j < m_c)
        cross = (i < m_c) & (j >= m_c)
        ii = (i >= m_c)
        self.cc = (i[cc], j[cc], values[cc])
        self.cross = (i[cross], j[cross] - m_c, values[cross])
        self.ii = (i[ii] - m_c, j[ii] - m_c, values[ii])

    def cache_from_vectors(self, V_C, linear, counter=None):
        a, b, v = self.cc
        partial = float(np.einsum('qk,qk->q', V_C[a], V_C[b]) @ v) if len(v) else 0.0
        _tick(counter, len(v) * (self.k + 1))
        return ContextCache(linear=linear, vectors=V_C, parts={'cc': partial})

    def item_pairwise(self, cache, V_I, counter=None):
        total = cache.parts['cc']
        a, b, v = self.cross
        if len(v):
            total += float(np.einsum('qk,qk->q', cache.vectors[a], V_I[b]) @ v)
        a2, b2, v2 = self.ii
        if len(v2):
            total += float(np.einsum('qk,qk->q', V_I[a2], V_I[b2]) @ v2)
        _tick(counter, (len(v) + len(v2)) * (self.k + 1))
        return total

    def items_pairwise(self, cache, V_items):
        total = np.full(len(V_items), cache.parts['cc'])
        a, b, v = self.cross
        if len(v):
            total += np.einsum('qk,nqk->nq', cache.vectors[a], V_items[:, b]) @ v
        a2, b2, v2 = self.ii
        if len(v2):
            total += np.einsum('nqk,nqk->nq', V_items[:, a2], V_items[:, b2]) @ v2
        return total


def build_context_cache(context: Sequence[FieldEntries], params: ModelParams) -> ContextCache:
    """Cache do contexto; guarda o motor para as chamadas de score_item seguintes"""
    return RankingEngine.for_params(params).build_context_cache(context)


def score_item(cache: ContextCache, item: Sequence[FieldEntries], params: ModelParams) -> float:
    """Reutiliza o motor do cache quando ele foi construído para os mesmos parâmetros"""
    engine = cache.engine
    if engine is None or engine.params is not params:
        engine = RankingEngine.for_params(params)
    return engine.score_item(cache, item)


def score_auction(auction: Auction, params: ModelParams) -> np.ndarray:
    return RankingEngine.for_params(params).score_auction(auction)


def per_item_op_count(params: ModelParams, item: Optional[Sequence[FieldEntries]] = None) -> int:
    """
    Multiplicações-acumulações de uma chamada score_item

    Sem item explícito usa um item one-hot (feature rara em cada campo de item).
    """
    engine = RankingEngine.for_params(params)
    context = tuple(((0, 1.0),) for _ in range(params.m_c))
    if item is None:
        item = tuple(((0, 1.0),) for _ in range(params.m - params.m_c))
    cache = engine.build_context_cache(context)
    counter = OpCounter()
    engine.score_item(cache, item, counter)
    return counter.count
