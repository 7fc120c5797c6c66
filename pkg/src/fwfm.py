"""
Passos forward do modelo
Oráculo força-bruta, caminhos rápidos por variante e versões em lote para treino e avaliação
"""

from typing import Tuple

import numpy as np

from .data_processor import EncodedDataset
from .errors import DataError, DimensionError
from .models import Sample
from .params import (DenseSym, Dplr, FieldVectors, FmImplicit, InteractionSpec, ModelParams,
                     PrunedSparse, materialize_r)


def gather_field_vectors(sample: Sample, params: ModelParams) -> FieldVectors:
    """v_i = soma de peso·w_id sobre as features ativas do campo i"""
    if len(sample.values) != params.m:
        raise DimensionError(f"Amostra com {len(sample.values)} campos, modelo com {params.m}")
    V = np.zeros((params.m, params.k))
    offsets = params.schema.offsets
    for f, (entries, size) in enumerate(zip(sample.values, params.schema.vocab_sizes)):
        for local_id, weight in entries:
            if not 0 <= local_id < size:
                raise DataError(f"Id {local_id} fora do vocabulário do campo {f} (tamanho {size})")
            row = params.W[offsets[f] + local_id].astype(np.float64)
            if weight == 1.0 and len(entries) == 1:
                V[f] = row
            else:
                V[f] += weight * row
    return FieldVectors(V=V)


def linear_term(sample: Sample, params: ModelParams) -> float:
    """b0 + soma de peso·b[id]"""
    offsets = params.schema.offsets
    total = float(params.b0)
    for f, entries in enumerate(sample.values):
        for local_id, weight in entries:
            total += weight * float(params.b[offsets[f] + local_id])
    return total


def pairwise_bruteforce(fv: FieldVectors, interaction: InteractionSpec) -> float:
    """Oráculo: soma explícita sobre i < j de <v_i, v_j>·R_ij"""
    m = fv.m
    R = materialize_r(interaction, m)
    V = fv.V
    total = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            total += float(np.dot(V[i], V[j])) * R[i, j]
    return total


def pairwise_fm_fast(fv: FieldVectors) -> float:
    """½(‖Σ v_i‖² − Σ ‖v_i‖²)"""
    s = fv.V.sum(axis=0)
    return 0.5 * (float(np.dot(s, s)) - float(fv.sq_norms.sum()))


def pairwise_dense(fv: FieldVectors, dense: DenseSym) -> float:
    """½<V·Vᵀ, R>_F para R simétrica de diagonal zero"""
    gram = fv.V @ fv.V.T
    return 0.5 * float(np.sum(gram * dense.R))


def pairwise_dplr_fast(fv: FieldVectors, dplr: Dplr) -> float:
    """½(Σ d_i‖v_i‖² + Σ_r e_r‖P_r‖²) com P = U·V, custo O(ρmk)"""
    if dplr.U.shape[1] != fv.m:
        raise DimensionError(f"U com {dplr.U.shape[1]} colunas, V com {fv.m} linhas")
    P = dplr.U.astype(np.float64) @ fv.V
    diag_part = float(np.dot(dplr.d, fv.sq_norms))
    low_rank = float(np.dot(dplr.e.astype(np.float64), np.einsum('rk,rk->r', P, P)))
    return 0.5 * (diag_part + low_rank)


def pairwise_pruned(fv: FieldVectors, pruned: PrunedSparse) -> float:
    """Soma de <v_i, v_j>·r sobre as entradas mantidas, custo O(qk)"""
    if pruned.q == 0:
        return 0.0
    i, j = pruned.pairs[:, 0], pruned.pairs[:, 1]
    dots = np.einsum('qk,qk->q', fv.V[i], fv.V[j])
    return float(np.dot(dots, pruned.values.astype(np.float64)))


def pairwise_fast(fv: FieldVectors, interaction: InteractionSpec) -> float:
    """Termo par-a-par pelo caminho rápido da variante"""
    if isinstance(interaction, FmImplicit):
        return pairwise_fm_fast(fv)
    if isinstance(interaction, DenseSym):
        return pairwise_dense(fv, interaction)
    if isinstance(interaction, PrunedSparse):
        return pairwise_pruned(fv, interaction)
    return pairwise_dplr_fast(fv, interaction)


def forward(sample: Sample, params: ModelParams) -> float:
    """Escore bruto (antes da sigmoide) de uma amostra completa"""
    fv = gather_field_vectors(sample, params)
    return linear_term(sample, params) + pairwise_fast(fv, params.interaction)


# --- Caminho em lote ---

def batch_field_vectors(data: EncodedDataset, params: ModelParams) -> np.ndarray:
    """V de cada amostra do lote: (B, m, k)"""
    V = np.empty((len(data), params.m, params.k))
    for f, (ids, weights) in enumerate(zip(data.ids, data.weights)):
        V[:, f] = np.einsum('bl,blk->bk', weights, params.W[ids].astype(np.float64))
    return V


def batch_linear(data: EncodedDataset, params: ModelParams) -> np.ndarray:
    total = np.full(len(data), float(params.b0))
    for ids, weights in zip(data.ids, data.weights):
        total += np.einsum('bl,bl->b', weights, params.b[ids].astype(np.float64))
    return total


def batch_pairwise(V: np.ndarray, interaction: InteractionSpec) -> Tuple[np.ndarray, dict]:
    """
    Termo par-a-par de um lote

    Returns:
        (escores (B,), intermediários reutilizados pelo gradiente)
    """
    if isinstance(interaction, FmImplicit):
        s = V.sum(axis=1)
        sq = np.einsum('bik,bik->b', V, V)
        return 0.5 * (np.einsum('bk,bk->b', s, s) - sq), {'sum': s}
    if isinstance(interaction, DenseSym):
        gram = np.einsum('bik,bjk->bij', V, V)
        return 0.5 * np.einsum('bij,ij->b', gram, interaction.R.astype(np.float64)), {'gram': gram}
    if isinstance(interaction, PrunedSparse):
        if interaction.q == 0:
            return np.zeros(len(V)), {'dots': np.zeros((len(V), 0))}
        i, j = interaction.pairs[:, 0], interaction.pairs[:, 1]
        dots = np.einsum('bqk,bqk->bq', V[:, i], V[:, j])
        return dots @ interaction.values.astype(np.float64), {'dots': dots}
    U = interaction.U.astype(np.float64)
    e = interaction.e.astype(np.float64)
    P = np.einsum('ri,bik->brk', U, V)
    sq = np.einsum('bik,bik->bi', V, V)
    p_sq = np.einsum('brk,brk->br', P, P)
    return 0.5 * (sq @ interaction.d + p_sq @ e), {'P': P, 'sq': sq, 'p_sq': p_sq}


def batch_forward(data: EncodedDataset, params: ModelParams) -> np.ndarray:
    """Escores brutos de todas as amostras do lote"""
    V = batch_field_vectors(data, params)
    pairwise, _ = batch_pairwise(V, params.interaction)
    return batch_linear(data, params) + pairwise
