#!/usr/bin/env python3
"""
Testes do núcleo do modelo
Oráculo força-bruta, caminhos rápidos por variante, materialização de R e passo em lote
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

# Adiciona o diretório atual ao path
sys.path.append(str(Path(__file__).parent))

from src.data_processor import EncodedDataset
from src.errors import DataError, DimensionError
from src.fwfm import (batch_forward, forward, gather_field_vectors, linear_term, pairwise_bruteforce,
                      pairwise_dense, pairwise_dplr_fast, pairwise_fast, pairwise_fm_fast,
                      pairwise_pruned)
from src.linalg import trace_form
from src.models import FieldSchema, Sample
from src.params import (DenseSym, Dplr, FieldVectors, FmImplicit, ModelParams, PrunedSparse,
                        init_params, materialize_r, random_params, random_symmetric)

VARIANTS = ("fm", "fwfm", "pruned", "dplr")


def random_sample(rng, schema: FieldSchema) -> Sample:
    """Amostra com campos multi-valor ocasionais (pesos 1/q)"""
    values = []
    for size in schema.vocab_sizes:
        q = int(rng.integers(1, 4)) if size > 2 and rng.random() < 0.3 else 1
        ids = rng.choice(size, size=min(q, size), replace=False)
        values.append(tuple((int(i), 1.0 / len(ids)) for i in ids))
    return Sample(label=float(rng.integers(2)), values=tuple(values))


def random_model(rng, variant: str, m: int, k: int, rho: int = 2) -> ModelParams:
    m_c = int(rng.integers(1, m))
    schema = FieldSchema.synthetic(rng.integers(1, 6, size=m).tolist(), m_c)
    keep = int(rng.integers(0, m * (m - 1) // 2 + 1))
    return random_params(schema, variant, k, rank=rho, keep=keep, seed=int(rng.integers(2 ** 31)))


def rel_close(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def test_bruteforce_small_cases():
    assert pairwise_bruteforce(FieldVectors(V=np.ones((1, 3))), FmImplicit()) == 0.0
    V = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert pairwise_bruteforce(FieldVectors(V=V), FmImplicit()) == 1.0
    assert pairwise_fm_fast(FieldVectors(V=V)) == 1.0
    assert pairwise_fm_fast(FieldVectors(V=np.zeros((4, 3)))) == 0.0


def test_identity_trace_form():
    """Termo par-a-par = Tr(VᵀRV)/2 para R simétrica de diagonal zero"""
    rng = np.random.default_rng(10)
    for _ in range(1000):
        m, k = int(rng.integers(2, 9)), int(rng.integers(1, 6))
        V = rng.normal(size=(m, k))
        R = random_symmetric(m, rng)
        expected = pairwise_bruteforce(FieldVectors(V=V), DenseSym(R=R))
        assert rel_close(trace_form(V, R) / 2.0, expected)


def test_dplr_proposition():
    """½(Σ d_i‖v_i‖² + Σ e_r‖P_r‖²) iguala a força-bruta sobre R materializada"""
    rng = np.random.default_rng(11)
    for _ in range(1000):
        m, k, rho = int(rng.integers(2, 10)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
        V = FieldVectors(V=rng.normal(size=(m, k)))
        dplr = Dplr(U=rng.normal(size=(rho, m)), e=rng.normal(size=rho))
        assert rel_close(pairwise_dplr_fast(V, dplr), pairwise_bruteforce(V, dplr))
        assert rel_close(pairwise_dplr_fast(V, dplr), trace_form(V.V, materialize_r(dplr, m)) / 2.0)


def test_dplr_fm_special_case():
    """U = 1ᵀ e e = (1) reproduz a FM"""
    rng = np.random.default_rng(12)
    for _ in range(200):
        m, k = int(rng.integers(2, 12)), int(rng.integers(1, 8))
        V = FieldVectors(V=rng.normal(size=(m, k)))
        dplr = Dplr(U=np.ones((1, m)), e=np.ones(1))
        assert rel_close(pairwise_dplr_fast(V, dplr), pairwise_fm_fast(V))
    assert np.array_equal(materialize_r(Dplr(U=np.ones((1, 4)), e=np.ones(1)), 4),
                          materialize_r(FmImplicit(), 4))


def test_dplr_zero_e():
    rng = np.random.default_rng(13)
    dplr = Dplr(U=rng.normal(size=(2, 5)), e=np.zeros(2))
    assert np.array_equal(dplr.d, np.zeros(5))
    assert pairwise_dplr_fast(FieldVectors(V=rng.normal(size=(5, 3))), dplr) == 0.0
    with pytest.raises(DimensionError):
        pairwise_dplr_fast(FieldVectors(V=np.ones((4, 3))), dplr)


def test_materialize_r():
    assert np.array_equal(materialize_r(FmImplicit(), 3), np.ones((3, 3)) - np.eye(3))
    rng = np.random.default_rng(14)
    dplr = Dplr(U=rng.normal(size=(3, 6)), e=rng.normal(size=3))
    R = materialize_r(dplr, 6)
    assert np.array_equal(R, R.T)
    assert np.all(np.diag(R) == 0.0)
    full = dplr.U.T @ np.diag(dplr.e) @ dplr.U + np.diag(dplr.d)
    assert np.allclose(R, full, atol=1e-12)


def test_pruned_cases():
    rng = np.random.default_rng(15)
    m = 6
    V = FieldVectors(V=rng.normal(size=(m, 4)))
    R = random_symmetric(m, rng)
    assert pairwise_pruned(V, PrunedSparse(m=m, pairs=np.empty((0, 2)), values=np.empty(0))) == 0.0

    iu, ju = np.triu_indices(m, 1)
    full = PrunedSparse(m=m, pairs=np.stack([iu, ju], axis=1), values=R[iu, ju])
    assert rel_close(pairwise_pruned(V, full), pairwise_bruteforce(V, DenseSym(R=R)))

    with pytest.raises(DataError):
        PrunedSparse(m=m, pairs=np.array([[2, 1]]), values=np.ones(1))
    with pytest.raises(DataError):
        PrunedSparse(m=m, pairs=np.array([[0, 2], [0, 1]]), values=np.ones(2))


def test_dense_validation():
    with pytest.raises(DataError):
        DenseSym(R=np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(DataError):
        DenseSym(R=np.eye(2))


def test_fast_paths_match_bruteforce():
    """Suíte de equivalência: todas as variantes, m ≤ 12, k ≤ 8, ρ ≤ 4"""
    rng = np.random.default_rng(16)
    for _ in range(1000):
        variant = VARIANTS[int(rng.integers(4))]
        m, k, rho = int(rng.integers(2, 13)), int(rng.integers(1, 9)), int(rng.integers(1, 5))
        params = random_model(rng, variant, m, k, rho)
        sample = random_sample(rng, params.schema)
        fv = gather_field_vectors(sample, params)
        oracle = pairwise_bruteforce(fv, params.interaction)
        assert rel_close(pairwise_fast(fv, params.interaction), oracle)
        assert rel_close(forward(sample, params), linear_term(sample, params) + oracle)


def feature_level_pairwise(sample: Sample, params: ModelParams) -> float:
    """Soma dupla sobre features ativas: ⟨x_i w_i, x_j w_j⟩·R[f_i, f_j], pares do mesmo campo valem 0"""
    R = materialize_r(params.interaction, params.m)
    offsets = params.schema.offsets
    active = [(f, weight * params.W[offsets[f] + local_id].astype(np.float64))
              for f, entries in enumerate(sample.values) for local_id, weight in entries]
    total = 0.0
    for a in range(len(active)):
        for b in range(a + 1, len(active)):
            (fa, va), (fb, vb) = active[a], active[b]
            if fa != fb:
                total += float(va @ vb) * R[fa, fb]
    return total


def test_feature_level_sum_matches_field_level():
    """Agregação por campo (multi-valor) igual à soma direta sobre pares de features"""
    rng = np.random.default_rng(28)
    for variant in VARIANTS:
        for _ in range(100):
            m, k, rho = int(rng.integers(2, 9)), int(rng.integers(1, 6)), int(rng.integers(1, 4))
            params = random_model(rng, variant, m, k, rho)
            sample = random_sample(rng, params.schema)
            expected = feature_level_pairwise(sample, params)
            fv = gather_field_vectors(sample, params)
            assert rel_close(pairwise_bruteforce(fv, params.interaction), expected)
            assert rel_close(forward(sample, params), linear_term(sample, params) + expected)


def test_gather_field_vectors():
    schema = FieldSchema.synthetic([3, 4], 1)
    params = init_params(schema, "fm", dim=3, seed=1)
    sample = Sample(label=0.0, values=(((2, 1.0),), ((0, 1 / 3), (1, 1 / 3), (3, 1 / 3))))
    V = gather_field_vectors(sample, params).V
    assert np.array_equal(V[0], params.W[2])
    assert np.allclose(V[1], params.W[[3, 4, 6]].mean(axis=0))

    with pytest.raises(DataError):
        gather_field_vectors(Sample(label=0.0, values=(((3, 1.0),), ((0, 1.0),))), params)
    with pytest.raises(DimensionError):
        gather_field_vectors(Sample(label=0.0, values=(((0, 1.0),),)), params)


def test_forward_degenerate_models():
    schema = FieldSchema.synthetic([2, 2, 2], 1)
    sample = Sample(label=0.0, values=(((1, 1.0),), ((0, 1.0),), ((1, 1.0),)))
    zero = ModelParams(b0=0.0, b=np.zeros(6), W=np.zeros((6, 2)), schema=schema, interaction=FmImplicit())
    assert forward(sample, zero) == 0.0

    b = np.arange(6, dtype=float)
    linear_only = ModelParams(b0=0.5, b=b, W=np.zeros((6, 2)), schema=schema,
                              interaction=DenseSym(R=random_symmetric(3, np.random.default_rng(0))))
    assert forward(sample, linear_only) == 0.5 + b[1] + b[2] + b[5]


def test_dense_matches_bruteforce():
    rng = np.random.default_rng(17)
    V = FieldVectors(V=rng.normal(size=(7, 3)))
    dense = DenseSym(R=random_symmetric(7, rng))
    assert rel_close(pairwise_dense(V, dense), pairwise_bruteforce(V, dense))


def test_batch_forward_matches_forward():
    rng = np.random.default_rng(18)
    for variant in VARIANTS:
        params = random_model(rng, variant, m=6, k=4, rho=2)
        samples = [random_sample(rng, params.schema) for _ in range(25)]
        data = EncodedDataset.from_samples(samples, params.schema)
        batched = batch_forward(data, params)
        for score, sample in zip(batched, samples):
            assert rel_close(score, forward(sample, params))


def test_narrow_precision_path():
    """Parâmetros em 32 bits concordam com o caminho largo dentro de 1e-4 relativo"""
    rng = np.random.default_rng(19)
    for variant in VARIANTS:
        params = random_model(rng, variant, m=8, k=4, rho=2)
        narrow = params.as_float32()
        assert narrow.W.dtype == np.float32
        sample = random_sample(rng, params.schema)
        assert rel_close(forward(sample, narrow), forward(sample, params), tol=1e-4)


def test_parameter_count():
    schema = FieldSchema.synthetic([3, 4, 5, 6], 2)
    n, k, m = 18, 8, 4
    assert init_params(schema, "fm", k).parameter_count()['total'] == 1 + n + n * k
    assert init_params(schema, "fwfm", k).parameter_count()['interaction'] == m * (m - 1) // 2
    assert init_params(schema, "dplr", k, rank=3).parameter_count()['interaction'] == 3 * (m + 1)
    pruned = random_params(schema, "pruned", k, keep=4)
    assert pruned.parameter_count()['interaction'] == 4


if __name__ == "__main__":
    logger.info("🧪 Testes do núcleo do modelo")
    sys.exit(pytest.main([__file__, "-q"]))
