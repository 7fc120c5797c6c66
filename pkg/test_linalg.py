#!/usr/bin/env python3
"""
Testes de álgebra linear densa
Produtos, forma traço e autodecomposição de Jacobi
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

# Adiciona o diretório atual ao path
sys.path.append(str(Path(__file__).parent))

from src.errors import DimensionError, NumericError
from src.linalg import frob_inner, matmul, sym_eig, sym_singular_values, trace_form


def random_symmetric(rng, m):
    a = rng.normal(size=(m, m))
    return (a + a.T) / 2.0


def test_matmul():
    """Identidade, soma de colunas e oráculo de laço triplo"""
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 4))
    assert np.array_equal(matmul(np.eye(3), M), M)

    V = rng.normal(size=(5, 3))
    assert np.allclose(matmul(np.ones((1, 5)), V), V.sum(axis=0, keepdims=True))

    a, b = rng.normal(size=(3, 2)), rng.normal(size=(2, 4))
    naive = np.zeros((3, 4))
    for i in range(3):
        for j in range(4):
            for t in range(2):
                naive[i, j] += a[i, t] * b[t, j]
    assert np.allclose(matmul(a, b), naive, rtol=1e-12)

    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_frob_inner():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(3, 3))
    assert frob_inner(M, np.zeros((3, 3))) == 0.0
    assert frob_inner(np.eye(3), np.eye(3)) == 3.0

    a, b = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    assert frob_inner(a, b) == pytest.approx(np.trace(matmul(a.T, b)), rel=1e-12)

    with pytest.raises(DimensionError):
        frob_inner(np.ones((2, 2)), np.ones((3, 3)))


def test_trace_form():
    """Tr(AᵀQA) igual à soma dupla Σ<A_i, A_j>Q_ij pelos dois caminhos"""
    rng = np.random.default_rng(2)
    A = rng.normal(size=(5, 3))
    assert trace_form(A, np.zeros((5, 5))) == 0.0

    Q2 = rng.normal(size=(2, 2))
    assert trace_form(np.eye(2), Q2) == pytest.approx(np.trace(Q2))

    Q = rng.normal(size=(5, 5))
    double_sum = sum(float(np.dot(A[i], A[j])) * Q[i, j] for i in range(5) for j in range(5))
    assert trace_form(A, Q) == pytest.approx(double_sum, rel=1e-12)
    assert trace_form(A, Q, direct=True) == pytest.approx(double_sum, rel=1e-12)

    with pytest.raises(DimensionError):
        trace_form(A, np.zeros((4, 4)))


def test_sym_eig_diagonal():
    eig = sym_eig(np.diag([3.0, 1.0, -2.0]))
    assert np.allclose(eig.eigenvalues, [3.0, -2.0, 1.0])


def test_sym_eig_fm_matrix():
    """R_FM = 11ᵀ − I tem autovalores {m−1, −1, ..., −1}"""
    for m in range(3, 11):
        eig = sym_eig(np.ones((m, m)) - np.eye(m))
        expected = np.array([m - 1.0] + [-1.0] * (m - 1))
        assert np.allclose(eig.eigenvalues, expected, atol=1e-9)


def test_sym_eig_reconstruction():
    rng = np.random.default_rng(3)
    for _ in range(20):
        S = random_symmetric(rng, 6)
        eig = sym_eig(S)
        assert np.max(np.abs(eig.reconstruct() - S)) <= 1e-10
        Q = eig.eigenvectors
        assert np.allclose(Q.T @ Q, np.eye(6), atol=1e-10)
        magnitudes = np.abs(eig.eigenvalues)
        assert np.all(magnitudes[:-1] >= magnitudes[1:])


def test_sym_eig_converges_on_many_sizes():
    """Converge (sem estourar o limite de varreduras) de m=2 a 40, com reconstrução precisa"""
    for seed in range(195):
        rng = np.random.default_rng(seed)
        m = 2 + seed % 39
        S = random_symmetric(rng, m)
        eig = sym_eig(S)
        scale = max(1.0, float(np.linalg.norm(S)))
        assert np.max(np.abs(eig.reconstruct() - S)) <= 1e-10 * scale
    # matriz já diagonal termina na primeira checagem
    D = np.diag(np.random.default_rng(6).normal(size=6))
    assert np.allclose(sym_eig(D, max_sweeps=1).reconstruct(), D)


def test_sym_eig_errors():
    with pytest.raises(DimensionError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(NumericError):
        sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    rng = np.random.default_rng(4)
    with pytest.raises(NumericError):
        sym_eig(random_symmetric(rng, 12), max_sweeps=1)


def test_sym_singular_values():
    assert np.array_equal(sym_singular_values(np.zeros((3, 3))), np.zeros(3))
    assert np.allclose(sym_singular_values(np.diag([2.0, -5.0])), [5.0, 2.0])

    rng = np.random.default_rng(5)
    S = random_symmetric(rng, 5)
    expected = np.sort(np.abs(np.linalg.eigvalsh(S)))[::-1]
    assert np.allclose(sym_singular_values(S), expected, atol=1e-10)


if __name__ == "__main__":
    logger.info("🧪 Testes de álgebra linear")
    sys.exit(pytest.main([__file__, "-q"]))
