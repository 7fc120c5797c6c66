"""
Álgebra linear densa para matrizes pequenas
Produtos, produto interno de Frobenius, forma traço e autodecomposição simétrica (Jacobi cíclico)
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import settings
from .errors import DimensionError, NumericError


def as_mat(a, name: str = "matriz") -> np.ndarray:
    """Converte para matriz 2D float64 finita"""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} deve ser 2D, recebido shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contém valores não finitos")
    return arr


def matmul(a, b) -> np.ndarray:
    """Produto matricial com acumulação em 64 bits"""
    a, b = as_mat(a, "a"), as_mat(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: {a.shape} x {b.shape}")
    return a @ b


def frob_inner(a, b) -> float:
    """Produto interno de Frobenius: soma de A_ij * B_ij"""
    a, b = as_mat(a, "a"), as_mat(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"frob_inner: {a.shape} != {b.shape}")
    return float(np.sum(a * b))


def trace_form(a, q, direct: bool = False) -> float:
    """
    Tr(AᵀQA) para A m×k e Q m×m

    Por padrão calcula <A·Aᵀ, Q>_F; com direct=True calcula o traço de AᵀQA.
    Os dois caminhos coincidem (invariância a deslocamento circular).
    """
    a, q = as_mat(a, "A"), as_mat(q, "Q")
    m = a.shape[0]
    if q.shape != (m, m):
        raise DimensionError(f"trace_form: A {a.shape} incompatível com Q {q.shape}")
    if direct:
        return float(np.trace(a.T @ q @ a))
    return frob_inner(a @ a.T, q)


@dataclass(frozen=True)
class SymEig:
    """Autodecomposição de matriz simétrica, autovalores por magnitude decrescente"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # colunas ortonormais

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def _off_norm(a: np.ndarray) -> float:
    # soma direta do triângulo superior; ‖A‖² − ‖diag‖² cancela
    return math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))


def sym_eig(s, tol: Optional[float] = None, max_sweeps: Optional[int] = None) -> SymEig:
    """
    Autodecomposição por rotações de Jacobi cíclicas

    Varre os pares (p, q) em ordem de linha até que a norma fora da diagonal
    fique abaixo de tol·‖S‖_F.

    Raises:
        DimensionError: matriz não quadrada ou não simétrica
        NumericError: sem convergência após max_sweeps varreduras
    """
    tol = settings.jacobi_tol if tol is None else tol
    max_sweeps = settings.jacobi_max_sweeps if max_sweeps is None else max_sweeps

    s = as_mat(s, "S")
    m = s.shape[0]
    if s.shape != (m, m):
        raise DimensionError(f"sym_eig: matriz não quadrada {s.shape}")
    scale = float(np.linalg.norm(s))
    if float(np.linalg.norm(s - s.T)) > 1e-12 * scale:
        raise DimensionError("sym_eig: matriz não simétrica")

    a = (s + s.T) / 2.0
    v = np.eye(m)
    target = tol * scale

    sweep = 0
    while _off_norm(a) > target:
        if sweep >= max_sweeps:
            raise NumericError(f"Jacobi sem convergência após {max_sweeps} varreduras")
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - sn * vec_q
                v[:, q] = sn * vec_p + c * vec_q
        sweep += 1

    w = np.diag(a).copy()
    order = np.argsort(-np.abs(w), kind="stable")
    return SymEig(eigenvalues=w[order], eigenvectors=v[:, order])


def sym_singular_values(s) -> np.ndarray:
    """Valores singulares de matriz simétrica: |autovalores| em ordem decrescente"""
    eig = sym_eig(s)
    return np.sort(np.abs(eig.eigenvalues))[::-1]
