"""
Transformações pós-treino da matriz de interação
Poda por magnitude, ajuste DPLR a posteriori e espectro do erro (cota de Von Neumann)
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from .config import settings
from .errors import DataError
from .fwfm import gather_field_vectors
from .linalg import sym_eig, sym_singular_values, trace_form
from .models import PruneBudget, Sample, SpectrumReport
from .params import DenseSym, Dplr, FieldVectors, InteractionSpec, ModelParams, PrunedSparse, materialize_r


def sparsity_percent(q: int, m: int) -> float:
    """Percentual de entradas mantidas: 100·2q/(m(m−1))"""
    return 100.0 * 2.0 * q / (m * (m - 1))


def prune(dense: DenseSym, budget: PruneBudget) -> PrunedSparse:
    """
    Mantém as q entradas triangulares superiores de maior |valor|

    Empates são decididos pela ordem lexicográfica (i, j), menor primeiro.
    """
    R = np.asarray(dense.R)
    m = R.shape[0]
    q = budget.keep_count(m)
    iu, ju = np.triu_indices(m, 1)
    values = R[iu, ju]
    chosen = np.sort(np.argsort(-np.abs(values), kind='stable')[:q])
    logger.info(f"Poda: q={q} de {len(values)} entradas ({sparsity_percent(q, m):.2f}%)")
    return PrunedSparse(m=m, pairs=np.stack([iu[chosen], ju[chosen]], axis=1), values=values[chosen])


@dataclass
class PosthocResult:
    """Aproximação DPLR com diagonal livre e sua conversão para a forma do modelo"""

    U: np.ndarray
    e: np.ndarray
    d_free: np.ndarray
    error: float
    history: List[float] = field(default_factory=list)
    model: Optional[Dplr] = None
    conversion_error: float = 0.0


def _truncate(s: np.ndarray, rank: int) -> Tuple[np.ndarray, np.ndarray]:
    """Truncamento de posto rho: U com linhas √|λ|·q e e = sinal(λ)"""
    eig = sym_eig(s)
    lam = eig.eigenvalues[:rank]
    U = (eig.eigenvectors[:, :rank] * np.sqrt(np.abs(lam))).T
    return U, np.sign(lam)


def to_model_form(dense: DenseSym, U: np.ndarray, e: np.ndarray) -> Tuple[Dplr, float]:
    """Dplr com d re-derivado (diagonal implícita nula) e o erro de Frobenius da conversão"""
    model = Dplr(U=U.copy(), e=e.copy())
    error = float(np.linalg.norm(np.asarray(dense.R, dtype=np.float64) - materialize_r(model, U.shape[1])))
    return model, error


def posthoc_dplr(dense: DenseSym, rank: int, max_iters: Optional[int] = None,
                 tol: Optional[float] = None) -> PosthocResult:
    """
    Minimização alternada de ‖R − (Uᵀdiag(e)U + diag(d))‖_F

    Alterna o truncamento de R − diag(d) nos rho maiores |λ| e a diagonal livre
    d = diag(R − Uᵀdiag(e)U). Para quando a melhora fica abaixo de tol.
    """
    max_iters = settings.posthoc_max_iters if max_iters is None else max_iters
    tol = settings.posthoc_tol if tol is None else tol
    R = np.asarray(dense.R, dtype=np.float64)
    m = R.shape[0]
    if not 1 <= rank <= m:
        raise DataError(f"Posto {rank} fora de [1, {m}]")

    d = np.zeros(m)
    history: List[float] = []
    U, e = np.zeros((rank, m)), np.zeros(rank)
    for _ in range(max_iters):
        U, e = _truncate(R - np.diag(d), rank)
        low_rank = (U.T * e) @ U
        d = np.diag(R) - np.diag(low_rank)
        objective = float(np.linalg.norm(R - low_rank - np.diag(d)))
        improved = not history or history[-1] - objective >= tol
        history.append(objective)
        if not improved:
            break

    model, conversion_error = to_model_form(dense, U, e)
    logger.info(f"DPLR a posteriori: posto={rank} iterações={len(history)} "
                f"erro={history[-1]:.3e} erro_conversão={conversion_error:.3e}")
    return PosthocResult(U=U, e=e, d_free=d, error=history[-1], history=history,
                         model=model, conversion_error=conversion_error)


def error_spectrum(dense: DenseSym, approx: InteractionSpec, fv: FieldVectors) -> SpectrumReport:
    """Espectro de E = R_aprox − R, autovalores de V·Vᵀ, cota Σλσ e Tr(VᵀEV)"""
    R = np.asarray(dense.R, dtype=np.float64)
    m = R.shape[0]
    if fv.m != m:
        raise DataError(f"V com {fv.m} campos, R com {m}")
    E = materialize_r(approx, m) - R
    sigma = sym_singular_values(E)
    lam = np.sort(sym_eig(fv.V @ fv.V.T).eigenvalues)[::-1]
    return SpectrumReport(
        sigma_error=sigma.tolist(),
        lambda_vvt=lam.tolist(),
        bound=float(np.dot(lam, sigma)),
        trace_value=trace_form(fv.V, E),
    )


def representative_vectors(params: ModelParams, sample: Optional[Sample] = None) -> FieldVectors:
    """V de uma amostra ou, sem amostra, a média das linhas de embedding de cada campo"""
    if sample is not None:
        return gather_field_vectors(sample, params)
    offsets = params.schema.offsets
    W = params.W.astype(np.float64)
    V = np.stack([W[start:start + size].mean(axis=0)
                  for start, size in zip(offsets, params.schema.vocab_sizes)])
    return FieldVectors(V=V)
