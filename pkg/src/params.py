"""
Parâmetros do modelo e variantes de interação entre campos
FM implícita, FwFM densa, FwFM podada e DPLR (diagonal mais posto baixo)
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Union

import numpy as np

from .errors import DataError, DimensionError, NumericError
from .models import FieldSchema

KIND_CODES = {'fm': 0, 'fwfm': 1, 'pruned': 2, 'dplr': 3}
KIND_LABELS = {0: 'FM', 1: 'FwFM', 2: 'PrunedFwFM', 3: 'DPLR'}


@dataclass
class FmImplicit:
    """FM: todas as interações entre campos distintos com peso 1"""

    kind = 'fm'


@dataclass
class DenseSym:
    """FwFM com matriz R simétrica de diagonal zero"""

    R: np.ndarray
    kind = 'fwfm'

    def __post_init__(self):
        r = np.asarray(self.R)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise DimensionError(f"R deve ser quadrada, recebido {r.shape}")
        if not np.array_equal(r, r.T):
            raise DataError("R deve ser simétrica")
        if np.any(np.diag(r) != 0):
            raise DataError("R deve ter diagonal zero")
        self.R = r


@dataclass
class PrunedSparse:
    """FwFM podada: q entradas (i < j, valor) em ordem lexicográfica"""

    m: int
    pairs: np.ndarray   # (q, 2) int64
    values: np.ndarray  # (q,)
    kind = 'pruned'

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        self.values = np.asarray(self.values).reshape(-1)
        if len(self.pairs) != len(self.values):
            raise DimensionError("pairs e values com tamanhos diferentes")
        if len(self.pairs):
            i, j = self.pairs[:, 0], self.pairs[:, 1]
            if np.any(i >= j) or np.any(i < 0) or np.any(j >= self.m):
                raise DataError("Índices podados devem ser estritamente triangulares superiores")
            keys = i * self.m + j
            if np.any(np.diff(keys) <= 0):
                raise DataError("Índices podados devem ser únicos e ordenados")

    @property
    def q(self) -> int:
        return len(self.values)


@dataclass
class Dplr:
    """
    R = Uᵀ·diag(e)·U + diag(d), com d = -diag(Uᵀ·diag(e)·U) derivado

    d é recalculado por rederive_diagonal() a cada atualização de U ou e.
    """

    U: np.ndarray  # (rho, m)
    e: np.ndarray  # (rho,)
    d: np.ndarray = field(init=False)
    kind = 'dplr'

    def __post_init__(self):
        self.U = np.asarray(self.U)
        self.e = np.asarray(self.e).reshape(-1)
        if self.U.ndim != 2 or self.U.shape[0] != len(self.e):
            raise DimensionError(f"U {self.U.shape} incompatível com e {self.e.shape}")
        if self.U.shape[0] < 1:
            raise DataError("Posto rho deve ser >= 1")
        self.rederive_diagonal()

    def rederive_diagonal(self) -> None:
        u = self.U.astype(np.float64)
        self.d = -np.einsum('r,ri,ri->i', self.e.astype(np.float64), u, u)

    @property
    def rho(self) -> int:
        return self.U.shape[0]


InteractionSpec = Union[FmImplicit, DenseSym, PrunedSparse, Dplr]


def materialize_r(interaction: InteractionSpec, m: int) -> np.ndarray:
    """Matriz R densa, simétrica e de diagonal zero, para qualquer variante"""
    if isinstance(interaction, FmImplicit):
        return np.ones((m, m)) - np.eye(m)
    if isinstance(interaction, DenseSym):
        return interaction.R.astype(np.float64)
    if isinstance(interaction, PrunedSparse):
        r = np.zeros((m, m))
        i, j = interaction.pairs[:, 0], interaction.pairs[:, 1]
        r[i, j] = interaction.values
        r[j, i] = interaction.values
        return r
    if isinstance(interaction, Dplr):
        u = interaction.U.astype(np.float64)
        low_rank = (u.T * interaction.e.astype(np.float64)) @ u
        r = (low_rank + low_rank.T) / 2.0
        np.fill_diagonal(r, 0.0)
        return r
    raise DataError(f"Variante de interação desconhecida: {type(interaction).__name__}")


@dataclass
class FieldVectors:
    """Vetores de campo v_i nas linhas de V (m×k) e suas normas ao quadrado"""

    V: np.ndarray

    @property
    def sq_norms(self) -> np.ndarray:
        return np.einsum('ik,ik->i', self.V, self.V)

    @property
    def m(self) -> int:
        return self.V.shape[0]


@dataclass
class ModelParams:
    """Viés global, pesos lineares, embeddings e interação entre campos"""

    b0: float
    b: np.ndarray  # (n,)
    W: np.ndarray  # (n, k)
    schema: FieldSchema
    interaction: InteractionSpec

    def __post_init__(self):
        if self.b.shape != (self.schema.n,) or self.W.shape[0] != self.schema.n:
            raise DimensionError(
                f"Parâmetros incompatíveis com o schema: n={self.schema.n}, b={self.b.shape}, W={self.W.shape}")

    @property
    def m(self) -> int:
        return self.schema.m

    @property
    def m_c(self) -> int:
        return self.schema.m_c

    @property
    def n(self) -> int:
        return self.schema.n

    @property
    def k(self) -> int:
        return self.W.shape[1]

    @property
    def variant(self) -> str:
        return self.interaction.kind

    def parameter_count(self) -> Dict[str, int]:
        """Contagem de parâmetros treináveis: base 1+n+nk mais a interação"""
        m = self.m
        base = 1 + self.n + self.n * self.k
        if isinstance(self.interaction, DenseSym):
            extra = m * (m - 1) // 2
        elif isinstance(self.interaction, PrunedSparse):
            extra = self.interaction.q
        elif isinstance(self.interaction, Dplr):
            extra = self.interaction.rho * (m + 1)
        else:
            extra = 0
        return {'base': base, 'interaction': extra, 'total': base + extra}

    def check_finite(self) -> None:
        arrays = [np.atleast_1d(self.b0), self.b, self.W]
        arrays.extend(interaction_arrays(self.interaction).values())
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise NumericError("Parâmetros não finitos (divergência)")

    def astype(self, dtype) -> "ModelParams":
        """Cópia com os parâmetros armazenados em outro tipo (float32 = caminho estreito)"""
        interaction = self.interaction
        if isinstance(interaction, DenseSym):
            interaction = DenseSym(R=interaction.R.astype(dtype))
        elif isinstance(interaction, PrunedSparse):
            interaction = PrunedSparse(m=interaction.m, pairs=interaction.pairs.copy(),
                                       values=interaction.values.astype(dtype))
        elif isinstance(interaction, Dplr):
            interaction = Dplr(U=interaction.U.astype(dtype), e=interaction.e.astype(dtype))
        return ModelParams(
            b0=float(np.array(self.b0, dtype=dtype)), b=self.b.astype(dtype),
            W=self.W.astype(dtype), schema=self.schema, interaction=interaction,
        )

    def as_float32(self) -> "ModelParams":
        return self.astype(np.float32)


def interaction_arrays(interaction: InteractionSpec) -> Dict[str, np.ndarray]:
    """Parâmetros livres da interação, por nome"""
    if isinstance(interaction, DenseSym):
        return {'R': interaction.R}
    if isinstance(interaction, PrunedSparse):
        return {'values': interaction.values}
    if isinstance(interaction, Dplr):
        return {'U': interaction.U, 'e': interaction.e}
    return {}


def init_interaction(variant: str, m: int, rank: int, rng: np.random.Generator) -> InteractionSpec:
    """
    Interação inicial de treino

    DPLR: primeira linha de U = 1/√m com e_1 = 1 (partida próxima de uma FM),
    demais linhas ~ N(0, 1/√m) e e alternando +1/-1. FwFM densa: R = 11ᵀ - I.
    """
    if variant == 'fm':
        return FmImplicit()
    if variant in ('fwfm', 'pruned'):
        return DenseSym(R=np.ones((m, m)) - np.eye(m))
    if variant == 'dplr':
        scale = 1.0 / math.sqrt(m)
        U = np.empty((rank, m))
        U[0] = scale
        if rank > 1:
            U[1:] = rng.normal(0.0, scale, size=(rank - 1, m))
        e = np.array([1.0] + [1.0 if r % 2 == 0 else -1.0 for r in range(1, rank)])
        return Dplr(U=U, e=e)
    raise DataError(f"Variante desconhecida: {variant}")


def init_params(schema: FieldSchema, variant: str, dim: int, rank: int = 1,
                seed: int = 0) -> ModelParams:
    """Embeddings ~ N(0, 1/√k), pesos lineares e viés em zero"""
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, 1.0 / math.sqrt(dim), size=(schema.n, dim))
    interaction = init_interaction(variant, schema.m, rank, rng)
    return ModelParams(b0=0.0, b=np.zeros(schema.n), W=W, schema=schema, interaction=interaction)


def random_params(schema: FieldSchema, variant: str, dim: int, rank: int = 1,
                  keep: int = 0, seed: int = 0) -> ModelParams:
    """Modelo totalmente aleatório (viés, lineares e interação), usado em testes e benchmark"""
    rng = np.random.default_rng(seed)
    m = schema.m
    W = rng.normal(0.0, 1.0, size=(schema.n, dim))
    b = rng.normal(0.0, 1.0, size=schema.n)
    b0 = float(rng.normal())
    if variant == 'fm':
        interaction: InteractionSpec = FmImplicit()
    elif variant == 'fwfm':
        interaction = DenseSym(R=random_symmetric(m, rng))
    elif variant == 'pruned':
        r = random_symmetric(m, rng)
        iu, ju = np.triu_indices(m, 1)
        chosen = np.sort(rng.choice(len(iu), size=min(keep, len(iu)), replace=False))
        interaction = PrunedSparse(m=m, pairs=np.stack([iu[chosen], ju[chosen]], axis=1),
                                   values=r[iu[chosen], ju[chosen]])
    elif variant == 'dplr':
        interaction = Dplr(U=rng.normal(size=(rank, m)), e=rng.normal(size=rank))
    else:
        raise DataError(f"Variante desconhecida: {variant}")
    return ModelParams(b0=b0, b=b, W=W, schema=schema, interaction=interaction)


def random_symmetric(m: int, rng: np.random.Generator) -> np.ndarray:
    """Matriz simétrica aleatória de diagonal zero"""
    a = rng.normal(size=(m, m))
    r = np.triu(a, 1)
    return r + r.T
