"""
Treino em mini-lotes e avaliação
LogLoss ou MSE, Adam (atualização preguiçosa das linhas tocadas) ou SGD, métricas e checagem de gradiente
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from tqdm import tqdm

from .config import settings
from .data_processor import EncodedDataset
from .errors import DataError, NumericError
from .fwfm import batch_field_vectors, batch_forward, batch_linear, batch_pairwise
from .models import EvalReport, FieldSchema, PruneBudget, TrainConfig
from .params import (DenseSym, Dplr, FmImplicit, ModelParams, PrunedSparse, init_params,
                     interaction_arrays, materialize_r)


@dataclass
class Gradients:
    """Gradientes alinhados aos parâmetros; lineares e embeddings só nas linhas tocadas"""

    b0: float
    linear_ids: np.ndarray
    linear: np.ndarray
    embed_ids: np.ndarray
    embed: np.ndarray
    interaction: Dict[str, np.ndarray] = field(default_factory=dict)


def _check_labels(labels: np.ndarray, loss: str) -> None:
    if loss == 'logloss' and not np.all((labels == 0) | (labels == 1)):
        raise DataError("LogLoss exige rótulos 0/1")


def pointwise_loss(scores: np.ndarray, labels: np.ndarray, loss: str) -> np.ndarray:
    if loss == 'logloss':
        return np.logaddexp(0.0, scores) - labels * scores
    return (scores - labels) ** 2


def _loss_slope(scores: np.ndarray, labels: np.ndarray, loss: str) -> np.ndarray:
    if loss == 'logloss':
        return 0.5 * (1.0 + np.tanh(0.5 * scores)) - labels
    return 2.0 * (scores - labels)


def _pairwise_grad_v(V: np.ndarray, interaction, cache: dict) -> np.ndarray:
    """Derivada do termo par-a-par em relação a cada v_i: (B, m, k)"""
    if isinstance(interaction, FmImplicit):
        return cache['sum'][:, None, :] - V
    if isinstance(interaction, Dplr):
        U = interaction.U.astype(np.float64)
        low_rank = np.einsum('r,ri,brk->bik', interaction.e.astype(np.float64), U, cache['P'])
        return interaction.d[None, :, None] * V + low_rank
    return np.einsum('ij,bjk->bik', materialize_r(interaction, V.shape[1]), V)


def _interaction_grad(g: np.ndarray, V: np.ndarray, interaction, cache: dict) -> Dict[str, np.ndarray]:
    if isinstance(interaction, DenseSym):
        # R_ij e R_ji são um único parâmetro
        grad = np.einsum('b,bij->ij', g, cache['gram'])
        grad = (grad + grad.T) / 2.0
        np.fill_diagonal(grad, 0.0)
        return {'R': grad}
    if isinstance(interaction, PrunedSparse):
        return {'values': g @ cache['dots']}
    if isinstance(interaction, Dplr):
        U = interaction.U.astype(np.float64)
        e = interaction.e.astype(np.float64)
        sq_g = g @ cache['sq']          # Σ_b g_b ‖v_bi‖²
        p_sq_g = g @ cache['p_sq']      # Σ_b g_b ‖P_br‖²
        cross = np.einsum('b,brk,bik->ri', g, cache['P'], V)
        return {
            'U': e[:, None] * (cross - U * sq_g[None, :]),
            'e': 0.5 * (p_sq_g - (U * U) @ sq_g),
        }
    return {}


def _scatter_rows(ids: Sequence[np.ndarray], contributions: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Soma contribuições (shape ids.shape + cauda) por id global; devolve (ids únicos, somas)"""
    flat_ids = np.concatenate([a.reshape(-1) for a in ids])
    flat = np.concatenate([c.reshape((-1,) + c.shape[a.ndim:]) for a, c in zip(ids, contributions)])
    unique, inverse = np.unique(flat_ids, return_inverse=True)
    sums = np.zeros((len(unique),) + flat.shape[1:])
    np.add.at(sums, inverse, flat)
    return unique, sums


def loss_and_grad(batch: EncodedDataset, params: ModelParams, loss: str) -> Tuple[float, Gradients]:
    """
    Perda média do lote e gradientes

    Raises:
        NumericError: perda não finita, com o índice da amostra
    """
    _check_labels(batch.labels, loss)
    V = batch_field_vectors(batch, params)
    pairwise, cache = batch_pairwise(V, params.interaction)
    scores = batch_linear(batch, params) + pairwise
    losses = pointwise_loss(scores, batch.labels, loss)
    bad = ~np.isfinite(losses)
    if bad.any():
        raise NumericError(f"Perda não finita na amostra {int(np.argmax(bad))} do lote")

    size = len(batch)
    g = _loss_slope(scores, batch.labels, loss) / size
    dV = g[:, None, None] * _pairwise_grad_v(V, params.interaction, cache)

    linear_parts = [g[:, None] * w for w in batch.weights]
    embed_parts = [w[:, :, None] * dV[:, f, None, :] for f, w in enumerate(batch.weights)]
    linear_ids, linear = _scatter_rows(batch.ids, linear_parts)
    embed_ids, embed = _scatter_rows(batch.ids, embed_parts)

    grads = Gradients(
        b0=float(g.sum()),
        linear_ids=linear_ids, linear=linear,
        embed_ids=embed_ids, embed=embed,
        interaction=_interaction_grad(g, V, params.interaction, cache),
    )
    return float(losses.mean()), grads


class Optimizer:
    """Adam com atualização preguiçosa das linhas tocadas e decaimento desacoplado, ou SGD"""

    def __init__(self, params: ModelParams, config: TrainConfig):
        self.config = config
        self.step_count = 0
        self.state: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
        if config.optimizer == 'adam':
            shapes = {'b0': (1,), 'b': params.b.shape, 'W': params.W.shape}
            shapes.update({name: a.shape for name, a in interaction_arrays(params.interaction).items()})
            self.state = {name: (np.zeros(shape), np.zeros(shape)) for name, shape in shapes.items()}

    def _delta(self, name: str, grad: np.ndarray, rows=None) -> np.ndarray:
        c = self.config
        if c.optimizer == 'sgd':
            return c.learning_rate * grad
        m, v = self.state[name]
        index = slice(None) if rows is None else rows
        m[index] = c.beta1 * m[index] + (1.0 - c.beta1) * grad
        v[index] = c.beta2 * v[index] + (1.0 - c.beta2) * grad * grad
        m_hat = m[index] / (1.0 - c.beta1 ** self.step_count)
        v_hat = v[index] / (1.0 - c.beta2 ** self.step_count)
        return c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps)

    def _apply(self, name: str, target: np.ndarray, grad: np.ndarray, rows=None) -> None:
        delta = self._delta(name, grad, rows)
        decay = self.config.learning_rate * self.config.weight_decay
        if rows is None:
            target -= delta + decay * target
        else:
            target[rows] -= delta + decay * target[rows]

    def step(self, params: ModelParams, grads: Gradients) -> None:
        self.step_count += 1
        b0 = np.array([params.b0])
        self._apply('b0', b0, np.array([grads.b0]))
        params.b0 = float(b0[0])
        self._apply('b', params.b, grads.linear, grads.linear_ids)
        self._apply('W', params.W, grads.embed, grads.embed_ids)
        arrays = interaction_arrays(params.interaction)
        for name, grad in grads.interaction.items():
            self._apply(name, arrays[name], grad)
        if isinstance(params.interaction, Dplr):
            params.interaction.rederive_diagonal()


def batches(size: int, batch_size: int, order: Optional[np.ndarray] = None):
    order = np.arange(size) if order is None else order
    for start in range(0, size, batch_size):
        yield order[start:start + batch_size]


def auc_score(labels: np.ndarray, scores: np.ndarray) -> Optional[float]:
    """AUC pela estatística de Mann-Whitney com postos médios nos empates; None se houver uma só classe"""
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = pd.Series(scores).rank(method='average').to_numpy()
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def predict(data: EncodedDataset, params: ModelParams, batch_size: Optional[int] = None) -> np.ndarray:
    """Escores brutos, calculados em blocos"""
    batch_size = batch_size or settings.eval_batch_size
    if len(data) == 0:
        return np.empty(0)
    return np.concatenate([batch_forward(data.select(index), params)
                           for index in batches(len(data), batch_size)])


def evaluate(data: EncodedDataset, params: ModelParams, loss: str) -> EvalReport:
    """LogLoss e AUC (classificação) ou MSE (regressão) sobre o conjunto inteiro"""
    if len(data) == 0:
        raise DataError("Conjunto de avaliação vazio")
    _check_labels(data.labels, loss)
    scores = predict(data, params)
    if loss == 'mse':
        return EvalReport(count=len(data), mse=float(np.mean((scores - data.labels) ** 2)))
    auc = auc_score(data.labels, scores)
    return EvalReport(
        count=len(data),
        logloss=float(np.mean(pointwise_loss(scores, data.labels, loss))),
        auc=auc,
        auc_error=None if auc is not None else "AUC indefinida: apenas uma classe presente",
    )


class Trainer:
    """Laço de treino determinístico dada a semente"""

    def __init__(self, schema: FieldSchema, config: TrainConfig):
        self.schema = schema
        self.config = config
        self.history: List[Dict[str, float]] = []

    def initial_params(self) -> ModelParams:
        c = self.config
        variant = 'fwfm' if c.variant == 'pruned' else c.variant
        return init_params(self.schema, variant, c.dim, c.rank, c.seed)

    def fit(self, train_data: EncodedDataset, validation: Optional[EncodedDataset] = None,
            params: Optional[ModelParams] = None, epochs: Optional[int] = None,
            first_epoch: int = 1) -> ModelParams:
        """Executa as épocas; registra uma linha por época"""
        c = self.config
        params = self.initial_params() if params is None else params
        epochs = c.epochs if epochs is None else epochs
        if epochs == 0:
            return params
        if len(train_data) == 0:
            raise DataError("Conjunto de treino vazio")

        optimizer = Optimizer(params, c)
        shuffle = np.random.default_rng([c.seed, 1])
        for epoch in tqdm(range(first_epoch, first_epoch + epochs), desc="épocas", leave=False):
            order = shuffle.permutation(len(train_data))
            total = 0.0
            for index in batches(len(train_data), c.batch_size, order):
                batch_loss, grads = loss_and_grad(train_data.select(index), params, c.loss)
                optimizer.step(params, grads)
                total += batch_loss * len(index)
            params.check_finite()

            row = {'epoch': epoch, 'train_loss': total / len(train_data)}
            line = f"epoch={epoch} train_loss={row['train_loss']:.6f}"
            if validation is not None and len(validation):
                metric, value = evaluate(validation, params, c.loss).primary_metric()
                row[f'val_{metric}'] = value
                line += f" val_{metric}={value:.6f}"
            self.history.append(row)
            logger.info(line)
        return params


def train(train_data: EncodedDataset, schema: FieldSchema, config: TrainConfig,
          validation: Optional[EncodedDataset] = None) -> ModelParams:
    """Treina a variante configurada; pruned segue denso -> poda -> ajuste fino"""
    if config.variant == 'pruned':
        return train_pruned(train_data, schema, config, validation)[0]
    return Trainer(schema, config).fit(train_data, validation)


def train_pruned(train_data: EncodedDataset, schema: FieldSchema, config: TrainConfig,
                 validation: Optional[EncodedDataset] = None) -> Tuple[ModelParams, Trainer]:
    """
    FwFM densa treinada, podada para q entradas e ajustada nas entradas mantidas

    q vem de config.keep ou, se ausente, de rank·(m+1).
    """
    from .decompose import prune

    trainer = Trainer(schema, config)
    dense = trainer.fit(train_data, validation)
    if isinstance(dense.interaction, DenseSym):
        budget = PruneBudget(keep=config.keep) if config.keep is not None \
            else PruneBudget(rank_equivalent=config.rank)
        dense.interaction = prune(dense.interaction, budget)
    if config.epochs == 0 or config.finetune_epochs == 0:
        return dense, trainer
    return trainer.fit(train_data, validation, params=dense, epochs=config.finetune_epochs,
                       first_epoch=config.epochs + 1), trainer


def grid_search_lr(train_data: EncodedDataset, validation: EncodedDataset, schema: FieldSchema,
                   config: TrainConfig, grid: Optional[Sequence[float]] = None
                   ) -> Tuple[float, ModelParams, Dict[float, float]]:
    """Treina um modelo por taxa de aprendizado e fica com a melhor métrica de validação"""
    if len(validation) == 0:
        raise DataError("Busca de taxa de aprendizado exige conjunto de validação")
    grid = list(grid or settings.lr_grid)
    results: Dict[float, float] = {}
    best: Optional[Tuple[float, ModelParams]] = None
    for lr in grid:
        params = train(train_data, schema, config.model_copy(update={'learning_rate': lr}), validation)
        metric, value = evaluate(validation, params, config.loss).primary_metric()
        results[lr] = value
        logger.info(f"lr={lr:g} val_{metric}={value:.6f}")
        if best is None or value < results[best[0]]:
            best = (lr, params)
    return best[0], best[1], results


def finite_difference_check(batch: EncodedDataset, params: ModelParams, loss: str,
                            h: float = 1e-4) -> float:
    """
    Maior erro relativo entre o gradiente analítico e a diferença central

    Percorre todos os parâmetros: b0, b, W e os da interação (R_ij conta uma vez por par).
    """
    params = params.astype(np.float64)
    _, grads = loss_and_grad(batch, params, loss)

    analytic_b = np.zeros_like(params.b)
    analytic_b[grads.linear_ids] = grads.linear
    analytic_w = np.zeros_like(params.W)
    analytic_w[grads.embed_ids] = grads.embed

    def set_value(target: np.ndarray, index, mirror, value: float) -> None:
        target[index] = value
        if mirror is not None:
            target[mirror] = value
        if isinstance(params.interaction, Dplr):
            params.interaction.rederive_diagonal()

    def central(target: np.ndarray, index, mirror=None) -> float:
        original = float(target[index])
        set_value(target, index, mirror, original + h)
        up = loss_and_grad(batch, params, loss)[0]
        set_value(target, index, mirror, original - h)
        down = loss_and_grad(batch, params, loss)[0]
        set_value(target, index, mirror, original)
        return (up - down) / (2.0 * h)

    def rel(a: float, f: float) -> float:
        return abs(a - f) / max(abs(a), abs(f), 1e-2)

    b0 = params.b0
    params.b0 = b0 + h
    up = loss_and_grad(batch, params, loss)[0]
    params.b0 = b0 - h
    down = loss_and_grad(batch, params, loss)[0]
    params.b0 = b0
    worst = rel(grads.b0, (up - down) / (2.0 * h))
    for i in range(len(params.b)):
        worst = max(worst, rel(analytic_b[i], central(params.b, i)))
    for index in np.ndindex(params.W.shape):
        worst = max(worst, rel(analytic_w[index], central(params.W, index)))

    arrays = interaction_arrays(params.interaction)
    for name, target in arrays.items():
        analytic = grads.interaction[name]
        if name == 'R':
            for i, j in zip(*np.triu_indices(params.m, 1)):
                worst = max(worst, rel(analytic[i, j], central(target, (i, j), (j, i))))
            continue
        for index in np.ndindex(target.shape):
            worst = max(worst, rel(analytic[index], central(target, index)))
    return worst
