"""
Two-layer GCN on numpy/scipy with hand-written gradients.

    hidden = relu(A_hat . drop(X) . W0)
    logits = A_hat . drop(hidden) . W1
    probs  = softmax(logits)

The training objective is a per-sample weighted loss over the training nodes
plus (l2_lambda / 2) * (|W0|^2 + |W1|^2). Four loss kinds share one code
path: every one of them is sum_i s_i * (1 - p_i)^gamma * -log(p_i), where p_i
is the probability of node i's true class and s_i folds together the sample
weight and an optional class weight.
"""
from dataclasses import dataclass, field
import logging
from typing import List, Optional

import numpy as np

from .exceptions import ShapeError, TrainingError
from .models import LOSS_KIND_CHOICES, GcnParams, ParamGrads
from .util import make_rng, spawn_seeds


logger = logging.getLogger('adagcn.gcn')


PROB_FLOOR = 1e-10

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass
class ForwardCache:
    params: GcnParams
    x_in: np.ndarray
    pre_hidden: np.ndarray
    hidden: np.ndarray
    hidden_in: np.ndarray
    hidden_scale: Optional[np.ndarray]
    logits: np.ndarray
    probs: np.ndarray


@dataclass(frozen=True)
class AdamState:
    m0: np.ndarray
    v0: np.ndarray
    m1: np.ndarray
    v1: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, params):
        return cls(np.zeros_like(params.w0), np.zeros_like(params.w0),
                   np.zeros_like(params.w1), np.zeros_like(params.w1), 0)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    selected_epoch: int = 0
    final_params: Optional[GcnParams] = None

    def rows(self):
        return [(r.epoch, r.train_loss, r.val_acc) for r in self.records]


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _dropout(values, rate, rng):
    """ Inverted dropout. Returns (output, scale) where scale is the
    multiplier applied elementwise, or None when nothing was dropped. """
    if rate <= 0.0 or rng is None:
        return values, None
    keep = rng.random(values.shape) >= rate
    scale = keep / (1.0 - rate)
    return values * scale, scale


def forward(a_hat, x, params, dropout_rate=0.0, rng=None):
    """ Forward pass. Dropout is applied to the input of both dense
    products, and only when an ``rng`` is supplied. """
    m = a_hat.matrix
    if x.shape[0] != m.shape[0]:
        raise ShapeError("%d feature rows for a %d-node graph"
                         % (x.shape[0], m.shape[0]))
    if x.shape[1] != params.num_features:
        raise ShapeError("params expect %d features, got %d"
                         % (params.num_features, x.shape[1]))
    x_in, _ = _dropout(x, dropout_rate, rng)
    pre_hidden = m @ (x_in @ params.w0)
    hidden = np.maximum(pre_hidden, 0.0)
    hidden_in, hidden_scale = _dropout(hidden, dropout_rate, rng)
    logits = m @ (hidden_in @ params.w1)
    probs = softmax(logits)
    return ForwardCache(params, x_in, pre_hidden, hidden, hidden_in,
                        hidden_scale, logits, probs)


def predict(a_hat, x, params):
    """ Inference pass; rows of the result sum to one. """
    return forward(a_hat, x, params).probs


def _true_class_probs(probs, labels, train_idx):
    y = labels.labels[train_idx]
    return probs[train_idx, y], y


def _check_weights(weights, train_idx):
    weights = np.asarray(getattr(weights, 'values', weights), dtype=np.float64)
    if weights.shape != (len(train_idx),):
        raise ShapeError("%d sample weights for %d training nodes"
                         % (weights.size, len(train_idx)))
    return weights


def l2_penalty(params, l2_lambda):
    return 0.5 * l2_lambda * (np.sum(params.w0 ** 2) + np.sum(params.w1 ** 2))


def _focal_terms(pt, gamma):
    log_pt = np.log(np.clip(pt, PROB_FLOOR, 1.0))
    if gamma == 0:
        return -log_pt
    return (1.0 - pt) ** gamma * -log_pt


def weighted_cross_entropy(probs, labels, train_idx, weights, params=None,
                           l2_lambda=0.0):
    """ sum_i w_i * -log p_i over the training nodes, plus the L2 term when
    params are given. """
    weights = _check_weights(weights, train_idx)
    pt, _ = _true_class_probs(probs, labels, train_idx)
    loss = float(np.sum(weights * _focal_terms(pt, 0.0)))
    if params is not None and l2_lambda:
        loss += l2_penalty(params, l2_lambda)
    return loss


def focal_loss(probs, labels, train_idx, weights, gamma):
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    weights = _check_weights(weights, train_idx)
    pt, _ = _true_class_probs(probs, labels, train_idx)
    return float(np.sum(weights * _focal_terms(pt, gamma)))


def class_balanced_weights(class_counts, beta):
    """ (1 - beta) / (1 - beta^n_k) per class, scaled to sum to C. Classes
    with no training samples get weight 0. """
    counts = np.asarray(class_counts, dtype=np.float64)
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    raw = np.zeros_like(counts)
    present = counts > 0
    raw[present] = (1.0 - beta) / (1.0 - np.power(beta, counts[present]))
    return raw * (counts.size / raw.sum())


def inverse_frequency_weights(class_counts):
    """ 1 / n_k per class, scaled to sum to C. """
    counts = np.asarray(class_counts, dtype=np.float64)
    raw = np.zeros_like(counts)
    present = counts > 0
    raw[present] = 1.0 / counts[present]
    return raw * (counts.size / raw.sum())


def _class_weights_for(y, class_weights):
    cw = class_weights[y]
    if (cw == 0).any():
        missing = sorted(set(y[cw == 0].tolist()))
        raise ValueError("no training count for class(es) %s" % missing)
    return cw


def cb_focal_loss(probs, labels, train_idx, class_counts, beta, gamma,
                  weights=None):
    """ Focal loss with class-balanced (effective number) class weights.
    Samples are averaged uniformly unless ``weights`` is given. """
    if weights is None:
        weights = np.full(len(train_idx), 1.0 / len(train_idx))
    weights = _check_weights(weights, train_idx)
    pt, y = _true_class_probs(probs, labels, train_idx)
    cw = _class_weights_for(y, class_balanced_weights(class_counts, beta))
    return float(np.sum(weights * cw * _focal_terms(pt, gamma)))


def _sample_coefficients(labels, train_idx, weights, loss_kind, cb_beta):
    """ s_i of the module docstring, and gamma's applicability. """
    weights = _check_weights(weights, train_idx)
    y = labels.labels[train_idx]
    if loss_kind in (LOSS_KIND_CHOICES.WEIGHTED_CE, LOSS_KIND_CHOICES.FOCAL):
        return weights
    counts = np.bincount(y, minlength=labels.num_classes)
    if loss_kind == LOSS_KIND_CHOICES.CB_FOCAL:
        cw = class_balanced_weights(counts, cb_beta)
    elif loss_kind == LOSS_KIND_CHOICES.REWEIGHTED_CE:
        cw = inverse_frequency_weights(counts)
    else:
        raise ValueError("unknown loss kind %r" % loss_kind)
    return weights * _class_weights_for(y, cw)


def _gamma_for(loss_kind, focal_gamma):
    if loss_kind in (LOSS_KIND_CHOICES.FOCAL, LOSS_KIND_CHOICES.CB_FOCAL):
        return focal_gamma
    return 0.0


def objective(probs, labels, train_idx, weights, params, l2_lambda,
              loss_kind=LOSS_KIND_CHOICES.WEIGHTED_CE, focal_gamma=2.0,
              cb_beta=0.999):
    """ Training objective for any loss kind, L2 term included. """
    s = _sample_coefficients(labels, train_idx, weights, loss_kind, cb_beta)
    pt, _ = _true_class_probs(probs, labels, train_idx)
    gamma = _gamma_for(loss_kind, focal_gamma)
    return float(np.sum(s * _focal_terms(pt, gamma))) + \
        l2_penalty(params, l2_lambda)


def _dloss_dpt(pt, gamma):
    """ d/dpt of (1 - pt)^gamma * -log(pt), with pt floored like the
    loss. """
    ptc = np.clip(pt, PROB_FLOOR, 1.0)
    d = -1.0 / ptc
    if gamma == 0:
        return d
    q = 1.0 - pt
    with np.errstate(divide='ignore', invalid='ignore'):
        # d/dpt (1 - pt)^gamma = -gamma (1 - pt)^(gamma - 1); the product
        # with log(pt) is 0 where pt == 1.
        first = gamma * np.power(q, gamma - 1.0) * np.log(ptc)
    first = np.where(q > 0, first, 0.0)
    return first + np.power(q, gamma) * d


def backward(a_hat, x, labels, train_idx, weights, params, cache, l2_lambda,
             loss_kind=LOSS_KIND_CHOICES.WEIGHTED_CE, focal_gamma=2.0,
             cb_beta=0.999):
    """ Exact gradients of ``objective`` with respect to W0 and W1. ReLU's
    sub-gradient at 0 is taken as 0. """
    if cache.params is not params:
        raise ShapeError("forward cache was computed with different params")
    m = a_hat.matrix
    probs = cache.probs
    s = _sample_coefficients(labels, train_idx, weights, loss_kind, cb_beta)
    pt, y = _true_class_probs(probs, labels, train_idx)
    gamma = _gamma_for(loss_kind, focal_gamma)

    # dL/dlogits for a softmax row: dL/dpt * pt * (onehot - p)
    coef = s * _dloss_dpt(pt, gamma) * pt
    onehot = np.zeros((len(train_idx), probs.shape[1]))
    onehot[np.arange(len(train_idx)), y] = 1.0
    d_logits = np.zeros_like(probs)
    np.add.at(d_logits, train_idx,
              coef[:, None] * (onehot - probs[train_idx]))

    d_u = m.T @ d_logits
    gw1 = cache.hidden_in.T @ d_u + l2_lambda * params.w1
    d_hidden = d_u @ params.w1.T
    if cache.hidden_scale is not None:
        d_hidden = d_hidden * cache.hidden_scale
    d_pre = d_hidden * (cache.pre_hidden > 0)
    d_v = m.T @ d_pre
    gw0 = cache.x_in.T @ d_v + l2_lambda * params.w0
    return ParamGrads(np.asarray(gw0), np.asarray(gw1))


def adam_step(params, grads, state, learning_rate):
    """ One Adam update with bias correction. Returns new params and state;
    the inputs are left alone. """
    if state.m0.shape != params.w0.shape or state.m1.shape != params.w1.shape:
        raise ShapeError("optimizer state does not match params")
    t = state.step + 1
    m0 = ADAM_BETA1 * state.m0 + (1 - ADAM_BETA1) * grads.gw0
    v0 = ADAM_BETA2 * state.v0 + (1 - ADAM_BETA2) * grads.gw0 ** 2
    m1 = ADAM_BETA1 * state.m1 + (1 - ADAM_BETA1) * grads.gw1
    v1 = ADAM_BETA2 * state.v1 + (1 - ADAM_BETA2) * grads.gw1 ** 2
    c1 = 1 - ADAM_BETA1 ** t
    c2 = 1 - ADAM_BETA2 ** t

    def delta(m, v):
        return learning_rate * (m / c1) / (np.sqrt(v / c2) + ADAM_EPSILON)

    new_params = GcnParams(params.w0 - delta(m0, v0),
                           params.w1 - delta(m1, v1))
    return new_params, AdamState(m0, v0, m1, v1, t)


def glorot_uniform(fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(num_features, hidden_dim, num_classes, seed):
    rng = make_rng(seed)
    w0 = glorot_uniform(num_features, hidden_dim, rng)
    w1 = glorot_uniform(hidden_dim, num_classes, rng)
    return GcnParams(w0, w1)


def accuracy(probs, labels, idx):
    if len(idx) == 0:
        return float('nan')
    pred = probs[idx].argmax(axis=1)
    return float(np.mean(pred == labels.labels[idx]))


def train_gcn(dataset, split, a_hat, weights, config, warm_start=None):
    """ Full-batch training of one GCN on sample-weighted training nodes.

    ``dataset.features`` is used as given, so normalize or perturb before
    calling. Starts from ``warm_start`` when provided (with fresh Adam
    moments), otherwise from a Glorot-uniform draw seeded by
    ``config.seed``. Returns (params, history); params are the
    best-validation snapshot when ``config.best_epoch_selection`` is set and
    the validation set is not empty, else the final ones. """
    config.validate()
    x = dataset.features
    labels = dataset.labels
    train_idx = split.train_idx
    weights = _check_weights(weights, train_idx)
    init_seed, dropout_seed = spawn_seeds(config.seed, 2)
    if warm_start is not None:
        warm_start.check_compatible(dataset.num_features, dataset.num_classes)
        params = warm_start
    else:
        params = init_params(dataset.num_features, int(config.hidden_dim),
                             dataset.num_classes, init_seed)
    dropout_rng = make_rng(dropout_seed) if config.dropout_rate > 0 else None
    state = AdamState.fresh(params)

    select_best = bool(config.best_epoch_selection)
    if select_best and len(split.val_idx) == 0:
        logger.warning("best-epoch selection requested without validation "
                       "nodes; keeping final params")
        select_best = False

    history = TrainHistory()
    best_params, best_acc = params, -1.0
    loss_args = dict(loss_kind=config.loss_kind,
                     focal_gamma=config.focal_gamma,
                     cb_beta=config.cb_beta)
    for epoch in range(1, int(config.epochs) + 1):
        cache = forward(a_hat, x, params, config.dropout_rate, dropout_rng)
        loss = objective(cache.probs, labels, train_idx, weights, params,
                         config.l2_lambda, **loss_args)
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss at epoch %d" % epoch,
                                epoch=epoch)
        grads = backward(a_hat, x, labels, train_idx, weights, params, cache,
                         config.l2_lambda, **loss_args)
        params, state = adam_step(params, grads, state, config.learning_rate)
        val_acc = accuracy(predict(a_hat, x, params), labels, split.val_idx)
        history.records.append(EpochRecord(epoch, loss, val_acc))
        logger.debug("epoch %d loss %.6f val_acc %.4f", epoch, loss, val_acc)
        if select_best and val_acc > best_acc:
            best_params, best_acc = params, val_acc
            history.selected_epoch = epoch

    history.final_params = params
    if not select_best:
        best_params = params
        history.selected_epoch = int(config.epochs)
    return best_params, history
