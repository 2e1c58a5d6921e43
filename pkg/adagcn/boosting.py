"""
AdaGCN: SAMME.R boosting over sequentially trained GCNs.

Round m trains a GCN on the sample weights D_m, measures its weighted
training error eps_m and classifier weight alpha_m, then reweights every
training node by p_true^(-a (C - 1) / C) and renormalizes. Later rounds
start from the previous round's params when transfer learning is on.

At test time each member's probabilities are turned into centered
log-probability scores and summed; alpha only enters that sum when
``use_alpha_in_prediction`` is set.
"""
from dataclasses import dataclass, field, replace
import logging
from typing import List

import numpy as np

from .exceptions import ShapeError, TrainingError
from .gcn import PROB_FLOOR, predict, train_gcn
from .models import EnsembleMember, EnsembleModel


logger = logging.getLogger('adagcn.boosting')


EPSILON_FLOOR = 1e-10

MULTIPLIER_CAP = 1e12


@dataclass(frozen=True)
class SampleWeights:
    """ A distribution over the training nodes, aligned with train_idx. """
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        object.__setattr__(self, 'values', values)
        if values.size == 0:
            raise ValueError("sample weights need at least one entry")
        if not (values > 0).all():
            raise ValueError("sample weights must be positive")

    def __len__(self):
        return self.values.size

    @property
    def total(self):
        return float(self.values.sum())


def init_weights(n):
    if n < 1:
        raise ValueError("need at least one training sample")
    return SampleWeights(np.full(n, 1.0 / n))


def _aligned(*arrays):
    sizes = set(len(a) for a in arrays)
    if len(sizes) != 1:
        raise ShapeError("arrays are not aligned: lengths %s" % sorted(sizes))


def weighted_error(pred_class, labels, weights):
    """ Sum of the weights of misclassified samples. ``labels`` are the true
    classes of the same samples. """
    pred_class = np.asarray(pred_class)
    labels = np.asarray(getattr(labels, 'labels', labels))
    w = np.asarray(getattr(weights, 'values', weights), dtype=np.float64)
    _aligned(pred_class, labels, w)
    eps = float(np.sum(w[pred_class != labels]))
    return min(max(eps, 0.0), 1.0)


def classifier_alpha(epsilon):
    eps = min(max(float(epsilon), EPSILON_FLOOR), 1.0 - EPSILON_FLOOR)
    return 0.5 * np.log((1.0 - eps) / eps)


def sample_weight_multipliers(probs, labels, num_classes, shrinkage=1.0):
    """ exp(-a (C - 1) / C * log p_true) for each row, before normalization,
    capped at MULTIPLIER_CAP. ``probs`` rows and ``labels`` are the training
    nodes only. """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(getattr(labels, 'labels', labels))
    _aligned(probs, labels)
    log_pt = np.log(np.clip(probs[np.arange(len(labels)), labels],
                            PROB_FLOOR, 1.0))
    factor = shrinkage * (num_classes - 1.0) / num_classes
    return np.minimum(np.exp(-factor * log_pt), MULTIPLIER_CAP)


def update_sample_weights(weights, probs, labels, num_classes, shrinkage=1.0):
    multipliers = sample_weight_multipliers(probs, labels, num_classes,
                                            shrinkage)
    raw = weights.values * multipliers
    return SampleWeights(raw / raw.sum())


def classifier_score(probs, num_classes=None):
    """ (C - 1) * (log p_k - mean_j log p_j), row-wise. Accepts one row or a
    matrix. """
    probs = np.asarray(probs, dtype=np.float64)
    c = probs.shape[-1] if num_classes is None else num_classes
    log_p = np.log(np.clip(probs, PROB_FLOOR, None))
    return (c - 1.0) * (log_p - log_p.mean(axis=-1, keepdims=True))


def ensemble_scores(model, a_hat, x):
    if not model.members:
        raise ValueError("ensemble has no members")
    total = None
    for member in model.members:
        h = classifier_score(predict(a_hat, x, member.params),
                             model.num_classes)
        if model.config.use_alpha_in_prediction:
            h = member.alpha * h
        total = h if total is None else total + h
    return total


def ensemble_predict(model, a_hat, x):
    """ (predicted class, summed scores). Ties go to the lowest class
    index. """
    scores = ensemble_scores(model, a_hat, x)
    return scores.argmax(axis=1), scores


@dataclass(frozen=True)
class RoundRecord:
    round: int
    epsilon: float
    alpha: float
    weak: bool
    selected_epoch: int


@dataclass
class BoostDiagnostics:
    """ What happened in each round. ``weights[m]`` is the distribution round
    m + 1 trained on; the last entry is the distribution after the final
    update. ``true_class_probs[m]`` and ``multipliers[m]`` are round m + 1's
    training-node p_true and its raw reweighting factors. """
    train_idx: np.ndarray
    rounds: List[RoundRecord] = field(default_factory=list)
    weights: List[np.ndarray] = field(default_factory=list)
    true_class_probs: List[np.ndarray] = field(default_factory=list)
    multipliers: List[np.ndarray] = field(default_factory=list)
    histories: list = field(default_factory=list)

    def round_rows(self):
        return [(r.round, r.epsilon, r.alpha) for r in self.rounds]


def train_adagcn(dataset, split, a_hat, config):
    """ Train ``config.num_estimators`` GCNs in sequence and return
    (EnsembleModel, BoostDiagnostics). """
    config.validate()
    labels = dataset.labels
    c = dataset.num_classes
    train_idx = split.train_idx
    y_train = labels.labels[train_idx]
    weights = init_weights(len(train_idx))
    model = EnsembleModel(num_classes=c, config=config)
    diagnostics = BoostDiagnostics(train_idx=train_idx.copy())
    diagnostics.weights.append(weights.values.copy())

    previous = None
    for m in range(1, int(config.num_estimators) + 1):
        round_config = replace(config.base, seed=int(config.base.seed) + m - 1)
        warm_start = previous if config.transfer_learning else None
        try:
            params, history = train_gcn(dataset, split, a_hat, weights,
                                        round_config, warm_start=warm_start)
        except TrainingError as ex:
            raise TrainingError("boosting round %d: %s" % (m, ex),
                                epoch=ex.epoch, round_index=m)

        probs = predict(a_hat, dataset.features, params)[train_idx]
        epsilon = weighted_error(probs.argmax(axis=1), y_train, weights)
        alpha = classifier_alpha(epsilon)
        weak = epsilon >= (c - 1.0) / c
        if weak:
            logger.warning("round %d is no better than chance: eps=%.4f",
                           m, epsilon)
        multipliers = sample_weight_multipliers(probs, y_train, c,
                                                config.shrinkage)
        weights = update_sample_weights(weights, probs, y_train, c,
                                        config.shrinkage)

        model.members.append(EnsembleMember(params, float(alpha),
                                            float(epsilon)))
        diagnostics.rounds.append(RoundRecord(m, float(epsilon), float(alpha),
                                              bool(weak),
                                              history.selected_epoch))
        diagnostics.true_class_probs.append(
            probs[np.arange(len(train_idx)), y_train])
        diagnostics.multipliers.append(multipliers)
        diagnostics.weights.append(weights.values.copy())
        diagnostics.histories.append(history)
        logger.info("round %d: eps=%.4f alpha=%.4f", m, epsilon, alpha)
        previous = params
    return model, diagnostics
