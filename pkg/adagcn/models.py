"""
Data types shared by every layer: graphs, datasets, splits, GCN parameters,
training and boosting configuration, ensembles and experiment results.

Arrays are never mutated after construction; operations return new objects.
"""
from dataclasses import asdict, dataclass, field, fields, replace
import math
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, DatasetError, ShapeError, SplitError
from .util import ChoiceEnum
from . import settings as local_settings


UNLABELED = -1


LOSS_KIND_CHOICES = ChoiceEnum((('weighted_ce', 'Weighted cross-entropy'),
                                ('focal', 'Focal'),
                                ('cb_focal', 'Class-balanced focal'),
                                ('reweighted_ce', 'Class-reweighted CE')))


MODEL_KIND_CHOICES = ChoiceEnum((('gcn', 'GCN'),
                                 ('gcn_focal', 'GCN focal'),
                                 ('gcn_cb_focal', 'GCN class-balanced focal'),
                                 ('gcn_reweighted', 'GCN reweighted'),
                                 ('adagcn', 'AdaGCN')))


# Which loss each single-GCN model kind trains with.
MODEL_LOSS_KINDS = {
    MODEL_KIND_CHOICES.GCN: LOSS_KIND_CHOICES.WEIGHTED_CE,
    MODEL_KIND_CHOICES.GCN_FOCAL: LOSS_KIND_CHOICES.FOCAL,
    MODEL_KIND_CHOICES.GCN_CB_FOCAL: LOSS_KIND_CHOICES.CB_FOCAL,
    MODEL_KIND_CHOICES.GCN_REWEIGHTED: LOSS_KIND_CHOICES.REWEIGHTED_CE,
}


def _index_array(values):
    return np.asarray(values, dtype=np.int64).reshape(-1)


@dataclass(frozen=True)
class SparseGraph:
    """ Symmetric adjacency in CSR form. Rows have sorted, unique column
    indices. Build raw graphs with ``from_edges``; normalized ones come out
    of ``graph.normalize_adjacency``. """
    matrix: sp.csr_matrix

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise ShapeError("adjacency must be square, got %r" % (m.shape,))

    @classmethod
    def from_edges(cls, num_nodes, src, dst):
        """ Undirected, unweighted graph from an edge list. Direction,
        duplicates and self-loops in the input are all dropped. """
        src = _index_array(src)
        dst = _index_array(dst)
        if src.shape != dst.shape:
            raise ShapeError("edge endpoint arrays differ in length")
        keep = src != dst
        src, dst = src[keep], dst[keep]
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        data = np.ones(rows.shape[0], dtype=np.float64)
        m = sp.coo_matrix((data, (rows, cols)),
                          shape=(num_nodes, num_nodes)).tocsr()
        m.sum_duplicates()
        m.data[:] = 1.0
        m.sort_indices()
        return cls(m)

    @property
    def num_nodes(self):
        return self.matrix.shape[0]

    @property
    def row_offsets(self):
        return self.matrix.indptr

    @property
    def col_indices(self):
        return self.matrix.indices

    @property
    def values(self):
        return self.matrix.data

    @property
    def nnz(self):
        return self.matrix.nnz

    @property
    def num_undirected_edges(self):
        """ Off-diagonal pairs counted once. """
        coo = self.matrix.tocoo()
        return int(np.count_nonzero(coo.row < coo.col))

    def degrees(self):
        return np.asarray(self.matrix.sum(axis=1)).reshape(-1)

    def is_symmetric(self):
        diff = self.matrix - self.matrix.T
        return diff.count_nonzero() == 0

    def edge_pairs(self):
        """ (src, dst) arrays with src < dst. """
        coo = self.matrix.tocoo()
        upper = coo.row < coo.col
        return coo.row[upper].astype(np.int64), coo.col[upper].astype(np.int64)


@dataclass(frozen=True)
class LabelArray:
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        object.__setattr__(self, 'labels', labels)
        if self.num_classes < 1:
            raise DatasetError("num_classes must be positive")
        bad = (labels < UNLABELED) | (labels >= self.num_classes)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DatasetError("label out of range: node %d has label %d "
                               "(classes: %d)" % (i, labels[i],
                                                  self.num_classes))

    def __len__(self):
        return self.labels.shape[0]

    @property
    def labeled_mask(self):
        return self.labels != UNLABELED

    def class_counts(self, idx=None):
        labels = self.labels if idx is None else self.labels[idx]
        labels = labels[labels != UNLABELED]
        return np.bincount(labels, minlength=self.num_classes)


@dataclass(frozen=True)
class NodeSplit:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        for name in ('train_idx', 'val_idx', 'test_idx'):
            object.__setattr__(self, name, _index_array(getattr(self, name)))

    def validate(self, labels):
        n = len(labels)
        parts = (('train', self.train_idx),
                 ('val', self.val_idx),
                 ('test', self.test_idx))
        for name, idx in parts:
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise SplitError("%s index out of range [0, %d)" % (name, n))
            if np.unique(idx).size != idx.size:
                raise SplitError("duplicate indices in %s split" % name)
        seen = np.concatenate([p[1] for p in parts])
        if np.unique(seen).size != seen.size:
            raise SplitError("train, val and test splits overlap")
        if (labels.labels[self.train_idx] == UNLABELED).any():
            raise SplitError("train split contains unlabeled nodes")
        return self

    def to_jsondata(self):
        return dict(train=self.train_idx.tolist(),
                    val=self.val_idx.tolist(),
                    test=self.test_idx.tolist())

    @classmethod
    def from_jsondata(cls, data):
        try:
            return cls(data['train'], data.get('val', []),
                       data.get('test', []))
        except (KeyError, TypeError, ValueError) as ex:
            raise SplitError("malformed split: %s" % ex)


@dataclass(frozen=True)
class Dataset:
    graph: SparseGraph
    features: np.ndarray
    labels: LabelArray
    split: Optional[NodeSplit] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, 'features', features)
        if features.ndim != 2:
            raise ShapeError("features must be a matrix")
        n = self.graph.num_nodes
        if features.shape[0] != n or len(self.labels) != n:
            raise ShapeError(
                "node counts disagree: graph %d, features %d, labels %d"
                % (n, features.shape[0], len(self.labels)))
        if not np.isfinite(features).all():
            raise DatasetError("features contain non-finite values")
        if self.split is not None:
            self.split.validate(self.labels)

    @property
    def num_nodes(self):
        return self.graph.num_nodes

    @property
    def num_features(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return self.labels.num_classes

    def with_features(self, features):
        return replace(self, features=features)

    def with_split(self, split):
        return replace(self, split=split)


@dataclass(frozen=True)
class GcnParams:
    w0: np.ndarray
    w1: np.ndarray

    def __post_init__(self):
        w0 = np.asarray(self.w0, dtype=np.float64)
        w1 = np.asarray(self.w1, dtype=np.float64)
        object.__setattr__(self, 'w0', w0)
        object.__setattr__(self, 'w1', w1)
        if w0.ndim != 2 or w1.ndim != 2 or w0.shape[1] != w1.shape[0]:
            raise ShapeError("inconsistent weight shapes %r and %r"
                             % (w0.shape, w1.shape))

    @property
    def num_features(self):
        return self.w0.shape[0]

    @property
    def hidden_dim(self):
        return self.w0.shape[1]

    @property
    def num_classes(self):
        return self.w1.shape[1]

    def is_finite(self):
        return bool(np.isfinite(self.w0).all() and np.isfinite(self.w1).all())

    def check_compatible(self, num_features, num_classes):
        if (self.num_features, self.num_classes) != (num_features,
                                                     num_classes):
            raise ShapeError(
                "params expect %d features and %d classes, data has %d and %d"
                % (self.num_features, self.num_classes,
                   num_features, num_classes))


@dataclass(frozen=True)
class ParamGrads:
    gw0: np.ndarray
    gw1: np.ndarray


class _ConfigMixin(object):
    """ Mapping round trip for configs read from JSON specs. Unknown keys are
    an error rather than silently ignored. """

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, data, **overrides):
        data = dict(data or {})
        data.update(overrides)
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise ConfigError("unknown %s keys: %s"
                              % (cls.__name__, ", ".join(sorted(unknown))))
        return cls(**data).validate()

    def to_jsondata(self):
        return asdict(self)


@dataclass(frozen=True)
class TrainConfig(_ConfigMixin):
    learning_rate: float = local_settings.LEARNING_RATE
    epochs: int = local_settings.EPOCHS
    l2_lambda: float = local_settings.L2_LAMBDA
    hidden_dim: int = local_settings.HIDDEN_DIM
    dropout_rate: float = local_settings.DROPOUT_RATE
    loss_kind: str = local_settings.LOSS_KIND
    focal_gamma: float = local_settings.FOCAL_GAMMA
    cb_beta: float = local_settings.CB_BETA
    seed: int = 0
    best_epoch_selection: bool = local_settings.BEST_EPOCH_SELECTION

    def validate(self):
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be non-negative")
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be at least 1")
        if int(self.hidden_dim) < 1:
            raise ConfigError("hidden_dim must be at least 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.loss_kind not in LOSS_KIND_CHOICES:
            raise ConfigError("unknown loss_kind %r; choose from %s"
                              % (self.loss_kind, LOSS_KIND_CHOICES.describe()))
        if self.focal_gamma < 0:
            raise ConfigError("focal_gamma must be non-negative")
        if not 0.0 <= self.cb_beta < 1.0:
            raise ConfigError("cb_beta must be in [0, 1)")
        if self.l2_lambda < 0:
            raise ConfigError("l2_lambda must be non-negative")
        return self


@dataclass(frozen=True)
class BoostConfig(_ConfigMixin):
    num_estimators: int = local_settings.NUM_ESTIMATORS
    shrinkage: float = local_settings.SHRINKAGE
    transfer_learning: bool = local_settings.TRANSFER_LEARNING
    use_alpha_in_prediction: bool = local_settings.USE_ALPHA_IN_PREDICTION
    base: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_mapping(cls, data, **overrides):
        data = dict(data or {})
        data.update(overrides)
        base = data.pop('base', None)
        if not isinstance(base, TrainConfig):
            base = TrainConfig.from_mapping(base)
        data['base'] = base
        return super(BoostConfig, cls).from_mapping(data)

    def validate(self):
        if int(self.num_estimators) < 1:
            raise ConfigError("num_estimators must be at least 1")
        if not self.shrinkage > 0:
            raise ConfigError("shrinkage must be positive")
        self.base.validate()
        return self


@dataclass(frozen=True)
class EnsembleMember:
    params: GcnParams
    alpha: float
    epsilon: float


@dataclass
class EnsembleModel:
    num_classes: int
    config: BoostConfig
    members: List[EnsembleMember] = field(default_factory=list)

    def __len__(self):
        return len(self.members)

    @property
    def alphas(self):
        return np.array([m.alpha for m in self.members], dtype=np.float64)

    @property
    def epsilons(self):
        return np.array([m.epsilon for m in self.members], dtype=np.float64)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    per_class_recall: np.ndarray
    confusion: np.ndarray

    @property
    def num_classes(self):
        return self.confusion.shape[0]

    @property
    def total(self):
        return int(self.confusion.sum())

    def to_jsondata(self):
        return dict(accuracy=self.accuracy,
                    per_class_recall=self.per_class_recall.tolist(),
                    confusion=self.confusion.tolist(),
                    total=self.total)


@dataclass
class TrialReport:
    seed: int
    model: str
    majority_class: int
    n_majority: int
    n_minority: int
    num_estimators: int
    epochs: int
    noise_fraction: float
    metrics: Optional[Metrics] = None
    final_epoch_accuracy: Optional[float] = None
    train_idx: Optional[np.ndarray] = None
    diagnostics: object = None
    error: str = ''

    @property
    def ok(self):
        return not self.error and self.metrics is not None

    @property
    def accuracy(self):
        return self.metrics.accuracy if self.metrics is not None else math.nan

    def sort_key(self):
        return (self.seed, self.model, self.n_minority, self.num_estimators,
                self.epochs, self.noise_fraction)

    def to_jsondata(self):
        return dict(seed=self.seed,
                    model=self.model,
                    majority_class=self.majority_class,
                    n_majority=self.n_majority,
                    n_minority=self.n_minority,
                    num_estimators=self.num_estimators,
                    epochs=self.epochs,
                    noise_fraction=self.noise_fraction,
                    metrics=self.metrics,
                    final_epoch_accuracy=self.final_epoch_accuracy,
                    error=self.error)


@dataclass(frozen=True)
class SummaryRow:
    mean: float
    std: float
    count: int
    single_trial: bool


class SweepSummary(dict):
    """ Maps a grouping key, (model, n_minority, num_estimators, epochs,
    noise_fraction), to a SummaryRow. """

    KEY_FIELDS = ('model', 'n_minority', 'num_estimators', 'epochs',
                  'noise_fraction')

    def rows(self):
        return [(key, self[key]) for key in sorted(self)]


@dataclass
class RunManifest:
    command: str
    config: dict
    dataset_checksum: str
    tool_version: str
    seeds: Tuple[int, ...]
    started_at: object
    finished_at: object = None
    outputs: List[str] = field(default_factory=list)

    def to_jsondata(self):
        return dict(command=self.command,
                    config=self.config,
                    dataset_checksum=self.dataset_checksum,
                    tool_version=self.tool_version,
                    seeds=list(self.seeds),
                    started_at=self.started_at,
                    finished_at=self.finished_at,
                    outputs=sorted(self.outputs))
