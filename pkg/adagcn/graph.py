"""
Graph preprocessing and dataset construction: adjacency normalization,
feature normalization and perturbation, imbalanced split sampling and the
stochastic block model fixture.

Every random draw uses numpy's PCG64 generator (see ``util.make_rng``) and
samples from sorted candidate arrays, so a seed selects the same nodes and
features on every platform.
"""
import logging
import math

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .exceptions import DatasetError, SplitError
from .models import Dataset, LabelArray, NodeSplit, SparseGraph
from .util import make_rng, seed_to_int
from . import settings as local_settings


logger = logging.getLogger('adagcn.graph')


def normalize_adjacency(graph, add_self_loops=local_settings.ADD_SELF_LOOPS):
    """ D^-1/2 A D^-1/2, or the renormalized D^-1/2 (A + I) D^-1/2 with
    ``add_self_loops``. Zero-degree nodes get a zero scale, so their rows
    stay empty instead of turning into NaN. """
    a = graph.matrix
    if add_self_loops:
        a = a + sp.identity(graph.num_nodes, dtype=np.float64, format='csr')
    coo = sp.coo_matrix(a)
    coo.sum_duplicates()
    degree = np.asarray(a.sum(axis=1)).reshape(-1)
    scale = np.zeros_like(degree)
    positive = degree > 0
    scale[positive] = 1.0 / np.sqrt(degree[positive])
    # scale[i] * scale[j] commutes exactly, which keeps value(i, j) and
    # value(j, i) bitwise equal.
    data = coo.data * (scale[coo.row] * scale[coo.col])
    out = sp.coo_matrix((data, (coo.row, coo.col)), shape=a.shape).tocsr()
    out.eliminate_zeros()
    out.sort_indices()
    return SparseGraph(out)


def row_normalize_features(features):
    """ Divide each row by its sum. Zero-sum rows are returned untouched. """
    features = np.asarray(features, dtype=np.float64)
    sums = features.sum(axis=1)
    out = features.copy()
    nonzero = sums != 0
    out[nonzero] = features[nonzero] / sums[nonzero][:, None]
    return out


def prepare_inputs(dataset,
                   add_self_loops=local_settings.ADD_SELF_LOOPS,
                   row_normalize=local_settings.ROW_NORMALIZE):
    """ The (features, a_hat) pair training and prediction consume. """
    x = dataset.features
    if row_normalize:
        x = row_normalize_features(x)
    return x, normalize_adjacency(dataset.graph, add_self_loops)


def _sample(rng, candidates, count):
    candidates = np.sort(np.asarray(candidates, dtype=np.int64))
    if count == 0:
        return candidates[:0]
    return np.sort(rng.choice(candidates, size=count, replace=False))


def make_imbalanced_split(labels,
                          majority_class,
                          n_majority=local_settings.N_MAJORITY,
                          n_minority=local_settings.N_MINORITY,
                          val_size=local_settings.VAL_SIZE,
                          test_size=local_settings.TEST_SIZE,
                          seed=0,
                          fixed_split=None):
    """ Draw a training set with ``n_majority`` nodes of ``majority_class`` and
    ``n_minority`` nodes of every other class.

    When ``fixed_split`` is given (a dataset that ships split.json), its
    validation and test sets are kept as they are and only the training set
    is resampled from the remaining labeled nodes. Otherwise validation and
    test nodes are drawn from what the training draw left over. """
    c = labels.num_classes
    if not 0 <= majority_class < c:
        raise SplitError("majority_class %d not in [0, %d)"
                         % (majority_class, c))
    if n_majority < 0 or n_minority < 0 or val_size < 0 or test_size < 0:
        raise SplitError("split sizes must be non-negative")
    rng = make_rng(seed)

    available = labels.labeled_mask.copy()
    if fixed_split is not None:
        available[fixed_split.val_idx] = False
        available[fixed_split.test_idx] = False

    train_parts = []
    for k in range(c):
        want = n_majority if k == majority_class else n_minority
        pool = np.flatnonzero(available & (labels.labels == k))
        if pool.size < want:
            raise SplitError("class %d has %d labeled nodes available, %d "
                             "requested" % (k, pool.size, want))
        train_parts.append(_sample(rng, pool, want))
    train_idx = np.sort(np.concatenate(train_parts))

    if fixed_split is not None:
        return NodeSplit(train_idx, fixed_split.val_idx,
                         fixed_split.test_idx).validate(labels)

    available[train_idx] = False
    rest = np.flatnonzero(available)
    if rest.size < val_size + test_size:
        raise SplitError("%d labeled nodes left for validation and test, "
                         "%d requested" % (rest.size, val_size + test_size))
    order = rng.permutation(rest)
    val_idx = np.sort(order[:val_size])
    test_idx = np.sort(order[val_size:val_size + test_size])
    return NodeSplit(train_idx, val_idx, test_idx).validate(labels)


def perturb_features(features, remove_fraction, seed=0):
    """ For every node, zero out ceil(remove_fraction * nnz) of its nonzero
    features, chosen uniformly at random. The input is not modified. """
    if not 0.0 <= remove_fraction <= 1.0:
        raise ValueError("remove_fraction must be in [0, 1]")
    features = np.asarray(features, dtype=np.float64)
    out = features.copy()
    if remove_fraction == 0.0:
        return out
    rng = make_rng(seed)
    for i in range(out.shape[0]):
        nonzero = np.flatnonzero(out[i])
        # round() first so that e.g. 0.3 * 10 does not ceil to 4
        k = int(math.ceil(round(remove_fraction * nonzero.size, 9)))
        if k:
            out[i, _sample(rng, nonzero, k)] = 0.0
    return out


def generate_sbm(block_sizes,
                 p_in,
                 p_out,
                 feature_dim=16,
                 seed=0,
                 signal=2.0,
                 noise=1.0):
    """ Stochastic block model with class-separable features.

    Class k owns the feature columns j with j % C == k. Node features are
    Gaussian around ``signal`` on the owning class's columns and around 0
    elsewhere, clipped at zero so that row normalization stays well defined.
    Every node is labeled with its block id; no split is attached. """
    block_sizes = [int(b) for b in block_sizes]
    if not block_sizes or min(block_sizes) < 1:
        raise DatasetError("every block needs at least one node")
    for name, p in (('p_in', p_in), ('p_out', p_out)):
        if not 0.0 <= p <= 1.0:
            raise DatasetError("%s must be in [0, 1], got %r" % (name, p))
    if feature_dim < 1:
        raise DatasetError("feature_dim must be positive")
    if p_in < p_out:
        logger.warning("p_in %g < p_out %g: disassortative fixture",
                       p_in, p_out)

    c = len(block_sizes)
    n = sum(block_sizes)
    rng = make_rng(seed)
    probs = np.full((c, c), float(p_out))
    np.fill_diagonal(probs, float(p_in))
    g = nx.stochastic_block_model(block_sizes, probs.tolist(),
                                  seed=seed_to_int(seed))
    edges = np.array(sorted(g.edges()), dtype=np.int64).reshape(-1, 2)
    graph = SparseGraph.from_edges(n, edges[:, 0], edges[:, 1])

    labels = np.repeat(np.arange(c), block_sizes)
    means = np.zeros((c, feature_dim))
    for k in range(c):
        means[k, k::c] = signal
    features = means[labels] + noise * rng.standard_normal((n, feature_dim))
    features = np.maximum(features, 0.0)
    logger.info("generated SBM fixture: %d nodes, %d edges, %d classes",
                n, graph.num_undirected_edges, c)
    return Dataset(graph, features, LabelArray(labels, c))
