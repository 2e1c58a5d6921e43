"""
Small datasets shared by the test modules.
"""
import json
import os

import numpy as np

from adagcn.graph import generate_sbm
from adagcn.models import Dataset, LabelArray, SparseGraph


def path_graph_dataset(num_nodes=6, num_features=4, num_classes=2, seed=0):
    """ A path 0-1-2-...; node i is labeled i % num_classes. """
    rng = np.random.default_rng(seed)
    src = np.arange(num_nodes - 1)
    graph = SparseGraph.from_edges(num_nodes, src, src + 1)
    features = rng.random((num_nodes, num_features)) + 0.1
    labels = LabelArray(np.arange(num_nodes) % num_classes, num_classes)
    return Dataset(graph, features, labels)


def sbm_dataset(seed=7):
    """ Three 50-node blocks, p_in 0.3, p_out 0.02. """
    return generate_sbm([50, 50, 50], 0.3, 0.02, feature_dim=16, seed=seed)


def write_dataset_files(dir_path, edges, features, labels, meta=None,
                        split=None):
    with open(os.path.join(dir_path, 'edges.tsv'), 'w') as f:
        f.write(edges)
    with open(os.path.join(dir_path, 'features.csv'), 'w') as f:
        f.write(features)
    with open(os.path.join(dir_path, 'labels.csv'), 'w') as f:
        f.write(labels)
    if meta is not None:
        with open(os.path.join(dir_path, 'meta.json'), 'w') as f:
            json.dump(meta, f)
    if split is not None:
        with open(os.path.join(dir_path, 'split.json'), 'w') as f:
            json.dump(split, f)
