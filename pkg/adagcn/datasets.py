"""
Reading and writing the dataset directory format.

    edges.tsv      one "src<TAB>dst" pair per line, 0-based ids, '#' comments
    features.csv   N lines of F comma-separated reals
      or
    features.bin   row-major little-endian float32, shape from meta.json
    meta.json      {"n": N, "f": F} (required with features.bin), optionally
                   "c": number of classes
    labels.csv     N lines, one integer label per line, -1 for unlabeled
    split.json     optional {"train": [...], "val": [...], "test": [...]}

Problems are reported as DatasetError with the offending file and line.
"""
import hashlib
import json
import logging
import os

import numpy as np

from .exceptions import DatasetError, ShapeError, SplitError
from .jsonutils import read_json
from .models import UNLABELED, Dataset, LabelArray, NodeSplit, SparseGraph


logger = logging.getLogger('adagcn.datasets')


EDGES_FILE = 'edges.tsv'
FEATURES_CSV = 'features.csv'
FEATURES_BIN = 'features.bin'
LABELS_FILE = 'labels.csv'
META_FILE = 'meta.json'
SPLIT_FILE = 'split.json'

DATASET_FILES = (EDGES_FILE, FEATURES_CSV, FEATURES_BIN, LABELS_FILE,
                 META_FILE, SPLIT_FILE)


def _content_lines(path):
    """ (line number, stripped text) for every non-blank, non-comment
    line. """
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            text = line.split('#', 1)[0].strip()
            if text:
                yield lineno, text


def _require(path):
    if not os.path.isfile(path):
        raise DatasetError("missing file", path)
    return path


def _read_json(path):
    try:
        return read_json(path)
    except ValueError as ex:
        raise DatasetError("malformed JSON: %s" % ex, path,
                           getattr(ex, 'lineno', None))


def read_edges(path):
    src, dst = [], []
    for lineno, text in _content_lines(path):
        parts = text.split()
        if len(parts) != 2:
            raise DatasetError("expected two node ids", path, lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise DatasetError("node ids must be integers", path, lineno)
        if u < 0 or v < 0:
            raise DatasetError("negative node id", path, lineno)
        src.append(u)
        dst.append(v)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


def read_features_csv(path):
    rows = []
    width = None
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(',')]
            except ValueError:
                raise DatasetError("non-numeric feature value", path, lineno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError("expected %d features, found %d"
                                   % (width, len(row)), path, lineno)
            rows.append(row)
    if not rows:
        raise DatasetError("no feature rows", path)
    return np.array(rows, dtype=np.float64)


def read_features_bin(path, n, f):
    expected = n * f * 4
    actual = os.path.getsize(path)
    if actual != expected:
        raise DatasetError("expected %d bytes for %dx%d float32, found %d"
                           % (expected, n, f, actual), path)
    data = np.fromfile(path, dtype='<f4')
    return data.reshape(n, f).astype(np.float64)


def read_labels(path):
    labels = []
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                label = int(line)
            except ValueError:
                raise DatasetError("label must be an integer", path, lineno)
            if label < UNLABELED:
                raise DatasetError("label out of range: %d" % label,
                                   path, lineno)
            labels.append(label)
    return np.array(labels, dtype=np.int64)


def load_dataset(dir_path):
    """ Load and validate a dataset directory. Edges are symmetrized and
    deduplicated, and self-loops in the input are dropped. """
    meta_path = os.path.join(dir_path, META_FILE)
    meta = _read_json(meta_path) if os.path.isfile(meta_path) else {}

    labels_path = _require(os.path.join(dir_path, LABELS_FILE))
    raw_labels = read_labels(labels_path)
    n = raw_labels.shape[0]
    if 'n' in meta and int(meta['n']) != n:
        raise DatasetError("meta.json declares %d nodes, labels.csv has %d"
                           % (int(meta['n']), n), labels_path)

    bin_path = os.path.join(dir_path, FEATURES_BIN)
    csv_path = os.path.join(dir_path, FEATURES_CSV)
    if os.path.isfile(bin_path):
        if 'n' not in meta or 'f' not in meta:
            raise DatasetError("features.bin needs meta.json with n and f",
                               meta_path)
        features = read_features_bin(bin_path, int(meta['n']), int(meta['f']))
        features_path = bin_path
    else:
        features_path = _require(csv_path)
        features = read_features_csv(features_path)
    if features.shape[0] != n:
        raise DatasetError("%d feature rows for %d labels"
                           % (features.shape[0], n), features_path)
    if 'f' in meta and int(meta['f']) != features.shape[1]:
        raise DatasetError("meta.json declares %d features, found %d"
                           % (int(meta['f']), features.shape[1]),
                           features_path)
    if not np.isfinite(features).all():
        raise DatasetError("non-finite feature value", features_path)

    if 'c' in meta:
        num_classes = int(meta['c'])
        too_big = np.flatnonzero(raw_labels >= num_classes)
        if too_big.size:
            raise DatasetError("label out of range: %d (classes: %d)"
                               % (raw_labels[too_big[0]], num_classes),
                               labels_path, int(too_big[0]) + 1)
    else:
        num_classes = int(raw_labels.max()) + 1 if n else 0
    labels = LabelArray(raw_labels, max(num_classes, 1))

    edges_path = _require(os.path.join(dir_path, EDGES_FILE))
    src, dst = read_edges(edges_path)
    if src.size and max(src.max(), dst.max()) >= n:
        raise DatasetError("edge endpoint %d out of range for %d nodes"
                           % (max(src.max(), dst.max()), n), edges_path)
    graph = SparseGraph.from_edges(n, src, dst)

    split = None
    split_path = os.path.join(dir_path, SPLIT_FILE)
    if os.path.isfile(split_path):
        try:
            split = NodeSplit.from_jsondata(_read_json(split_path))
            split.validate(labels)
        except SplitError as ex:
            raise DatasetError(str(ex), split_path)

    isolated = int(np.count_nonzero(graph.degrees() == 0))
    if isolated:
        logger.warning("%s: %d isolated nodes", dir_path, isolated)
    try:
        dataset = Dataset(graph, features, labels, split)
    except ShapeError as ex:
        raise DatasetError(str(ex), dir_path)
    logger.info("loaded %s: %d nodes, %d edges, %d classes, %d features",
                dir_path, n, graph.num_undirected_edges, num_classes,
                features.shape[1])
    return dataset


def save_dataset(dataset, dir_path, binary=False):
    """ Write ``dataset`` in the directory format. Each undirected edge is
    written once, smaller id first. """
    os.makedirs(dir_path, exist_ok=True)
    src, dst = dataset.graph.edge_pairs()
    with open(os.path.join(dir_path, EDGES_FILE), 'w', encoding='utf-8') as f:
        f.write("# src\tdst\n")
        for u, v in zip(src.tolist(), dst.tolist()):
            f.write("%d\t%d\n" % (u, v))

    meta = {'n': dataset.num_nodes, 'f': dataset.num_features,
            'c': dataset.num_classes}
    for stale in (FEATURES_BIN, FEATURES_CSV):
        stale_path = os.path.join(dir_path, stale)
        if os.path.isfile(stale_path):
            os.remove(stale_path)
    if binary:
        dataset.features.astype('<f4').tofile(
            os.path.join(dir_path, FEATURES_BIN))
    else:
        with open(os.path.join(dir_path, FEATURES_CSV), 'w',
                  encoding='utf-8') as f:
            for row in dataset.features.tolist():
                f.write(",".join(repr(v) for v in row))
                f.write("\n")
    with open(os.path.join(dir_path, META_FILE), 'w', encoding='utf-8') as f:
        json.dump(meta, f, sort_keys=True)
        f.write("\n")

    with open(os.path.join(dir_path, LABELS_FILE), 'w', encoding='utf-8') as f:
        for label in dataset.labels.labels.tolist():
            f.write("%d\n" % label)

    split_path = os.path.join(dir_path, SPLIT_FILE)
    if dataset.split is not None:
        with open(split_path, 'w', encoding='utf-8') as f:
            json.dump(dataset.split.to_jsondata(), f)
            f.write("\n")
    elif os.path.isfile(split_path):
        os.remove(split_path)


def dataset_checksum(dir_path):
    """ sha256 over the dataset files present, in a fixed order. """
    h = hashlib.sha256()
    for name in sorted(DATASET_FILES):
        path = os.path.join(dir_path, name)
        if not os.path.isfile(path):
            continue
        h.update(name.encode('utf-8'))
        with open(path, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 16), b''):
                h.update(chunk)
    return h.hexdigest()


def describe(dataset):
    """ Summary used by the convert-check command. """
    return dict(num_nodes=dataset.num_nodes,
                num_edges=dataset.graph.num_undirected_edges,
                num_classes=dataset.num_classes,
                num_features=dataset.num_features,
                class_counts=dataset.labels.class_counts().tolist(),
                unlabeled=int(np.count_nonzero(~dataset.labels.labeled_mask)),
                isolated_nodes=int(np.count_nonzero(
                    dataset.graph.degrees() == 0)),
                has_split=dataset.split is not None)
