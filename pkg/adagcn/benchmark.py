"""
Experiment harness: seeded trials on imbalanced splits, sweeps over the
minority count, the number of estimators and feature noise, and the CSV
tables they produce.

A trial seed is expanded into four independent random streams (split,
feature noise, majority class, model init), so two model configurations run
with the same seed always see the same training nodes and the same
perturbed features.
"""
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, replace
import logging
import os
from typing import Optional

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, recall_score

from .boosting import ensemble_predict, init_weights, train_adagcn
from .exceptions import ConfigError
from .gcn import predict, train_gcn
from .graph import (make_imbalanced_split, normalize_adjacency,
                    perturb_features, row_normalize_features)
from .models import (MODEL_KIND_CHOICES, MODEL_LOSS_KINDS, BoostConfig,
                     Metrics, SummaryRow, SweepSummary, TrainConfig,
                     TrialReport)
from .util import ChoiceEnum, make_rng, seed_to_int, spawn_seeds
from . import settings as local_settings


logger = logging.getLogger('adagcn.benchmark')


SWEEP_TYPE_CHOICES = ChoiceEnum((('none', 'Single setting'),
                                 ('minority', 'Minority count'),
                                 ('estimators', 'Estimator count'),
                                 ('noise', 'Feature noise')))


_BOOST_KEYS = ('num_estimators', 'shrinkage', 'transfer_learning',
               'use_alpha_in_prediction')


def evaluate(pred_class, labels, test_idx, num_classes):
    """ Accuracy, per-class recall and the confusion matrix (rows are true
    classes). Classes absent from the test set get recall 0. """
    test_idx = np.asarray(test_idx, dtype=np.int64)
    if test_idx.size == 0:
        raise ValueError("empty test set")
    truth = np.asarray(getattr(labels, 'labels', labels))[test_idx]
    pred = np.asarray(pred_class)[test_idx]
    classes = np.arange(num_classes)
    confusion = confusion_matrix(truth, pred, labels=classes)
    recall = recall_score(truth, pred, labels=classes, average=None,
                          zero_division=0)
    accuracy = float(accuracy_score(truth, pred))
    return Metrics(accuracy, np.asarray(recall, dtype=np.float64),
                   np.asarray(confusion, dtype=np.int64))


@dataclass(frozen=True)
class ModelSpec:
    """ One entry of the model axis. ``train`` holds the base GCN settings;
    ``boost`` is only used by the adagcn kind. """
    name: str
    kind: str
    train: TrainConfig
    boost: BoostConfig

    @classmethod
    def from_mapping(cls, data):
        data = dict(data)
        kind = data.pop('kind', MODEL_KIND_CHOICES.ADAGCN)
        if kind not in MODEL_KIND_CHOICES:
            raise ConfigError("unknown model kind %r; choose from %s"
                              % (kind, MODEL_KIND_CHOICES.describe()))
        name = data.pop('name', kind)
        boost_data = dict((k, data.pop(k)) for k in _BOOST_KEYS if k in data)
        if kind in MODEL_LOSS_KINDS:
            data.setdefault('loss_kind', MODEL_LOSS_KINDS[kind])
        train = TrainConfig.from_mapping(data)
        boost = BoostConfig.from_mapping(boost_data, base=train)
        return cls(name, kind, train, boost)

    @property
    def is_ensemble(self):
        return self.kind == MODEL_KIND_CHOICES.ADAGCN

    def to_jsondata(self):
        data = dict(name=self.name, kind=self.kind)
        data.update(self.train.to_jsondata())
        for key in _BOOST_KEYS:
            data[key] = getattr(self.boost, key)
        return data


@dataclass(frozen=True)
class ExperimentSpec:
    models: tuple
    seeds: tuple = local_settings.SEEDS
    dataset_dir: Optional[str] = None
    majority_class: Optional[int] = None
    n_majority: int = local_settings.N_MAJORITY
    n_minority: int = local_settings.N_MINORITY
    val_size: int = local_settings.VAL_SIZE
    test_size: int = local_settings.TEST_SIZE
    noise_fraction: float = 0.0
    add_self_loops: bool = local_settings.ADD_SELF_LOOPS
    row_normalize: bool = local_settings.ROW_NORMALIZE
    sweep_type: str = SWEEP_TYPE_CHOICES.NONE
    sweep_values: tuple = ()
    sweep_epochs: tuple = ()

    @classmethod
    def from_mapping(cls, data):
        data = dict(data)
        models = data.pop('models', None)
        if models is None:
            models = [data.pop('model', {})]
        elif 'model' in data:
            raise ConfigError("give either 'model' or 'models', not both")
        sweep = dict(data.pop('sweep', None) or {})
        kwargs = dict(models=tuple(ModelSpec.from_mapping(m) for m in models))
        kwargs['sweep_type'] = sweep.pop('type', SWEEP_TYPE_CHOICES.NONE)
        kwargs['sweep_values'] = tuple(sweep.pop('values', ()))
        kwargs['sweep_epochs'] = tuple(int(e) for e in sweep.pop('epochs', ()))
        if sweep:
            raise ConfigError("unknown sweep keys: %s"
                              % ", ".join(sorted(sweep)))
        if 'seeds' in data:
            data['seeds'] = tuple(int(s) for s in data['seeds'])
        known = set(cls.__dataclass_fields__) - set(kwargs)
        unknown = set(data) - known
        if unknown:
            raise ConfigError("unknown experiment keys: %s"
                              % ", ".join(sorted(unknown)))
        kwargs.update(data)
        return cls(**kwargs).validate()

    def validate(self):
        if not self.models:
            raise ConfigError("no models given")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigError("model names must be unique")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.sweep_type not in SWEEP_TYPE_CHOICES:
            raise ConfigError("unknown sweep type %r; choose from %s"
                              % (self.sweep_type,
                                 SWEEP_TYPE_CHOICES.describe()))
        if self.sweep_type != SWEEP_TYPE_CHOICES.NONE and \
                not self.sweep_values:
            raise ConfigError("sweep %r needs values" % self.sweep_type)
        if self.sweep_type == SWEEP_TYPE_CHOICES.NOISE:
            if any(not 0.0 <= float(v) <= 1.0 for v in self.sweep_values):
                raise ConfigError("noise fractions must be in [0, 1]")
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ConfigError("noise_fraction must be in [0, 1]")
        return self

    def to_jsondata(self):
        return dict(models=[m.to_jsondata() for m in self.models],
                    seeds=list(self.seeds),
                    dataset_dir=self.dataset_dir,
                    majority_class=self.majority_class,
                    n_majority=self.n_majority,
                    n_minority=self.n_minority,
                    val_size=self.val_size,
                    test_size=self.test_size,
                    noise_fraction=self.noise_fraction,
                    add_self_loops=self.add_self_loops,
                    row_normalize=self.row_normalize,
                    sweep=dict(type=self.sweep_type,
                               values=list(self.sweep_values),
                               epochs=list(self.sweep_epochs)))


@dataclass(frozen=True)
class TrialSetting:
    """ One cell of a sweep grid for one model. """
    model: ModelSpec
    n_minority: int
    num_estimators: int
    epochs: int
    noise_fraction: float

    def key(self):
        return (self.model.name, self.n_minority, self.num_estimators,
                self.epochs, self.noise_fraction)


def _setting(spec, model, n_minority=None, num_estimators=None, epochs=None,
             noise_fraction=None):
    if not model.is_ensemble:
        num_estimators = 1
    elif num_estimators is None:
        num_estimators = int(model.boost.num_estimators)
    return TrialSetting(
        model,
        int(spec.n_minority if n_minority is None else n_minority),
        int(num_estimators),
        int(model.train.epochs if epochs is None else epochs),
        float(spec.noise_fraction if noise_fraction is None
              else noise_fraction))


def _unique(settings):
    seen, out = set(), []
    for s in settings:
        if s.key() not in seen:
            seen.add(s.key())
            out.append(s)
    return out


def expand_settings(spec):
    """ Every (model, sweep value) cell the spec asks for. Single GCNs do not
    vary with the estimator count, so they get one cell per epoch value. """
    t = spec.sweep_type
    values = spec.sweep_values
    out = []
    for model in spec.models:
        if t == SWEEP_TYPE_CHOICES.NONE:
            out.append(_setting(spec, model))
        elif t == SWEEP_TYPE_CHOICES.MINORITY:
            out.extend(_setting(spec, model, n_minority=v) for v in values)
        elif t == SWEEP_TYPE_CHOICES.NOISE:
            out.extend(_setting(spec, model, noise_fraction=v)
                       for v in values)
        elif t == SWEEP_TYPE_CHOICES.ESTIMATORS:
            epochs = spec.sweep_epochs or (int(model.train.epochs),)
            out.extend(_setting(spec, model, num_estimators=m, epochs=e)
                       for m in values for e in epochs)
    return _unique(out)


@dataclass
class TrialInputs:
    """ What a trial seed fixes, independent of the model. """
    majority_class: int
    split: object
    features: np.ndarray


def trial_inputs(dataset, spec, seed, n_minority, noise_fraction):
    split_seed, noise_seed, majority_seed, _ = spawn_seeds(seed, 4)
    if spec.majority_class is None:
        majority = int(make_rng(majority_seed).integers(dataset.num_classes))
    else:
        majority = int(spec.majority_class)
    split = make_imbalanced_split(dataset.labels, majority,
                                  n_majority=spec.n_majority,
                                  n_minority=n_minority,
                                  val_size=spec.val_size,
                                  test_size=spec.test_size,
                                  seed=split_seed,
                                  fixed_split=dataset.split)
    features = dataset.features
    if noise_fraction > 0:
        features = perturb_features(features, noise_fraction, seed=noise_seed)
    if spec.row_normalize:
        features = row_normalize_features(features)
    return TrialInputs(majority, split, features)


def model_seed(seed):
    return seed_to_int(spawn_seeds(seed, 4)[3])


def run_trial(dataset, a_hat, spec, setting, seed):
    """ Train and evaluate one model on one seed. Failures are caught and
    recorded on the report. """
    report = TrialReport(seed=int(seed),
                         model=setting.model.name,
                         majority_class=-1,
                         n_majority=int(spec.n_majority),
                         n_minority=setting.n_minority,
                         num_estimators=setting.num_estimators,
                         epochs=setting.epochs,
                         noise_fraction=setting.noise_fraction)
    try:
        inputs = trial_inputs(dataset, spec, seed, setting.n_minority,
                              setting.noise_fraction)
        report.majority_class = inputs.majority_class
        report.train_idx = inputs.split.train_idx
        data = dataset.with_features(inputs.features)
        split = inputs.split
        base = replace(setting.model.train, seed=model_seed(seed),
                       epochs=setting.epochs)
        if setting.model.is_ensemble:
            boost = replace(setting.model.boost, base=base,
                            num_estimators=setting.num_estimators)
            ensemble, diagnostics = train_adagcn(data, split, a_hat, boost)
            pred, _ = ensemble_predict(ensemble, a_hat, data.features)
            report.diagnostics = diagnostics
        else:
            params, history = train_gcn(data, split, a_hat,
                                        init_weights(len(split.train_idx)),
                                        base)
            pred = predict(a_hat, data.features, params).argmax(axis=1)
            final = predict(a_hat, data.features,
                            history.final_params).argmax(axis=1)
            report.final_epoch_accuracy = evaluate(
                final, data.labels, split.test_idx,
                data.num_classes).accuracy
        report.metrics = evaluate(pred, data.labels, split.test_idx,
                                  data.num_classes)
        logger.info("seed %d %s: accuracy %.4f", seed, setting.model.name,
                    report.accuracy)
    except Exception as ex:
        logger.exception("trial failed (seed %d, model %s)", seed,
                         setting.model.name)
        report.error = "%s: %s" % (type(ex).__name__, ex)
    return report


_WORKER_STATE = {}


def _init_worker(dataset, a_hat, spec):
    _WORKER_STATE['args'] = (dataset, a_hat, spec)


def _run_in_worker(task):
    setting, seed = task
    return run_trial(*(_WORKER_STATE['args'] + (setting, seed)))


def summarize(reports):
    """ Mean and sample standard deviation (n - 1) per setting, over
    successful trials. """
    groups = {}
    for r in reports:
        if r.ok:
            key = (r.model, r.n_minority, r.num_estimators, r.epochs,
                   r.noise_fraction)
            groups.setdefault(key, []).append(r.accuracy)
    summary = SweepSummary()
    for key, accs in groups.items():
        accs = np.array(accs, dtype=np.float64)
        single = accs.size < 2
        std = 0.0 if single else float(np.std(accs, ddof=1))
        summary[key] = SummaryRow(float(np.mean(accs)), std, int(accs.size),
                                  single)
    return summary


def run_trials(dataset, spec, seeds=None, settings=None, jobs=1):
    """ Run every setting on every seed. Returns (reports, summary) with the
    reports sorted by (seed, model, sweep values). """
    seeds = tuple(spec.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("at least one seed is required")
    settings = expand_settings(spec) if settings is None else settings
    a_hat = normalize_adjacency(dataset.graph, spec.add_self_loops)
    tasks = [(s, seed) for seed in seeds for s in settings]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs,
                                 initializer=_init_worker,
                                 initargs=(dataset, a_hat, spec)) as pool:
            reports = list(pool.map(_run_in_worker, tasks))
    else:
        reports = [run_trial(dataset, a_hat, spec, s, seed)
                   for s, seed in tasks]
    reports.sort(key=TrialReport.sort_key)
    return reports, summarize(reports)


def sweep_minority_count(dataset, spec, counts, seeds=None, jobs=1):
    if not counts:
        raise ConfigError("counts must not be empty")
    spec = replace(spec, sweep_type=SWEEP_TYPE_CHOICES.MINORITY,
                   sweep_values=tuple(int(c) for c in counts))
    return run_trials(dataset, spec, seeds, jobs=jobs)


def sweep_estimators(dataset, spec, m_values, epoch_values=(), seeds=None,
                     jobs=1):
    if not m_values:
        raise ConfigError("m_values must not be empty")
    spec = replace(spec, sweep_type=SWEEP_TYPE_CHOICES.ESTIMATORS,
                   sweep_values=tuple(int(m) for m in m_values),
                   sweep_epochs=tuple(int(e) for e in epoch_values))
    return run_trials(dataset, spec, seeds, jobs=jobs)


def sweep_feature_noise(dataset, spec, fractions, seeds=None, jobs=1):
    if not fractions:
        raise ConfigError("fractions must not be empty")
    spec = replace(spec, sweep_type=SWEEP_TYPE_CHOICES.NOISE,
                   sweep_values=tuple(float(f) for f in fractions))
    spec.validate()
    return run_trials(dataset, spec, seeds, jobs=jobs)


def run_sweep(dataset, spec, jobs=1):
    """ Dispatch on the spec's sweep type. """
    t = spec.sweep_type
    if t == SWEEP_TYPE_CHOICES.MINORITY:
        return sweep_minority_count(dataset, spec, spec.sweep_values,
                                    jobs=jobs)
    if t == SWEEP_TYPE_CHOICES.ESTIMATORS:
        return sweep_estimators(dataset, spec, spec.sweep_values,
                                spec.sweep_epochs, jobs=jobs)
    if t == SWEEP_TYPE_CHOICES.NOISE:
        return sweep_feature_noise(dataset, spec, spec.sweep_values,
                                   jobs=jobs)
    if t == SWEEP_TYPE_CHOICES.NONE:
        return run_trials(dataset, spec, jobs=jobs)
    raise ConfigError("unknown sweep type %r" % t)


def export_weight_traces(diagnostics, sample_indices=None):
    """ (round, node, weight) rows. Round r is the distribution round r
    trained on; the extra last round is the distribution after the final
    update. ``sample_indices`` are node ids from the training set; all
    training nodes by default. """
    train_idx = np.asarray(diagnostics.train_idx)
    position = dict((int(n), i) for i, n in enumerate(train_idx.tolist()))
    if sample_indices is None:
        sample_indices = train_idx.tolist()
    picked = []
    for node in sample_indices:
        if int(node) not in position:
            raise ValueError("node %d is not a training sample" % node)
        picked.append((int(node), position[int(node)]))
    rows = []
    for r, weights in enumerate(diagnostics.weights, 1):
        for node, i in picked:
            rows.append((r, node, float(weights[i])))
    return rows


# CSV output


TRIAL_COLUMNS = ('seed', 'model', 'majority_class', 'n_majority',
                 'n_minority', 'num_estimators', 'epochs', 'noise_fraction',
                 'accuracy', 'final_epoch_accuracy', 'error')

SUMMARY_COLUMNS = SweepSummary.KEY_FIELDS + ('mean', 'std', 'count',
                                             'single_trial')

SWEEP_AXES = {
    SWEEP_TYPE_CHOICES.NONE: 'n_minority',
    SWEEP_TYPE_CHOICES.MINORITY: 'n_minority',
    SWEEP_TYPE_CHOICES.ESTIMATORS: 'num_estimators',
    SWEEP_TYPE_CHOICES.NOISE: 'noise_fraction',
}


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def _write_rows(path, header, rows):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def write_trials_csv(path, reports):
    rows = []
    for r in reports:
        rows.append((r.seed, r.model, r.majority_class, r.n_majority,
                     r.n_minority, r.num_estimators, r.epochs,
                     float(r.noise_fraction),
                     r.accuracy if r.ok else None,
                     r.final_epoch_accuracy, r.error))
    return _write_rows(path, TRIAL_COLUMNS, rows)


def write_summary_csv(path, summary):
    rows = [key + (row.mean, row.std, row.count, row.single_trial)
            for key, row in summary.rows()]
    return _write_rows(path, SUMMARY_COLUMNS, rows)


def plot_table(summary, axis):
    """ (x, model, mean, std) rows along one sweep axis. """
    i = SweepSummary.KEY_FIELDS.index(axis)
    rows = [(key[i], key[0], row.mean, row.std)
            for key, row in summary.rows()]
    return sorted(rows, key=lambda r: (r[1], r[0]))


def write_plot_csv(path, summary, axis):
    return _write_rows(path, (axis, 'model', 'mean', 'std'),
                       plot_table(summary, axis))


def estimator_grid(summary, model):
    """ Rows of (num_estimators, {epochs: SummaryRow}) for one model, the
    layout of an estimators-by-epochs results table. """
    grid = {}
    for key, row in summary.rows():
        if key[0] == model:
            grid.setdefault(key[2], {})[key[3]] = row
    return sorted(grid.items())


def write_grid_csv(path, summary, model):
    grid = estimator_grid(summary, model)
    epochs = sorted(set(e for _, cells in grid for e in cells))
    header = ['num_estimators']
    for e in epochs:
        header.extend(['mean_epochs_%d' % e, 'std_epochs_%d' % e])
    rows = []
    for m, cells in grid:
        row = [m]
        for e in epochs:
            cell = cells.get(e)
            row.extend([cell.mean, cell.std] if cell else [None, None])
        rows.append(row)
    return _write_rows(path, header, rows)


def write_confusion_csv(path, reports):
    """ Long format: one row per (trial, true class) with predicted-class
    counts. """
    reports = [r for r in reports if r.ok]
    c = reports[0].metrics.num_classes if reports else 0
    header = ['model', 'n_minority', 'num_estimators', 'epochs',
              'noise_fraction', 'true_class'] + \
        ['pred_%d' % k for k in range(c)]
    rows = []
    for r in reports:
        for k, counts in enumerate(r.metrics.confusion.tolist()):
            rows.append([r.model, r.n_minority, r.num_estimators, r.epochs,
                         float(r.noise_fraction), k] + counts)
    return _write_rows(path, header, rows)


def write_weight_trace_csv(path, reports):
    rows = []
    for r in reports:
        if r.ok and r.diagnostics is not None:
            for rnd, node, weight in export_weight_traces(r.diagnostics):
                rows.append((r.seed, r.model, rnd, node, weight))
    return _write_rows(path, ('seed', 'model', 'round', 'sample', 'weight'),
                       rows)


def write_rounds_csv(path, diagnostics):
    return _write_rows(path, ('round', 'epsilon', 'alpha'),
                       diagnostics.round_rows())


def write_history_csv(path, history):
    return _write_rows(path, ('epoch', 'train_loss', 'val_acc'),
                       history.rows())


def write_sweep_outputs(out_dir, spec, reports, summary):
    """ Every table a sweep produces. Returns the paths written. """
    os.makedirs(out_dir, exist_ok=True)
    written = [
        write_trials_csv(os.path.join(out_dir, 'trials.csv'), reports),
        write_summary_csv(os.path.join(out_dir, 'summary.csv'), summary),
    ]
    axis = SWEEP_AXES[spec.sweep_type]
    written.append(write_plot_csv(
        os.path.join(out_dir, 'plot_%s.csv' % axis), summary, axis))
    if spec.sweep_type == SWEEP_TYPE_CHOICES.ESTIMATORS:
        for model in spec.models:
            if model.is_ensemble:
                written.append(write_grid_csv(
                    os.path.join(out_dir, 'grid_%s.csv' % model.name),
                    summary, model.name))
    for seed in sorted(set(r.seed for r in reports)):
        written.append(write_confusion_csv(
            os.path.join(out_dir, 'confusion_%d.csv' % seed),
            [r for r in reports if r.seed == seed]))
    if any(r.diagnostics is not None for r in reports):
        written.append(write_weight_trace_csv(
            os.path.join(out_dir, 'weight_trace.csv'), reports))
    return written
