"""
Command-line entry point.

    adagcn train --dataset ./cora --model adagcn --estimators 5 --seed 1
    adagcn evaluate --checkpoint runs/train/model.ckpt --split test
    adagcn sweep --spec minority.json --jobs 4
    adagcn gen-fixture --blocks 50,50,50 --p-in 0.3 --p-out 0.02 --seed 7
    adagcn convert-check --dataset ./cora

Settings resolve as flags > spec or manifest JSON > --preset > defaults in
adagcn.settings, and the resolved values are written to manifest.json next to
the outputs. ``--manifest`` replays a previous run. Only the output directory
may come from the environment (ADAGCN_OUTPUT_DIR).
"""
import argparse
import csv
from dataclasses import replace
import logging
import os
import sys

import numpy as np

from . import __version__
from . import checkpoints
from .benchmark import (ExperimentSpec, evaluate, model_seed, run_sweep,
                        trial_inputs, write_history_csv, write_rounds_csv,
                        write_sweep_outputs, write_weight_trace_csv)
from .boosting import ensemble_predict, init_weights, train_adagcn
from .datasets import dataset_checksum, describe, load_dataset, save_dataset
from .exceptions import AdagcnError, ConfigError
from .gcn import predict, train_gcn
from .graph import generate_sbm, normalize_adjacency, prepare_inputs
from .jsonutils import dumps, read_json, utc_now, write_json
from .models import (MODEL_KIND_CHOICES, EnsembleModel, NodeSplit,
                     RunManifest, TrialReport)
from . import settings as local_settings


logger = logging.getLogger('adagcn.cli')


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# flag attribute -> model mapping key
MODEL_FLAGS = (('epochs', 'epochs'),
               ('lr', 'learning_rate'),
               ('l2', 'l2_lambda'),
               ('hidden', 'hidden_dim'),
               ('dropout', 'dropout_rate'),
               ('gamma', 'focal_gamma'),
               ('beta', 'cb_beta'),
               ('estimators', 'num_estimators'),
               ('shrinkage', 'shrinkage'),
               ('transfer', 'transfer_learning'),
               ('use_alpha', 'use_alpha_in_prediction'),
               ('best_epoch', 'best_epoch_selection'))

# flag attribute -> experiment mapping key
EXPERIMENT_FLAGS = (('dataset', 'dataset_dir'),
                    ('majority_class', 'majority_class'),
                    ('n_majority', 'n_majority'),
                    ('n_minority', 'n_minority'),
                    ('val_size', 'val_size'),
                    ('test_size', 'test_size'),
                    ('noise', 'noise_fraction'),
                    ('self_loops', 'add_self_loops'),
                    ('row_normalize', 'row_normalize'))


def _read_json(path, what):
    try:
        return read_json(path)
    except (OSError, ValueError) as ex:
        raise ConfigError("cannot read %s %s: %s" % (what, path, ex))


def _base_mapping(args):
    """ The spec mapping before flags: a manifest's resolved config, a spec
    file, or nothing. """
    if getattr(args, 'manifest', None):
        manifest = _read_json(args.manifest, 'manifest')
        return dict(manifest.get('config') or {})
    if getattr(args, 'spec', None):
        return _read_json(args.spec, 'spec')
    return {}


def resolve_spec(args, single_model=False):
    mapping = _base_mapping(args)
    models = mapping.pop('models', None)
    if models is None:
        models = [mapping.pop('model', {})]
    preset = local_settings.PRESETS.get(getattr(args, 'preset', None) or '',
                                        {})
    resolved = []
    for model in models:
        m = dict(preset)
        m.update(model)
        resolved.append(m)
    if single_model:
        if len(resolved) != 1:
            raise ConfigError("train takes exactly one model, spec has %d"
                              % len(resolved))
        m = resolved[0]
        kind = getattr(args, 'model', None)
        if kind is None and getattr(args, 'estimators', None) is not None \
                and 'kind' not in m:
            kind = MODEL_KIND_CHOICES.ADAGCN
        if kind is not None:
            if kind != m.get('kind'):
                # the kind picks its own loss unless --spec names one
                m.pop('loss_kind', None)
            m['kind'] = kind
            m['name'] = kind
        for attr, key in MODEL_FLAGS:
            value = getattr(args, attr, None)
            if value is not None:
                m[key] = value
        if m.get('kind', MODEL_KIND_CHOICES.ADAGCN) != \
                MODEL_KIND_CHOICES.ADAGCN:
            # single GCNs have no estimator axis
            m.pop('num_estimators', None)
    mapping['models'] = resolved
    for attr, key in EXPERIMENT_FLAGS:
        value = getattr(args, attr, None)
        if value is not None:
            mapping[key] = value
    if getattr(args, 'seed', None) is not None:
        mapping['seeds'] = [args.seed]
    return ExperimentSpec.from_mapping(mapping)


def _out_dir(args, command):
    out = args.out or os.path.join(local_settings.OUTPUT_DIR, command)
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(out_dir, manifest):
    manifest.finished_at = utc_now()
    return write_json(os.path.join(out_dir, 'manifest.json'), manifest)


def _load_spec_dataset(spec):
    if not spec.dataset_dir:
        raise ConfigError("no dataset given (--dataset or dataset_dir)")
    return load_dataset(spec.dataset_dir)


def cmd_train(args):
    spec = resolve_spec(args, single_model=True)
    model_spec = spec.models[0]
    seed = spec.seeds[0]
    started = utc_now()
    dataset = _load_spec_dataset(spec)
    out = _out_dir(args, 'train')

    inputs = trial_inputs(dataset, spec, seed, spec.n_minority,
                          spec.noise_fraction)
    data = dataset.with_features(inputs.features)
    split = inputs.split
    a_hat = normalize_adjacency(dataset.graph, spec.add_self_loops)
    base = replace(model_spec.train, seed=model_seed(seed))

    written = []
    ckpt_path = os.path.join(out, 'model.ckpt')
    if model_spec.is_ensemble:
        boost = replace(model_spec.boost, base=base)
        ensemble, diagnostics = train_adagcn(data, split, a_hat, boost)
        pred, _ = ensemble_predict(ensemble, a_hat, data.features)
        checkpoints.save(ensemble, ckpt_path)
        written.append(write_rounds_csv(os.path.join(out, 'rounds.csv'),
                                        diagnostics))
        for m, history in enumerate(diagnostics.histories, 1):
            written.append(write_history_csv(
                os.path.join(out, 'history_round_%d.csv' % m), history))
        report = TrialReport(seed, model_spec.name, inputs.majority_class,
                             spec.n_majority, spec.n_minority,
                             boost.num_estimators, base.epochs,
                             spec.noise_fraction, diagnostics=diagnostics)
        written.append(write_weight_trace_csv(
            os.path.join(out, 'weight_trace.csv'), [report]))
    else:
        params, history = train_gcn(data, split, a_hat,
                                    init_weights(len(split.train_idx)), base)
        pred = predict(a_hat, data.features, params).argmax(axis=1)
        checkpoints.save(params, ckpt_path)
        written.append(write_history_csv(os.path.join(out, 'history.csv'),
                                         history))
    written.append(ckpt_path)

    metrics = evaluate(pred, data.labels, split.test_idx, data.num_classes)
    written.append(write_json(os.path.join(out, 'split.json'), split))
    written.append(write_json(os.path.join(out, 'metrics.json'),
                               dict(split='test', seed=seed,
                                    majority_class=inputs.majority_class,
                                    metrics=metrics)))
    written.append(_write_confusion(os.path.join(out, 'confusion.csv'),
                                    metrics))
    logger.info("test accuracy %.4f", metrics.accuracy)
    print("test accuracy: %r" % metrics.accuracy)

    manifest = RunManifest('train', spec.to_jsondata(),
                           dataset_checksum(spec.dataset_dir), __version__,
                           tuple(spec.seeds), started, outputs=written)
    _write_manifest(out, manifest)
    return EXIT_OK


def _write_confusion(path, metrics):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['true_class'] + ['pred_%d' % k
                                          for k in range(metrics.num_classes)])
        for k, row in enumerate(metrics.confusion.tolist()):
            writer.writerow([k] + row)
    return path


def cmd_evaluate(args):
    """ Re-evaluate a checkpoint. With a manifest (by default the one next to
    the checkpoint) the run's split and features are rebuilt exactly;
    otherwise the dataset's own split.json (or --split-file) is used. """
    ckpt_dir = os.path.dirname(os.path.abspath(args.checkpoint))
    manifest_path = args.manifest or os.path.join(ckpt_dir, 'manifest.json')
    if not os.path.isfile(manifest_path):
        manifest_path = None
    model = checkpoints.load(args.checkpoint)

    if manifest_path:
        args.manifest = manifest_path
        spec = resolve_spec(args)
        dataset = _load_spec_dataset(spec)
        seed = spec.seeds[0]
        inputs = trial_inputs(dataset, spec, seed, spec.n_minority,
                              spec.noise_fraction)
        features, split = inputs.features, inputs.split
        a_hat = normalize_adjacency(dataset.graph, spec.add_self_loops)
    else:
        if not args.dataset:
            raise ConfigError("--dataset is required without a manifest")
        dataset = load_dataset(args.dataset)
        features, a_hat = prepare_inputs(
            dataset, add_self_loops=args.self_loops is not False,
            row_normalize=args.row_normalize is not False)
        if args.split_file:
            split = NodeSplit.from_jsondata(_read_json(args.split_file,
                                                       'split'))
        elif dataset.split is not None:
            split = dataset.split
        else:
            raise ConfigError("no split: give --split-file or a manifest")
        split.validate(dataset.labels)

    if isinstance(model, EnsembleModel):
        for member in model.members:
            member.params.check_compatible(features.shape[1],
                                           dataset.num_classes)
        pred, _ = ensemble_predict(model, a_hat, features)
    else:
        model.check_compatible(features.shape[1], dataset.num_classes)
        pred = predict(a_hat, features, model).argmax(axis=1)

    idx = split.val_idx if args.split == 'val' else split.test_idx
    metrics = evaluate(pred, dataset.labels, idx, dataset.num_classes)
    out = _out_dir(args, 'evaluate')
    write_json(os.path.join(out, 'metrics_%s.json' % args.split),
                dict(split=args.split, checkpoint=args.checkpoint,
                     metrics=metrics))
    _write_confusion(os.path.join(out, 'confusion_%s.csv' % args.split),
                     metrics)
    print("%s accuracy: %r" % (args.split, metrics.accuracy))
    return EXIT_OK


def cmd_sweep(args):
    spec = resolve_spec(args)
    started = utc_now()
    dataset = _load_spec_dataset(spec)
    out = _out_dir(args, 'sweep')
    reports, summary = run_sweep(dataset, spec, jobs=args.jobs)
    written = write_sweep_outputs(out, spec, reports, summary)
    manifest = RunManifest('sweep', spec.to_jsondata(),
                           dataset_checksum(spec.dataset_dir), __version__,
                           tuple(spec.seeds), started, outputs=written)
    _write_manifest(out, manifest)
    failed = [r for r in reports if not r.ok]
    for r in failed:
        logger.error("seed %d, model %s failed: %s", r.seed, r.model, r.error)
    print("%d trials, %d failed" % (len(reports), len(failed)))
    return EXIT_FAILURE if failed else EXIT_OK


def _parse_blocks(text):
    try:
        blocks = [int(b) for b in text.split(',') if b.strip()]
    except ValueError:
        raise ConfigError("--blocks must be comma-separated integers")
    if not blocks:
        raise ConfigError("--blocks must not be empty")
    return blocks


def cmd_gen_fixture(args):
    blocks = _parse_blocks(args.blocks)
    for name, p in (('--p-in', args.p_in), ('--p-out', args.p_out)):
        if not 0.0 <= p <= 1.0:
            raise ConfigError("%s must be in [0, 1], got %r" % (name, p))
    dataset = generate_sbm(blocks, args.p_in, args.p_out,
                           feature_dim=args.features, seed=args.seed,
                           signal=args.signal, noise=args.feature_noise)
    out = args.out or os.path.join(local_settings.OUTPUT_DIR, 'fixture')
    save_dataset(dataset, out, binary=args.binary)
    print("wrote %s: %d nodes, %d classes" % (out, dataset.num_nodes,
                                              dataset.num_classes))
    return EXIT_OK


def cmd_convert_check(args):
    dataset = load_dataset(args.dataset)
    info = describe(dataset)
    info['checksum'] = dataset_checksum(args.dataset)
    print(dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def _add_model_flags(p):
    p.add_argument('--model', choices=MODEL_KIND_CHOICES.values(),
                   help=MODEL_KIND_CHOICES.describe())
    p.add_argument('--preset', choices=sorted(local_settings.PRESETS))
    p.add_argument('--estimators', type=int)
    p.add_argument('--epochs', type=int)
    p.add_argument('--lr', type=float)
    p.add_argument('--l2', type=float)
    p.add_argument('--hidden', type=int)
    p.add_argument('--dropout', type=float)
    p.add_argument('--gamma', type=float, help="focal loss gamma")
    p.add_argument('--beta', type=float, help="class-balanced loss beta")
    p.add_argument('--shrinkage', type=float)
    p.add_argument('--no-transfer', dest='transfer', action='store_const',
                   const=False)
    p.add_argument('--use-alpha', dest='use_alpha', action='store_const',
                   const=True)
    p.add_argument('--final-epoch', dest='best_epoch', action='store_const',
                   const=False,
                   help="keep the last epoch's params instead of the best "
                        "validation snapshot")


def _add_experiment_flags(p):
    p.add_argument('--dataset')
    p.add_argument('--seed', type=int)
    p.add_argument('--majority-class', type=int)
    p.add_argument('--n-majority', type=int)
    p.add_argument('--n-minority', type=int)
    p.add_argument('--val-size', type=int)
    p.add_argument('--test-size', type=int)
    p.add_argument('--noise', type=float,
                   help="fraction of each node's features to remove")
    _add_preprocessing_flags(p)


def _add_preprocessing_flags(p):
    p.add_argument('--no-self-loops', dest='self_loops',
                   action='store_const', const=False)
    p.add_argument('--no-row-normalize', dest='row_normalize',
                   action='store_const', const=False)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='adagcn',
        description="Boosted GCNs for imbalanced node classification.")
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('-v', '--verbose', action='store_true')
    parser.add_argument('-q', '--quiet', action='store_true')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    p = sub.add_parser('train', help="train a GCN or an AdaGCN ensemble")
    p.add_argument('--spec')
    p.add_argument('--manifest')
    p.add_argument('--out')
    _add_experiment_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('evaluate', help="score a checkpoint")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--dataset')
    p.add_argument('--manifest')
    p.add_argument('--split', choices=('val', 'test'), default='test')
    p.add_argument('--split-file')
    p.add_argument('--out')
    _add_preprocessing_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('sweep', help="run an experiment spec")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument('--spec')
    group.add_argument('--manifest')
    p.add_argument('--dataset')
    p.add_argument('--jobs', type=int, default=1)
    p.add_argument('--out')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('gen-fixture', help="write an SBM dataset")
    p.add_argument('--blocks', required=True)
    p.add_argument('--p-in', type=float, required=True)
    p.add_argument('--p-out', type=float, required=True)
    p.add_argument('--features', type=int, default=16)
    p.add_argument('--signal', type=float, default=2.0)
    p.add_argument('--feature-noise', type=float, default=1.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--binary', action='store_true')
    p.add_argument('--out')
    p.set_defaults(func=cmd_gen_fixture)

    p = sub.add_parser('convert-check', help="validate a dataset directory")
    p.add_argument('--dataset', required=True)
    p.set_defaults(func=cmd_convert_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format='%(asctime)s %(name)s %(levelname)s '
                               '%(message)s')
    np.seterr(over='ignore', under='ignore')
    try:
        return args.func(args)
    except ConfigError as ex:
        logger.error("%s", ex)
        sys.stderr.write("adagcn: %s\n" % ex)
        return EXIT_USAGE
    except AdagcnError as ex:
        logger.error("%s", ex)
        sys.stderr.write("adagcn: %s\n" % ex)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
