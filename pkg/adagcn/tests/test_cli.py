"""
run these tests with python -m unittest discover adagcn
"""
from contextlib import redirect_stderr, redirect_stdout
import io
import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from adagcn import checkpoints
from adagcn.cli import main
from adagcn.datasets import load_dataset, save_dataset
from adagcn.models import GcnParams, NodeSplit

from adagcn.tests.fixtures import sbm_dataset


SPLIT_FLAGS = ['--n-majority', '20', '--n-minority', '5', '--val-size', '30',
               '--test-size', '60', '--majority-class', '0']


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        self.data = os.path.join(self.dir, 'data')
        self.invoke(['gen-fixture', '--blocks', '50,50,50', '--p-in', '0.3',
                     '--p-out', '0.02', '--seed', '7', '--out', self.data])

    def tearDown(self):
        shutil.rmtree(self.dir)

    def path(self, *parts):
        return os.path.join(self.dir, *parts)

    def invoke(self, argv, expect=0):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(['--quiet'] + argv)
        self.assertEqual(code, expect, err.getvalue())
        return out.getvalue(), err.getvalue()

    def read_json(self, *parts):
        with open(self.path(*parts)) as f:
            return json.load(f)

    def read_bytes(self, *parts):
        with open(self.path(*parts), 'rb') as f:
            return f.read()

    def train(self, out, *extra):
        self.invoke(['train', '--dataset', self.data, '--epochs', '10',
                     '--seed', '1', '--out', self.path(out)] + SPLIT_FLAGS +
                    list(extra))
        return self.read_json(out, 'metrics.json')


class FixtureCommandTestCase(CliTestCase):

    def testLoadableAndRepeatable(self):
        ds = load_dataset(self.data)
        self.assertEqual(ds.num_nodes, 150)
        self.assertEqual(ds.num_classes, 3)
        again = self.path('again')
        self.invoke(['gen-fixture', '--blocks', '50,50,50', '--p-in', '0.3',
                     '--p-out', '0.02', '--seed', '7', '--out', again])
        for name in ('edges.tsv', 'features.csv', 'labels.csv', 'meta.json'):
            self.assertEqual(self.read_bytes('data', name),
                             self.read_bytes('again', name))

    def testInvalidFlags(self):
        self.invoke(['gen-fixture', '--blocks', '50,x', '--p-in', '0.3',
                     '--p-out', '0.02', '--out', self.path('bad')], expect=2)
        self.invoke(['gen-fixture', '--blocks', '50,50', '--p-in', '1.3',
                     '--p-out', '0.02', '--out', self.path('bad')], expect=2)

    def testConvertCheck(self):
        out, _ = self.invoke(['convert-check', '--dataset', self.data])
        info = json.loads(out)
        self.assertEqual(info['num_nodes'], 150)
        self.assertEqual(info['class_counts'], [50, 50, 50])
        self.assertEqual(len(info['checksum']), 64)

    def testMissingLabels(self):
        os.remove(os.path.join(self.data, 'labels.csv'))
        _, err = self.invoke(['convert-check', '--dataset', self.data],
                             expect=1)
        self.assertIn('labels.csv', err)


class TrainCommandTestCase(CliTestCase):

    def testOutputs(self):
        self.train('ada', '--model', 'adagcn', '--estimators', '2')
        for name in ('model.ckpt', 'rounds.csv', 'history_round_1.csv',
                     'history_round_2.csv', 'weight_trace.csv', 'split.json',
                     'metrics.json', 'confusion.csv', 'manifest.json'):
            self.assertTrue(os.path.isfile(self.path('ada', name)), name)
        manifest = self.read_json('ada', 'manifest.json')
        self.assertEqual(manifest['command'], 'train')
        self.assertEqual(manifest['seeds'], [1])
        model = manifest['config']['models'][0]
        self.assertEqual(model['kind'], 'adagcn')
        self.assertEqual(model['num_estimators'], 2)
        self.assertEqual(model['epochs'], 10)
        self.assertEqual(len(manifest['dataset_checksum']), 64)
        self.assertEqual(len(checkpoints.load(self.path('ada',
                                                        'model.ckpt'))), 2)

    def testSingleEstimatorIsGcn(self):
        gcn = self.train('gcn', '--model', 'gcn')
        ada = self.train('ada', '--estimators', '1')
        self.assertEqual(gcn['metrics'], ada['metrics'])
        self.assertEqual(self.read_json('gcn', 'split.json'),
                         self.read_json('ada', 'split.json'))

    def testFlagsOverrideSpecAndPreset(self):
        spec = self.path('spec.json')
        with open(spec, 'w') as f:
            json.dump({'model': {'kind': 'gcn', 'hidden_dim': 4,
                                 'l2_lambda': 0.01}}, f)
        self.train('out', '--spec', spec, '--preset', 'nell', '--hidden',
                   '8')
        model = self.read_json('out', 'manifest.json')['config']['models'][0]
        self.assertEqual(model['hidden_dim'], 8)
        self.assertEqual(model['l2_lambda'], 0.01)

    def testReplayFromManifest(self):
        first = self.train('first', '--model', 'gcn_focal')
        self.invoke(['train', '--manifest',
                     self.path('first', 'manifest.json'),
                     '--out', self.path('second')])
        self.assertEqual(first, self.read_json('second', 'metrics.json'))
        self.assertEqual(self.read_bytes('first', 'history.csv'),
                         self.read_bytes('second', 'history.csv'))

    def testBadSpec(self):
        spec = self.path('spec.json')
        with open(spec, 'w') as f:
            json.dump({'model': {'kind': 'gcn', 'colour': 'red'}}, f)
        self.invoke(['train', '--dataset', self.data, '--spec', spec,
                     '--out', self.path('x')], expect=2)

    def testNoSubcommand(self):
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as cm:
                main([])
        self.assertEqual(cm.exception.code, 2)


class EvaluateCommandTestCase(CliTestCase):

    def testReproducesTrainAccuracy(self):
        for kind in ('gcn', 'adagcn'):
            trained = self.train(kind, '--model', kind, '--estimators', '2',
                                 '--noise', '0.2')
            self.invoke(['evaluate', '--checkpoint',
                         self.path(kind, 'model.ckpt'), '--out',
                         self.path(kind, 'eval')])
            again = self.read_json(kind, 'eval', 'metrics_test.json')
            self.assertEqual(trained['metrics'], again['metrics'])

    def testValAndTestSplits(self):
        self.train('gcn', '--model', 'gcn')
        split = self.read_json('gcn', 'split.json')
        for which in ('val', 'test'):
            self.invoke(['evaluate', '--checkpoint',
                         self.path('gcn', 'model.ckpt'), '--split', which,
                         '--out', self.path('eval')])
            metrics = self.read_json('eval', 'metrics_%s.json' % which)
            self.assertEqual(metrics['metrics']['total'], len(split[which]))

    def zero_checkpoint_dataset(self, num_features):
        ds = sbm_dataset()
        split = NodeSplit(np.arange(0, 150, 5), np.arange(1, 150, 5),
                          np.concatenate([np.arange(2, 150, 5),
                                          np.arange(3, 150, 5)]))
        data = self.path('fixed')
        save_dataset(ds.with_split(split), data)
        ckpt = self.path('zero.ckpt')
        checkpoints.save(GcnParams(np.zeros((num_features, 4)),
                                   np.zeros((4, 3))), ckpt)
        return data, ckpt, split

    def testZeroParamsPredictClassZero(self):
        data, ckpt, split = self.zero_checkpoint_dataset(16)
        self.invoke(['evaluate', '--checkpoint', ckpt, '--dataset', data,
                     '--out', self.path('eval')])
        metrics = self.read_json('eval', 'metrics_test.json')['metrics']
        labels = load_dataset(data).labels.labels[split.test_idx]
        self.assertEqual(metrics['accuracy'],
                         float(np.mean(labels == 0)))

    def testDimensionMismatch(self):
        data, ckpt, _ = self.zero_checkpoint_dataset(5)
        self.invoke(['evaluate', '--checkpoint', ckpt, '--dataset', data,
                     '--out', self.path('eval')], expect=1)


class SweepCommandTestCase(CliTestCase):

    def write_spec(self, **kw):
        spec = dict(dataset_dir=self.data,
                    models=[{'kind': 'gcn', 'epochs': 5},
                            {'kind': 'adagcn', 'num_estimators': 2,
                             'epochs': 5}],
                    seeds=[0, 1], majority_class=0, n_majority=20,
                    n_minority=5, val_size=30, test_size=60,
                    sweep={'type': 'minority', 'values': [2, 5]})
        spec.update(kw)
        path = self.path('sweep.json')
        with open(path, 'w') as f:
            json.dump(spec, f)
        return path

    def testRerunFromManifestIsByteIdentical(self):
        self.invoke(['sweep', '--spec', self.write_spec(), '--out',
                     self.path('one')])
        self.invoke(['sweep', '--manifest',
                     self.path('one', 'manifest.json'), '--jobs', '2',
                     '--out', self.path('two')])
        names = sorted(n for n in os.listdir(self.path('one'))
                       if n.endswith('.csv'))
        self.assertIn('trials.csv', names)
        self.assertIn('plot_n_minority.csv', names)
        for name in names:
            self.assertEqual(self.read_bytes('one', name),
                             self.read_bytes('two', name), name)
        with open(self.path('one', 'trials.csv')) as f:
            self.assertEqual(len(f.read().splitlines()), 1 + 2 * 2 * 2)

    def testFailedTrialExitsNonzero(self):
        self.invoke(['sweep', '--spec', self.write_spec(n_majority=80),
                     '--out', self.path('bad')], expect=1)


if __name__ == '__main__':
    unittest.main()
