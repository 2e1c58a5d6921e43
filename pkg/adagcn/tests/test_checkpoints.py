"""
run these tests with python -m unittest discover adagcn
"""
import os
import shutil
import struct
import tempfile
import unittest

import numpy as np

from adagcn import checkpoints
from adagcn.exceptions import CheckpointError
from adagcn.gcn import init_params
from adagcn.models import (BoostConfig, EnsembleMember, EnsembleModel,
                           GcnParams, TrainConfig)


class CheckpointTestCase(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        self.params = init_params(5, 4, 3, 0)

    def tearDown(self):
        shutil.rmtree(self.dir)

    def ensemble(self, use_alpha=True, transfer=False):
        config = BoostConfig(num_estimators=2, transfer_learning=transfer,
                             use_alpha_in_prediction=use_alpha,
                             base=TrainConfig(hidden_dim=4))
        members = [EnsembleMember(self.params, 0.75, 0.2),
                   EnsembleMember(init_params(5, 4, 3, 1), -0.5, 0.6)]
        return EnsembleModel(3, config, members)

    def testParamsExact(self):
        path = os.path.join(self.dir, 'p.ckpt')
        checkpoints.save(self.params, path)
        back = checkpoints.load(path)
        self.assertIsInstance(back, GcnParams)
        np.testing.assert_array_equal(back.w0, self.params.w0)
        np.testing.assert_array_equal(back.w1, self.params.w1)
        with open(path, 'rb') as f:
            self.assertEqual(f.read(4), b'AGCP')
        self.assertEqual(os.path.getsize(path), 18 + 8 * (5 * 4 + 4 * 3))

    def testEnsembleKeepsFlagsAndWeights(self):
        path = os.path.join(self.dir, 'e.ckpt')
        model = self.ensemble(use_alpha=True, transfer=False)
        checkpoints.save(model, path)
        back = checkpoints.load(path)
        self.assertIsInstance(back, EnsembleModel)
        self.assertEqual(back.num_classes, 3)
        self.assertEqual(len(back), 2)
        self.assertTrue(back.config.use_alpha_in_prediction)
        self.assertFalse(back.config.transfer_learning)
        self.assertEqual(back.alphas.tolist(), [0.75, -0.5])
        self.assertEqual(back.epsilons.tolist(), [0.2, 0.6])
        np.testing.assert_array_equal(back.members[1].params.w1,
                                      model.members[1].params.w1)

    def testZeroParams(self):
        zero = GcnParams(np.zeros((2, 3)), np.zeros((3, 2)))
        back = checkpoints.params_from_bytes(checkpoints.params_to_bytes(zero))
        self.assertEqual(np.abs(back.w0).sum() + np.abs(back.w1).sum(), 0.0)

    def testCorruptBlobs(self):
        blob = checkpoints.params_to_bytes(self.params)
        self.assertRaises(CheckpointError, checkpoints.params_from_bytes,
                          blob[:10])
        self.assertRaises(CheckpointError, checkpoints.params_from_bytes,
                          blob[:-8])
        self.assertRaises(CheckpointError, checkpoints.params_from_bytes,
                          blob + b'\0')
        self.assertRaises(CheckpointError, checkpoints.params_from_bytes,
                          b'XXXX' + blob[4:])
        bad_version = blob[:4] + struct.pack('<H', 99) + blob[6:]
        self.assertRaises(CheckpointError, checkpoints.params_from_bytes,
                          bad_version)
        eblob = checkpoints.ensemble_to_bytes(self.ensemble())
        self.assertRaises(CheckpointError, checkpoints.ensemble_from_bytes,
                          eblob[:-3])

    def testMemberClassMismatch(self):
        model = self.ensemble()
        model.members[1] = EnsembleMember(init_params(5, 4, 2, 1), 0.1, 0.1)
        blob = checkpoints.ensemble_to_bytes(model)
        self.assertRaises(CheckpointError, checkpoints.ensemble_from_bytes,
                          blob)

    def testLoadErrors(self):
        self.assertRaises(CheckpointError, checkpoints.load,
                          os.path.join(self.dir, 'missing.ckpt'))
        path = os.path.join(self.dir, 'junk.ckpt')
        with open(path, 'wb') as f:
            f.write(b'not a checkpoint')
        self.assertRaises(CheckpointError, checkpoints.load, path)
        self.assertRaises(TypeError, checkpoints.save, object(), path)


if __name__ == '__main__':
    unittest.main()
