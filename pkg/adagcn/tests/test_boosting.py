"""
run these tests with python -m unittest discover adagcn
"""
from dataclasses import replace
import math
import unittest

import numpy as np

from adagcn.boosting import (EPSILON_FLOOR, MULTIPLIER_CAP, SampleWeights,
                             classifier_alpha, classifier_score,
                             ensemble_predict, ensemble_scores, init_weights,
                             sample_weight_multipliers, train_adagcn,
                             update_sample_weights, weighted_error)
from adagcn.exceptions import TrainingError
from adagcn.gcn import init_params, predict, train_gcn
from adagcn.graph import (generate_sbm, make_imbalanced_split,
                          normalize_adjacency, row_normalize_features)
from adagcn.models import (BoostConfig, EnsembleMember, EnsembleModel,
                           TrainConfig)


class SampleWeightsTestCase(unittest.TestCase):

    def testInitWeights(self):
        self.assertEqual(init_weights(4).values.tolist(), [0.25] * 4)
        self.assertEqual(init_weights(1).values.tolist(), [1.0])
        for n in (3, 7, 90, 1001):
            self.assertAlmostEqual(init_weights(n).total, 1.0, places=12)
        self.assertRaises(ValueError, init_weights, 0)

    def testMustBePositive(self):
        self.assertRaises(ValueError, SampleWeights, [0.5, 0.0, 0.5])
        self.assertRaises(ValueError, SampleWeights, [])


class WeightedErrorTestCase(unittest.TestCase):

    def testExamples(self):
        w = init_weights(4)
        labels = np.array([0, 1, 2, 1])
        self.assertEqual(weighted_error(labels, labels, w), 0.0)
        self.assertEqual(weighted_error((labels + 1) % 3, labels, w), 1.0)
        self.assertEqual(weighted_error([0, 1, 0, 0], labels, w), 0.5)

    def testOracle(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            c = int(rng.integers(2, 6))
            labels = rng.integers(0, c, size=n)
            pred = rng.integers(0, c, size=n)
            raw = rng.random(n) + 1e-3
            w = SampleWeights(raw / raw.sum())
            expected = math.fsum(float(w.values[i]) for i in range(n)
                                 if pred[i] != labels[i])
            self.assertAlmostEqual(weighted_error(pred, labels, w), expected,
                                   delta=1e-12)


class AlphaTestCase(unittest.TestCase):

    def testExamples(self):
        self.assertEqual(classifier_alpha(0.5), 0.0)
        self.assertAlmostEqual(classifier_alpha(0.1), 0.5 * math.log(9),
                               places=12)
        capped = 0.5 * math.log((1 - EPSILON_FLOOR) / EPSILON_FLOOR)
        self.assertAlmostEqual(classifier_alpha(0.0), capped, places=9)
        self.assertAlmostEqual(classifier_alpha(0.0), 11.5129, places=4)
        top = 1.0 - EPSILON_FLOOR
        self.assertAlmostEqual(classifier_alpha(1.0),
                               0.5 * math.log((1.0 - top) / top), places=9)
        self.assertLess(classifier_alpha(1.0), -11.5)

    def testOracle(self):
        rng = np.random.default_rng(1)
        for eps in rng.random(1000):
            expected = 0.5 * math.log((1.0 - eps) / eps)
            self.assertAlmostEqual(classifier_alpha(eps), expected,
                                   delta=1e-12)


class MultiplierTestCase(unittest.TestCase):

    def testPerfectPredictionsLeaveWeightsAlone(self):
        probs = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        labels = np.array([0, 1])
        np.testing.assert_array_equal(
            sample_weight_multipliers(probs, labels, 3), [1.0, 1.0])
        w = SampleWeights([0.3, 0.7])
        np.testing.assert_allclose(
            update_sample_weights(w, probs, labels, 3).values, [0.3, 0.7],
            rtol=0, atol=1e-15)

    def testHandExample(self):
        probs = np.array([[math.exp(-2), 1 - math.exp(-2)], [1.0, 0.0]])
        labels = np.array([0, 0])
        np.testing.assert_allclose(
            sample_weight_multipliers(probs, labels, 2), [math.e, 1.0],
            rtol=1e-14)
        w = update_sample_weights(init_weights(2), probs, labels, 2)
        e = math.e
        np.testing.assert_allclose(w.values, [e / (e + 1), 1 / (e + 1)],
                                   rtol=1e-14)
        np.testing.assert_allclose(w.values, [0.7311, 0.2689], atol=1e-4)

    def testSharedTrueClassProbability(self):
        probs = np.array([[0.4, 0.6], [0.6, 0.4], [0.4, 0.6]])
        labels = np.array([0, 1, 0])
        w = SampleWeights([0.2, 0.5, 0.3])
        np.testing.assert_allclose(
            update_sample_weights(w, probs, labels, 2).values,
            [0.2, 0.5, 0.3], rtol=1e-14)

    def testOrdering(self):
        rng = np.random.default_rng(2)
        probs = rng.dirichlet(np.ones(4), size=50)
        labels = rng.integers(0, 4, size=50)
        mult = sample_weight_multipliers(probs, labels, 4)
        p_true = probs[np.arange(50), labels]
        order = np.argsort(p_true)
        self.assertTrue((np.diff(mult[order]) <= 0).all())

    def testCap(self):
        probs = np.array([[1e-300, 1.0], [0.5, 0.5]])
        mult = sample_weight_multipliers(probs, np.array([0, 0]), 2,
                                         shrinkage=10.0)
        self.assertEqual(mult[0], MULTIPLIER_CAP)
        self.assertTrue(np.isfinite(mult).all())

    def testOracle(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            c = int(rng.integers(2, 8))
            a = float(rng.uniform(0.1, 2.0))
            probs = rng.dirichlet(np.ones(c), size=n)
            labels = rng.integers(0, c, size=n)
            raw = rng.random(n) + 1e-3
            prior = SampleWeights(raw / raw.sum())
            factor = a * (c - 1.0) / c
            expected = []
            for i in range(n):
                p = max(float(probs[i, labels[i]]), 1e-10)
                expected.append(min(math.exp(-factor * math.log(p)),
                                    MULTIPLIER_CAP))
            mult = sample_weight_multipliers(probs, labels, c, a)
            np.testing.assert_allclose(mult, expected, rtol=1e-12)
            unnorm = [float(prior.values[i]) * expected[i] for i in range(n)]
            total = math.fsum(unnorm)
            post = update_sample_weights(prior, probs, labels, c, a)
            np.testing.assert_allclose(post.values,
                                       [u / total for u in unnorm],
                                       rtol=1e-12)
            self.assertAlmostEqual(post.total, 1.0, delta=1e-9)


class ClassifierScoreTestCase(unittest.TestCase):

    def testUniformRowIsZero(self):
        np.testing.assert_allclose(classifier_score(np.full((2, 5), 0.2)),
                                   0.0, atol=1e-15)

    def testTwoClasses(self):
        h = classifier_score(np.array([0.9, 0.1]))
        np.testing.assert_allclose(h, [0.5 * math.log(9),
                                       -0.5 * math.log(9)], rtol=1e-12)

    def testRowsSumToZeroAndOracle(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            c = int(rng.integers(2, 8))
            p = rng.dirichlet(np.ones(c))
            h = classifier_score(p)
            self.assertAlmostEqual(float(h.sum()), 0.0, delta=1e-9)
            logs = [math.log(max(v, 1e-10)) for v in p.tolist()]
            mean = math.fsum(logs) / c
            expected = [(c - 1) * (v - mean) for v in logs]
            np.testing.assert_allclose(h, expected, rtol=1e-12, atol=1e-12)


def small_problem(seed=1):
    ds = generate_sbm([20, 20, 20], 0.3, 0.02, feature_dim=8, seed=seed)
    ds = ds.with_features(row_normalize_features(ds.features))
    a_hat = normalize_adjacency(ds.graph)
    split = make_imbalanced_split(ds.labels, 0, n_majority=10, n_minority=3,
                                  val_size=10, test_size=20, seed=4)
    return ds, a_hat, split


class EnsemblePredictTestCase(unittest.TestCase):

    def setUp(self):
        self.ds, self.a_hat, _ = small_problem()
        self.params = [init_params(8, 16, 3, s) for s in range(3)]

    def model(self, params, use_alpha=False, alphas=None):
        config = BoostConfig(use_alpha_in_prediction=use_alpha)
        alphas = alphas or [1.0] * len(params)
        return EnsembleModel(3, config, [EnsembleMember(p, a, 0.1)
                                         for p, a in zip(params, alphas)])

    def testSingleMemberIsArgmax(self):
        pred, _ = ensemble_predict(self.model(self.params[:1]), self.a_hat,
                                   self.ds.features)
        probs = predict(self.a_hat, self.ds.features, self.params[0])
        np.testing.assert_array_equal(pred, probs.argmax(axis=1))

    def testDuplicatedMember(self):
        one, _ = ensemble_predict(self.model(self.params[:1]), self.a_hat,
                                  self.ds.features)
        two, _ = ensemble_predict(self.model(self.params[:1] * 2),
                                  self.a_hat, self.ds.features)
        np.testing.assert_array_equal(one, two)

    def testScoresOracle(self):
        alphas = [0.7, 1.3, 0.2]
        for use_alpha in (False, True):
            model = self.model(self.params, use_alpha, alphas)
            scores = ensemble_scores(model, self.a_hat, self.ds.features)
            for i in range(0, self.ds.num_nodes, 7):
                expected = []
                for k in range(3):
                    terms = []
                    for p, a in zip(self.params, alphas):
                        row = predict(self.a_hat, self.ds.features,
                                      p)[i].tolist()
                        logs = [math.log(max(v, 1e-10)) for v in row]
                        h = 2 * (logs[k] - math.fsum(logs) / 3)
                        terms.append(a * h if use_alpha else h)
                    expected.append(math.fsum(terms))
                np.testing.assert_allclose(scores[i], expected, rtol=1e-12,
                                           atol=1e-12)

    def testHandChosenScores(self):
        members = [np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]]),
                   np.array([[0.6, 0.4], [0.3, 0.7], [0.5, 0.5]])]
        total = sum(classifier_score(p) for p in members)
        for i in range(3):
            expected = []
            for k in range(2):
                expected.append(math.fsum(
                    math.log(p[i, k]) - 0.5 * (math.log(p[i, 0]) +
                                               math.log(p[i, 1]))
                    for p in members))
            np.testing.assert_allclose(total[i], expected, rtol=1e-12,
                                       atol=1e-15)
        self.assertEqual(total.argmax(axis=1).tolist(), [0, 1, 1])

    def testEmptyEnsemble(self):
        self.assertRaises(ValueError, ensemble_scores, self.model([]),
                          self.a_hat, self.ds.features)


class TrainAdagcnTestCase(unittest.TestCase):

    def setUp(self):
        self.ds, self.a_hat, self.split = small_problem()
        self.base = TrainConfig(epochs=20, seed=11)

    def boost(self, **kw):
        kw.setdefault('base', self.base)
        return train_adagcn(self.ds, self.split, self.a_hat,
                            BoostConfig(**kw))

    def testSingleRoundIsPlainGcn(self):
        model, diag = self.boost(num_estimators=1)
        params, _ = train_gcn(self.ds, self.split, self.a_hat,
                              init_weights(len(self.split.train_idx)),
                              self.base)
        np.testing.assert_array_equal(model.members[0].params.w0, params.w0)
        np.testing.assert_array_equal(model.members[0].params.w1, params.w1)
        pred, _ = ensemble_predict(model, self.a_hat, self.ds.features)
        np.testing.assert_array_equal(
            pred, predict(self.a_hat, self.ds.features, params).argmax(axis=1))
        self.assertEqual(len(diag.weights), 2)

    def testWeightInvariants(self):
        model, diag = self.boost(num_estimators=4)
        self.assertEqual(len(model), 4)
        self.assertEqual(len(diag.rounds), 4)
        self.assertEqual(len(diag.weights), 5)
        n = len(self.split.train_idx)
        np.testing.assert_array_equal(diag.weights[0], np.full(n, 1.0 / n))
        for w in diag.weights:
            self.assertTrue((w > 0).all())
            self.assertAlmostEqual(float(w.sum()), 1.0, delta=1e-9)
        for r in diag.rounds:
            self.assertTrue(0.0 <= r.epsilon <= 1.0)
            self.assertTrue(math.isfinite(r.alpha))
        np.testing.assert_array_equal(model.alphas,
                                      [r.alpha for r in diag.rounds])

    def testUpdatesFollowRecordedProbabilities(self):
        _, diag = self.boost(num_estimators=3)
        for m in range(3):
            p_true = diag.true_class_probs[m]
            mult = diag.multipliers[m]
            raw = diag.weights[m] * mult
            np.testing.assert_allclose(diag.weights[m + 1], raw / raw.sum(),
                                       rtol=1e-12)
            ratio = diag.weights[m + 1] / diag.weights[m]
            order = np.argsort(p_true, kind='stable')
            self.assertTrue((np.diff(ratio[order]) <= 1e-12 *
                             ratio.max()).all())

    def testDeterministic(self):
        a, da = self.boost(num_estimators=3)
        b, db = self.boost(num_estimators=3)
        for ma, mb in zip(a.members, b.members):
            np.testing.assert_array_equal(ma.params.w0, mb.params.w0)
        self.assertEqual(da.round_rows(), db.round_rows())

    def testTransferLearning(self):
        warm, _ = self.boost(num_estimators=2, transfer_learning=True)
        cold, _ = self.boost(num_estimators=2, transfer_learning=False)
        np.testing.assert_array_equal(warm.members[0].params.w0,
                                      cold.members[0].params.w0)
        self.assertFalse(np.array_equal(warm.members[1].params.w0,
                                        cold.members[1].params.w0))

    def testFailureCarriesRound(self):
        base = replace(self.base, learning_rate=1e200, epochs=5)
        with np.errstate(all='ignore'):
            with self.assertRaises(TrainingError) as cm:
                self.boost(num_estimators=3, base=base)
        self.assertEqual(cm.exception.round_index, 1)


if __name__ == '__main__':
    unittest.main()
