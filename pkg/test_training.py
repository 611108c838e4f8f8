# test_training.py

import unittest
from unittest.mock import patch

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from autodiff_modules import Value, backward
from corpus_modules.corpus_batching import collate
from corpus_modules.corpus_config import GenConfig
from corpus_modules.corpus_generator import generate_corpus
from errors import (ConfigError, DataError, DimensionError, EnsembleError, NumericError,
                    SelectionError)
from models.embed_model import build_model
from models.model_spec import AdversarySpec, ModelSpec
from training_modules.grid_search import enumerate_grid, grid_search
from training_modules.rmsprop import OptimizerState, rmsprop_step
from training_modules.selection import (EnsembleResult, average_probabilities, chance_indices, seed_ensemble,
                                        select_model)
from training_modules.trainer import (EarlyStopping, EpochRecord, TrainHistory, class_weights,
                                      joint_loss, loss_terms, train)
from training_modules.training_config import TrainConfig
from utils.rng import make_rng

CORPUS = generate_corpus(GenConfig(n_speakers=10, utterances_per_speaker=4, seq_len_range=(3, 4), seed=8))
FAST = TrainConfig(max_epochs=3, patience=1, batch_size=8, seeds=(0, 1))


def gender_partition(corpus, per_gender=3):
    """First per_gender speakers of each gender train; the rest validate"""
    genders = {s.speaker_id: s.gender for s in corpus}
    chosen = set()
    for gender in ('M', 'F'):
        chosen.update(sorted(s for s, g in genders.items() if g == gender)[:per_gender])
    return ([s for s in corpus if s.speaker_id in chosen],
            [s for s in corpus if s.speaker_id not in chosen])


def history(seed, val_loss, adversary_uar=None):
    val_uar = {'emotion': 0.5}
    if adversary_uar is not None:
        val_uar['adv0_gender'] = adversary_uar
    record = EpochRecord(epoch=1, train_loss={}, val_loss={'emotion': val_loss}, val_uar=val_uar)
    return TrainHistory(seed=seed, spec_key='k', records=[record], best_epoch=1, stop_reason='max_epochs')


def priv(lam=0.5, **changes):
    return ModelSpec(mode='Priv', adversaries=(AdversarySpec('gender', lam),)).with_updates(**changes)


class TestRmsprop(unittest.TestCase):

    def test_first_step(self):
        theta = Value(np.zeros(1))
        state = OptimizerState([theta])
        rmsprop_step([theta], [np.ones(1)], state, lr=1e-3, decay=0.9, eps=1e-8)
        assert_allclose(theta.data, [-0.0031623], atol=1e-7)
        assert_allclose(state.cache_for(theta), [0.1])

    def test_cache_after_two_steps(self):
        theta = Value(np.zeros(1))
        state = OptimizerState([theta])
        for _ in range(2):
            rmsprop_step([theta], [np.ones(1)], state)
        assert_allclose(state.cache_for(theta), [0.19])

    def test_shape_mismatch(self):
        theta = Value(np.zeros(2))
        with self.assertRaises(DimensionError):
            rmsprop_step([theta], [np.ones(3)], OptimizerState())

    def test_non_finite_gradient_leaves_parameters(self):
        theta = Value(np.ones(2))
        with self.assertRaises(NumericError):
            rmsprop_step([theta], [np.array([1.0, np.nan])], OptimizerState())
        assert_array_equal(theta.data, [1.0, 1.0])

    def test_step_size_scales_with_learning_rate(self):
        rng = make_rng(0, 'test', 'rmsprop')
        start, grad = rng.standard_normal(6), rng.standard_normal(6)
        changes = []
        for lr in (1e-3, 1e-4, 1e-5):
            theta = Value(start.copy())
            rmsprop_step([theta], [grad], OptimizerState([theta]), lr=lr)
            changes.append(theta.data - start)
        assert_allclose(changes[0], 10.0 * changes[1], rtol=1e-6)
        assert_allclose(changes[1], 10.0 * changes[2], rtol=1e-6)


class TestLossAndStopping(unittest.TestCase):

    def test_balanced_class_weights(self):
        assert_allclose(class_weights([0, 1, 1, 2], 3), [4 / 3, 2 / 3, 4 / 3])

    def test_uniform_class_weights(self):
        assert_array_equal(class_weights([0, 1, 1, 2], 3, 'uniform'), [1.0, 1.0, 1.0])

    def test_missing_class(self):
        with self.assertRaises(DataError):
            class_weights([0, 0, 2], 3)

    def test_early_stopping_sequence(self):
        stopper = EarlyStopping(patience=5)
        stopped_at = None
        for epoch, loss in enumerate([1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99], start=1):
            stopper.update(epoch, loss)
            if stopper.should_stop:
                stopped_at = epoch
                break
        self.assertEqual(stopped_at, 7)
        self.assertEqual(stopper.best_epoch, 2)

    def test_equal_loss_is_not_an_improvement(self):
        stopper = EarlyStopping(patience=2)
        self.assertTrue(stopper.update(1, 0.5))
        self.assertFalse(stopper.update(2, 0.5))
        self.assertEqual(stopper.best_epoch, 1)

    def test_joint_gradient_is_emotion_minus_lambda_adversary(self):
        train_samples, _ = gender_partition(CORPUS)
        batch = collate(train_samples[:8], 'activation')

        def grads(params, heads=None):
            if heads is None:
                loss = joint_loss(batch, params)
            else:
                terms, _ = loss_terms(batch, params, heads=heads)
                loss = terms[heads[0]]
            backward(loss)
            return {name: params[name].grad.copy() for name in params.names()}

        joint = grads(build_model(priv(0.5), seed=6))
        emotion = grads(build_model(priv(0.5), seed=6), ['emotion'])
        # at lambda = 1 the reversed adversary gradient reaches theta_M unscaled
        adversary = grads(build_model(priv(1.0), seed=6), ['adv0_gender'])
        for name, grad in joint.items():
            if name.startswith('embed/'):
                expected = emotion[name] + 0.5 * adversary[name]
            elif name.startswith('emotion/'):
                expected = emotion[name]
            else:
                expected = adversary[name]
            assert_allclose(grad, expected, rtol=1e-9, atol=1e-12, err_msg=name)

    def test_joint_gradient_with_gender_and_speaker_adversaries(self):
        train_samples, _ = gender_partition(CORPUS)
        speakers = sorted({s.speaker_id for s in train_samples})
        batch = collate(train_samples[:8], 'activation', {s: i for i, s in enumerate(speakers)})

        def spec(lam):
            return ModelSpec(mode='Priv', adversaries=(AdversarySpec('gender', lam), AdversarySpec('speaker', lam)))

        def grads(lam, head=None):
            params = build_model(spec(lam), seed=6, speakers=speakers)
            if head is None:
                loss = joint_loss(batch, params)
            else:
                terms, _ = loss_terms(batch, params, heads=[head])
                loss = terms[head]
            backward(loss)
            return {name: params[name].grad.copy() for name in params.names()}

        joint = grads(0.5)
        emotion = grads(0.5, 'emotion')
        gender = grads(1.0, 'adv0_gender')
        speaker = grads(1.0, 'adv1_speaker')
        for name, grad in joint.items():
            if name.startswith('embed/'):
                expected = emotion[name] + 0.5 * gender[name] + 0.5 * speaker[name]
            elif name.startswith('adv0_gender/'):
                expected = gender[name]
            elif name.startswith('adv1_speaker/'):
                expected = speaker[name]
            else:
                expected = emotion[name]
            assert_allclose(grad, expected, rtol=1e-9, atol=1e-12, err_msg=name)

    def test_priv_step_lowers_main_network_objective(self):
        train_samples, _ = gender_partition(CORPUS)
        params = build_model(priv(0.5), seed=3)
        main = [params[name] for name in params.names() if not name.startswith('adv')]
        start = params.snapshot()
        rng = make_rng(0, 'test', 'batches')

        def objective(batch):
            terms, _ = loss_terms(batch, params)
            return float(terms['emotion'].data) - 0.5 * float(terms['adv0_gender'].data)

        for _ in range(10):
            batch = collate([train_samples[i] for i in rng.choice(len(train_samples), 8, replace=False)],
                            'activation')
            params.restore(start)
            before = objective(batch)
            grads = backward(joint_loss(batch, params))
            rmsprop_step(main, [grads.get(v, np.zeros_like(v.data)) for v in main], OptimizerState(main), lr=1e-5)
            self.assertLess(objective(batch), before)

    def test_speaker_labels_required(self):
        spec = ModelSpec(adversaries=(AdversarySpec('speaker'),))
        params = build_model(spec, seed=0, speakers=[0, 1])
        with self.assertRaises(DataError):
            loss_terms(collate(CORPUS[:4], 'activation'), params)


class TestTrain(unittest.TestCase):

    def test_history_and_best_epoch(self):
        train_samples, val_samples = gender_partition(CORPUS)
        params, hist = train(ModelSpec(), train_samples, val_samples, FAST, seed=1)
        self.assertIn(hist.stop_reason, ('patience', 'max_epochs'))
        self.assertLessEqual(len(hist.records), FAST.max_epochs)
        losses = [r.val_loss['emotion'] for r in hist.records]
        self.assertEqual(hist.best_val_emotion_loss, min(losses))
        self.assertEqual(hist.best_epoch, losses.index(min(losses)) + 1)
        self.assertEqual(len(hist.to_jsonl().splitlines()), len(hist.records))

    def test_deterministic(self):
        train_samples, val_samples = gender_partition(CORPUS)
        a, _ = train(priv(), train_samples, val_samples, FAST, seed=2)
        b, _ = train(priv(), train_samples, val_samples, FAST, seed=2)
        self.assertEqual(a.checksum(), b.checksum())

    def test_zero_lambda_leaves_main_network_untouched_by_adversary(self):
        train_samples, val_samples = gender_partition(CORPUS)
        with_adversary, hist_a = train(ModelSpec(), train_samples, val_samples, FAST, seed=4)
        without, hist_b = train(ModelSpec(adversaries=()), train_samples, val_samples, FAST, seed=4)
        self.assertEqual(with_adversary.checksum('embed/'), without.checksum('embed/'))
        self.assertEqual(with_adversary.checksum('emotion/'), without.checksum('emotion/'))
        self.assertEqual([r.val_loss['emotion'] for r in hist_a.records],
                         [r.val_loss['emotion'] for r in hist_b.records])

    def test_training_loss_is_the_joint_loss(self):
        train_samples, val_samples = gender_partition(CORPUS)
        with patch('training_modules.trainer.joint_loss', wraps=joint_loss) as spy:
            _, hist = train(priv(), train_samples, val_samples, FAST, seed=0)
        batches_per_epoch = -(-len(train_samples) // FAST.batch_size)
        self.assertEqual(spy.call_count, batches_per_epoch * len(hist.records))

    def test_overlapping_partitions(self):
        train_samples, _ = gender_partition(CORPUS)
        with self.assertRaises(DataError):
            train(ModelSpec(), train_samples, train_samples[:4], FAST, seed=0)

    def test_invalid_config(self):
        train_samples, val_samples = gender_partition(CORPUS)
        with self.assertRaises(ConfigError):
            train(ModelSpec(), train_samples, val_samples, TrainConfig(max_epochs=3, patience=3), seed=0)


class TestSelection(unittest.TestCase):

    def setUp(self):
        self.priv_params = build_model(priv(), seed=0)
        self.gen_params = build_model(ModelSpec(), seed=0)

    def test_priv_keeps_only_chance_adversaries(self):
        candidates = [(self.priv_params, history(0, 0.8, 0.52)),
                      (self.priv_params.copy(), history(1, 0.6, 0.70)),
                      (self.priv_params.copy(), history(2, 0.7, 0.47))]
        self.assertIs(select_model(candidates, TrainConfig()), candidates[2][0])

    def test_gen_picks_lowest_loss(self):
        candidates = [(self.gen_params, history(0, 0.8, 0.52)),
                      (self.gen_params.copy(), history(1, 0.6, 0.70))]
        self.assertIs(select_model(candidates, TrainConfig()), candidates[1][0])

    def test_no_candidate_at_chance(self):
        candidates = [(self.priv_params, history(0, 0.8, 0.62)),
                      (self.priv_params.copy(), history(1, 0.6, 0.70))]
        with self.assertRaises(SelectionError) as ctx:
            select_model(candidates, TrainConfig())
        self.assertIn('0.62', str(ctx.exception))

    def test_chance_indices_per_mode(self):
        candidates = [(self.priv_params, history(0, 0.8, 0.70)),
                      (self.priv_params.copy(), history(1, 0.6, 0.54)),
                      (self.priv_params.copy(), history(2, 0.7, 0.46))]
        self.assertEqual(chance_indices(candidates, TrainConfig()), [1, 2])
        gen = [(self.gen_params, history(0, 0.8, 0.9)), (self.gen_params.copy(), history(1, 0.6, 0.7))]
        self.assertEqual(chance_indices(gen, TrainConfig()), [0, 1])

        far = candidates[:1] + [(self.priv_params.copy(), history(1, 0.6, 0.61))]
        with self.assertRaises(SelectionError):
            chance_indices(far, TrainConfig())
        with self.assertLogs('training_modules.selection', level='WARNING'):
            self.assertEqual(chance_indices(far, TrainConfig(chance_selection='nearest')), [1])

    def test_restricted_ensemble_reaverages(self):
        members = [np.array([[0.95, 0.05]]), np.array([[0.2, 0.8]]), np.array([[0.4, 0.6]])]
        mean, predictions = average_probabilities(members)
        ensemble = EnsembleResult(probabilities=mean, predictions=predictions, models=['a', 'b', 'c'],
                                  histories=[0, 1, 2], seeds=(0, 1, 2), member_probabilities=members)
        self.assertEqual(predictions.tolist(), [0])
        kept = ensemble.restricted([1, 2])
        assert_allclose(kept.probabilities, [[0.3, 0.7]])
        self.assertEqual(kept.predictions.tolist(), [1])
        self.assertEqual((kept.models, kept.seeds), (['b', 'c'], (1, 2)))

    def test_average_probabilities(self):
        mean, predictions = average_probabilities([[[0.6, 0.4]], [[0.5, 0.5]], [[0.45, 0.55]]])
        assert_allclose(mean, [[0.5166667, 0.4833333]], atol=1e-6)
        assert_array_equal(predictions, [0])

    def test_seed_ensemble_with_fake_trainer(self):
        train_samples, val_samples = gender_partition(CORPUS)
        seeds_seen = []

        def trainer(spec, train_samples, val_samples, cfg, seed):
            seeds_seen.append(seed)
            return build_model(spec, seed), history(seed, 0.5)

        result = seed_ensemble(ModelSpec(), train_samples, val_samples, val_samples, FAST,
                               base_seed=3, run_key=('fold', 0), trainer=trainer)
        self.assertEqual(result.probabilities.shape, (len(val_samples), 3))
        self.assertEqual(len(result.models), 2)
        self.assertEqual(len(set(seeds_seen)), 2)
        assert_allclose(result.probabilities.sum(axis=1), 1.0)

    def test_seed_ensemble_reports_failing_seed(self):
        def trainer(spec, train_samples, val_samples, cfg, seed):
            raise DataError("boom")

        with self.assertRaises(EnsembleError) as ctx:
            seed_ensemble(ModelSpec(), CORPUS, CORPUS, CORPUS, FAST, trainer=trainer)
        self.assertEqual(ctx.exception.seed, 0)


class TestGridSearch(unittest.TestCase):

    def test_full_priv_multimodal_grid(self):
        self.assertEqual(len(enumerate_grid(priv())), 768)
        self.assertEqual(len(enumerate_grid(ModelSpec())), 96)
        self.assertEqual(len(enumerate_grid(priv(modality='acoustic'))), 384)

    def test_ties_go_to_fewer_parameters(self):
        specs = enumerate_grid(ModelSpec(), grid={'dense_width': (64, 32)})

        def trainer(spec, train_samples, val_samples, cfg, seed):
            return build_model(spec, seed), history(seed, 0.5)

        result = grid_search(specs, CORPUS, CORPUS, FAST, trainer=trainer)
        self.assertEqual(result.best.dense_width, 32)
        self.assertEqual(len(result.ranking), 2)

    def test_priv_ranking_penalises_adversary(self):
        specs = enumerate_grid(priv(), lambdas=(0.5,), grid={'dense_width': (32, 64)})
        specs = [s for s in specs if s.grl_placement == 'post-concat']
        adversary = {32: 0.70, 64: 0.51}

        def trainer(spec, train_samples, val_samples, cfg, seed):
            return build_model(spec, seed), history(seed, 0.5, adversary[spec.dense_width])

        result = grid_search(specs, CORPUS, CORPUS, FAST, trainer=trainer)
        self.assertEqual(result.best.dense_width, 64)
        self.assertEqual(len(result.ranking), 2)
        self.assertAlmostEqual(result.ranking[0]['score'], 0.49)

    def test_priv_ranking_without_chance_candidates(self):
        specs = enumerate_grid(priv(), lambdas=(0.5,), grid={'dense_width': (32, 64)})
        specs = [s for s in specs if s.grl_placement == 'post-concat']
        adversary = {32: 0.70, 64: 0.62}

        def trainer(spec, train_samples, val_samples, cfg, seed):
            return build_model(spec, seed), history(seed, 0.5, adversary[spec.dense_width])

        result = grid_search(specs, CORPUS, CORPUS, FAST, trainer=trainer)
        self.assertEqual(result.best.dense_width, 64)
        self.assertEqual([r['spec']['dense_width'] for r in result.ranking], [64, 32])

    def test_empty_grid(self):
        with self.assertRaises(ConfigError):
            grid_search([], CORPUS, CORPUS, FAST)


if __name__ == '__main__':
    unittest.main()
