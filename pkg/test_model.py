# test_model.py

import json
import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from autodiff_modules import backward
from corpus_modules.corpus_batching import collate
from corpus_modules.corpus_config import GenConfig
from corpus_modules.corpus_generator import generate_corpus
from errors import CheckpointError, DegenerateInputError, SpecError
from models.checkpoint import load_checkpoint, save_checkpoint
from models.embed_model import build_model, embed, embed_batch, forward, predict, predict_batch
from models.model_spec import AdversarySpec, ModelSpec, setup_variants
from models.sample import ACOUSTIC_DIM, LEXICAL_DIM, UtteranceSample

CORPUS = generate_corpus(GenConfig(n_speakers=4, utterances_per_speaker=3, seed=5))


def priv(**changes):
    spec = ModelSpec(mode='Priv', adversaries=(AdversarySpec('gender', 0.5),))
    return spec.with_updates(**changes)


class TestModelSpec(unittest.TestCase):

    def test_twelve_setup_variants(self):
        variants = setup_variants()
        self.assertEqual(len(variants), 12)
        self.assertEqual(len({v.key() for v in variants}), 12)

    def test_priv_lambda_must_come_from_grid(self):
        with self.assertRaises(SpecError):
            ModelSpec(mode='Priv', adversaries=(AdversarySpec('gender', 0.4),)).validate()

    def test_per_stream_needs_multimodal(self):
        with self.assertRaises(SpecError):
            priv(modality='acoustic', grl_placement='per-stream')

    def test_layer_sizes_come_from_grid(self):
        with self.assertRaises(SpecError):
            ModelSpec(conv_kernels=48).validate()

    def test_gen_mode_stops_adversary_gradient(self):
        self.assertEqual(ModelSpec().effective_lambdas(0), (0.0, 0.0))
        spec = priv(grl_placement='per-stream', adversaries=(AdversarySpec('gender', 0.5, 1.0),))
        self.assertEqual(spec.effective_lambdas(0), (0.5, 1.0))

    def test_dict_round_trip(self):
        spec = priv(task='valence', adversaries=(AdversarySpec('gender', 0.3), AdversarySpec('speaker', 0.3)))
        self.assertEqual(ModelSpec.from_dict(json.loads(json.dumps(spec.to_dict()))), spec)

    def test_unknown_keys(self):
        with self.assertRaises(SpecError):
            ModelSpec.from_dict({'modality': 'acoustic', 'dropout': 0.1})


class TestEmbedModel(unittest.TestCase):

    def test_representation_dims(self):
        batch = collate(CORPUS, 'activation')
        for modality, dim in (('acoustic', 32), ('lexical', 32), ('multimodal', 64)):
            params = build_model(ModelSpec(modality=modality), seed=0)
            passed = forward(params, batch)
            self.assertEqual(passed.representation.shape, (len(CORPUS), dim))
            self.assertEqual(passed.logits['emotion'].shape, (len(CORPUS), 3))
            self.assertEqual(passed.logits['adv0_gender'].shape, (len(CORPUS), 2))

    def test_same_seed_same_weights(self):
        a = build_model(priv(), seed=11)
        b = build_model(priv(), seed=11)
        self.assertEqual(a.checksum(), b.checksum())
        self.assertNotEqual(a.checksum(), build_model(priv(), seed=12).checksum())

    def test_adding_a_head_keeps_other_initialisations(self):
        bare = build_model(ModelSpec(adversaries=()), seed=3)
        full = build_model(ModelSpec(adversaries=(AdversarySpec('gender'), AdversarySpec('speaker'))),
                           seed=3, speakers=[0, 1, 2])
        self.assertEqual(bare.checksum('embed/'), full.checksum('embed/'))
        self.assertEqual(bare.checksum('emotion/'), full.checksum('emotion/'))
        self.assertEqual(full.head_size('adv1_speaker'), 3)

    def test_speaker_adversary_needs_speakers(self):
        with self.assertRaises(SpecError):
            build_model(ModelSpec(adversaries=(AdversarySpec('speaker'),)), seed=0, speakers=[4])

    def test_short_acoustic_sequence(self):
        short = UtteranceSample(np.zeros((3, ACOUSTIC_DIM)), np.zeros((2, LEXICAL_DIM)), 'low', 'low', 'F', 0, 0)
        params = build_model(ModelSpec(modality='acoustic', conv_layers=4, conv_width=3), seed=0)
        with self.assertRaises(DegenerateInputError):
            embed_batch(params, [short])

    def test_embedding_is_per_sample(self):
        params = build_model(ModelSpec(), seed=0)
        together = embed_batch(params, CORPUS)
        alone = np.vstack([embed(params, s) for s in CORPUS])
        self.assertEqual(alone.shape, (len(CORPUS), params.spec.representation_dim))
        assert_allclose(together, alone, rtol=1e-10, atol=1e-12)

    def test_probabilities(self):
        params = build_model(priv(), seed=0)
        probs = predict_batch(params, CORPUS, 'adversary_0')
        self.assertEqual(probs.shape, (len(CORPUS), 2))
        assert_allclose(probs.sum(axis=1), 1.0)
        assert_allclose(predict(params, CORPUS[0], 'adversary_0'), probs[0], rtol=1e-10, atol=1e-12)

    def test_unknown_head(self):
        params = build_model(ModelSpec(), seed=0)
        with self.assertRaises(SpecError):
            params.resolve_head('adversary_3')
        with self.assertRaises(SpecError):
            params.resolve_head('age')

    def test_gen_and_priv_share_forward_values(self):
        batch = collate(CORPUS, 'activation')
        gen = forward(build_model(ModelSpec(), seed=2), batch)
        private = forward(build_model(priv(), seed=2), batch)
        for head in ('emotion', 'adv0_gender'):
            assert_array_equal(gen.logits[head].data, private.logits[head].data)

    def test_gen_adversary_sends_no_gradient_upstream(self):
        params = build_model(ModelSpec(), seed=1)
        passed = forward(params, collate(CORPUS, 'activation'), heads=['adv0_gender'])
        backward(passed.logits['adv0_gender'].sum())
        for value in params.embedding_values():
            assert_array_equal(value.grad, 0.0)

    def test_per_stream_reversal_scales_each_stream(self):
        batch = collate(CORPUS, 'activation')

        def stream_grads(lam, lam_lexical):
            spec = priv(grl_placement='per-stream', adversaries=(AdversarySpec('gender', lam, lam_lexical),))
            passed = forward(build_model(spec, seed=4), batch, heads=['adv0_gender'])
            backward(passed.logits['adv0_gender'].sum())
            return passed.streams['acoustic'].grad.copy(), passed.streams['lexical'].grad.copy()

        acoustic_half, lexical_full = stream_grads(0.5, 1.0)
        acoustic_full, lexical_same = stream_grads(1.0, 1.0)
        self.assertGreater(np.abs(acoustic_full).sum(), 0.0)
        assert_allclose(acoustic_half, 0.5 * acoustic_full, rtol=0, atol=1e-12)
        assert_array_equal(lexical_full, lexical_same)


class TestCheckpoint(unittest.TestCase):

    def _trained_like(self):
        params = build_model(priv(adversaries=(AdversarySpec('gender', 0.5), AdversarySpec('speaker', 0.5))),
                             seed=9, speakers=[0, 1, 2, 3])
        rng = np.random.default_rng(0)
        for value in params.values():
            value.data = value.data + rng.standard_normal(value.shape) * 1e-3
        return params

    def test_round_trip_is_bit_exact(self):
        params = self._trained_like()
        with tempfile.TemporaryDirectory() as directory:
            first = os.path.join(directory, 'a')
            second = os.path.join(directory, 'b')
            save_checkpoint(params, first)
            loaded = load_checkpoint(first)
            save_checkpoint(loaded, second)
            self.assertEqual(loaded.checksum(), params.checksum())
            self.assertEqual(loaded.speaker_classes, params.speaker_classes)
            for name in ('manifest.json', 'tensors/0000.f64'):
                with open(os.path.join(first, name), 'rb') as f1, open(os.path.join(second, name), 'rb') as f2:
                    self.assertEqual(f1.read(), f2.read())

    def test_manifest_counts_parameters(self):
        params = self._trained_like()
        with tempfile.TemporaryDirectory() as directory:
            save_checkpoint(params, directory)
            with open(os.path.join(directory, 'manifest.json'), encoding='utf-8') as f:
                manifest = json.load(f)
        self.assertEqual(manifest['parameter_count'], params.parameter_count())
        self.assertEqual(sum(int(np.prod(t['shape'])) for t in manifest['tensors']), params.parameter_count())

    def test_truncated_tensor_file(self):
        params = self._trained_like()
        with tempfile.TemporaryDirectory() as directory:
            save_checkpoint(params, directory)
            with open(os.path.join(directory, 'tensors', '0001.f64'), 'r+b') as f:
                f.truncate(16)
            with self.assertRaises(CheckpointError):
                load_checkpoint(directory)

    def test_shape_mismatch(self):
        params = self._trained_like()
        with tempfile.TemporaryDirectory() as directory:
            save_checkpoint(params, directory)
            path = os.path.join(directory, 'manifest.json')
            with open(path, encoding='utf-8') as f:
                manifest = json.load(f)
            manifest['tensors'][0]['shape'] = [1, 1, 1]
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(manifest, f)
            with self.assertRaises(CheckpointError):
                load_checkpoint(directory)

    def test_missing_manifest(self):
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(CheckpointError):
                load_checkpoint(directory)


if __name__ == '__main__':
    unittest.main()
