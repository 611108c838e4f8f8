# corpus_modules/corpus_generator.py

import logging

import numpy as np

from corpus_modules.corpus_binning import bin_rating, latent_rating_params
from corpus_modules.corpus_config import (
    MODALITY_EMOTION_WEIGHTS,
    RATING_SCALES,
    SIGNAL_SCALE,
    GenConfig,
)
from corpus_modules.corpus_normalization import znorm_by_speaker
from models.sample import ACOUSTIC_DIM, LEXICAL_DIM, TASKS, UtteranceSample
from utils.rng import make_rng

logger = logging.getLogger(__name__)


def _orthonormal_directions(rng, dim, count):
    """count orthonormal unit vectors in R^dim (rows)"""
    q, _ = np.linalg.qr(rng.standard_normal((dim, count)))
    return q.T


class CorpusGenerator:
    """Plants gender, emotion and speaker structure into MFB-like and word-vector-like features.

    Each frame/word vector is base noise + speaker offset + gender direction
    + emotion directions. Directions are fixed random orthonormal vectors per
    modality, so the strength of every planted correlation is a config knob.
    """

    def __init__(self, cfg: GenConfig):
        self.cfg = cfg.validate()
        rng = make_rng(cfg.seed, 'corpus', 'directions')
        acoustic = _orthonormal_directions(rng, ACOUSTIC_DIM, 3)
        lexical = _orthonormal_directions(rng, LEXICAL_DIM, 3)
        self.directions = {
            'acoustic': {'gender': acoustic[0], 'activation': acoustic[1], 'valence': acoustic[2]},
            'lexical': {'gender': lexical[0], 'activation': lexical[1], 'valence': lexical[2]},
        }
        self.gender_signal = {
            'acoustic': cfg.gender_signal_acoustic,
            'lexical': cfg.gender_signal_lexical,
        }
        self.center, self.spread = latent_rating_params(cfg.rating_scale)

    def speaker_genders(self):
        """Balanced gender assignment, shuffled by seed"""
        n = self.cfg.n_speakers
        genders = np.array(['M'] * (n // 2) + ['F'] * (n // 2))
        make_rng(self.cfg.seed, 'corpus', 'genders').shuffle(genders)
        return {speaker: str(g) for speaker, g in enumerate(genders)}

    def _ratings(self, rng):
        edges = RATING_SCALES[self.cfg.rating_scale]
        ratings, scores = {}, {}
        for task in TASKS:
            rating = float(np.clip(self.center + self.spread * rng.standard_normal(),
                                   edges['min'], edges['max']))
            ratings[task] = rating
            scores[task] = (rating - self.center) / self.spread
        return ratings, scores

    def _features(self, rng, modality, steps, offset, gender_sign, scores):
        dim = ACOUSTIC_DIM if modality == 'acoustic' else LEXICAL_DIM
        directions = self.directions[modality]
        shift = self.cfg.speaker_variance * offset
        shift = shift + gender_sign * SIGNAL_SCALE * self.gender_signal[modality] * directions['gender']
        for task in TASKS:
            weight = MODALITY_EMOTION_WEIGHTS[modality][task]
            shift = shift + (SIGNAL_SCALE * self.cfg.emotion_signal * weight * scores[task]
                             * directions[task])
        return rng.standard_normal((steps, dim)) + shift

    def generate(self):
        cfg = self.cfg
        genders = self.speaker_genders()
        corpus = []
        low, high = cfg.seq_len_range
        for speaker in range(cfg.n_speakers):
            rng = make_rng(cfg.seed, 'corpus', 'speaker', speaker)
            offsets = {
                'acoustic': rng.standard_normal(ACOUSTIC_DIM),
                'lexical': rng.standard_normal(LEXICAL_DIM),
            }
            gender_sign = 1.0 if genders[speaker] == 'F' else -1.0
            for index in range(cfg.utterances_per_speaker):
                length = int(rng.integers(low, high + 1))
                ratings, scores = self._ratings(rng)
                acoustic = self._features(rng, 'acoustic', length * cfg.frames_per_unit,
                                          offsets['acoustic'], gender_sign, scores)
                lexical = self._features(rng, 'lexical', length, offsets['lexical'],
                                         gender_sign, scores)
                corpus.append(UtteranceSample(
                    acoustic=acoustic,
                    lexical=lexical,
                    activation=bin_rating(ratings['activation'], cfg.rating_scale),
                    valence=bin_rating(ratings['valence'], cfg.rating_scale),
                    gender=genders[speaker],
                    speaker_id=speaker,
                    utterance_id=speaker * cfg.utterances_per_speaker + index,
                    ratings=ratings,
                ))
        logger.info(f"[CORPUS] Generated {len(corpus)} utterances from {cfg.n_speakers} speakers "
                    f"(seed {cfg.seed})")
        if cfg.speaker_znorm:
            corpus = znorm_by_speaker(corpus)
        return corpus


def generate_corpus(cfg: GenConfig):
    """Deterministic synthetic corpus for a generator config"""
    return CorpusGenerator(cfg).generate()
