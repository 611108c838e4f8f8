# corpus_modules/corpus_io.py

import json
import logging
import os

import numpy as np

from errors import DataError
from models.sample import ACOUSTIC_DIM, LEXICAL_DIM, UtteranceSample
from utils import canonical_json

logger = logging.getLogger(__name__)

FEATURE_DTYPE = '<f4'
MANIFEST = 'manifest.json'


def _feature_path(directory, utterance_id, modality):
    return os.path.join(directory, 'features', f'{utterance_id:07d}_{modality}.f32')


def save_corpus(corpus, directory, metadata=None):
    """Write manifest.json plus one little-endian float32 file per utterance and modality"""
    os.makedirs(os.path.join(directory, 'features'), exist_ok=True)
    entries = []
    for sample in corpus:
        for modality in ('acoustic', 'lexical'):
            getattr(sample, modality).astype(FEATURE_DTYPE).tofile(
                _feature_path(directory, sample.utterance_id, modality))
        entries.append(sample.to_dict())
    manifest = {
        'version': 1,
        'dtype': FEATURE_DTYPE,
        'acoustic_dim': ACOUSTIC_DIM,
        'lexical_dim': LEXICAL_DIM,
        'metadata': metadata or {},
        'utterances': entries,
    }
    with open(os.path.join(directory, MANIFEST), 'w', encoding='utf-8') as f:
        f.write(canonical_json(manifest, indent=2))
    logger.info(f"[CORPUS] Saved {len(corpus)} utterances to {directory}")


def _read_features(path, shape):
    if not os.path.exists(path):
        raise DataError(f"Missing feature file: {path}")
    data = np.fromfile(path, dtype=FEATURE_DTYPE)
    if data.size != shape[0] * shape[1]:
        raise DataError(f"{path}: expected {shape[0] * shape[1]} floats, found {data.size}")
    return data.reshape(shape).astype(np.float64)


def load_corpus(directory):
    """Read a corpus directory written by save_corpus"""
    manifest_path = os.path.join(directory, MANIFEST)
    if not os.path.exists(manifest_path):
        raise DataError(f"No corpus manifest at {manifest_path}")
    with open(manifest_path, 'r', encoding='utf-8') as f:
        manifest = json.load(f)
    corpus = []
    for entry in manifest['utterances']:
        uid = entry['utterance_id']
        corpus.append(UtteranceSample(
            acoustic=_read_features(_feature_path(directory, uid, 'acoustic'), entry['acoustic_shape']),
            lexical=_read_features(_feature_path(directory, uid, 'lexical'), entry['lexical_shape']),
            activation=entry['activation'],
            valence=entry['valence'],
            gender=entry['gender'],
            speaker_id=entry['speaker_id'],
            utterance_id=uid,
            ratings=entry.get('ratings', {}),
        ))
    logger.info(f"[CORPUS] Loaded {len(corpus)} utterances from {directory}")
    return corpus
