# corpus_modules/corpus_batching.py

from dataclasses import dataclass

import numpy as np

from errors import DataError


@dataclass
class Batch:
    """Zero-padded feature tensors with valid lengths and label vectors"""
    acoustic: np.ndarray
    acoustic_lengths: np.ndarray
    lexical: np.ndarray
    lexical_lengths: np.ndarray
    emotion: np.ndarray
    gender: np.ndarray
    speaker: np.ndarray
    utterance_ids: np.ndarray

    def __len__(self):
        return len(self.utterance_ids)


def _pad(sequences):
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    padded = np.zeros((len(sequences), lengths.max(), sequences[0].shape[1]))
    for row, sequence in enumerate(sequences):
        padded[row, :len(sequence)] = sequence
    return padded, lengths


def collate(samples, task, speaker_index=None):
    """Stack samples into a Batch.

    speaker_index maps speaker id -> class index for a speaker adversary;
    speakers it does not cover get -1.
    """
    if not samples:
        raise DataError("Cannot collate an empty batch")
    acoustic, acoustic_lengths = _pad([s.acoustic for s in samples])
    lexical, lexical_lengths = _pad([s.lexical for s in samples])
    speaker_index = speaker_index or {}
    return Batch(
        acoustic=acoustic,
        acoustic_lengths=acoustic_lengths,
        lexical=lexical,
        lexical_lengths=lexical_lengths,
        emotion=np.array([s.emotion_index(task) for s in samples], dtype=np.int64),
        gender=np.array([s.gender_index for s in samples], dtype=np.int64),
        speaker=np.array([speaker_index.get(s.speaker_id, -1) for s in samples], dtype=np.int64),
        utterance_ids=np.array([s.utterance_id for s in samples], dtype=np.int64),
    )


def iter_batches(samples, batch_size, rng=None):
    """Yield consecutive slices, shuffled first when an rng is given"""
    order = np.arange(len(samples)) if rng is None else rng.permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        yield [samples[i] for i in order[start:start + batch_size]]
