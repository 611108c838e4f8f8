# models/sample.py

from dataclasses import dataclass, field

import numpy as np

from errors import DataError

EMOTION_CLASSES = ('low', 'mid', 'high')
GENDERS = ('M', 'F')
TASKS = ('activation', 'valence')
ACOUSTIC_DIM = 40
LEXICAL_DIM = 300


@dataclass
class UtteranceSample:
    """One utterance: MFB-like frames, word-vector sequence, labels and ids"""
    acoustic: np.ndarray
    lexical: np.ndarray
    activation: str
    valence: str
    gender: str
    speaker_id: int
    utterance_id: int
    ratings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.acoustic = np.asarray(self.acoustic, dtype=np.float64)
        self.lexical = np.asarray(self.lexical, dtype=np.float64)
        if self.acoustic.ndim != 2 or self.acoustic.shape[1] != ACOUSTIC_DIM or len(self.acoustic) < 1:
            raise DataError(f"Acoustic frames must be (T>=1, {ACOUSTIC_DIM}), got {self.acoustic.shape}")
        if self.lexical.ndim != 2 or self.lexical.shape[1] != LEXICAL_DIM or len(self.lexical) < 1:
            raise DataError(f"Lexical vectors must be (T>=1, {LEXICAL_DIM}), got {self.lexical.shape}")
        if self.gender not in GENDERS:
            raise DataError(f"Unknown gender: {self.gender}")
        for label in (self.activation, self.valence):
            if label not in EMOTION_CLASSES:
                raise DataError(f"Unknown emotion class: {label}")

    def emotion(self, task):
        """Emotion class for the chosen dimension"""
        if task not in TASKS:
            raise DataError(f"Unknown task: {task}")
        return getattr(self, task)

    def emotion_index(self, task):
        return EMOTION_CLASSES.index(self.emotion(task))

    @property
    def gender_index(self):
        return GENDERS.index(self.gender)

    def with_acoustic(self, acoustic):
        """Copy with replaced acoustic frames"""
        return UtteranceSample(acoustic, self.lexical, self.activation, self.valence,
                               self.gender, self.speaker_id, self.utterance_id, dict(self.ratings))

    def to_dict(self):
        """Metadata for the corpus manifest (features are stored separately)"""
        return {
            'utterance_id': int(self.utterance_id),
            'speaker_id': int(self.speaker_id),
            'gender': self.gender,
            'activation': self.activation,
            'valence': self.valence,
            'ratings': {k: float(v) for k, v in self.ratings.items()},
            'acoustic_shape': list(self.acoustic.shape),
            'lexical_shape': list(self.lexical.shape),
        }
