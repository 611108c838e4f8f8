# corpus_modules/corpus_config.py

from dataclasses import asdict, dataclass, fields

from errors import ConfigError

# Likert scales and their binning edges (upper edge inclusive)
RATING_SCALES = {
    '9pt': {'min': 1.0, 'max': 9.0, 'low_max': 4.5, 'mid_max': 5.5},
    '5pt': {'min': 1.0, 'max': 5.0, 'low_max': 2.75, 'mid_max': 3.25},
    '7pt': {'min': 1.0, 'max': 7.0, 'low_max': 3.75, 'mid_max': 4.25},
}

# Length bounds of selected utterances
MIN_SEQ_LEN = 3
MAX_SEQ_LEN = 25

# Amplitude of a planted component at signal strength 1
SIGNAL_SCALE = 1.0

# How strongly each emotion dimension is planted per modality
MODALITY_EMOTION_WEIGHTS = {
    'acoustic': {'activation': 1.0, 'valence': 0.5},
    'lexical': {'activation': 0.5, 'valence': 1.0},
}


@dataclass
class GenConfig:
    """Knobs of the synthetic corpus generator"""
    n_speakers: int = 20
    utterances_per_speaker: int = 30
    gender_signal_acoustic: float = 0.6
    gender_signal_lexical: float = 0.3
    emotion_signal: float = 0.7
    speaker_variance: float = 0.5
    rating_scale: str = '9pt'
    seq_len_range: tuple = (3, 10)
    frames_per_unit: int = 3
    speaker_znorm: bool = False
    seed: int = 0

    def __post_init__(self):
        self.seq_len_range = tuple(int(v) for v in self.seq_len_range)

    def validate(self):
        if self.n_speakers < 2 or self.n_speakers % 2:
            raise ConfigError(f"n_speakers must be even and >= 2, got {self.n_speakers}")
        if self.utterances_per_speaker < 1:
            raise ConfigError("utterances_per_speaker must be >= 1")
        for name in ('gender_signal_acoustic', 'gender_signal_lexical', 'emotion_signal'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.speaker_variance < 0:
            raise ConfigError("speaker_variance must be >= 0")
        if self.rating_scale not in RATING_SCALES:
            raise ConfigError(f"Unknown rating scale: {self.rating_scale}")
        if len(self.seq_len_range) != 2:
            raise ConfigError("seq_len_range must be [min, max]")
        low, high = self.seq_len_range
        if not MIN_SEQ_LEN <= low <= high <= MAX_SEQ_LEN:
            raise ConfigError(f"seq_len_range must lie within [{MIN_SEQ_LEN}, {MAX_SEQ_LEN}], "
                              f"got {self.seq_len_range}")
        if self.frames_per_unit < 1:
            raise ConfigError("frames_per_unit must be >= 1")
        return self

    def to_dict(self):
        data = asdict(self)
        data['seq_len_range'] = list(self.seq_len_range)
        return data

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown generator keys: {sorted(unknown)}")
        return cls(**data).validate()
