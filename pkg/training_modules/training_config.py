# training_modules/training_config.py

from dataclasses import asdict, dataclass, fields

from errors import ConfigError

CLASS_WEIGHT_MODES = ('balanced', 'uniform')
# strict: a Priv fold with no seed at chance fails; nearest: keep the seed closest to chance
CHANCE_SELECTION_MODES = ('strict', 'nearest')


@dataclass
class TrainConfig:
    """Optimisation, early stopping, model selection and probe settings"""
    max_epochs: int = 50
    patience: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    class_weights: str = 'balanced'
    chance_band: float = 0.05
    chance_selection: str = 'strict'
    seeds: tuple = (0, 1, 2)
    # Attacker probes
    probe_max_epochs: int = 50
    probe_patience: int = 5
    probe_validation_fraction: float = 0.2

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)

    def validate(self):
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if not 0 < self.patience < self.max_epochs:
            raise ConfigError(f"patience must lie in (0, max_epochs), got {self.patience}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 <= self.rmsprop_decay < 1.0:
            raise ConfigError("rmsprop_decay must lie in [0, 1)")
        if self.rmsprop_epsilon <= 0:
            raise ConfigError("rmsprop_epsilon must be > 0")
        if self.class_weights not in CLASS_WEIGHT_MODES:
            raise ConfigError(f"Unknown class weight mode: {self.class_weights}")
        if not 0.0 < self.chance_band <= 0.1:
            raise ConfigError(f"chance_band must lie in (0, 0.1], got {self.chance_band}")
        if self.chance_selection not in CHANCE_SELECTION_MODES:
            raise ConfigError(f"Unknown chance selection mode: {self.chance_selection}")
        if not self.seeds:
            raise ConfigError("At least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"Seeds must be distinct, got {self.seeds}")
        if self.probe_max_epochs < 1 or not 0 < self.probe_patience < self.probe_max_epochs:
            raise ConfigError("Probe epochs/patience are inconsistent")
        if not 0.0 < self.probe_validation_fraction < 1.0:
            raise ConfigError("probe_validation_fraction must lie in (0, 1)")
        return self

    def to_dict(self):
        data = asdict(self)
        data['seeds'] = list(self.seeds)
        return data

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown training keys: {sorted(unknown)}")
        return cls(**data).validate()
