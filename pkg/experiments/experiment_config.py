# experiments/experiment_config.py

import json
import os
from dataclasses import dataclass, field, fields, replace

from attack_modules.attack_probe import PROBE_GRID
from config import Config
from corpus_modules.corpus_config import GenConfig
from errors import ConfigError, PrivacyLabError
from models.model_spec import MODALITIES, PRIV_LAMBDAS, ModelSpec
from models.sample import TASKS
from training_modules.training_config import TrainConfig
from utils import config_hash

SCENARIOS = ('q1-leakage', 'q2-privacy', 'q3-utility', 'q4-lambda-sweep', 'q5-per-gender',
             'q6-placement', 'q7-membership', 'q7-multi')
BH_FAMILIES = ('scenario', 'metric', 'task')
N_FOLDS = 5


@dataclass
class MembershipConfig:
    select_fraction: float = 0.5
    move_fraction: float = 0.5

    def to_dict(self):
        return {'select_fraction': self.select_fraction, 'move_fraction': self.move_fraction}


@dataclass
class ExperimentConfig:
    """Everything one `experiment` run depends on"""
    scenario: str = 'q2-privacy'
    generator: GenConfig = field(default_factory=GenConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    model: ModelSpec = field(default_factory=ModelSpec)
    lambdas: tuple = None
    modalities: tuple = MODALITIES
    tasks: tuple = TASKS
    grid_search: bool = False
    grid_limit: int = None
    probe_grid: tuple = PROBE_GRID
    membership: MembershipConfig = field(default_factory=MembershipConfig)
    attacker_corpus: dict = None
    bh_family: str = 'scenario'
    alpha: float = 0.05
    master_seed: int = 0
    output_dir: str = None

    def __post_init__(self):
        if self.lambdas is None:
            self.lambdas = PRIV_LAMBDAS if self.scenario == 'q4-lambda-sweep' else (0.5,)
        self.lambdas = tuple(float(v) for v in self.lambdas)
        self.modalities = tuple(self.modalities)
        self.tasks = tuple(self.tasks)
        self.probe_grid = tuple(tuple(int(v) for v in pair) for pair in self.probe_grid)
        if self.output_dir is None:
            self.output_dir = Config.OUTPUT_DIR

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario '{self.scenario}'; choose from {SCENARIOS}")
        if not self.lambdas or any(lam not in PRIV_LAMBDAS for lam in self.lambdas):
            raise ConfigError(f"Lambda sweep must be a non-empty subset of {PRIV_LAMBDAS}, got {self.lambdas}")
        if not self.modalities or any(m not in MODALITIES for m in self.modalities):
            raise ConfigError(f"Modalities must be drawn from {MODALITIES}, got {self.modalities}")
        if not self.tasks or any(t not in TASKS for t in self.tasks):
            raise ConfigError(f"Tasks must be drawn from {TASKS}, got {self.tasks}")
        if self.scenario == 'q6-placement' and 'multimodal' not in self.modalities:
            raise ConfigError("q6-placement compares GRL placements and needs the multimodal model")
        if self.scenario == 'q1-leakage' and len(self.modalities) < 2:
            raise ConfigError("q1-leakage compares modalities and needs at least two of them")
        if self.bh_family not in BH_FAMILIES:
            raise ConfigError(f"Unknown BH family '{self.bh_family}'; choose from {BH_FAMILIES}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.grid_limit is not None and self.grid_limit < 1:
            raise ConfigError("grid_limit must be >= 1")
        if not self.probe_grid:
            raise ConfigError("probe_grid must not be empty")
        for layers, width in self.probe_grid:
            if layers not in (2, 3, 4) or width not in (32, 64):
                raise ConfigError(f"Probe ({layers}, {width}) outside layers {{2,3,4}} x widths {{32,64}}")
        if not (0.0 < self.membership.select_fraction < 1.0 and 0.0 < self.membership.move_fraction < 1.0):
            raise ConfigError("Membership fractions must lie in (0, 1)")
        if self.generator.n_speakers < N_FOLDS * 4 and self.scenario.startswith('q7'):
            raise ConfigError("Membership identification needs at least 4 speakers per fold")
        self.generator.validate()
        self.training.validate()
        self.model.validate()
        if self.attacker_corpus is not None:
            self.attacker_generator()
        return self

    def effective_generator(self):
        """Generator settings with the corpus seed tied to the master seed"""
        return replace(self.generator, seed=self.master_seed)

    def attacker_generator(self):
        """Second-corpus generator for a cross-corpus attacker, or None"""
        if self.attacker_corpus is None:
            return None
        base = self.effective_generator().to_dict()
        base['seed'] = self.master_seed + 1
        base.update(self.attacker_corpus)
        return GenConfig.from_dict(base)

    def with_overrides(self, seed=None, output_dir=None):
        changes = {}
        if seed is not None:
            changes['master_seed'] = int(seed)
        if output_dir is not None:
            changes['output_dir'] = output_dir
        return replace(self, **changes).validate()

    def to_dict(self):
        """Effective configuration; output_dir is excluded so the hash only covers results"""
        return {
            'scenario': self.scenario,
            'generator': self.effective_generator().to_dict(),
            'training': self.training.to_dict(),
            'model': self.model.to_dict(),
            'lambdas': list(self.lambdas),
            'modalities': list(self.modalities),
            'tasks': list(self.tasks),
            'grid_search': self.grid_search,
            'grid_limit': self.grid_limit,
            'probe_grid': [list(pair) for pair in self.probe_grid],
            'membership': self.membership.to_dict(),
            'attacker_corpus': self.attacker_corpus,
            'bh_family': self.bh_family,
            'alpha': self.alpha,
            'master_seed': self.master_seed,
        }

    def config_hash(self):
        return config_hash(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown experiment keys: {sorted(unknown)}")
        data = dict(data)
        try:
            if 'generator' in data:
                data['generator'] = GenConfig.from_dict(data['generator'])
            if 'training' in data:
                data['training'] = TrainConfig.from_dict(data['training'])
            if 'model' in data:
                data['model'] = ModelSpec.from_dict(data['model'])
            if 'membership' in data:
                data['membership'] = MembershipConfig(**data['membership'])
            return cls(**data).validate()
        except PrivacyLabError as e:
            raise ConfigError(str(e))
        except TypeError as e:
            raise ConfigError(f"Malformed experiment config: {e}")


def load_experiment_config(path):
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")
    return ExperimentConfig.from_dict(data)
