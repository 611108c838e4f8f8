# attack_modules/privacy_attack.py

import logging
from dataclasses import dataclass, field

import numpy as np

from attack_modules.attack_probe import PROBE_GRID, represent, train_probe
from corpus_modules.corpus_splits import ROLE_ATTACKER, ROLE_TRAIN
from errors import DataError, ProtocolError
from stats_modules.metrics import uar

logger = logging.getLogger(__name__)

ATTACK_GENDER = 'gender'
ATTACK_MEMBERSHIP = 'membership'


@dataclass
class AttackResult:
    """Outcome of one attack on one main model"""
    attack: str
    uar: float
    metric: float
    probe: dict = field(default_factory=dict)
    per_fold: list = field(default_factory=list)
    flagged: bool = False
    n_target: int = 0
    key: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'attack': self.attack,
            'uar': self.uar,
            'metric': self.metric,
            'probe': self.probe,
            'per_fold': list(self.per_fold),
            'flagged': self.flagged,
            'n_target': self.n_target,
            'key': dict(self.key),
        }


def _gender_labels(samples):
    return np.array([s.gender_index for s in samples], dtype=np.int64)


def privacy_metric(main_model, corpus, plan, cfg=None, seed=0, probe_grid=PROBE_GRID,
                   attacker_samples=None):
    """P = 1 - UAR of a gender probe trained on D2 representations and scored on D1.

    D1 holds the main model's training speakers, D2 the attacker's; both are
    embedded with the same frozen sub-network. attacker_samples replaces the
    attacker fold with another corpus.
    """
    d1 = plan.samples_with(corpus, ROLE_TRAIN)
    d2 = list(attacker_samples) if attacker_samples is not None else plan.samples_with(corpus, ROLE_ATTACKER)
    if not d1 or not d2:
        raise ProtocolError(f"Plan must provide both D1 ({len(d1)} samples) and D2 ({len(d2)} samples)")
    overlap = {s.speaker_id for s in d1} & {s.speaker_id for s in d2}
    if overlap:
        raise ProtocolError(f"D1 and D2 share speakers {sorted(overlap)}")

    h_d1 = represent(main_model, d1)
    h_d2 = represent(main_model, d2)
    try:
        probe = train_probe(h_d2, _gender_labels(d2), probe_grid, cfg, seed)
    except DataError as e:
        raise ProtocolError(f"Attacker data cannot train a gender probe: {e}")
    score = uar(probe.predict(h_d1), _gender_labels(d1), 2)
    metric = 1.0 - score
    flagged = not 0.0 <= metric <= 0.5
    if flagged:
        logger.warning(f"[ATTACK] Privacy metric {metric:.4f} lies outside [0, 0.5]")
    logger.info(f"[ATTACK] Gender probe UAR on D1 {score:.4f} -> P = {metric:.4f}")
    return AttackResult(attack=ATTACK_GENDER, uar=score, metric=metric, probe=probe.to_dict(),
                        flagged=flagged, n_target=len(d1))
