# training_modules/selection.py

import logging
from dataclasses import dataclass, field

import numpy as np

from errors import DataError, DimensionError, EnsembleError, PrivacyLabError, SelectionError
from models.embed_model import predict_batch
from training_modules.trainer import train
from utils.rng import derive_seed

logger = logging.getLogger(__name__)

CHANCE_UAR = 0.5


def gender_head(params):
    """First gender adversary head, or None"""
    for head in params.head_names()[1:]:
        if head.endswith('_gender'):
            return head
    return None


def adversary_val_uar(params, history):
    head = gender_head(params)
    return None if head is None else history.best_val_uar(head)


def within_chance(params, history, band):
    """True when the gender adversary's validation UAR lies in 0.5 +- band"""
    score = adversary_val_uar(params, history)
    if score is None:
        return gender_head(params) is None
    return abs(score - CHANCE_UAR) <= band


def distance_from_chance(candidate):
    score = adversary_val_uar(*candidate)
    return np.inf if score is None else abs(score - CHANCE_UAR)


def chance_filter(candidates, band):
    """(params, history) candidates whose gender adversary is at chance on validation.

    Raises SelectionError naming the nearest candidate when none qualifies.
    """
    admissible = [c for c in candidates if within_chance(c[0], c[1], band)]
    if not admissible:
        nearest = min(candidates, key=distance_from_chance)
        raise SelectionError(
            f"No candidate has adversary UAR within {CHANCE_UAR} +- {band}; nearest is "
            f"{nearest[0].spec.key()} (seed {nearest[1].seed}) at {adversary_val_uar(*nearest)}")
    logger.info(f"[SELECT] {len(admissible)}/{len(candidates)} candidates at chance adversary UAR")
    return admissible


def select_model(candidates, cfg):
    """Pick the (params, history) candidate with the lowest validation emotion loss.

    In Priv mode candidates whose gender adversary is not at chance level on
    validation are discarded first.
    """
    if not candidates:
        raise SelectionError("No candidate models to select from")
    pool = list(candidates)
    if pool[0][0].spec.mode == 'Priv':
        pool = chance_filter(pool, cfg.chance_band)
    return min(pool, key=lambda c: c[1].best_val_emotion_loss)[0]


def chance_indices(candidates, cfg):
    """Indices of the (params, history) seed candidates a Priv fold may report on.

    Gen candidates all pass. When no Priv candidate is at chance, strict mode
    re-raises the SelectionError and nearest mode keeps the closest one.
    """
    candidates = list(candidates)
    if not candidates or candidates[0][0].spec.mode != 'Priv':
        return list(range(len(candidates)))
    try:
        admissible = chance_filter(candidates, cfg.chance_band)
    except SelectionError as e:
        if cfg.chance_selection == 'strict':
            raise
        logger.warning(f"[SELECT] {e}; falling back to the nearest seed")
        admissible = [min(candidates, key=distance_from_chance)]
    kept = {id(params) for params, _ in admissible}
    return [i for i, (params, _) in enumerate(candidates) if id(params) in kept]


def average_probabilities(probabilities):
    """Arithmetic mean of per-seed (N, K) probability arrays and its argmax"""
    stack = np.stack([np.asarray(p, dtype=np.float64) for p in probabilities])
    if stack.ndim != 3:
        raise DimensionError(f"Expected a list of (N, K) arrays, got shape {stack.shape}")
    mean = stack.mean(axis=0)
    return mean, mean.argmax(axis=1)


@dataclass
class EnsembleResult:
    probabilities: np.ndarray
    predictions: np.ndarray
    models: list = field(default_factory=list)
    histories: list = field(default_factory=list)
    seeds: tuple = ()
    member_probabilities: list = field(default_factory=list)

    def restricted(self, indices):
        """The ensemble re-averaged over the seed models at the given indices"""
        if not indices:
            raise SelectionError("Cannot restrict an ensemble to no models")
        members = [self.member_probabilities[i] for i in indices]
        mean, predictions = average_probabilities(members)
        return EnsembleResult(probabilities=mean, predictions=predictions,
                              models=[self.models[i] for i in indices],
                              histories=[self.histories[i] for i in indices],
                              seeds=tuple(self.seeds[i] for i in indices), member_probabilities=members)


def seed_ensemble(spec, train_samples, val_samples, test_samples, cfg, base_seed=0, run_key=(),
                  trainer=train):
    """Train one model per seed and average their softmax outputs on the test samples"""
    if not cfg.seeds:
        raise DataError("Seed ensemble needs at least one seed")
    if not test_samples:
        raise DataError("No test samples to predict")
    models, histories, probabilities = [], [], []
    for seed in cfg.seeds:
        run_seed = derive_seed(base_seed, *run_key, seed)
        try:
            params, history = trainer(spec, train_samples, val_samples, cfg, run_seed)
            probabilities.append(predict_batch(params, test_samples, 'emotion'))
        except PrivacyLabError as e:
            raise EnsembleError(seed, e)
        models.append(params)
        histories.append(history)
    mean, predictions = average_probabilities(probabilities)
    logger.info(f"[TRAINER] Ensembled {len(cfg.seeds)} seeds for {spec.modality}/{spec.task}/{spec.mode}")
    return EnsembleResult(probabilities=mean, predictions=predictions, models=models,
                          histories=histories, seeds=tuple(cfg.seeds),
                          member_probabilities=probabilities)
