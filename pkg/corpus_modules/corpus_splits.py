# corpus_modules/corpus_splits.py

import logging
import math
from dataclasses import dataclass, field

from errors import ConfigError, DataError
from utils.rng import make_rng

logger = logging.getLogger(__name__)

ROLE_TRAIN = 'train'
ROLE_ATTACKER = 'attacker'
ROLE_VALIDATION = 'validation'
ROLE_TEST = 'test'
ROLE_S4 = 'mi-s4'
ROLE_S5 = 'mi-s5'

# Role of fold (rotation + i) % 5 + 1 for i = 0..4
LAYOUTS = {
    'standard': (ROLE_TEST, ROLE_VALIDATION, ROLE_ATTACKER, ROLE_TRAIN, ROLE_TRAIN),
    'membership': (ROLE_TRAIN, ROLE_TRAIN, ROLE_VALIDATION, ROLE_S4, ROLE_S5),
}

YES = 'Yes'
NO = 'No'


@dataclass
class SplitPlan:
    """Speaker-independent fold partition plus the role each fold plays"""
    k: int
    fold_of: dict
    roles: dict = field(default_factory=dict)
    layout: str = None
    rotation: int = 0
    seed: int = 0

    def speakers_in(self, fold):
        return sorted(s for s, f in self.fold_of.items() if f == fold)

    def folds_with(self, role):
        return sorted(f for f, r in self.roles.items() if r == role)

    def speakers_with(self, role):
        folds = set(self.folds_with(role))
        return sorted(s for s, f in self.fold_of.items() if f in folds)

    def samples_with(self, corpus, role):
        speakers = set(self.speakers_with(role))
        return [s for s in corpus if s.speaker_id in speakers]

    def fold_sizes(self):
        return {fold: len(self.speakers_in(fold)) for fold in range(1, self.k + 1)}

    def to_dict(self):
        return {
            'k': self.k,
            'layout': self.layout,
            'rotation': self.rotation,
            'seed': self.seed,
            'fold_of': {str(s): f for s, f in sorted(self.fold_of.items())},
            'roles': {str(f): r for f, r in sorted(self.roles.items())},
        }


def assign_roles(k, layout, rotation):
    """fold -> role for one cross-validation rotation"""
    if layout is None:
        return {}
    if layout not in LAYOUTS:
        raise ConfigError(f"Unknown fold layout: {layout}")
    pattern = LAYOUTS[layout]
    if k != len(pattern):
        raise ConfigError(f"Layout '{layout}' needs {len(pattern)} folds, got k={k}")
    return {(rotation + i) % k + 1: role for i, role in enumerate(pattern)}


def make_folds(corpus, k=5, seed=0, layout='standard', rotation=0):
    """Shuffle speakers by seed and deal them round-robin into k folds.

    Speakers are dealt gender by gender, so every fold gets as even a gender
    mix as the speaker counts allow.
    """
    gender_of = {s.speaker_id: s.gender for s in corpus}
    if k < 1 or len(gender_of) < k:
        raise ConfigError(f"Need at least k={k} speakers, got {len(gender_of)}")
    rng = make_rng(seed, 'folds')
    dealt = []
    for gender in sorted(set(gender_of.values())):
        speakers = sorted(s for s, g in gender_of.items() if g == gender)
        dealt.extend(speakers[idx] for idx in rng.permutation(len(speakers)))
    fold_of = {speaker: position % k + 1 for position, speaker in enumerate(dealt)}
    return SplitPlan(k=k, fold_of=fold_of, roles=assign_roles(k, layout, rotation % k),
                     layout=layout, rotation=rotation % k, seed=seed)


@dataclass
class MISplit:
    """Membership-identification assignment for folds s4 and s5"""
    s4_fold: int
    s5_fold: int
    selected: dict
    moved: dict
    held_out: dict
    membership: dict
    validation_speakers: tuple

    def moved_ids(self):
        return {uid for ids in self.moved.values() for uid in ids}

    def held_out_ids(self):
        return {uid for ids in self.held_out.values() for uid in ids}

    def injected_samples(self, corpus):
        """Samples of selected speakers that go into the main training set"""
        moved = self.moved_ids()
        return [s for s in corpus if s.utterance_id in moved]

    def to_dict(self):
        return {
            's4_fold': self.s4_fold,
            's5_fold': self.s5_fold,
            'selected': {str(f): list(v) for f, v in sorted(self.selected.items())},
            'moved': {str(s): list(v) for s, v in sorted(self.moved.items())},
            'held_out': {str(s): list(v) for s, v in sorted(self.held_out.items())},
            'membership': {str(s): v for s, v in sorted(self.membership.items())},
            'validation_speakers': list(self.validation_speakers),
        }


def _single_fold(plan, role):
    folds = plan.folds_with(role)
    if len(folds) != 1:
        raise ConfigError(f"Plan must designate exactly one '{role}' fold, got {folds}")
    return folds[0]


def make_mi_splits(plan, corpus, select_fraction=0.5, move_fraction=0.5, seed=0):
    """Select speakers in s4/s5 and move part of their samples into training.

    Selected speakers are members (Yes); their remaining samples are held out.
    Non-selected speakers are non-members (No). One Yes- and one No-speaker of
    s4 are reserved to validate the attacker.
    """
    if not 0.0 < select_fraction < 1.0 or not 0.0 < move_fraction < 1.0:
        raise ConfigError("select_fraction and move_fraction must lie in (0, 1)")
    s4, s5 = _single_fold(plan, ROLE_S4), _single_fold(plan, ROLE_S5)

    utterances = {}
    for sample in corpus:
        utterances.setdefault(sample.speaker_id, []).append(sample.utterance_id)

    selected, moved, held_out, membership = {}, {}, {}, {}
    for fold in (s4, s5):
        speakers = plan.speakers_in(fold)
        if len(speakers) < 4:
            raise ConfigError(f"Fold {fold} has {len(speakers)} speakers; membership "
                              f"identification needs at least 4")
        n_selected = math.ceil(select_fraction * len(speakers))
        n_selected = min(max(n_selected, 1), len(speakers) - 1)
        rng = make_rng(seed, 'mi', fold)
        chosen = sorted(speakers[i] for i in rng.permutation(len(speakers))[:n_selected])
        selected[fold] = tuple(chosen)
        for speaker in speakers:
            ids = sorted(utterances.get(speaker, []))
            if speaker in chosen:
                if len(ids) < 2:
                    raise DataError(f"Selected speaker {speaker} needs at least 2 samples")
                n_move = min(max(int(math.floor(move_fraction * len(ids))), 1), len(ids) - 1)
                order = make_rng(seed, 'mi', 'move', speaker).permutation(len(ids))
                moved[speaker] = tuple(sorted(ids[i] for i in order[:n_move]))
                held_out[speaker] = tuple(sorted(ids[i] for i in order[n_move:]))
                membership[speaker] = YES
            else:
                if not ids:
                    raise DataError(f"Speaker {speaker} has no samples")
                moved[speaker] = ()
                held_out[speaker] = tuple(ids)
                membership[speaker] = NO

    rng = make_rng(seed, 'mi', 'validation')
    yes_pool = list(selected[s4])
    no_pool = [s for s in plan.speakers_in(s4) if s not in selected[s4]]
    validation = (int(yes_pool[rng.integers(len(yes_pool))]),
                  int(no_pool[rng.integers(len(no_pool))]))
    logger.info(f"[CORPUS] MI split: s4=fold {s4} ({len(selected[s4])} selected), "
                f"s5=fold {s5} ({len(selected[s5])} selected), validation speakers {validation}")
    return MISplit(s4_fold=s4, s5_fold=s5, selected=selected, moved=moved,
                   held_out=held_out, membership=membership, validation_speakers=validation)
