# attack_modules/membership_attack.py

import logging

import numpy as np

from attack_modules.attack_probe import PROBE_GRID, represent, train_probe
from attack_modules.privacy_attack import ATTACK_MEMBERSHIP, AttackResult
from corpus_modules.corpus_splits import ROLE_S4, ROLE_S5, ROLE_TRAIN
from errors import DataError, ProtocolError
from stats_modules.metrics import uar
from utils.rng import make_rng

logger = logging.getLogger(__name__)

YES_LABEL = 1
NO_LABEL = 0


def check_mi_consistency(plan, corpus, mi, training_ids):
    """The model must have seen exactly D1 plus the moved-in samples"""
    if plan.folds_with(ROLE_S4) != [mi.s4_fold] or plan.folds_with(ROLE_S5) != [mi.s5_fold]:
        raise ProtocolError(f"MI split folds ({mi.s4_fold}, {mi.s5_fold}) do not match the plan's "
                            f"s4/s5 folds ({plan.folds_with(ROLE_S4)}, {plan.folds_with(ROLE_S5)})")
    expected = {s.utterance_id for s in plan.samples_with(corpus, ROLE_TRAIN)} | mi.moved_ids()
    actual = set(training_ids)
    if actual != expected:
        leaked = sorted(actual & mi.held_out_ids())[:5]
        raise ProtocolError(f"Model training set differs from the MI split: {len(actual - expected)} "
                            f"unexpected, {len(expected - actual)} missing samples"
                            + (f"; held-out samples {leaked} were trained on" if leaked else ""))


def _cap_yes(yes, no_count, seed):
    """Seeded subsample of Yes samples down to the No count"""
    if len(yes) <= no_count:
        return yes
    keep = np.sort(make_rng(seed, 'mi', 'cap').permutation(len(yes))[:no_count])
    return [yes[i] for i in keep]


def _labelled(model, yes, no):
    reps = represent(model, list(yes) + list(no))
    labels = np.array([YES_LABEL] * len(yes) + [NO_LABEL] * len(no), dtype=np.int64)
    return reps, labels


def membership_attack(main_model, corpus, mi, plan, training_ids, cfg=None, seed=0, probe_grid=PROBE_GRID):
    """MI = UAR of a membership probe on the s5 speakers.

    Probe training data: D1 samples and held-out samples of selected s4
    speakers are members (Yes); samples of non-selected s4 speakers are not
    (No). One Yes and one No speaker of s4 validate the probe.
    """
    check_mi_consistency(plan, corpus, mi, training_ids)
    held_out = mi.held_out_ids()
    validation_yes, validation_no = mi.validation_speakers
    s4_selected = set(mi.selected[mi.s4_fold])
    s5_selected = set(mi.selected[mi.s5_fold])
    s4_speakers = set(plan.speakers_in(mi.s4_fold))
    s5_speakers = set(plan.speakers_in(mi.s5_fold))

    yes, no, val_yes, val_no, test_yes, test_no = [], [], [], [], [], []
    d1_speakers = set(plan.speakers_with(ROLE_TRAIN))
    for sample in sorted(corpus, key=lambda s: s.utterance_id):
        speaker = sample.speaker_id
        if speaker in d1_speakers:
            yes.append(sample)
        elif speaker in s4_speakers:
            if speaker in s4_selected and sample.utterance_id not in held_out:
                continue
            member = speaker in s4_selected
            if speaker == validation_yes:
                val_yes.append(sample)
            elif speaker == validation_no:
                val_no.append(sample)
            else:
                (yes if member else no).append(sample)
        elif speaker in s5_speakers:
            if speaker in s5_selected:
                if sample.utterance_id in held_out:
                    test_yes.append(sample)
            else:
                test_no.append(sample)

    if not no or not yes:
        raise ProtocolError("MI probe needs both member and non-member training samples")
    if not val_yes or not val_no:
        raise ProtocolError("MI validation speakers contribute no samples")
    if not test_yes or not test_no:
        raise ProtocolError("Fold s5 needs both member and non-member samples")
    yes = _cap_yes(yes, len(no), seed)

    reps, labels = _labelled(main_model, yes, no)
    val_reps, val_labels = _labelled(main_model, val_yes, val_no)
    try:
        probe = train_probe(reps, labels, probe_grid, cfg, seed, val_reps=val_reps, val_labels=val_labels)
    except DataError as e:
        raise ProtocolError(f"Membership probe cannot be trained: {e}")

    test_reps, test_labels = _labelled(main_model, test_yes, test_no)
    score = uar(probe.predict(test_reps), test_labels, 2)
    logger.info(f"[MI] Probe trained on {len(yes)} Yes / {len(no)} No samples; "
                f"MI on s5 ({len(test_yes)} Yes / {len(test_no)} No) = {score:.4f}")
    return AttackResult(attack=ATTACK_MEMBERSHIP, uar=score, metric=score, probe=probe.to_dict(),
                        n_target=len(test_labels))
