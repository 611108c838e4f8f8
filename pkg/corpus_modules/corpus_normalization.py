# corpus_modules/corpus_normalization.py

import logging
from collections import defaultdict

import numpy as np
from sklearn.preprocessing import StandardScaler

from errors import DegenerateInputError

logger = logging.getLogger(__name__)

ZERO_VARIANCE = 1e-12


def znorm_by_speaker(corpus):
    """Z-normalize acoustic frames per speaker and dimension; lexical untouched.

    A dimension with zero variance for a speaker is centred and left at scale 1
    (logged as flagged).
    """
    by_speaker = defaultdict(list)
    for sample in corpus:
        by_speaker[sample.speaker_id].append(sample)

    scalers = {}
    for speaker, samples in by_speaker.items():
        frames = np.concatenate([s.acoustic for s in samples], axis=0)
        if len(frames) < 2:
            raise DegenerateInputError(f"Speaker {speaker} has fewer than 2 acoustic frames")
        scaler = StandardScaler().fit(frames)
        flagged = np.flatnonzero(np.sqrt(scaler.var_) < ZERO_VARIANCE)
        if flagged.size:
            logger.warning(f"[CORPUS] Speaker {speaker}: zero-variance dims {flagged.tolist()} "
                           f"centred without scaling")
            scaler.scale_[flagged] = 1.0
        scalers[speaker] = scaler

    normalized = [sample.with_acoustic(scalers[sample.speaker_id].transform(sample.acoustic))
                  for sample in corpus]
    logger.info(f"[CORPUS] Z-normalized acoustic features for {len(scalers)} speakers")
    return normalized
