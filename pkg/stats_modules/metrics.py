# stats_modules/metrics.py

import numpy as np
from sklearn.metrics import confusion_matrix, recall_score

from errors import DimensionError, MetricError, SpecError
from models.embed_model import predict_batch
from models.sample import GENDERS


def _check_predictions(preds, labels, n_classes):
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise DimensionError(f"{preds.size} predictions but {labels.size} labels")
    if labels.size == 0:
        raise MetricError("No samples to score")
    if np.any(preds < 0) or np.any(labels < 0):
        raise MetricError("Class indices must be >= 0")
    if n_classes is None:
        n_classes = int(max(preds.max(), labels.max())) + 1
    if preds.max() >= n_classes or labels.max() >= n_classes:
        raise MetricError(f"Class index outside [0, {n_classes})")
    return preds, labels, n_classes


class ConfusionMatrix:
    """K x K counts, rows = true class, columns = predicted class.

    Wraps sklearn's confusion_matrix so per-fold matrices can be summed.
    """

    def __init__(self, counts):
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DimensionError(f"Confusion matrix must be square, got {counts.shape}")
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise MetricError("Confusion counts must be non-negative integers")
        self.counts = counts.astype(np.int64)

    @classmethod
    def from_predictions(cls, preds, labels, n_classes=None):
        preds, labels, n_classes = _check_predictions(preds, labels, n_classes)
        return cls(confusion_matrix(labels, preds, labels=np.arange(n_classes)))

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def support(self):
        return self.counts.sum(axis=1)

    def recalls(self):
        """Per-class recall; nan for classes with no true samples"""
        support = self.support()
        with np.errstate(invalid='ignore', divide='ignore'):
            return np.where(support > 0, np.diag(self.counts) / np.maximum(support, 1), np.nan)

    def uar(self, present_only=False):
        support = self.support()
        if not present_only and np.any(support == 0):
            missing = [int(k) for k in np.flatnonzero(support == 0)]
            raise MetricError(f"True classes {missing} have no samples; UAR is undefined")
        if not np.any(support > 0):
            raise MetricError("No samples to score")
        return float(np.nanmean(self.recalls()))

    def __add__(self, other):
        if self.counts.shape != other.counts.shape:
            raise DimensionError("Cannot add confusion matrices of different sizes")
        return ConfusionMatrix(self.counts + other.counts)

    def to_dict(self):
        return {'counts': self.counts.tolist(), 'uar': self.uar(present_only=True)}


def uar(preds, labels, n_classes=None, present_only=False):
    """Mean of per-class recalls.

    Every class in [0, n_classes) must occur among the labels unless
    present_only is set, in which case absent classes are skipped.
    """
    preds, labels, n_classes = _check_predictions(preds, labels, n_classes)
    present = np.unique(labels)
    if not present_only and present.size < n_classes:
        missing = sorted(set(range(n_classes)) - set(present.tolist()))
        raise MetricError(f"True classes {missing} have no samples; UAR is undefined")
    return float(recall_score(labels, preds, labels=present, average='macro', zero_division=0))


def _group_codes(groups):
    groups = np.asarray(groups)
    if groups.dtype.kind in ('U', 'S', 'O'):
        unknown = set(groups.tolist()) - set(GENDERS)
        if unknown:
            raise MetricError(f"Unknown groups: {sorted(unknown)}")
        return np.array([GENDERS.index(g) for g in groups.tolist()], dtype=np.int64)
    return groups.astype(np.int64)


def per_group_uar(preds, labels, groups, n_classes=None):
    """(U(M), U(F)): UAR restricted to each gender's samples"""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    codes = _group_codes(groups)
    if codes.shape != labels.shape:
        raise DimensionError(f"{codes.size} group tags but {labels.size} labels")
    if n_classes is None:
        n_classes = int(max(preds.max(), labels.max())) + 1
    scores = []
    for code, name in enumerate(GENDERS):
        mask = codes == code
        if not np.any(mask):
            raise MetricError(f"Group {name} has no samples")
        try:
            scores.append(uar(preds[mask], labels[mask], n_classes))
        except MetricError as e:
            raise MetricError(f"Group {name}: {e}")
    return tuple(scores)


def leakage(params, val_samples, head=None):
    """UAR of the jointly trained, gradient-stopped gender head on validation data"""
    gender_heads = [h for h in params.head_names() if h.endswith('_gender')]
    if head is None:
        if not gender_heads:
            raise SpecError("Model has no gender head to measure leakage with")
        head = gender_heads[0]
    elif head not in gender_heads:
        raise SpecError(f"'{head}' is not a gender head of this model")
    probs = predict_batch(params, val_samples, head)
    labels = np.array([s.gender_index for s in val_samples], dtype=np.int64)
    return uar(probs.argmax(axis=1), labels, len(GENDERS))
