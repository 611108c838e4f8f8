# training_modules/trainer.py

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from autodiff_modules import backward, weighted_cross_entropy
from corpus_modules.corpus_batching import collate, iter_batches
from errors import DataError, MetricError
from models.embed_model import build_model, forward
from models.sample import EMOTION_CLASSES, GENDERS
from stats_modules.metrics import uar
from training_modules.rmsprop import OptimizerState, rmsprop_step
from utils import canonical_json
from utils.rng import make_rng

logger = logging.getLogger(__name__)


def class_weights(labels, n_classes, mode='balanced'):
    """Inverse class frequency scaled so the per-sample mean weight is 1: w_k = n / (K c_k)"""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=n_classes)[:n_classes]
    if np.any(counts == 0):
        missing = [int(k) for k in np.flatnonzero(counts == 0)]
        raise DataError(f"Classes {missing} have no training samples")
    if mode == 'uniform':
        return np.ones(n_classes)
    return labels.size / (n_classes * counts.astype(np.float64))


def head_labels(batch, params, head):
    """Label vector a head is trained against"""
    if head == 'emotion':
        return batch.emotion
    target = params.spec.adversaries[params.adversary_index(head)].target
    labels = batch.gender if target == 'gender' else batch.speaker
    if np.any(labels < 0):
        raise DataError(f"Batch has samples without {target} labels for head '{head}'")
    return labels


def loss_terms(batch, params, weights=None, heads=None):
    """Per-head weighted cross-entropy Values and the forward pass that produced them"""
    if len(batch) == 0:
        raise DataError("Cannot compute a loss on an empty batch")
    passed = forward(params, batch, heads)
    terms = {}
    for head, logits in passed.logits.items():
        w = (weights or {}).get(head)
        if w is None:
            w = np.ones(params.head_size(head))
        terms[head] = weighted_cross_entropy(logits, head_labels(batch, params, head), w)
    return terms, passed


def joint_loss(batch, params, weights=None, return_terms=False):
    """chi_emotion + sum_i chi_adv_i; each GRL flips its adversary's gradient into theta_M.

    With return_terms the per-head losses come back alongside the total.
    """
    terms, _ = loss_terms(batch, params, weights)
    total = None
    for head in params.head_names():
        total = terms[head] if total is None else total + terms[head]
    return (total, terms) if return_terms else total


class EarlyStopping:
    """Track the best validation loss; stop after `patience` epochs without improvement"""

    def __init__(self, patience):
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = None
        self.wait = 0

    def update(self, epoch, loss):
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.wait = 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self):
        return self.wait >= self.patience


@dataclass
class EpochRecord:
    epoch: int
    train_loss: dict
    val_loss: dict
    val_uar: dict

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainHistory:
    seed: int
    spec_key: str
    records: list = field(default_factory=list)
    best_epoch: int = None
    stop_reason: str = None

    @property
    def best(self):
        return self.records[self.best_epoch - 1]

    @property
    def best_val_emotion_loss(self):
        return self.best.val_loss['emotion']

    def best_val_uar(self, head):
        return self.best.val_uar.get(head)

    def to_dict(self):
        return {
            'seed': self.seed,
            'spec_key': self.spec_key,
            'best_epoch': self.best_epoch,
            'stop_reason': self.stop_reason,
            'records': [r.to_dict() for r in self.records],
        }

    def to_jsonl(self):
        """One JSON object per epoch"""
        lines = []
        for record in self.records:
            line = record.to_dict()
            line.update(seed=self.seed, best=record.epoch == self.best_epoch)
            lines.append(canonical_json(line))
        return '\n'.join(lines) + ('\n' if lines else '')


def training_weights(params, samples, cfg):
    """Class weights for every head from the training partition"""
    spec = params.spec
    weights = {'emotion': class_weights([s.emotion_index(spec.task) for s in samples],
                                        len(EMOTION_CLASSES), cfg.class_weights)}
    index = {s: i for i, s in enumerate(params.speaker_classes)}
    for head, adversary in zip(params.head_names()[1:], spec.adversaries):
        if adversary.target == 'gender':
            labels = [s.gender_index for s in samples]
            weights[head] = class_weights(labels, len(GENDERS), cfg.class_weights)
        else:
            labels = [index[s.speaker_id] for s in samples]
            weights[head] = class_weights(labels, len(index), cfg.class_weights)
    return weights


def evaluate(params, samples, weights, batch_size=64):
    """Validation losses and UARs per head; speaker heads only score known speakers"""
    spec = params.spec
    index = {s: i for i, s in enumerate(params.speaker_classes)}
    heads = [h for h in params.head_names()
             if h == 'emotion' or spec.adversaries[params.adversary_index(h)].target == 'gender']
    totals = {h: 0.0 for h in heads}
    predictions = {h: [] for h in heads}
    labels = {h: [] for h in heads}
    for chunk in iter_batches(samples, batch_size):
        batch = collate(chunk, spec.task, index)
        terms, passed = loss_terms(batch, params, weights, heads)
        for head in heads:
            totals[head] += float(terms[head].data) * len(batch)
            predictions[head].append(passed.logits[head].data.argmax(axis=1))
            labels[head].append(head_labels(batch, params, head))
    losses = {h: totals[h] / len(samples) for h in heads}
    scores = {}
    for head in heads:
        try:
            scores[head] = uar(np.concatenate(predictions[head]), np.concatenate(labels[head]),
                               params.head_size(head), present_only=True)
        except MetricError:
            scores[head] = None
    return losses, scores


def _check_partitions(train_samples, val_samples):
    if not train_samples:
        raise DataError("Training partition is empty")
    if not val_samples:
        raise DataError("Validation partition is empty")
    overlap = {s.speaker_id for s in train_samples} & {s.speaker_id for s in val_samples}
    if overlap:
        raise DataError(f"Train and validation partitions share speakers {sorted(overlap)}")


def train(spec, train_samples, val_samples, cfg, seed):
    """Train one model with early stopping on the validation emotion loss.

    Returns the best-epoch weights and the full TrainHistory.
    """
    cfg.validate()
    _check_partitions(train_samples, val_samples)
    params = build_model(spec, seed, speakers={s.speaker_id for s in train_samples})
    weights = training_weights(params, train_samples, cfg)
    speaker_index = {s: i for i, s in enumerate(params.speaker_classes)}

    state = OptimizerState(params.values())
    history = TrainHistory(seed=seed, spec_key=spec.key())
    stopper = EarlyStopping(cfg.patience)
    best_snapshot = params.snapshot()
    shuffle_rng = make_rng(seed, 'shuffle')
    values = params.values()

    for epoch in range(1, cfg.max_epochs + 1):
        train_totals = {}
        for chunk in iter_batches(train_samples, cfg.batch_size, shuffle_rng):
            batch = collate(chunk, spec.task, speaker_index)
            total, terms = joint_loss(batch, params, weights, return_terms=True)
            for head in params.head_names():
                train_totals[head] = train_totals.get(head, 0.0) + float(terms[head].data) * len(batch)
            grads = backward(total)
            rmsprop_step(values, [grads.get(v, np.zeros_like(v.data)) for v in values], state,
                         cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon)

        val_loss, val_uar = evaluate(params, val_samples, weights)
        record = EpochRecord(epoch=epoch,
                             train_loss={h: v / len(train_samples) for h, v in train_totals.items()},
                             val_loss=val_loss, val_uar=val_uar)
        history.records.append(record)
        if stopper.update(epoch, val_loss['emotion']):
            best_snapshot = params.snapshot()
        logger.debug(f"[TRAINER] seed={seed} epoch={epoch} train={record.train_loss['emotion']:.4f} "
                     f"val={val_loss['emotion']:.4f} val_uar={val_uar}")
        if stopper.should_stop:
            history.stop_reason = 'patience'
            break
    else:
        history.stop_reason = 'max_epochs'

    params.restore(best_snapshot)
    history.best_epoch = stopper.best_epoch
    logger.info(f"[TRAINER] {spec.modality}/{spec.task}/{spec.mode} seed={seed}: best epoch "
                f"{history.best_epoch} of {len(history.records)} ({history.stop_reason}), "
                f"val emotion loss {history.best_val_emotion_loss:.4f}")
    return params, history
