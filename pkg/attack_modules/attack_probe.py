# attack_modules/attack_probe.py

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.preprocessing import StandardScaler

from autodiff_modules import Value, backward, constant, dense, weighted_cross_entropy
from errors import DataError, DimensionError
from models.embed_model import ModelParams, embed_batch, softmax
from stats_modules.metrics import uar
from training_modules.rmsprop import OptimizerState, rmsprop_step
from training_modules.trainer import EarlyStopping, class_weights
from training_modules.training_config import TrainConfig
from utils.rng import glorot_uniform, make_rng

logger = logging.getLogger(__name__)

# (dense layers, width) combinations tried for every attacker
PROBE_GRID = tuple((layers, width) for layers in (2, 3, 4) for width in (32, 64))


@dataclass
class AttackerProbe:
    """Feedforward classifier over frozen representations"""
    layers: int
    width: int
    scaler: StandardScaler
    weights: list = field(default_factory=list)
    n_classes: int = 2
    val_uar: float = None
    epochs: int = 0

    def _forward(self, reps):
        h = constant(self.scaler.transform(np.asarray(reps, dtype=np.float64)))
        for i, (W, b) in enumerate(self.weights):
            h = dense(h, W, b, 'relu' if i < len(self.weights) - 1 else 'identity')
        return h

    def predict_proba(self, reps):
        return softmax(self._forward(reps).data)

    def predict(self, reps):
        return self.predict_proba(reps).argmax(axis=1)

    def parameters(self):
        return [v for pair in self.weights for v in pair]

    def to_dict(self):
        return {'layers': self.layers, 'width': self.width, 'val_uar': self.val_uar, 'epochs': self.epochs}


def represent(model, samples, batch_size=64):
    """Frozen representations of samples, independent of their order.

    model is ModelParams (its embedding sub-network is used) or any callable
    mapping a sample list to an (N, d) array.
    """
    samples = list(samples)
    if not isinstance(model, ModelParams):
        return np.asarray(model(samples), dtype=np.float64)
    order = sorted(range(len(samples)), key=lambda i: samples[i].utterance_id)
    reps = embed_batch(model, [samples[i] for i in order], batch_size)
    result = np.empty_like(reps)
    result[order] = reps
    return result


def _split(labels, fraction, rng):
    """Stratified (train, val) index split"""
    train_idx, val_idx = [], []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        members = members[rng.permutation(members.size)]
        n_val = min(max(int(round(fraction * members.size)), 1), members.size - 1)
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    return np.sort(np.array(train_idx)), np.sort(np.array(val_idx))


def _init_probe(layers, width, dim, n_classes, scaler, rng):
    weights = []
    n_in = dim
    for i in range(layers):
        n_out = n_classes if i == layers - 1 else width
        W = Value(glorot_uniform(rng, (n_out, n_in), n_in, n_out), name=f'probe/dense{i}/W')
        b = Value(np.zeros(n_out), name=f'probe/dense{i}/b')
        weights.append((W, b))
        n_in = n_out
    return AttackerProbe(layers=layers, width=width, scaler=scaler, weights=weights,
                         n_classes=n_classes)


def _fit(probe, reps, labels, val_reps, val_labels, weights, cfg, rng):
    state = OptimizerState(probe.parameters())
    stopper = EarlyStopping(cfg.probe_patience)
    best = [(W.data.copy(), b.data.copy()) for W, b in probe.weights]
    for epoch in range(1, cfg.probe_max_epochs + 1):
        order = rng.permutation(len(labels))
        for start in range(0, len(labels), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss = weighted_cross_entropy(probe._forward(reps[idx]), labels[idx], weights)
            grads = backward(loss)
            params = probe.parameters()
            rmsprop_step(params, [grads.get(p, np.zeros_like(p.data)) for p in params], state,
                         cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon)
        val_loss = float(weighted_cross_entropy(probe._forward(val_reps), val_labels, weights).data)
        if stopper.update(epoch, val_loss):
            best = [(W.data.copy(), b.data.copy()) for W, b in probe.weights]
        if stopper.should_stop:
            break
    for (W, b), (W_best, b_best) in zip(probe.weights, best):
        W.data, b.data = W_best, b_best
    probe.epochs = stopper.best_epoch
    probe.val_uar = uar(probe.predict(val_reps), val_labels, probe.n_classes, present_only=True)
    return probe


def train_probe(reps, labels, probe_grid=PROBE_GRID, cfg=None, seed=0, val_reps=None, val_labels=None,
                n_classes=2):
    """Fit every probe of the grid and keep the one with the best validation UAR.

    Without an explicit validation set the data is split 80/20, stratified
    by label. The representations are only read, never changed.
    """
    cfg = cfg or TrainConfig()
    reps = np.asarray(reps, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if reps.ndim != 2 or reps.shape[0] != labels.shape[0]:
        raise DimensionError(f"Expected (N, d) representations for {labels.shape[0]} labels, got {reps.shape}")
    if np.unique(labels).size < 2:
        raise DataError("Attacker probe needs at least 2 classes in its training labels")
    if not probe_grid:
        raise DataError("Empty probe grid")

    if val_reps is None:
        counts = np.bincount(labels, minlength=n_classes)
        if np.any(counts[counts > 0] < 2):
            raise DataError("Each class needs at least 2 samples to split off a probe validation set")
        train_idx, val_idx = _split(labels, cfg.probe_validation_fraction, make_rng(seed, 'probe', 'split'))
        reps, val_reps = reps[train_idx], reps[val_idx]
        labels, val_labels = labels[train_idx], labels[val_idx]
    else:
        val_reps = np.asarray(val_reps, dtype=np.float64)
        val_labels = np.asarray(val_labels, dtype=np.int64)
        if val_reps.ndim != 2 or val_reps.shape[1] != reps.shape[1]:
            raise DimensionError(f"Validation representations {val_reps.shape} do not match {reps.shape}")

    scaler = StandardScaler().fit(reps)
    weights = class_weights(labels, n_classes)

    best = None
    for layers, width in probe_grid:
        rng = make_rng(seed, 'probe', layers, width)
        probe = _init_probe(layers, width, reps.shape[1], n_classes, scaler, rng)
        probe = _fit(probe, reps, labels, val_reps, val_labels, weights, cfg, rng)
        logger.debug(f"[ATTACK] probe {layers}x{width}: val UAR {probe.val_uar:.4f} after {probe.epochs} epochs")
        if best is None or probe.val_uar > best.val_uar:
            best = probe
    logger.info(f"[ATTACK] Probe {best.layers}x{best.width} selected, val UAR {best.val_uar:.4f}")
    return best
