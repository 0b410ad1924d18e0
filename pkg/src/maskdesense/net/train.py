"""SGD training loop with momentum, a stepped LR schedule, and mask policies.

Mask policies mirror the three training regimes compared throughout:
``None`` trains on clean images, a Mask trains every batch under one fixed
searched mask, and a BrushRanges trains with a fresh random in-band mask per
batch (coverage level drawn uniformly from the six bands). Batches are drawn
without replacement per iteration from a Philox stream keyed by the config
seed, so a run is bit-reproducible from (seed, config, dataset order).

The LR schedule is expressed in global steps: ``schedule_offset`` and
``schedule_total`` let a caller (the federated simulator) place a chunk of
local iterations inside one long global schedule; the defaults make a plain
run its own schedule.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DatasetError, NumericError
from ..maskgen import RATIO_BANDS, BrushRanges, random_mask_in_band
from ..raster import Mask
from . import ops


@dataclass(frozen=True)
class TrainConfig:
    iterations: int
    batch_size: int = 32
    lr: float = 0.1
    momentum: float = 0.9
    drops: tuple = (0.5, 0.7, 0.9)
    seed: int = 0
    eval_every: int = 0
    schedule_offset: int = 0
    schedule_total: int = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if list(self.drops) != sorted(set(self.drops)) or any(
                not 0.0 < f < 1.0 for f in self.drops):
            raise ValueError("drops must be strictly increasing fractions in (0, 1)")


def lr_at(cfg, step):
    """Learning rate for 0-based local ``step`` under the global schedule."""
    total = cfg.schedule_total
    if total is None:
        total = cfg.schedule_offset + cfg.iterations
    g = cfg.schedule_offset + step
    factor = sum(1 for f in cfg.drops if g >= f * total)
    return cfg.lr / (10.0 ** factor)


def _batch_mask(policy, side, rng):
    """Resolve the mask policy for one batch; returns a Mask or None.

    A tuple mixes policies: each batch picks one element uniformly, so
    (mask, None) alternates a fixed mask with clean batches and
    (mask, ranges) with freshly drawn in-band masks.
    """
    if policy is None:
        return None
    if isinstance(policy, Mask):
        return policy
    if isinstance(policy, BrushRanges):
        band = RATIO_BANDS[int(rng.integers(0, len(RATIO_BANDS)))]
        seed = int(rng.integers(0, 2 ** 63))
        mask, _ = random_mask_in_band(policy, band, side, side, seed)
        return mask
    if isinstance(policy, tuple):
        if not policy:
            raise TypeError("mask policy tuple is empty")
        pick = policy[int(rng.integers(0, len(policy)))]
        if isinstance(pick, tuple):
            raise TypeError("mask policy tuples do not nest")
        return _batch_mask(pick, side, rng)
    raise TypeError(f"mask policy must be None, Mask, BrushRanges, or a tuple "
                    f"of those, got {type(policy)}")


def _check_labels(dataset, classes):
    if len(dataset.labels) == 0:
        raise DatasetError("dataset is empty")
    counts = np.bincount(dataset.labels, minlength=classes)
    if dataset.labels.min() < 0 or dataset.labels.max() >= classes:
        raise DatasetError("labels outside [0, classes)")
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise DatasetError(f"class {int(empty[0])} has no samples")


def train(model, dataset, cfg, mask_policy=None, eval_set=None):
    """Train in place; returns the per-iteration history.

    History entries are {iter, lr, loss} with 1-based iteration numbers, plus
    eval_acc at every ``cfg.eval_every``-th iteration when an eval set is
    given.
    """
    _check_labels(dataset, model.classes)
    n = len(dataset.labels)
    if cfg.batch_size > n:
        raise DatasetError(f"batch_size {cfg.batch_size} exceeds dataset size {n}")
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    params = model.trainable()
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    history = []
    for step in range(cfg.iterations):
        idx = rng.choice(n, size=cfg.batch_size, replace=False)
        x = dataset.images[idx]
        y = dataset.labels[idx]
        mask = _batch_mask(mask_policy, model.input_side, rng)
        if mask is not None:
            x = x * mask.bits.astype(x.dtype)[None, None]
        logits = model.forward(x, "train", mask)
        loss, dlogits = ops.softmax_cross_entropy(logits, y)
        model.backward(dlogits)
        grads = model.grads()
        lr = lr_at(cfg, step)
        for name, p in params.items():
            v = velocity[name]
            v *= cfg.momentum
            v += grads[name]
            p -= (lr * v).astype(p.dtype)
            ops.check_finite(name, p)
        entry = {"iter": step + 1, "lr": lr, "loss": loss}
        if eval_set is not None and cfg.eval_every and (step + 1) % cfg.eval_every == 0:
            entry["eval_acc"] = evaluate(model, eval_set)
        history.append(entry)
    return history


def evaluate(model, dataset, mask=None, batch_size=256):
    """Top-1 accuracy in eval mode; ``mask`` desensitizes the inputs first."""
    n = len(dataset.labels)
    if n == 0:
        raise DatasetError("dataset is empty")
    correct = 0
    for start in range(0, n, batch_size):
        x = dataset.images[start : start + batch_size]
        if mask is not None:
            x = x * mask.bits.astype(x.dtype)[None, None]
        logits = model.forward(x, "eval", mask)
        correct += int((np.argmax(logits, axis=1) ==
                        dataset.labels[start : start + batch_size]).sum())
    return correct / n
