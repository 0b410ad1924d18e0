"""Random search for the optimal desensitization mask.

Each candidate draws fresh brush hyper-parameters and a random mask from a
seeded stream (seed = base + 1-based candidate number), merges it with the
critical template so protected pixels stay visible, and is scored by a model
pre-trained on clean images:

    O = F - gamma * masked_ratio

where F is the scorer's mean cross-entropy on a fixed masked batch in eval
mode. Low F means the protected content still recognizes; a high masked
ratio means more pixels are gone; the candidate with the strictly smallest O
wins, first seen winning ties. The report records every candidate so a run
can be audited or re-scored from stored artifacts.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .maskgen import BrushRanges, combine, draw_candidate, masked_ratio
from .metrics import dssim
from .net import ops
from .raster import apply_mask
from .saliency import MsmConfig, binarize


@dataclass(frozen=True)
class SearchConfig:
    ranges: BrushRanges
    n: int = 8
    gamma: float = 1.0
    batch: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


@dataclass
class SearchReport:
    candidates: list
    chosen_index: int
    gamma: float
    batch_indices: list
    template_meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "candidates": self.candidates,
            "chosen_index": self.chosen_index,
            "gamma": self.gamma,
            "batch_indices": self.batch_indices,
            "template_meta": self.template_meta,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(candidates=d["candidates"], chosen_index=d["chosen_index"],
                   gamma=d["gamma"], batch_indices=d["batch_indices"],
                   template_meta=d.get("template_meta", {}))


def score_candidate(scorer, batch, mask, gamma):
    """(F, O) for one candidate mask on a clean-pretrained scorer."""
    images, labels = batch
    if len(labels) == 0:
        raise DataError("scoring batch is empty")
    x = images * mask.bits.astype(images.dtype)[None, None]
    logits = scorer.forward(x, "eval")
    f, _ = ops.softmax_cross_entropy(logits, labels)
    return f, f - gamma * masked_ratio(mask)


def _scoring_batch(dataset, cfg):
    n = len(dataset)
    take = min(cfg.batch, n)
    rng = np.random.Generator(np.random.Philox(key=cfg.seed, counter=1 << 128))
    idx = np.sort(rng.choice(n, size=take, replace=False))
    return idx, (dataset.images[idx], dataset.labels[idx])


def search(cfg, scorer, dataset, template, template_meta=None, score_fn=score_candidate):
    """Run the candidate loop; returns (best mask, SearchReport)."""
    side = dataset.side
    if (template.height, template.width) != (side, side):
        raise DataError(f"template {template.width}x{template.height} vs images {side}x{side}")
    idx, batch = _scoring_batch(dataset, cfg)
    best_o = np.inf
    best_mask = None
    best_index = -1
    records = []
    for i in range(cfg.n):
        seed = cfg.seed + i + 1
        raw, params = draw_candidate(cfg.ranges, side, side, seed)
        candidate = combine(raw, template)
        f, o = score_fn(scorer, batch, candidate, cfg.gamma)
        records.append({
            "index": i,
            "seed": seed,
            "params": params.to_dict(),
            "masked_ratio": masked_ratio(candidate),
            "loss": f,
            "objective": o,
        })
        if o < best_o:
            best_o, best_mask, best_index = o, candidate, i
    report = SearchReport(
        candidates=records,
        chosen_index=best_index,
        gamma=cfg.gamma,
        batch_indices=[int(v) for v in idx],
        template_meta=template_meta or {},
    )
    return best_mask, report


def sweep_threshold(msm, thresholds, cfg, scorer, dataset, corpus_indices=None,
                    downstream=None):
    """Template, searched mask, and privacy score per binarization threshold.

    ``msm`` is the mean saliency map to rebinarize at each T. ``downstream``
    is an optional callback (mask, T) -> dict merged into the row, for
    callers that also want trained-model accuracies. Returns a list of row
    dicts plus the per-T masks and templates for persistence.
    """
    if corpus_indices is None:
        corpus_indices = list(range(min(20, len(dataset))))
    rows, artifacts = [], []
    for t in thresholds:
        mcfg = MsmConfig(K=1, T=t, smoothing_radius=0)
        template = binarize(msm, mcfg)
        mask, report = search(cfg, scorer, dataset, template,
                              template_meta={"T": t, "source": "sweep"})
        scores = [dssim(dataset.image(i), apply_mask(dataset.image(i), mask))
                  for i in corpus_indices]
        row = {
            "T": t,
            "template_kept": int(template.bits.sum()),
            "masked_ratio": masked_ratio(mask),
            "chosen_index": report.chosen_index,
            "mean_dssim": float(np.mean(scores)),
        }
        if downstream is not None:
            row.update(downstream(mask, t))
        rows.append(row)
        artifacts.append({"T": t, "template": template, "mask": mask, "report": report})
    return rows, artifacts
