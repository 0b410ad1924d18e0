"""Identity verification: cosine similarity, threshold calibration, and the
three deployment situations.

Situation 1 compares two desensitized images, situation 2 a clean query
against a desensitized gallery image, situation 3 two clean images. Each
situation calibrates its own decision threshold on a disjoint calibration
split by accuracy maximization and reports accuracy on the remaining pairs.
Situations are evaluated lazily, so a clean-only evaluation never touches
the masking path at all.
"""

import numpy as np

from .errors import NumericError
from .raster import apply_mask

SITUATIONS = ("both_masked", "clean_query", "both_clean")


def cosine_similarity(e1, e2):
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    n1 = np.linalg.norm(e1)
    n2 = np.linalg.norm(e2)
    if n1 == 0.0 or n2 == 0.0:
        raise NumericError("cosine similarity of a zero-norm embedding")
    return float(e1.dot(e2) / (n1 * n2))


def cosine_verify(e1, e2, threshold):
    """Decide same/different identity; returns (same, similarity)."""
    sim = cosine_similarity(e1, e2)
    return sim >= threshold, sim


def calibrate_threshold(similarities, same_flags):
    """Threshold maximizing verification accuracy on labeled similarities.

    Candidates are midpoints between consecutive sorted similarities plus
    outer sentinels; ties prefer the lowest candidate, so the result is
    deterministic.
    """
    sims = np.asarray(similarities, dtype=np.float64)
    same = np.asarray(same_flags, dtype=bool)
    if sims.size == 0:
        raise ValueError("no similarities to calibrate on")
    uniq = np.unique(sims)
    candidates = np.concatenate((
        [uniq[0] - 1.0], (uniq[:-1] + uniq[1:]) / 2.0, [uniq[-1] + 1.0]))
    best_t, best_acc = None, -1.0
    for t in candidates:
        acc = float(((sims >= t) == same).mean())
        if acc > best_acc:
            best_t, best_acc = float(t), acc
    return best_t, best_acc


def _pair_similarities(model, dataset, pairs, mask_query, mask_gallery, mask):
    sims, flags = [], []
    cache = {}

    def emb(idx, masked):
        key = (idx, masked)
        if key not in cache:
            img = dataset.image(idx)
            if masked:
                img = apply_mask(img, mask)
                cache[key] = model.embed(img, mask)
            else:
                cache[key] = model.embed(img)
        return cache[key]

    for i, j, same in pairs:
        sims.append(cosine_similarity(emb(i, mask_query), emb(j, mask_gallery)))
        flags.append(same)
    return np.asarray(sims), np.asarray(flags, dtype=bool)


def eval_situations(model, dataset, pairs, mask, calib_fraction=0.5, seed=0,
                    situations=SITUATIONS):
    """Verification accuracy per situation with per-situation calibration.

    ``pairs`` are (i, j, same) triples into ``dataset``. A seeded shuffle
    splits them into calibration and evaluation parts. Returns a dict
    situation -> {accuracy, threshold, pairs}.
    """
    if len(pairs) < 4:
        raise ValueError("need at least four pairs to calibrate and evaluate")
    order = np.random.Generator(np.random.Philox(key=seed)).permutation(len(pairs))
    n_cal = max(1, int(round(len(pairs) * calib_fraction)))
    if n_cal >= len(pairs):
        n_cal = len(pairs) - 1
    cal = [pairs[k] for k in order[:n_cal]]
    ev = [pairs[k] for k in order[n_cal:]]
    masked_sides = {
        "both_masked": (True, True),
        "clean_query": (False, True),
        "both_clean": (False, False),
    }
    results = {}
    for name in situations:
        mq, mg = masked_sides[name]
        if (mq or mg) and mask is None:
            raise ValueError(f"situation {name} needs a mask")
        cal_sims, cal_flags = _pair_similarities(model, dataset, cal, mq, mg, mask)
        threshold, _ = calibrate_threshold(cal_sims, cal_flags)
        ev_sims, ev_flags = _pair_similarities(model, dataset, ev, mq, mg, mask)
        accuracy = float(((ev_sims >= threshold) == ev_flags).mean())
        results[name] = {
            "accuracy": accuracy,
            "threshold": threshold,
            "pairs": len(ev),
        }
    return results
