"""JSON run configuration shared by the command-line tools.

Sections: ``rmg`` (brush ranges), ``msm`` (saliency aggregation), ``search``,
``train``, and ``fed``. Any subset may appear in a config file; missing keys
take the defaults below. ``search.ranges``, when present, overrides the
``rmg`` section for the candidate draw only, since mask search typically
wants heavier coverage than per-level training masks.
"""

import copy
import json

from .errors import DataError
from .maskgen import BrushRanges
from .net.train import TrainConfig
from .saliency import MsmConfig
from .search import SearchConfig

# Candidate draws during search use much heavier strokes than training
# masks: the recognition-loss term dominates the objective, so only a pool
# that is already high-coverage yields a chosen mask that hides much.
_SEARCH_RANGES = BrushRanges(
    min_vertices=(6, 10), max_vertices=(8, 14), max_length=(26.0, 40.0),
    max_brush_width=(16.0, 24.0), max_angle=(0.8, 2.8), strokes=(12, 16),
    min_brush_width=(8.0, 12.0),
)

DEFAULTS = {
    "rmg": BrushRanges().to_dict(),
    "msm": {"K": 64, "T": 0.5, "smoothing_radius": 0},
    "search": {"n": 8, "gamma": 1.0, "batch": 512, "seed": 0,
               "ranges": _SEARCH_RANGES.to_dict()},
    "train": {"iters": 300, "batch": 32, "lr": 0.05, "momentum": 0.9,
              "drops": [0.5, 0.7, 0.9], "insertion_point": 3},
    "fed": {"clients": 3, "rounds": 10, "local_iters": 30},
}


def load_config(path=None):
    """Defaults merged with the JSON file at ``path``, validated shallowly."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise DataError(f"config {path} must be a JSON object")
    for section, values in user.items():
        if section not in cfg:
            raise DataError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise DataError(f"config section {section!r} must be an object")
        for key, value in values.items():
            if key not in cfg[section] and not (section == "search" and key == "ranges"):
                raise DataError(f"unknown key {section}.{key}")
            cfg[section][key] = value
    return cfg


def brush_ranges(cfg, for_search=False):
    if for_search and "ranges" in cfg["search"]:
        return BrushRanges.from_dict(cfg["search"]["ranges"])
    return BrushRanges.from_dict(cfg["rmg"])


def msm_config(cfg, **overrides):
    values = {**cfg["msm"], **{k: v for k, v in overrides.items() if v is not None}}
    return MsmConfig(K=int(values["K"]), T=float(values["T"]),
                     smoothing_radius=int(values["smoothing_radius"]))


def search_config(cfg, ranges=None, **overrides):
    values = {**cfg["search"], **{k: v for k, v in overrides.items() if v is not None}}
    if ranges is None:
        ranges = brush_ranges(cfg, for_search=True)
    return SearchConfig(ranges=ranges, n=int(values["n"]), gamma=float(values["gamma"]),
                        batch=int(values["batch"]), seed=int(values["seed"]))


def train_config(cfg, iterations=None, seed=None, **overrides):
    values = {**cfg["train"], **{k: v for k, v in overrides.items() if v is not None}}
    return TrainConfig(
        iterations=int(iterations if iterations is not None else values["iters"]),
        batch_size=int(values["batch"]),
        lr=float(values["lr"]),
        momentum=float(values["momentum"]),
        drops=tuple(values["drops"]),
        seed=int(seed if seed is not None else 0),
    )


def insertion_point(cfg):
    return int(cfg["train"]["insertion_point"])
