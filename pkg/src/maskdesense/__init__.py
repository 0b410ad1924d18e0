"""Mask-based image set desensitization with recognition support.

The pieces, bottom up: raster values and NetPBM I/O, brush-stroke mask
generation, saliency templates, blur/mosaic baselines, SSIM/PSNR metrics, a
self-contained trainable recognition network with a mask-driven feature
gate, random mask search, identity verification, and a federated training
simulator. The ``maskdesense`` command wires them into a pipeline.
"""

from .raster import Image, Mask, apply_mask, downsample_mask_min, load_image, load_mask, save
from .maskgen import (
    BrushParams,
    BrushRanges,
    RATIO_BANDS,
    combine,
    draw_candidate,
    mask_level,
    masked_ratio,
    random_mask,
    random_mask_in_band,
)
from .saliency import MsmConfig, SaliencyMap, binarize, build_template, gradient_saliency, mean_saliency
from .baselines import gaussian_blur, mosaic
from .metrics import dssim, psnr, ssim
from .net import Model, TrainConfig, evaluate, fsm_gate, load_model, save_model, train
from .data import Dataset, load_dataset, sample_pairs, save_dataset, synth_dataset, synth_splits
from .verify import calibrate_threshold, cosine_verify, eval_situations
from .search import SearchConfig, SearchReport, score_candidate, search, sweep_threshold
from .fedsim import FedConfig, fedavg, run_federated

__version__ = "0.1.0"
