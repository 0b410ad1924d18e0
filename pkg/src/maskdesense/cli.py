"""Command-line front-end for the desensitization pipeline.

Subcommands cover the full flow: ``datagen`` (bundled synthetic identities),
``gentemplate`` (saliency template), ``genmask``, ``search``, ``desensitize``,
``metrics``, ``train``, ``fedtrain``, ``eval``, and ``report``. Exit codes:
0 success, 1 usage error, 2 malformed or missing data, 3 numeric failure.
"""

import argparse
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from . import data as datamod
from .baselines import gaussian_blur, mosaic
from .errors import DataError, NumericError
from .fedsim import FedConfig, run_federated
from .maskgen import draw_candidate, masked_ratio, random_mask_in_band
from .metrics import dssim, psnr, ssim
from .net import Model, evaluate, load_model, save_model, train
from .raster import apply_mask, load_image, load_mask, save
from .saliency import binarize, build_template, mean_saliency, save_saliency
from .search import SearchReport, search
from .verify import eval_situations


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_jsonl(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(_json_safe(row), sort_keys=True) + "\n")


def _sample_images(dataset, count, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    idx = rng.choice(len(dataset), size=min(count, len(dataset)), replace=False)
    return [dataset.image(int(i)) for i in idx]


def _build_parser():
    top = _Parser(prog="maskdesense", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="write the bundled synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=48)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gentemplate", help="saliency-mean critical template")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--msm-out")
    p.add_argument("--config")
    p.add_argument("--K", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--smoothing", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("genmask", help="one random brush mask")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--band", help="lo,hi masked-ratio band to rejection-sample into")

    p = sub.add_parser("search", help="search the optimal mask")
    p.add_argument("--data", required=True)
    p.add_argument("--scorer", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--template")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("desensitize", help="apply mask, blur, or mosaic")
    p.add_argument("--method", required=True, choices=("mask", "blur", "mosaic"))
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask")
    p.add_argument("--kernel", type=int)

    p = sub.add_parser("metrics", help="ssim/dssim/psnr over image pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--pair", nargs=2, action="append", metavar=("A", "B"),
                   required=True)

    p = sub.add_parser("train", help="train a recognition model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--history")
    p.add_argument("--eval-data")
    p.add_argument("--mask", action="append",
                   help="fixed searched mask; repeat to weight a mixed draw")
    p.add_argument("--per-level", action="store_true",
                   help="fresh random in-band mask per batch")
    p.add_argument("--clean", action="store_true",
                   help="mix clean batches into a masked policy")
    p.add_argument("--fsm", action="store_true")
    p.add_argument("--insertion", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fedtrain", help="federated training simulation")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--history")
    p.add_argument("--eval-data")
    p.add_argument("--mask", help="shared mask every client trains under")
    p.add_argument("--fsm", action="store_true")
    p.add_argument("--insertion", type=int)
    p.add_argument("--clients", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--local-iters", type=int)
    p.add_argument("--shared-client-seed", action="store_true")
    p.add_argument("--parallel", action="store_true",
                   help="train the clients of a round on threads")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="three-situation verification accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="summarize stored JSON artifacts")
    p.add_argument("--out", required=True)
    p.add_argument("artifacts", nargs="+", help="JSON or JSON-lines files")
    return top


def _cmd_datagen(args):
    ds = datamod.synth_dataset(args.classes, args.per_class, args.side, args.seed)
    datamod.save_dataset(ds, args.out)


def _cmd_gentemplate(args):
    cfg = cfgmod.load_config(args.config)
    mcfg = cfgmod.msm_config(cfg, K=args.K, T=args.T, smoothing_radius=args.smoothing)
    model = load_model(args.model)
    dataset = datamod.load_dataset(args.data)
    images = _sample_images(dataset, mcfg.K, args.seed)
    template, msm = build_template(model, images, mcfg)
    save(template, args.out)
    if args.msm_out:
        save_saliency(msm, args.msm_out)


def _cmd_genmask(args, parser):
    cfg = cfgmod.load_config(args.config)
    ranges = cfgmod.brush_ranges(cfg)
    if args.band:
        try:
            lo, hi = (float(v) for v in args.band.split(","))
        except ValueError:
            parser.error("--band must be 'lo,hi' with numeric bounds")
        mask, _ = random_mask_in_band(ranges, (lo, hi), args.width, args.height,
                                      args.seed)
    else:
        mask, _ = draw_candidate(ranges, args.width, args.height, args.seed)
    save(mask, args.out)


def _cmd_search(args):
    cfg = cfgmod.load_config(args.config)
    scfg = cfgmod.search_config(cfg, n=args.n, gamma=args.gamma, seed=args.seed)
    scorer = load_model(args.scorer)
    dataset = datamod.load_dataset(args.data)
    if args.template:
        template = load_mask(args.template)
        meta = {"source": args.template}
    else:
        mcfg = cfgmod.msm_config(cfg, T=args.T)
        images = _sample_images(dataset, mcfg.K, scfg.seed)
        template, _ = build_template(scorer, images, mcfg)
        meta = {"source": "gradient-saliency", "T": mcfg.T, "K": len(images)}
    mask, report = search(scfg, scorer, dataset, template, template_meta=meta)
    save(mask, args.out)
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")


def _cmd_desensitize(args, parser):
    image = load_image(args.infile)
    if args.method == "mask":
        if not args.mask:
            parser.error("--method mask requires --mask")
        out = apply_mask(image, load_mask(args.mask))
    else:
        if not args.kernel:
            parser.error(f"--method {args.method} requires --kernel")
        op = gaussian_blur if args.method == "blur" else mosaic
        out = op(image, args.kernel)
    save(out, args.out)


def _cmd_metrics(args):
    rows = []
    for a_path, b_path in args.pair:
        a, b = load_image(a_path), load_image(b_path)
        s = ssim(a, b)
        rows.append({"a": a_path, "b": b_path, "ssim": s, "dssim": 1.0 - s,
                     "psnr_db": psnr(a, b)})
    finite_psnr = [r["psnr_db"] for r in rows if math.isfinite(r["psnr_db"])]
    corpus = {
        "ssim": float(np.mean([r["ssim"] for r in rows])),
        "dssim": float(np.mean([r["dssim"] for r in rows])),
        "psnr_db": float(np.mean(finite_psnr)) if finite_psnr else None,
    }
    _write_json({"pairs": rows, "corpus_mean": corpus}, args.out)


def _mask_policy(args, parser):
    parts = [load_mask(path) for path in args.mask or []]
    if args.per_level:
        cfg = cfgmod.load_config(args.config)
        parts.append(cfgmod.brush_ranges(cfg))
    if args.clean:
        if not parts:
            parser.error("--clean needs a mask policy to mix with")
        parts.append(None)
    if not parts:
        return None
    return parts[0] if len(parts) == 1 else tuple(parts)


def _cmd_train(args, parser):
    cfg = cfgmod.load_config(args.config)
    dataset = datamod.load_dataset(args.data)
    policy = _mask_policy(args, parser)
    classes = int(dataset.labels.max()) + 1
    insertion = args.insertion if args.insertion else cfgmod.insertion_point(cfg)
    model = Model({"classes": classes, "input_side": dataset.side,
                   "insertion": insertion, "fsm": args.fsm}, seed=args.seed)
    tcfg = cfgmod.train_config(cfg, iterations=args.iters, seed=args.seed)
    eval_set = datamod.load_dataset(args.eval_data) if args.eval_data else None
    if eval_set is not None:
        tcfg = replace(tcfg, eval_every=max(1, tcfg.iterations // 10))
    history = train(model, dataset, tcfg, policy, eval_set)
    save_model(model, args.out)
    if args.history:
        _write_jsonl(history, args.history)


def _cmd_fedtrain(args):
    cfg = cfgmod.load_config(args.config)
    dataset = datamod.load_dataset(args.data)
    fed = cfg["fed"]
    fcfg = FedConfig(
        clients=args.clients or int(fed["clients"]),
        rounds=args.rounds or int(fed["rounds"]),
        local_iters=args.local_iters or int(fed["local_iters"]),
        seed=args.seed,
        mask=load_mask(args.mask) if args.mask else None,
        shared_client_seed=args.shared_client_seed,
        parallel=args.parallel,
    )
    classes = int(dataset.labels.max()) + 1
    insertion = args.insertion if args.insertion else cfgmod.insertion_point(cfg)
    model = Model({"classes": classes, "input_side": dataset.side,
                   "insertion": insertion, "fsm": args.fsm}, seed=args.seed)
    tcfg = cfgmod.train_config(cfg, seed=args.seed)
    eval_set = datamod.load_dataset(args.eval_data) if args.eval_data else None
    history = run_federated(model, dataset, fcfg, tcfg, eval_set)
    save_model(model, args.out)
    if args.history:
        _write_jsonl(history, args.history)


def _cmd_eval(args):
    model = load_model(args.model)
    dataset = datamod.load_dataset(args.data)
    mask = load_mask(args.mask)
    pairs = datamod.sample_pairs(dataset, args.pairs, args.seed)
    results = eval_situations(model, dataset, pairs, mask, seed=args.seed)
    _write_json({"situations": results, "pairs": args.pairs,
                 "mask_ratio": masked_ratio(mask)}, args.out)


def _cmd_report(args):
    summary = {}
    for path in args.artifacts:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read artifact {path}: {exc}") from exc
        try:
            if path.endswith(".jsonl"):
                content = [json.loads(line) for line in text.splitlines() if line.strip()]
            else:
                content = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"artifact {path} is not valid JSON: {exc}") from exc
        summary[path] = content
    _write_json({"artifacts": summary}, args.out)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "datagen":
            _cmd_datagen(args)
        elif args.command == "gentemplate":
            _cmd_gentemplate(args)
        elif args.command == "genmask":
            _cmd_genmask(args, parser)
        elif args.command == "search":
            _cmd_search(args)
        elif args.command == "desensitize":
            _cmd_desensitize(args, parser)
        elif args.command == "metrics":
            _cmd_metrics(args)
        elif args.command == "train":
            _cmd_train(args, parser)
        elif args.command == "fedtrain":
            _cmd_fedtrain(args)
        elif args.command == "eval":
            _cmd_eval(args)
        elif args.command == "report":
            _cmd_report(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
