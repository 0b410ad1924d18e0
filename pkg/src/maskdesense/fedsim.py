"""Single-process simulation of masked federated training.

One round follows the six-step protocol: every client holds a disjoint shard,
desensitizes its batches with the shared mask carried in the config, trains a
clone of the current global model for ``local_iters`` steps, and the server
replaces the global model with the shard-size-weighted average of the client
states before the next round begins.

Clients run sequentially in index order and the average accumulates in the
same order, so a run is bit-reproducible. A parallel mode trains clients on
threads but still aggregates in index order, so it produces the same bits.
Client seeds fold the round and client index into the base seed
(seed + round*clients + client); momentum buffers start fresh each round; the
learning-rate schedule spans the full rounds*local_iters horizon. With one
client and one round this reduces exactly, bit for bit, to a centralized run
of the same seed.
"""

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, NumericError
from .net.train import evaluate, train


@dataclass(frozen=True)
class FedConfig:
    clients: int
    rounds: int
    local_iters: int
    seed: int = 0
    shards: tuple = None  # index tuples per client; None = round robin
    mask: object = None  # shared Mask all clients train under; None = clean
    shared_client_seed: bool = False
    parallel: bool = False

    def __post_init__(self):
        if self.clients < 1 or self.rounds < 1 or self.local_iters < 1:
            raise ValueError("clients, rounds, and local_iters must all be >= 1")


def round_robin_shards(n, clients):
    return tuple(tuple(range(c, n, clients)) for c in range(clients))


def validate_shards(shards, n):
    """Shards must be nonempty, disjoint, and cover range(n)."""
    if len(shards) == 0:
        raise DataError("no shards")
    seen = []
    for c, shard in enumerate(shards):
        if len(shard) == 0:
            raise DataError(f"shard {c} is empty")
        seen.extend(int(i) for i in shard)
    if len(seen) != len(set(seen)):
        raise DataError("shards overlap")
    if sorted(seen) != list(range(n)):
        raise DataError("shards do not cover the dataset exactly")


def fedavg(states, weights):
    """Shard-size-weighted average of model states.

    Accepts Model objects or their state dicts. Sums run in client-index
    order in float64 before the single division, which makes the average of
    identical states exact and a single client an exact identity.
    """
    if len(states) == 0:
        raise DataError("nothing to average")
    if len(weights) != len(states):
        raise DataError("one weight per state required")
    if any(w <= 0 for w in weights):
        raise DataError("weights must be positive")
    descs = [getattr(s, "descriptor", None) for s in states]
    if any(d is not None for d in descs) and any(d != descs[0] for d in descs):
        raise DataError("descriptor mismatch between client states")
    dicts = [s.state() if hasattr(s, "state") else s for s in states]
    keys = list(dicts[0].keys())
    for c, d in enumerate(dicts[1:], start=1):
        if list(d.keys()) != keys:
            raise DataError(f"descriptor mismatch: state {c} names differ")
    total = float(sum(weights))
    out = OrderedDict()
    for k in keys:
        shape = dicts[0][k].shape
        acc = np.zeros(shape, dtype=np.float64)
        for d, w in zip(dicts, weights):
            if d[k].shape != shape:
                raise DataError(f"descriptor mismatch: {k} shapes differ")
            acc += w * d[k].astype(np.float64)
        out[k] = (acc / total).astype(np.float32)
    return out


def client_seed(cfg, rnd, client):
    if cfg.shared_client_seed:
        return cfg.seed + rnd
    return cfg.seed + rnd * cfg.clients + client


def _client_round(local, subset, fed_cfg, train_cfg, rnd, c, total_iters):
    cfg = replace(
        train_cfg,
        iterations=fed_cfg.local_iters,
        seed=client_seed(fed_cfg, rnd, c),
        schedule_offset=rnd * fed_cfg.local_iters,
        schedule_total=total_iters,
        eval_every=0,
    )
    try:
        hist = train(local, subset, cfg, fed_cfg.mask)
    except NumericError as exc:
        raise NumericError(f"divergence in round {rnd + 1}, client {c}: {exc}") from exc
    return local, float(np.mean([h["loss"] for h in hist]))


def run_federated(model, dataset, fed_cfg, train_cfg, eval_set=None):
    """Run the protocol; the model ends as the final global state.

    Returns per-round history entries {round, client_losses, global_acc}.
    The global model is scored on ``eval_set`` after every aggregation; by
    default that is the training set itself, so the history always carries an
    accuracy trace even when no held-out split is at hand.
    """
    n = len(dataset)
    shards = fed_cfg.shards
    if shards is None:
        shards = round_robin_shards(n, fed_cfg.clients)
    if len(shards) != fed_cfg.clients:
        raise DataError(f"{len(shards)} shards for {fed_cfg.clients} clients")
    validate_shards(shards, n)
    if eval_set is None:
        eval_set = dataset
    subsets = [dataset.subset(np.asarray(s)) for s in shards]
    weights = [len(s) for s in shards]
    total_iters = fed_cfg.rounds * fed_cfg.local_iters
    history = []
    for rnd in range(fed_cfg.rounds):
        clones = [model.clone() for _ in range(fed_cfg.clients)]
        if fed_cfg.parallel and fed_cfg.clients > 1:
            with ThreadPoolExecutor(max_workers=fed_cfg.clients) as pool:
                futures = [
                    pool.submit(_client_round, clones[c], subsets[c],
                                fed_cfg, train_cfg, rnd, c, total_iters)
                    for c in range(fed_cfg.clients)
                ]
                # result order follows the submit order, not completion order
                results = [f.result() for f in futures]
        else:
            results = [
                _client_round(clones[c], subsets[c], fed_cfg, train_cfg,
                              rnd, c, total_iters)
                for c in range(fed_cfg.clients)
            ]
        client_states = [r[0] for r in results]
        client_losses = [r[1] for r in results]
        model.load_state(fedavg(client_states, weights))
        history.append({
            "round": rnd + 1,
            "client_losses": client_losses,
            "global_acc": evaluate(model, eval_set),
        })
    return history
