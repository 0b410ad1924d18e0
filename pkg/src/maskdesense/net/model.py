"""The small residual recognition network and its mask-driven feature gate.

The backbone is a stem convolution plus four stride-2 residual blocks
(default widths 16/32/64/128), global average pooling into an embedding, and
a linear classification head. The gate sub-network maps the full-resolution
mask through stride-2 conv/batchnorm/relu modules down to the feature
resolution of a chosen insertion stage, squashes to (0,1) with a sigmoid,
and rescales only the masked feature positions:

    FS = g * (1 - m_resized) + m_resized
    out = feature * FS          (FS broadcast over batch and channels)

``m_resized`` is the binary min-pooled mask, so FS is exactly 1 wherever the
receptive area was fully visible and the gated feature is bit-identical to
the ungated one there. Layers carry their parameters and gradient slots;
construction order fixes the canonical state ordering used by checkpoints
and federated averaging.
"""

import math
from collections import OrderedDict

import numpy as np

from ..errors import DataError, SizeMismatchError
from ..raster import downsample_mask_min
from . import ops

DEFAULT_WIDTHS = (16, 32, 64, 128)


class Conv:
    def __init__(self, cin, cout, k, stride, pad, rng, bias=False, dtype=np.float32):
        std = math.sqrt(2.0 / (cin * k * k))
        self.w = rng.normal(0.0, std, size=(cout, cin, k, k)).astype(dtype)
        self.b = np.zeros(cout, dtype=dtype) if bias else None
        self.stride, self.pad = stride, pad
        self.gw = self.gb = None
        self._cache = None

    def forward(self, x, mode=None):
        y, self._cache = ops.conv2d_forward(x, self.w, self.b, self.stride, self.pad)
        return y

    def backward(self, dy):
        dx, self.gw, db = ops.conv2d_backward(dy, self._cache)
        if self.b is not None:
            self.gb = db
        return dx

    def state_items(self):
        yield "w", self.w
        if self.b is not None:
            yield "b", self.b

    def grad_items(self):
        yield "w", self.gw
        if self.b is not None:
            yield "b", self.gb

    def reset_grads(self):
        self.gw = self.gb = None


class BatchNorm:
    def __init__(self, channels, dtype=np.float32):
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.ggamma = self.gbeta = None
        self._cache = None

    def forward(self, x, mode):
        y, self._cache, self.running_mean, self.running_var = ops.batchnorm_forward(
            x, self.gamma, self.beta, self.running_mean, self.running_var, mode)
        return y

    def backward(self, dy):
        dx, self.ggamma, self.gbeta = ops.batchnorm_backward(dy, self._cache)
        return dx

    def state_items(self):
        yield "gamma", self.gamma
        yield "beta", self.beta
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var

    def grad_items(self):
        yield "gamma", self.ggamma
        yield "beta", self.gbeta

    def reset_grads(self):
        self.ggamma = self.gbeta = None


class ReLU:
    def __init__(self):
        self._cache = None

    def forward(self, x, mode=None):
        y, self._cache = ops.relu_forward(x)
        return y

    def backward(self, dy):
        return ops.relu_backward(dy, self._cache)


class FC:
    def __init__(self, cin, cout, rng=None, dtype=np.float32):
        # zero init: an untrained head yields a uniform softmax, which gives
        # training comparisons a known starting loss of ln(classes)
        self.w = np.zeros((cout, cin), dtype=dtype)
        self.b = np.zeros(cout, dtype=dtype)
        self.gw = self.gb = None
        self._cache = None

    def forward(self, x, mode=None):
        y, self._cache = ops.fc_forward(x, self.w, self.b)
        return y

    def backward(self, dy):
        dx, self.gw, self.gb = ops.fc_backward(dy, self._cache)
        return dx

    def state_items(self):
        yield "w", self.w
        yield "b", self.b

    def grad_items(self):
        yield "w", self.gw
        yield "b", self.gb

    def reset_grads(self):
        self.gw = self.gb = None


class ResidualBlock:
    """Stride-2 basic block with a projecting 1x1 shortcut."""

    def __init__(self, cin, cout, rng, dtype=np.float32):
        self.conv1 = Conv(cin, cout, 3, 2, 1, rng, dtype=dtype)
        self.bn1 = BatchNorm(cout, dtype=dtype)
        self.relu1 = ReLU()
        self.conv2 = Conv(cout, cout, 3, 1, 1, rng, dtype=dtype)
        self.bn2 = BatchNorm(cout, dtype=dtype)
        self.sconv = Conv(cin, cout, 1, 2, 0, rng, dtype=dtype)
        self.sbn = BatchNorm(cout, dtype=dtype)
        self.relu_out = ReLU()

    def forward(self, x, mode):
        main = self.bn2.forward(self.conv2.forward(
            self.relu1.forward(self.bn1.forward(self.conv1.forward(x), mode))), mode)
        short = self.sbn.forward(self.sconv.forward(x), mode)
        return self.relu_out.forward(main + short)

    def backward(self, dy):
        ds = self.relu_out.backward(dy)
        dmain = self.conv1.backward(self.bn1.backward(self.relu1.backward(
            self.conv2.backward(self.bn2.backward(ds)))))
        dshort = self.sconv.backward(self.sbn.backward(ds))
        return dmain + dshort

    def sublayers(self):
        return (("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2),
                ("bn2", self.bn2), ("short.conv", self.sconv), ("short.bn", self.sbn))


class FsmModule:
    """Mask-to-gate sub-network for one insertion point.

    log2(input_side / feature_side) stride-2 conv+bn+relu modules bring the
    mask to feature resolution; a biased 1x1 projection and a sigmoid produce
    the per-position gate in (0,1).
    """

    def __init__(self, input_side, feature_side, rng, width=8, dtype=np.float32):
        if input_side % feature_side != 0:
            raise SizeMismatchError("feature side must divide the input side")
        ratio = input_side // feature_side
        levels = int(round(math.log2(ratio)))
        if 2 ** levels != ratio or levels < 1:
            raise SizeMismatchError("input/feature side ratio must be a power of two")
        self.input_side = input_side
        self.feature_side = feature_side
        self.dtype = dtype
        self.mods = []
        cin = 1
        for _ in range(levels):
            self.mods.append((Conv(cin, width, 3, 2, 1, rng, dtype=dtype),
                              BatchNorm(width, dtype=dtype), ReLU()))
            cin = width
        self.out = Conv(width, 1, 1, 1, 0, rng, bias=True, dtype=dtype)
        # Positive projection bias opens the gate near 1 at the start, so an
        # untrained gate barely perturbs the features it scales; training can
        # then close it selectively where masked positions carry junk.
        self.out.b[:] = 3.0
        self._gate_cache = None
        self._sig_cache = None

    def forward(self, mask_arr, mode):
        h = mask_arr
        for conv, bn, relu in self.mods:
            h = relu.forward(bn.forward(conv.forward(h), mode))
        g, sig_cache = ops.sigmoid_forward(self.out.forward(h))
        self._sig_cache = sig_cache
        return g

    def backward_net(self, dg):
        dh = self.out.backward(ops.sigmoid_backward(dg, self._sig_cache))
        for conv, bn, relu in reversed(self.mods):
            dh = conv.backward(bn.backward(relu.backward(dh)))
        return dh

    def gate(self, mask, feature, mode):
        """Apply FS = g*(1-m_resized)+m_resized to the feature tensor."""
        s = self.feature_side
        if (mask.height, mask.width) != (self.input_side, self.input_side):
            raise SizeMismatchError(
                f"mask {mask.width}x{mask.height} vs network input side {self.input_side}")
        if feature.shape[2:] != (s, s):
            raise SizeMismatchError(
                f"feature {feature.shape} vs insertion side {s}")
        mr = downsample_mask_min(mask, s, s).bits.astype(self.dtype)[None, None]
        mask_arr = mask.bits.astype(self.dtype)[None, None]
        g = self.forward(mask_arr, mode)
        fs = g * (1.0 - mr) + mr
        out = feature * fs
        self._gate_cache = (feature, fs, mr)
        return out

    def gate_backward(self, dy):
        feature, fs, mr = self._gate_cache
        dfeature = dy * fs
        dfs = (dy * feature).sum(axis=(0, 1), keepdims=True)
        self.backward_net(dfs * (1.0 - mr))
        return dfeature

    def sublayers(self):
        for i, (conv, bn, _) in enumerate(self.mods, start=1):
            yield f"mod{i}.conv", conv
            yield f"mod{i}.bn", bn
        yield "out", self.out


def fsm_gate(fsm, mask, feature, mode="eval"):
    """Functional view of the gate: returns the rescaled feature tensor."""
    return fsm.gate(mask, feature, mode)


def _normalize_descriptor(d):
    known = {"input_side", "in_channels", "widths", "classes", "insertion",
             "fsm", "fsm_width"}
    extra = set(d) - known
    if extra:
        raise DataError(f"unknown descriptor keys: {sorted(extra)}")
    desc = {
        "input_side": int(d.get("input_side", 64)),
        "in_channels": int(d.get("in_channels", 1)),
        "widths": [int(w) for w in d.get("widths", DEFAULT_WIDTHS)],
        "classes": int(d["classes"]),
        "insertion": int(d.get("insertion", 3)),
        "fsm": bool(d.get("fsm", False)),
        "fsm_width": int(d.get("fsm_width", 8)),
    }
    if desc["input_side"] % 16 != 0 or desc["input_side"] < 16:
        raise DataError("input_side must be a positive multiple of 16")
    if len(desc["widths"]) != 4:
        raise DataError("widths must list four stage widths")
    if desc["classes"] < 2:
        raise DataError("need at least two classes")
    if not 1 <= desc["insertion"] <= 4:
        raise DataError("insertion must be one of 1..4")
    if desc["in_channels"] not in (1, 3):
        raise DataError("in_channels must be 1 or 3")
    return desc


class Model:
    """The recognition network: parameters, forward/backward, embeddings."""

    def __init__(self, descriptor, seed=0):
        self.descriptor = _normalize_descriptor(descriptor)
        d = self.descriptor
        rng = np.random.Generator(np.random.Philox(key=seed))
        widths = d["widths"]
        self.stem_conv = Conv(d["in_channels"], widths[0], 3, 1, 1, rng)
        self.stem_bn = BatchNorm(widths[0])
        self.stem_relu = ReLU()
        self.blocks = []
        cin = widths[0]
        for wd in widths:
            self.blocks.append(ResidualBlock(cin, wd, rng))
            cin = wd
        self.head = FC(widths[3], d["classes"])
        # the gate net is built last so backbone init matches a gate-free
        # model constructed from the same seed
        if d["fsm"]:
            side = d["input_side"] // (2 ** d["insertion"])
            self.fsm = FsmModule(d["input_side"], side, rng, width=d["fsm_width"])
        else:
            self.fsm = None
        self._pool_cache = None
        self._gated = False

    @property
    def has_fsm(self):
        return self.fsm is not None

    @property
    def classes(self):
        return self.descriptor["classes"]

    @property
    def input_side(self):
        return self.descriptor["input_side"]

    def _check_input(self, x):
        d = self.descriptor
        if x.ndim != 4 or x.shape[1] != d["in_channels"] or \
                x.shape[2] != d["input_side"] or x.shape[3] != d["input_side"]:
            raise SizeMismatchError(
                f"batch shape {x.shape} does not match descriptor "
                f"(N, {d['in_channels']}, {d['input_side']}, {d['input_side']})")

    def features(self, x, mode="eval", mask=None):
        """Run through the backbone up to the embedding (head bypassed)."""
        self._check_input(x)
        # drop gradients from any earlier step; layers skipped this pass (the
        # gate net on an unmasked batch) must read back as zero, not stale
        for _, layer in self._named_layers():
            layer.reset_grads()
        h = self.stem_relu.forward(self.stem_bn.forward(self.stem_conv.forward(x), mode))
        self._gated = False
        for k, block in enumerate(self.blocks, start=1):
            h = block.forward(h, mode)
            if (k == self.descriptor["insertion"] and self.fsm is not None
                    and mask is not None):
                h = self.fsm.gate(mask, h, mode)
                self._gated = True
        emb, self._pool_cache = ops.global_avgpool_forward(h)
        return emb

    def forward(self, x, mode="train", mask=None):
        return self.head.forward(self.features(x, mode, mask))

    def backward(self, dlogits):
        """Propagate to the input; every layer stores its parameter grads."""
        demb = self.head.backward(dlogits)
        dh = ops.global_avgpool_backward(demb, self._pool_cache)
        for k in range(len(self.blocks), 0, -1):
            if k == self.descriptor["insertion"] and self._gated:
                dh = self.fsm.gate_backward(dh)
            dh = self.blocks[k - 1].backward(dh)
        return self.stem_conv.backward(self.stem_bn.backward(self.stem_relu.backward(dh)))

    def embed(self, image, mask=None):
        """Embedding vector of one image (eval mode, deterministic)."""
        x = image.chw()[None]
        return self.features(x, "eval", mask)[0]

    def input_gradient(self, image):
        """d(max logit)/d(input) for saliency, eval mode, shape (C, H, W)."""
        x = image.chw()[None]
        logits = self.forward(x, "eval")
        dlogits = np.zeros_like(logits)
        dlogits[0, int(np.argmax(logits[0]))] = 1.0
        return self.backward(dlogits)[0]

    def _named_layers(self):
        yield "stem.conv", self.stem_conv
        yield "stem.bn", self.stem_bn
        for i, block in enumerate(self.blocks, start=1):
            for sub, layer in block.sublayers():
                yield f"stage{i}.{sub}", layer
        yield "head", self.head
        if self.fsm is not None:
            for sub, layer in self.fsm.sublayers():
                yield f"fsm.{sub}", layer

    def state(self):
        """Ordered name -> array mapping of parameters and running stats."""
        out = OrderedDict()
        for prefix, layer in self._named_layers():
            for suffix, arr in layer.state_items():
                out[f"{prefix}.{suffix}"] = arr
        return out

    def grads(self):
        """Ordered name -> gradient mapping matching trainable().

        Entries for layers the last pass never reached are zero arrays.
        """
        params = self.trainable()
        out = OrderedDict()
        for prefix, layer in self._named_layers():
            for suffix, arr in layer.grad_items():
                name = f"{prefix}.{suffix}"
                out[name] = arr if arr is not None else np.zeros_like(params[name])
        return out

    def trainable(self):
        """Ordered name -> parameter mapping, excluding running stats."""
        out = OrderedDict()
        for prefix, layer in self._named_layers():
            for suffix, arr in layer.state_items():
                if not suffix.startswith("running_"):
                    out[f"{prefix}.{suffix}"] = arr
        return out

    def load_state(self, mapping):
        state = self.state()
        missing = [k for k in state if k not in mapping]
        if missing:
            raise DataError(f"state is missing entries, first: {missing[0]}")
        extra = [k for k in mapping if k not in state]
        if extra:
            raise DataError(f"state has unknown entries, first: {extra[0]}")
        for prefix, layer in self._named_layers():
            # state suffixes double as layer attribute names
            for suffix, arr in list(layer.state_items()):
                name = f"{prefix}.{suffix}"
                new = np.asarray(mapping[name], dtype=arr.dtype)
                if new.shape != arr.shape:
                    raise SizeMismatchError(
                        f"{name}: shape {new.shape} does not match {arr.shape}")
                setattr(layer, suffix, new.copy())
        return self

    def clone(self):
        m = Model(self.descriptor, seed=0)
        m.load_state({k: v.copy() for k, v in self.state().items()})
        return m
