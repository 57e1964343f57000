"""Small convolutional LoS/NLoS classifier on pooled ADCPM images.

A plain stack of strided 3x3 convolutions with ReLU feeds a fully connected
head (512 -> 256 -> 1 by default). The logit passes through a sigmoid to give
the NLoS probability. Forward and backward passes are hand-written in numpy;
parameters live in one flat vector so the optimizer, gradient check and
checkpoints all work on the same buffer.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..aoi import AoiConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NeuralConfig:
    input_shape: tuple[int, int] = (16, 32)
    conv_stack: tuple[tuple[int, int, int], ...] = ((8, 3, 2), (16, 3, 2), (32, 3, 2))
    head: tuple[int, ...] = (512, 256)
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    reduction: str = "mean"
    dtype: str = "float32"
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "conv_stack", tuple(tuple(int(v) for v in c) for c in self.conv_stack))
        object.__setattr__(self, "head", tuple(int(v) for v in self.head))
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.reduction not in ("mean", "sum"):
            raise ValueError("reduction must be 'mean' or 'sum'")
        h, w = self.input_shape
        for _, k, s in self.conv_stack:
            h = (h + 2 * (k // 2) - k) // s + 1
            w = (w + 2 * (k // 2) - k) // s + 1
            if h < 1 or w < 1:
                raise ValueError(f"conv stack collapses input {self.input_shape}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralConfig":
        return cls(**d)

    def digest(self) -> bytes:
        payload = self.to_dict()
        payload.pop("rng_seed")
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).digest()


def param_shapes(cfg: NeuralConfig) -> list[tuple[str, tuple[int, ...]]]:
    shapes = []
    c_in = 1
    h, w = cfg.input_shape
    for i, (c_out, k, s) in enumerate(cfg.conv_stack):
        shapes.append((f"conv{i}.w", (c_out, c_in, k, k)))
        shapes.append((f"conv{i}.b", (c_out,)))
        h = (h + 2 * (k // 2) - k) // s + 1
        w = (w + 2 * (k // 2) - k) // s + 1
        c_in = c_out
    n_in = c_in * h * w
    for j, n_out in enumerate(cfg.head):
        shapes.append((f"fc{j}.w", (n_in, n_out)))
        shapes.append((f"fc{j}.b", (n_out,)))
        n_in = n_out
    shapes.append(("out.w", (n_in, 1)))
    shapes.append(("out.b", (1,)))
    return shapes


def _views(theta: np.ndarray, shapes) -> dict[str, np.ndarray]:
    out, offset = {}, 0
    for name, shape in shapes:
        n = math.prod(shape)
        out[name] = theta[offset: offset + n].reshape(shape)
        offset += n
    return out


def init_params(cfg: NeuralConfig, rng: np.random.Generator) -> np.ndarray:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    parts = []
    for name, shape in param_shapes(cfg):
        if name.endswith(".b"):
            parts.append(np.zeros(math.prod(shape)))
            continue
        fan_in = math.prod(shape[1:]) if name.startswith("conv") else shape[0]
        limit = math.sqrt(6.0 / fan_in)
        parts.append(rng.uniform(-limit, limit, size=math.prod(shape)))
    return np.concatenate(parts).astype(cfg.dtype)


def sigmoid(nu):
    nu = np.asarray(nu, dtype=float)
    out = np.empty_like(nu)
    pos = nu >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-nu[pos]))
    e = np.exp(nu[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def bce_with_logits(nu, y) -> np.ndarray:
    """Per-sample -[y log s(nu) + (1-y) log(1-s(nu))], computed without forming s(nu)."""
    nu = np.asarray(nu)
    return np.maximum(nu, 0) - y * nu + np.log1p(np.exp(-np.abs(nu)))


# --------------------------------------------------------------------------
# layers


def _im2col(x: np.ndarray, k: int, s: int, p: int):
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    ho = (h + 2 * p - k) // s + 1
    wo = (w + 2 * p - k) // s + 1
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s][:, :, :ho, :wo]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    return cols, ho, wo


def _col2im(dcols: np.ndarray, x_shape, k: int, s: int, p: int, ho: int, wo: int) -> np.ndarray:
    n, c, h, w = x_shape
    d = dcols.reshape(n, ho, wo, c, k, k)
    dxp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i: i + s * (ho - 1) + 1: s, j: j + s * (wo - 1) + 1: s] += d[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dxp[:, :, p: p + h, p: p + w]


class ConvNet:
    """Stateless network definition; parameters are passed in as a flat vector."""

    def __init__(self, cfg: NeuralConfig):
        self.cfg = cfg
        self.shapes = param_shapes(cfg)
        self.n_params = sum(math.prod(s) for _, s in self.shapes)

    def forward(self, theta: np.ndarray, x: np.ndarray, keep_cache: bool = False):
        cfg = self.cfg
        x = np.asarray(x, dtype=theta.dtype)
        if x.shape[1:] != cfg.input_shape:
            raise ValueError(f"input shape {x.shape[1:]} does not match {cfg.input_shape}")
        v = _views(theta, self.shapes)
        n = x.shape[0]
        a = x[:, None]
        cache = {"conv": [], "fc": []}
        for i, (c_out, k, s) in enumerate(cfg.conv_stack):
            cols, ho, wo = _im2col(a, k, s, k // 2)
            z = cols @ v[f"conv{i}.w"].reshape(c_out, -1).T + v[f"conv{i}.b"]
            mask = z > 0
            if keep_cache:
                cache["conv"].append((cols, a.shape, mask, ho, wo))
            a = (z * mask).reshape(n, ho, wo, c_out).transpose(0, 3, 1, 2)
        h = a.reshape(n, -1)
        for j in range(len(cfg.head)):
            z = h @ v[f"fc{j}.w"] + v[f"fc{j}.b"]
            mask = z > 0
            if keep_cache:
                cache["fc"].append((h, mask))
            h = z * mask
        logits = (h @ v["out.w"] + v["out.b"])[:, 0]
        if keep_cache:
            cache["last"] = h
            cache["conv_out_shape"] = a.shape
            return logits, cache
        return logits

    def backward(self, theta: np.ndarray, cache, dlogits: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        v = _views(theta, self.shapes)
        grad = np.zeros_like(theta)
        g = _views(grad, self.shapes)
        d = dlogits.astype(theta.dtype)[:, None]
        g["out.w"][...] = cache["last"].T @ d
        g["out.b"][...] = d.sum(axis=0)
        dh = d @ v["out.w"].T
        for j in reversed(range(len(cfg.head))):
            h_prev, mask = cache["fc"][j]
            dz = dh * mask
            g[f"fc{j}.w"][...] = h_prev.T @ dz
            g[f"fc{j}.b"][...] = dz.sum(axis=0)
            dh = dz @ v[f"fc{j}.w"].T
        da = dh.reshape(cache["conv_out_shape"])
        for i in reversed(range(len(cfg.conv_stack))):
            c_out, k, s = cfg.conv_stack[i]
            cols, in_shape, mask, ho, wo = cache["conv"][i]
            dz = da.transpose(0, 2, 3, 1).reshape(-1, c_out) * mask
            w = v[f"conv{i}.w"]
            g[f"conv{i}.w"][...] = (dz.T @ cols).reshape(w.shape)
            g[f"conv{i}.b"][...] = dz.sum(axis=0)
            if i > 0:
                da = _col2im(dz @ w.reshape(c_out, -1), in_shape, k, s, k // 2, ho, wo)
        return grad

    def relu_masks(self, theta: np.ndarray, x: np.ndarray) -> list[np.ndarray]:
        _, cache = self.forward(theta, x, keep_cache=True)
        return [c[2] for c in cache["conv"]] + [c[1] for c in cache["fc"]]


def weighted_loss_and_grad(net: ConvNet, theta: np.ndarray, x: np.ndarray, y: np.ndarray,
                           weights: np.ndarray, reduction: str = "mean"):
    """AoI-weighted BCE (weights = exp(-gamma * age)) and its gradient w.r.t. theta."""
    logits, cache = net.forward(theta, x, keep_cache=True)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    per = bce_with_logits(logits.astype(float), y) * w
    scale = 1.0 / len(y) if reduction == "mean" else 1.0
    loss = float(per.sum() * scale)
    dlogits = (sigmoid(logits) - y) * w * scale
    return loss, net.backward(theta, cache, dlogits)


# --------------------------------------------------------------------------
# state and training


@dataclass
class ModelState:
    config: NeuralConfig
    params: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    adam_t: int = 0
    epochs_trained: int = 0
    lineage: list[str] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)

    @classmethod
    def fresh(cls, cfg: NeuralConfig) -> "ModelState":
        theta = init_params(cfg, np.random.default_rng(cfg.rng_seed))
        return cls(cfg, theta, np.zeros_like(theta), np.zeros_like(theta))

    @property
    def shapes(self):
        return param_shapes(self.config)

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.params).tobytes()).hexdigest()

    def copy(self) -> "ModelState":
        return ModelState(self.config, self.params.copy(), self.adam_m.copy(), self.adam_v.copy(),
                          self.adam_t, self.epochs_trained, list(self.lineage), list(self.history))


class TrainingDiverged(RuntimeError):
    pass


def forward(state: ModelState, adcpm_input: np.ndarray, batch_size: int = 256):
    """Logits and sigmoid probabilities for one image or a batch of images."""
    x = np.asarray(adcpm_input)
    single = x.ndim == 2
    if single:
        x = x[None]
    net = ConvNet(state.config)
    logits = np.concatenate([
        net.forward(state.params, x[i: i + batch_size]) for i in range(0, len(x), batch_size)
    ]) if len(x) else np.zeros(0)
    logits = logits.astype(float)
    probs = sigmoid(logits)
    if single:
        return float(logits[0]), float(probs[0])
    return logits, probs


def backward(state: ModelState, x: np.ndarray, y: np.ndarray, ages=None, gamma: float = 0.0) -> np.ndarray:
    """Gradient of the AoI-weighted BCE over a batch (config reduction)."""
    if len(y) == 0:
        raise ValueError("empty batch")
    ages = np.zeros(len(y)) if ages is None else np.asarray(ages, dtype=float)
    weights = np.exp(-gamma * ages)
    _, grad = weighted_loss_and_grad(ConvNet(state.config), state.params, x, y, weights, state.config.reduction)
    return grad


def _eval_loss(net: ConvNet, theta, x, y, batch_size=512) -> float:
    if len(y) == 0:
        return math.nan
    total = 0.0
    for i in range(0, len(y), batch_size):
        logits = net.forward(theta, x[i: i + batch_size]).astype(float)
        total += float(bce_with_logits(logits, y[i: i + batch_size]).sum())
    return total / len(y)


def train(
    cfg: NeuralConfig,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    *,
    state: ModelState | None = None,
    ages: np.ndarray | None = None,
    aoi: AoiConfig | None = None,
    dataset_id: str = "",
) -> ModelState:
    """Mini-batch Adam with early stopping on validation BCE.

    With ``state`` the run fine-tunes: it starts from exactly ``state.params``
    with fresh optimizer moments. With ``aoi`` each training sample's loss
    term is scaled by exp(-aoi.gamma * age). The returned state holds the
    best-validation parameters and the extended lineage.
    """
    if len(y_train) == 0:
        raise ValueError("empty training split")
    if len(y_val) == 0:
        raise ValueError("empty validation split")
    dtype = np.dtype(cfg.dtype)
    if state is None:
        state = ModelState.fresh(cfg)
    elif state.params.size != ConvNet(cfg).n_params or param_shapes(state.config) != param_shapes(cfg):
        raise ValueError("checkpoint shapes do not match the network configuration")
    net = ConvNet(cfg)
    theta = state.params.astype(dtype, copy=True)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t_step = 0
    start_digest = hashlib.sha256(theta.tobytes()).hexdigest()

    x_train = np.asarray(x_train, dtype=dtype)
    x_val = np.asarray(x_val, dtype=dtype)
    y_train = np.asarray(y_train, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    if aoi is not None:
        ages = np.zeros(len(y_train)) if ages is None else np.asarray(ages, dtype=float)
        weights = np.exp(-aoi.gamma * ages)
    else:
        weights = np.ones(len(y_train))

    rng = np.random.default_rng([cfg.rng_seed & (2**64 - 1), len(state.lineage)])
    best_val = _eval_loss(net, theta, x_val, y_val)
    best_theta = theta.copy()
    best_epoch = 0
    history = []
    wait = 0
    epoch = 0
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(y_train))
        running = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start: start + cfg.batch_size]
            loss, grad = weighted_loss_and_grad(net, theta, x_train[idx], y_train[idx], weights[idx], cfg.reduction)
            if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, step {t_step}; "
                    f"max |theta| = {np.max(np.abs(theta)):.3g}, lr = {cfg.learning_rate}")
            running += loss * (len(idx) if cfg.reduction == "mean" else 1.0)
            t_step += 1
            m = b1 * m + (1 - b1) * grad
            v = b2 * v + (1 - b2) * grad * grad
            m_hat = m / (1 - b1 ** t_step)
            v_hat = v / (1 - b2 ** t_step)
            theta = theta - (cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)).astype(dtype)
        val = _eval_loss(net, theta, x_val, y_val)
        history.append({"epoch": epoch, "train_loss": running / len(y_train), "val_loss": val})
        if val < best_val:
            best_val, best_theta, best_epoch, wait = val, theta.copy(), epoch, 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    log.info("trained %s: %d epochs, best epoch %d, val loss %.4f", dataset_id or "model", epoch, best_epoch, best_val)
    return ModelState(
        config=cfg,
        params=best_theta,
        adam_m=m,
        adam_v=v,
        adam_t=t_step,
        epochs_trained=state.epochs_trained + epoch,
        lineage=list(state.lineage) + [dataset_id],
        history=[{"start_digest": start_digest, "best_epoch": best_epoch, "epochs": epoch,
                  "best_val_loss": best_val, "curve": history}],
    )


def gradient_check(cfg: NeuralConfig | None = None, rng: np.random.Generator | None = None, *,
                   corrupt: bool = False, zero_input: bool = False, batch: int = 4,
                   step: float = 1e-4, gamma: float = 0.1) -> float:
    """Max relative error between the analytic gradient and central differences.

    Runs in double precision on a small network with random parameters and a
    random AoI-weighted batch. Parameters whose perturbation flips any ReLU
    activation (a kink inside the difference stencil) are skipped. With
    ``corrupt`` the largest analytic gradient entry is doubled first, which
    the check must detect.
    """
    cfg = cfg or NeuralConfig(input_shape=(6, 6), conv_stack=((2, 3, 2),), head=(6, 4))
    cfg = dataclasses.replace(cfg, dtype="float64", reduction="mean")
    rng = rng or np.random.default_rng(0)
    net = ConvNet(cfg)
    theta = init_params(cfg, rng)
    # nonzero biases keep a zero-input batch away from the ReLU kink at 0
    for name, view in _views(theta, net.shapes).items():
        if name.endswith(".b"):
            view[...] = rng.uniform(-0.5, 0.5, size=view.shape)
    x = np.zeros((batch,) + cfg.input_shape) if zero_input else rng.standard_normal((batch,) + cfg.input_shape)
    y = rng.integers(0, 2, size=batch).astype(float)
    weights = np.exp(-gamma * rng.uniform(0, 20, size=batch))

    def loss_at(t):
        logits = net.forward(t, x).astype(float)
        return float((bce_with_logits(logits, y) * weights).sum() / batch)

    _, analytic = weighted_loss_and_grad(net, theta, x, y, weights, "mean")
    if corrupt:
        k = int(np.argmax(np.abs(analytic)))
        analytic = analytic.copy()
        analytic[k] *= 2.0
    base_masks = net.relu_masks(theta, x)
    atol = 1e-7 * max(1.0, float(np.max(np.abs(analytic))))
    worst = 0.0
    skipped = 0
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        if any(not np.array_equal(a, b) for t in (tp, tm) for a, b in zip(base_masks, net.relu_masks(t, x))):
            skipped += 1
            continue
        numeric = (loss_at(tp) - loss_at(tm)) / (2 * step)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), abs(numeric), atol)
        worst = max(worst, err)
    log.debug("gradient check: %d params, %d skipped at kinks, max rel err %.3g", theta.size, skipped, worst)
    return worst


# --------------------------------------------------------------------------
# checkpoints

MAGIC = b"TWLKCKPT"
FORMAT_VERSION = 1


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def save_checkpoint(state: ModelState, path: str | Path) -> None:
    """Binary checkpoint: magic, version, config digest + JSON, shape table,
    little-endian float arrays (params, Adam moments), counters, lineage."""
    cfg_json = json.dumps(state.config.to_dict(), sort_keys=True)
    shapes = state.shapes
    dtype = np.dtype(state.config.dtype).newbyteorder("<")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += state.config.digest()
    out += _pack_str(cfg_json)
    out += struct.pack("<I", len(shapes))
    for name, shape in shapes:
        out += _pack_str(name)
        out += struct.pack("<B", len(shape))
        out += struct.pack(f"<{len(shape)}I", *shape)
    out += struct.pack("<B", dtype.itemsize)
    out += struct.pack("<Q", state.params.size)
    for arr in (state.params, state.adam_m, state.adam_v):
        out += np.ascontiguousarray(arr, dtype=dtype).tobytes()
    out += struct.pack("<QI", state.adam_t, state.epochs_trained)
    out += struct.pack("<I", len(state.lineage))
    for entry in state.lineage:
        out += _pack_str(entry)
    Path(path).write_bytes(bytes(out))


class CheckpointError(ValueError):
    pass


def load_checkpoint(path: str | Path) -> ModelState:
    raw = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(raw):
            raise CheckpointError("truncated checkpoint")
        chunk = raw[pos: pos + n]
        pos += n
        return chunk

    def take_str():
        (n,) = struct.unpack("<I", take(4))
        return take(n).decode("utf-8")

    if take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a twinlink checkpoint")
    (version,) = struct.unpack("<H", take(2))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    digest = take(32)
    cfg = NeuralConfig.from_dict(json.loads(take_str()))
    if cfg.digest() != digest:
        raise CheckpointError("config digest mismatch")
    (n_shapes,) = struct.unpack("<I", take(4))
    shapes = []
    for _ in range(n_shapes):
        name = take_str()
        (ndim,) = struct.unpack("<B", take(1))
        shapes.append((name, tuple(struct.unpack(f"<{ndim}I", take(4 * ndim)))))
    if shapes != param_shapes(cfg):
        raise CheckpointError("shape table does not match the stored config")
    (itemsize,) = struct.unpack("<B", take(1))
    (count,) = struct.unpack("<Q", take(8))
    dtype = np.dtype(f"<f{itemsize}")
    arrays = [np.frombuffer(take(count * itemsize), dtype=dtype).astype(cfg.dtype) for _ in range(3)]
    adam_t, epochs = struct.unpack("<QI", take(12))
    (n_lin,) = struct.unpack("<I", take(4))
    lineage = [take_str() for _ in range(n_lin)]
    return ModelState(cfg, arrays[0], arrays[1], arrays[2], adam_t, epochs, lineage)
