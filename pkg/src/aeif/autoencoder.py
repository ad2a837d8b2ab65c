"""Single-hidden-layer dense autoencoder trained with plain mini-batch gradient descent.

The encoder is ``act(W_enc x + b_enc)``; the decoder is linear,
``W_dec h + b_dec``, with its own (untied) weights. The reconstruction error of
a window is summarised by its mean cubic error (MCE), a signed scalar that
becomes the one-dimensional feature handed to the isolation forest.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace

import numpy as np

from aeif.timeseries import Standardizer

logger = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class TrainConfig:
    latent_dim: int = 3
    learning_rate: float = 1e-2
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    init_scale: float | None = None  # None -> 1/sqrt(k)
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")


@dataclass(frozen=True)
class AutoencoderModel:
    w_enc: np.ndarray  # (latent_dim, k)
    b_enc: np.ndarray  # (latent_dim,)
    w_dec: np.ndarray  # (k, latent_dim)
    b_dec: np.ndarray  # (k,)
    activation: str = "tanh"
    standardizer: Standardizer | None = None

    def __post_init__(self) -> None:
        latent, k = self.w_enc.shape
        if latent >= k:
            raise ValueError(f"latent_dim ({latent}) must be smaller than k ({k})")
        if self.b_enc.shape != (latent,) or self.w_dec.shape != (k, latent) or self.b_dec.shape != (k,):
            raise ValueError("inconsistent parameter shapes")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not all(np.all(np.isfinite(p)) for p in self.params()):
            raise ValueError("non-finite parameters")

    @property
    def k(self) -> int:
        return int(self.w_enc.shape[1])

    @property
    def latent_dim(self) -> int:
        return int(self.w_enc.shape[0])

    def params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.w_enc, self.b_enc, self.w_dec, self.b_dec

    def with_params(self, w_enc, b_enc, w_dec, b_dec) -> AutoencoderModel:
        return replace(self, w_enc=w_enc, b_enc=b_enc, w_dec=w_dec, b_dec=b_dec)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "latent_dim": self.latent_dim,
            "activation": self.activation,
            "w_enc": self.w_enc.tolist(),
            "b_enc": self.b_enc.tolist(),
            "w_dec": self.w_dec.tolist(),
            "b_dec": self.b_dec.tolist(),
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> AutoencoderModel:
        std = d.get("standardizer")
        return cls(
            w_enc=np.asarray(d["w_enc"], dtype=np.float64).reshape(d["latent_dim"], d["k"]),
            b_enc=np.asarray(d["b_enc"], dtype=np.float64),
            w_dec=np.asarray(d["w_dec"], dtype=np.float64).reshape(d["k"], d["latent_dim"]),
            b_dec=np.asarray(d["b_dec"], dtype=np.float64),
            activation=d["activation"],
            standardizer=None if std is None else Standardizer.from_dict(std),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, s: str) -> AutoencoderModel:
        return cls.from_dict(json.loads(s))


def init_model(k: int, cfg: TrainConfig, rng: np.random.Generator | None = None) -> AutoencoderModel:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    scale = 1.0 / np.sqrt(k) if cfg.init_scale is None else cfg.init_scale
    return AutoencoderModel(
        w_enc=rng.uniform(-scale, scale, size=(cfg.latent_dim, k)),
        b_enc=np.zeros(cfg.latent_dim),
        w_dec=rng.uniform(-scale, scale, size=(k, cfg.latent_dim)),
        b_dec=np.zeros(k),
        activation=cfg.activation,
    )


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    return np.tanh(z) if activation == "tanh" else z


def _check_dim(m: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != m.k:
        raise ValueError(f"expected windows of length {m.k}, got {x.shape[-1]}")
    return x


def forward(m: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    """Reconstruct one window or a ``(n, k)`` batch of standardized windows."""
    x = _check_dim(m, x)
    h = _act(x @ m.w_enc.T + m.b_enc, m.activation)
    return h @ m.w_dec.T + m.b_dec


def mse_loss(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean over samples and dimensions of the squared residual."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=np.float64))
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    if x.size == 0:
        raise ValueError("empty batch")
    return float(np.mean((x - x_hat) ** 2))


def loss(m: AutoencoderModel, x: np.ndarray) -> float:
    return mse_loss(x, forward(m, x))


def backward(m: AutoencoderModel, x: np.ndarray) -> tuple[float, tuple[np.ndarray, ...]]:
    """Loss and its exact gradients w.r.t. ``(w_enc, b_enc, w_dec, b_dec)``."""
    x = np.atleast_2d(_check_dim(m, x))
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    n, k = x.shape
    h = _act(x @ m.w_enc.T + m.b_enc, m.activation)
    resid = h @ m.w_dec.T + m.b_dec - x
    d_out = resid * (2.0 / (n * k))
    g_w_dec = d_out.T @ h
    g_b_dec = d_out.sum(axis=0)
    d_h = d_out @ m.w_dec
    d_z = d_h * (1.0 - h * h) if m.activation == "tanh" else d_h
    g_w_enc = d_z.T @ x
    g_b_enc = d_z.sum(axis=0)
    value = float(np.mean(resid**2))
    return value, (g_w_enc, g_b_enc, g_w_dec, g_b_dec)


@dataclass
class TrainHistory:
    epoch_loss: list[float]
    best_loss: list[float]
    best_epoch: int

    def to_dict(self) -> dict:
        return asdict(self)


def train(
    cfg: TrainConfig,
    windows: np.ndarray,
    labels: np.ndarray | None = None,
    standardizer: Standardizer | None = None,
) -> tuple[AutoencoderModel, TrainHistory]:
    """Fit the autoencoder on standardized normal windows.

    ``labels`` (window label codes, 0 = normal) are only used to refuse
    anomalous training data. The returned model is the parameter set with the
    lowest epoch-end training loss, counting the initialization as epoch 0.
    """
    x = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if labels is not None and np.any(np.asarray(labels) != 0):
        raise ValueError("AE must train on normal data only")
    n, k = x.shape
    rng = np.random.default_rng(cfg.seed)
    m = init_model(k, cfg, rng)
    m = replace(m, standardizer=standardizer)

    w_enc, b_enc, w_dec, b_dec = (p.copy() for p in m.params())
    lr = cfg.learning_rate
    tanh = cfg.activation == "tanh"
    bs = min(cfg.batch_size, n)

    best = loss(m, x)
    best_params = (w_enc.copy(), b_enc.copy(), w_dec.copy(), b_dec.copy())
    history = TrainHistory(epoch_loss=[best], best_loss=[best], best_epoch=0)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            xb = x[order[start : start + bs]]
            # Inlined copy of backward() to avoid rebuilding frozen models per step.
            h = xb @ w_enc.T + b_enc
            if tanh:
                h = np.tanh(h)
            d_out = (h @ w_dec.T + b_dec - xb) * (2.0 / xb.size)
            d_h = d_out @ w_dec
            if tanh:
                d_h *= 1.0 - h * h
            w_dec -= lr * (d_out.T @ h)
            b_dec -= lr * d_out.sum(axis=0)
            w_enc -= lr * (d_h.T @ xb)
            b_enc -= lr * d_h.sum(axis=0)

        if not (np.all(np.isfinite(w_enc)) and np.all(np.isfinite(w_dec))):
            logger.warning("training diverged at epoch %d; keeping best epoch %d", epoch, history.best_epoch)
            break
        current = loss(m.with_params(w_enc, b_enc, w_dec, b_dec), x)
        history.epoch_loss.append(current)
        if current < best:
            best = current
            best_params = (w_enc.copy(), b_enc.copy(), w_dec.copy(), b_dec.copy())
            history.best_epoch = epoch
        history.best_loss.append(best)

    logger.info("AE trained on %d windows: best loss %.3g at epoch %d", n, best, history.best_epoch)
    return m.with_params(*best_params), history


def mce(x: np.ndarray, x_hat: np.ndarray, absolute: bool = False) -> np.ndarray | float:
    """Mean cubic error ``mean((x - x_hat) ** 3)`` over the last axis.

    Signed by default; ``absolute=True`` uses ``|x - x_hat| ** 3`` instead.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    r = x - x_hat
    cubed = np.abs(r) ** 3 if absolute else r**3
    out = cubed.mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def mce_features(m: AutoencoderModel, windows: np.ndarray, absolute: bool = False) -> np.ndarray:
    """MCE of each standardized window against its reconstruction, shape ``(n,)``."""
    x = np.asarray(windows, dtype=np.float64)
    if x.size == 0:
        return np.empty(0)
    x = np.atleast_2d(x)
    return np.asarray(mce(x, forward(m, x), absolute=absolute))
