"""beta-VAE estimator: seeded training on encoded normal traffic, batched
encode/decode, and versioned binary checkpoints."""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import CheckpointError, ConfigError, TrainingDivergedError
from .layout import FeatureLayout
from .nn import AdamState, GaussianParams, LossBreakdown, VaeNet, adam_step

DEFAULT_ENCODER_HIDDEN = (64, 32, 16)
DEFAULT_DECODER_HIDDEN = (16, 32, 64)
DEFAULT_LATENT_DIM = 8
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BATCH_SIZE = 2048
DEFAULT_EPOCHS = 100

CHECKPOINT_MAGIC = b"KVAECKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch mean loss components plus run metadata."""

    epoch_losses: tuple[LossBreakdown, ...]
    wall_clock_s: float
    params_digest: str

    @property
    def n_epochs(self) -> int:
        return len(self.epoch_losses)


class BetaVae(BaseEstimator):
    """Variational autoencoder with a beta-weighted KL term.

    fit() runs minibatch Adam over a seeded shuffle of the rows; one master
    seed deterministically derives the init / shuffle / sampling-noise
    streams, so identical inputs give bit-identical parameters.
    """

    def __init__(
        self,
        layout: FeatureLayout | None = None,
        beta: float = 1e-5,
        latent_dim: int = DEFAULT_LATENT_DIM,
        encoder_hidden: tuple[int, ...] = DEFAULT_ENCODER_HIDDEN,
        decoder_hidden: tuple[int, ...] = DEFAULT_DECODER_HIDDEN,
        learning_rate: float = DEFAULT_LEARNING_RATE,
        batch_size: int = DEFAULT_BATCH_SIZE,
        epochs: int = DEFAULT_EPOCHS,
        seed: int = 1,
    ):
        self.layout = layout
        self.beta = beta
        self.latent_dim = latent_dim
        self.encoder_hidden = encoder_hidden
        self.decoder_hidden = decoder_hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    # --- configuration -------------------------------------------------------

    def _validate_config(self) -> None:
        if self.layout is None:
            raise ConfigError("BetaVae needs a FeatureLayout before fitting")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if any(h < 1 for h in (*self.encoder_hidden, *self.decoder_hidden)):
            raise ConfigError("hidden sizes must be positive")

    def _rngs(self) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
        init_ss, shuffle_ss, noise_ss = np.random.SeedSequence(self.seed).spawn(3)
        return (
            np.random.default_rng(init_ss),
            np.random.default_rng(shuffle_ss),
            np.random.default_rng(noise_ss),
        )

    def config_dict(self) -> dict:
        cfg = self.get_params()
        cfg.pop("layout")
        cfg["encoder_hidden"] = list(self.encoder_hidden)
        cfg["decoder_hidden"] = list(self.decoder_hidden)
        return cfg

    # --- training -------------------------------------------------------------

    def fit(self, X: np.ndarray, y=None) -> "BetaVae":
        self._validate_config()
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ConfigError("fit expects a non-empty 2-D matrix")
        if X.shape[1] != self.layout.width:
            raise ConfigError(
                f"input width {X.shape[1]} != layout width {self.layout.width}"
            )
        if not np.all(np.isfinite(X)):
            raise ConfigError("training matrix contains non-finite values")

        t0 = time.monotonic()
        init_rng, shuffle_rng, noise_rng = self._rngs()
        net = VaeNet.initialize(
            self.layout, self.encoder_hidden, self.latent_dim, self.decoder_hidden, init_rng
        )
        params = net.param_dict()
        state = AdamState.initial(params, learning_rate=self.learning_rate)

        n = X.shape[0]
        history: list[LossBreakdown] = []
        for epoch in range(self.epochs):
            perm = shuffle_rng.permutation(n)
            sums = np.zeros(4)  # l_cat, l_bool, l_cont, l_kl weighted by batch size
            for step, start in enumerate(range(0, n, self.batch_size)):
                idx = perm[start : start + self.batch_size]
                xb = X[idx]
                noise = noise_rng.standard_normal((len(idx), self.latent_dim))
                fwd = net.forward(xb, noise)
                lb = net.loss(xb, fwd, self.beta)
                if not lb.is_finite:
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, step {step}: {lb.to_dict()}"
                    )
                grads = net.backward(xb, fwd, self.beta)
                params, state = adam_step(params, grads, state)
                net.load_param_dict(params)
                sums += len(idx) * np.array([lb.l_cat, lb.l_bool, lb.l_cont, lb.l_kl])
            mean = sums / n
            history.append(
                LossBreakdown.assemble(mean[0], mean[1], mean[2], mean[3], self.beta)
            )

        self.net_ = net
        self.n_features_in_ = X.shape[1]
        self.report_ = TrainReport(
            epoch_losses=tuple(history),
            wall_clock_s=time.monotonic() - t0,
            params_digest=self.params_digest(),
        )
        return self

    # --- inference -------------------------------------------------------------

    def _check_fitted(self) -> VaeNet:
        net = getattr(self, "net_", None)
        if net is None:
            raise NotFittedError("BetaVae is not fitted; call fit() or load a checkpoint")
        return net

    def encode(self, X: np.ndarray) -> GaussianParams:
        """Posterior mean / log variance; deterministic for fixed parameters."""
        return self._check_fitted().encode(X)

    def decode(self, Z: np.ndarray) -> np.ndarray:
        """Reconstruction heads for latent vectors (single or batch)."""
        return self._check_fitted().decode(Z)

    def params_digest(self) -> str:
        """SHA-256 over the configuration and raw parameter bytes."""
        net = self._check_fitted()
        h = hashlib.sha256()
        h.update(json.dumps(self.config_dict(), sort_keys=True).encode())
        for name, arr in net.param_dict().items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


def train_model(
    x_train: np.ndarray, layout: FeatureLayout, **params
) -> tuple[BetaVae, TrainReport]:
    """Fit a BetaVae on encoded normal traffic and return it with its report."""
    model = BetaVae(layout=layout, **params).fit(x_train)
    return model, model.report_


# --- checkpoint container -----------------------------------------------------
#
# magic (8) | version u32 | header_len u64 | header JSON | raw <f8 blocks |
# sha256 of everything before the digest (32 bytes)


def _serialize_checkpoint(model: BetaVae, manifest: dict | None) -> bytes:
    net = model._check_fitted()
    params = net.param_dict()
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config_dict(),
        "layout": model.layout.to_dict(),
        "manifest": manifest,
        "params": [[name, list(arr.shape)] for name, arr in params.items()],
        "dtype": "<f8",
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    blob = b"".join(
        np.ascontiguousarray(arr, dtype="<f8").tobytes() for arr in params.values()
    )
    body = (
        CHECKPOINT_MAGIC
        + struct.pack("<I", CHECKPOINT_VERSION)
        + struct.pack("<Q", len(header_bytes))
        + header_bytes
        + blob
    )
    return body + hashlib.sha256(body).digest()


def save_checkpoint(model: BetaVae, path: str | Path, manifest: dict | None = None) -> str:
    """Write the checkpoint; returns its content digest (hex)."""
    data = _serialize_checkpoint(model, manifest)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return data[-32:].hex()


def checkpoint_digest(path: str | Path) -> str:
    """Content digest of a checkpoint file (hex of the stored trailer)."""
    data = Path(path).read_bytes()
    if len(data) < 32:
        raise CheckpointError(f"{path}: too short to be a checkpoint")
    return data[-32:].hex()


def load_checkpoint(path: str | Path) -> tuple[BetaVae, dict | None, dict]:
    """Load a checkpoint; returns (model, preprocessor manifest, config).

    Verifies magic bytes, format version, and the trailing content digest, so
    truncation or corruption fails loudly instead of producing a bad model.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint: {exc}") from exc
    min_len = len(CHECKPOINT_MAGIC) + 4 + 8 + 32
    if len(data) < min_len:
        raise CheckpointError(f"{path}: truncated checkpoint")
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: content digest mismatch; file is corrupt")
    off = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", data, off)
    off += 8
    try:
        header = json.loads(data[off : off + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint header") from exc
    off += header_len

    layout = FeatureLayout.from_dict(header["layout"])
    config = dict(header["config"])
    model = BetaVae(
        layout=layout,
        beta=config["beta"],
        latent_dim=config["latent_dim"],
        encoder_hidden=tuple(config["encoder_hidden"]),
        decoder_hidden=tuple(config["decoder_hidden"]),
        learning_rate=config["learning_rate"],
        batch_size=config["batch_size"],
        epochs=config["epochs"],
        seed=config["seed"],
    )
    init_rng, _, _ = model._rngs()
    net = VaeNet.initialize(
        layout, model.encoder_hidden, model.latent_dim, model.decoder_hidden, init_rng
    )
    params: dict[str, np.ndarray] = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if off + nbytes > len(body):
            raise CheckpointError(f"{path}: parameter blob shorter than declared")
        params[name] = np.frombuffer(body, dtype="<f8", count=count, offset=off).reshape(
            shape
        ).copy()
        off += nbytes
    if off != len(body):
        raise CheckpointError(f"{path}: trailing bytes after parameter blob")
    try:
        net.load_param_dict(params)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: parameter blocks do not match layout") from exc
    model.net_ = net
    model.n_features_in_ = layout.width
    return model, header.get("manifest"), config
