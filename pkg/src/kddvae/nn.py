"""Numeric core for the mixed-type beta-VAE.

Plain float64 numpy: dense layers, the activations used by the fixed MLP
topology, the three per-type reconstruction losses, the closed-form Gaussian
KL term, reparameterized sampling, exact analytic gradients, and Adam.
There is deliberately no general autodiff; the only supported graph is the
encoder / Gaussian heads / decoder / mixed-output stack in VaeNet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import GradientError
from .layout import FeatureLayout

# Probability floor inside cross-entropy logs. Purely a numeric guard; the
# analytic gradients below assume the clamp is inactive, which holds whenever
# predicted probabilities exceed 1e-7.
EPS_LOG = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# --- activations -----------------------------------------------------------


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, stable for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_per_group(x: np.ndarray, group_slices: Sequence[slice]) -> np.ndarray:
    """Softmax applied independently to each slice along the last axis.

    Positions not covered by a slice are copied through unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    out = x.copy()
    for sl in group_slices:
        block = x[..., sl]
        e = np.exp(block - block.max(axis=-1, keepdims=True))
        out[..., sl] = e / e.sum(axis=-1, keepdims=True)
    return out


# --- layers ------------------------------------------------------------------


@dataclass
class DenseLayer:
    """Affine map y = x @ weights + bias."""

    weights: np.ndarray  # (n_in, n_out)
    bias: np.ndarray  # (n_out,)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ValueError(
                f"inconsistent layer shapes: weights {self.weights.shape}, bias {self.bias.shape}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        # Uniform fan-in scaling; bounds shrink with layer width.
        bound = 1.0 / math.sqrt(n_in)
        return cls(
            weights=rng.uniform(-bound, bound, size=(n_in, n_out)),
            bias=rng.uniform(-bound, bound, size=n_out),
        )


def dense_forward(
    layer: DenseLayer,
    x: np.ndarray,
    activation: str = "linear",
    group_slices: Sequence[slice] | None = None,
) -> np.ndarray:
    """Affine map followed by an activation.

    `activation` is one of linear / relu / sigmoid / softmax; softmax needs
    `group_slices` and is applied independently per group of the output.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.n_in:
        raise ValueError(f"input width {x.shape[-1]} != layer in-size {layer.n_in}")
    pre = x @ layer.weights + layer.bias
    if activation == "linear":
        return pre
    if activation == "relu":
        return relu(pre)
    if activation == "sigmoid":
        return sigmoid(pre)
    if activation == "softmax":
        if group_slices is None:
            raise ValueError("softmax activation needs group_slices")
        return softmax_per_group(pre, group_slices)
    raise ValueError(f"unknown activation {activation!r}")


# --- Gaussian posterior ------------------------------------------------------


@dataclass(frozen=True)
class GaussianParams:
    """Diagonal Gaussian: mean and log variance, (d,) or (n, d)."""

    mu: np.ndarray
    logvar: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64))
        object.__setattr__(self, "logvar", np.asarray(self.logvar, dtype=np.float64))
        if self.mu.shape != self.logvar.shape:
            raise ValueError("mu and logvar must have the same shape")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.logvar))):
            raise ValueError("Gaussian parameters must be finite")

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(0.5 * self.logvar)


def reparameterize(g: GaussianParams, noise: np.ndarray) -> np.ndarray:
    """z = mu + exp(logvar / 2) * noise, with noise ~ N(0, I)."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != g.mu.shape:
        raise ValueError(f"noise shape {noise.shape} != mu shape {g.mu.shape}")
    return g.mu + g.sigma * noise


def kl_divergence(g: GaussianParams) -> float | np.ndarray:
    """KL(q || N(0, I)) for a diagonal Gaussian.

    0.5 * sum_d(mu_d^2 + exp(logvar_d) - 1 - logvar_d); per-sample array for
    batched inputs, plain float for a single vector. exp(x) - 1 is evaluated
    as expm1(x) so near-zero logvar cannot round the result negative.
    """
    kl = 0.5 * (g.mu**2 + np.expm1(g.logvar) - g.logvar).sum(axis=-1)
    return float(kl) if np.ndim(kl) == 0 else kl


# --- reconstruction losses ---------------------------------------------------


def _check_rows(a: np.ndarray, b: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"{what}: target shape {a.shape} != prediction shape {b.shape}")
    return a, b


def categorical_loss(
    targets: np.ndarray, probs: np.ndarray, group_sizes: Iterable[int]
) -> float:
    """Cross-entropy over one-hot groups, averaged over rows, summed over groups.

    Arrays hold the concatenated categorical blocks. Predictions must be
    per-group softmax distributions; each target block sums to 1 (known
    token) or 0 (unknown token, contributing nothing). Probabilities are
    floored at EPS_LOG before the log.
    """
    targets, probs = _check_rows(targets, probs, "categorical_loss")
    sizes = tuple(group_sizes)
    if sum(sizes) != targets.shape[1]:
        raise ValueError(f"group sizes {sizes} do not cover width {targets.shape[1]}")
    start = 0
    for size in sizes:
        block = slice(start, start + size)
        psum = probs[:, block].sum(axis=1)
        if not np.allclose(psum, 1.0, atol=1e-6):
            raise ValueError("categorical predictions must sum to 1 per group")
        tsum = targets[:, block].sum(axis=1)
        if not np.all(np.isclose(tsum, 0.0, atol=1e-6) | np.isclose(tsum, 1.0, atol=1e-6)):
            raise ValueError("categorical targets must sum to 0 or 1 per group")
        start += size
    n = targets.shape[0]
    return float(-(targets * np.log(np.maximum(probs, EPS_LOG))).sum() / n)


def boolean_loss(targets: np.ndarray, probs: np.ndarray) -> float:
    """Binary cross-entropy, averaged over rows, summed over boolean features.

    Predictions are clamped into [EPS_LOG, 1 - EPS_LOG] before the logs.
    """
    targets, probs = _check_rows(targets, probs, "boolean_loss")
    p = np.clip(probs, EPS_LOG, 1.0 - EPS_LOG)
    n = targets.shape[0]
    return float(-(targets * np.log(p) + (1.0 - targets) * np.log1p(-p)).sum() / n)


def continuous_loss(targets: np.ndarray, preds: np.ndarray) -> float:
    """Squared error, averaged over rows, summed over continuous features."""
    targets, preds = _check_rows(targets, preds, "continuous_loss")
    n = targets.shape[0]
    return float(((targets - preds) ** 2).sum() / n)


@dataclass(frozen=True)
class LossBreakdown:
    """Reconstruction components plus the weighted KL term.

    l_rec = l_cat + l_bool + l_cont and total = l_rec + beta * l_kl by
    construction (see `assemble`).
    """

    l_cat: float
    l_bool: float
    l_cont: float
    l_kl: float
    beta: float
    l_rec: float
    total: float

    @classmethod
    def assemble(
        cls, l_cat: float, l_bool: float, l_cont: float, l_kl: float, beta: float
    ) -> "LossBreakdown":
        l_rec = l_cat + l_bool + l_cont
        return cls(
            l_cat=l_cat,
            l_bool=l_bool,
            l_cont=l_cont,
            l_kl=l_kl,
            beta=beta,
            l_rec=l_rec,
            total=l_rec + beta * l_kl,
        )

    @property
    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.l_cat, self.l_bool, self.l_cont, self.l_kl, self.total)
        )

    def to_dict(self) -> dict:
        return {
            "l_cat": self.l_cat,
            "l_bool": self.l_bool,
            "l_cont": self.l_cont,
            "l_kl": self.l_kl,
            "beta": self.beta,
            "l_rec": self.l_rec,
            "total": self.total,
        }


def loss_breakdown(
    x: np.ndarray,
    recon: np.ndarray,
    gauss: GaussianParams,
    beta: float,
    layout: FeatureLayout,
) -> LossBreakdown:
    """Batch loss: each component is mean-over-rows, summed over the features
    of its type; components combine with unit weights and the KL term is
    weighted by beta."""
    x, recon = _check_rows(x, recon, "loss_breakdown")
    l_cat = categorical_loss(
        x[:, layout.cat_slice], recon[:, layout.cat_slice], layout.group_sizes
    )
    l_bool = boolean_loss(x[:, layout.bool_slice], recon[:, layout.bool_slice])
    l_cont = continuous_loss(x[:, layout.cont_slice], recon[:, layout.cont_slice])
    kl = kl_divergence(gauss)
    l_kl = float(np.mean(kl))
    return LossBreakdown.assemble(l_cat, l_bool, l_cont, l_kl, float(beta))


# --- Adam ---------------------------------------------------------------------


@dataclass(frozen=True)
class AdamState:
    """Optimizer state: step count plus per-block moment accumulators."""

    learning_rate: float
    beta1: float
    beta2: float
    eps: float
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def initial(
        cls,
        params: dict[str, np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        eps: float = ADAM_EPS,
    ) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            step=0,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Pure function: inputs are not mutated; repeated evaluation from the same
    state is bit-identical. Raises GradientError naming the parameter block
    if a gradient is not finite.
    """
    if set(params) != set(grads):
        raise ValueError("params and grads must cover the same parameter blocks")
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(
                f"gradient shape {g.shape} != parameter shape {p.shape} for block {name!r}"
            )
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient in parameter block {name!r}")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        update = state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_params[name] = p - update
        new_m[name] = m
        new_v[name] = v
    return new_params, replace(state, step=t, m=new_m, v=new_v)


# --- the fixed VAE graph --------------------------------------------------------


@dataclass
class VaeForward:
    """Cached intermediates from one forward pass (needed by backward)."""

    enc_inputs: list[np.ndarray]  # input to each encoder layer; [0] is x
    enc_pre: list[np.ndarray]
    gauss: GaussianParams
    noise: np.ndarray
    z: np.ndarray
    dec_inputs: list[np.ndarray]  # input to each decoder layer; [0] is z
    dec_pre: list[np.ndarray]
    logits: np.ndarray
    recon: np.ndarray


class VaeNet:
    """Encoder -> two Gaussian heads -> decoder -> mixed-activation output.

    Hidden layers are ReLU; the output layer applies softmax per categorical
    group, sigmoid over the boolean block, and identity over the continuous
    block. Parameters live in a flat named dict for the optimizer and the
    checkpoint format.
    """

    def __init__(
        self,
        layout: FeatureLayout,
        encoder: list[DenseLayer],
        mu_head: DenseLayer,
        logvar_head: DenseLayer,
        decoder: list[DenseLayer],
        output: DenseLayer,
    ):
        self.layout = layout
        self.encoder = encoder
        self.mu_head = mu_head
        self.logvar_head = logvar_head
        self.decoder = decoder
        self.output = output
        if output.n_out != layout.width:
            raise ValueError(
                f"output head width {output.n_out} != layout width {layout.width}"
            )
        if mu_head.n_out != logvar_head.n_out:
            raise ValueError("mu and logvar heads disagree on latent dim")

    @classmethod
    def initialize(
        cls,
        layout: FeatureLayout,
        encoder_hidden: Sequence[int],
        latent_dim: int,
        decoder_hidden: Sequence[int],
        rng: np.random.Generator,
    ) -> "VaeNet":
        """Build with fan-in uniform init; draw order is fixed so a given rng
        stream always produces the same parameters."""
        enc_sizes = [layout.width, *encoder_hidden]
        encoder = [
            DenseLayer.init(enc_sizes[i], enc_sizes[i + 1], rng)
            for i in range(len(enc_sizes) - 1)
        ]
        trunk = enc_sizes[-1]
        mu_head = DenseLayer.init(trunk, latent_dim, rng)
        logvar_head = DenseLayer.init(trunk, latent_dim, rng)
        dec_sizes = [latent_dim, *decoder_hidden]
        decoder = [
            DenseLayer.init(dec_sizes[i], dec_sizes[i + 1], rng)
            for i in range(len(dec_sizes) - 1)
        ]
        output = DenseLayer.init(dec_sizes[-1], layout.width, rng)
        return cls(layout, encoder, mu_head, logvar_head, decoder, output)

    @property
    def latent_dim(self) -> int:
        return self.mu_head.n_out

    @property
    def input_width(self) -> int:
        return self.layout.width

    # --- parameter access ---

    def _named_layers(self) -> list[tuple[str, DenseLayer]]:
        named = [(f"encoder.{i}", l) for i, l in enumerate(self.encoder)]
        named += [("mu_head", self.mu_head), ("logvar_head", self.logvar_head)]
        named += [(f"decoder.{i}", l) for i, l in enumerate(self.decoder)]
        named += [("output", self.output)]
        return named

    def param_dict(self) -> dict[str, np.ndarray]:
        params: dict[str, np.ndarray] = {}
        for name, layer in self._named_layers():
            params[f"{name}.w"] = layer.weights
            params[f"{name}.b"] = layer.bias
        return params

    def load_param_dict(self, params: dict[str, np.ndarray]) -> None:
        for name, layer in self._named_layers():
            w = np.asarray(params[f"{name}.w"], dtype=np.float64)
            b = np.asarray(params[f"{name}.b"], dtype=np.float64)
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise ValueError(f"parameter shape mismatch for block {name!r}")
            layer.weights = w
            layer.bias = b

    # --- forward passes ---

    def _check_width(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_width:
            raise ValueError(
                f"input width {x.shape[-1]} != model input width {self.input_width}"
            )
        return x

    def encode(self, x: np.ndarray) -> GaussianParams:
        """Posterior parameters for one vector or a batch."""
        h = self._check_width(x)
        for layer in self.encoder:
            h = dense_forward(layer, h, "relu")
        return GaussianParams(
            mu=dense_forward(self.mu_head, h, "linear"),
            logvar=dense_forward(self.logvar_head, h, "linear"),
        )

    def decode(self, z: np.ndarray) -> np.ndarray:
        """Reconstruction heads: categorical probabilities per group, boolean
        probabilities, raw continuous values, concatenated in layout order."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.latent_dim:
            raise ValueError(f"latent width {z.shape[-1]} != {self.latent_dim}")
        h = z
        for layer in self.decoder:
            h = dense_forward(layer, h, "relu")
        logits = h @ self.output.weights + self.output.bias
        return self._activate_output(logits)

    def _activate_output(self, logits: np.ndarray) -> np.ndarray:
        out = softmax_per_group(logits, self.layout.group_slices)
        bsl = self.layout.bool_slice
        out[..., bsl] = sigmoid(logits[..., bsl])
        return out

    def forward(self, x: np.ndarray, noise: np.ndarray) -> VaeForward:
        """Full training pass for a batch, keeping intermediates."""
        x = self._check_width(np.atleast_2d(x))
        enc_inputs = [x]
        enc_pre = []
        h = x
        for layer in self.encoder:
            pre = h @ layer.weights + layer.bias
            enc_pre.append(pre)
            h = relu(pre)
            enc_inputs.append(h)
        gauss = GaussianParams(
            mu=h @ self.mu_head.weights + self.mu_head.bias,
            logvar=h @ self.logvar_head.weights + self.logvar_head.bias,
        )
        z = reparameterize(gauss, noise)
        dec_inputs = [z]
        dec_pre = []
        h = z
        for layer in self.decoder:
            pre = h @ layer.weights + layer.bias
            dec_pre.append(pre)
            h = relu(pre)
            dec_inputs.append(h)
        logits = h @ self.output.weights + self.output.bias
        recon = self._activate_output(logits)
        return VaeForward(
            enc_inputs=enc_inputs,
            enc_pre=enc_pre,
            gauss=gauss,
            noise=np.asarray(noise, dtype=np.float64),
            z=z,
            dec_inputs=dec_inputs,
            dec_pre=dec_pre,
            logits=logits,
            recon=recon,
        )

    def loss(self, x: np.ndarray, fwd: VaeForward, beta: float) -> LossBreakdown:
        return loss_breakdown(np.atleast_2d(x), fwd.recon, fwd.gauss, beta, self.layout)

    def backward(self, x: np.ndarray, fwd: VaeForward, beta: float) -> dict[str, np.ndarray]:
        """Exact gradients of the mean total loss for the recorded batch.

        Includes the pathwise term through the reparameterized sample. With
        beta == 0 the KL contributions are skipped entirely, leaving the pure
        reconstruction gradients.
        """
        x = self._check_width(np.atleast_2d(x))
        n = x.shape[0]
        layout = self.layout
        grads: dict[str, np.ndarray] = {}

        # d(loss)/d(logits), block by block.
        d_logits = np.empty_like(fwd.logits)
        for sl in layout.group_slices:
            t = x[:, sl]
            p = fwd.recon[:, sl]
            d_logits[:, sl] = (p * t.sum(axis=1, keepdims=True) - t) / n
        bsl = layout.bool_slice
        d_logits[:, bsl] = (fwd.recon[:, bsl] - x[:, bsl]) / n
        csl = layout.cont_slice
        d_logits[:, csl] = 2.0 * (fwd.recon[:, csl] - x[:, csl]) / n

        # Decoder stack.
        delta = d_logits
        grads["output.w"] = fwd.dec_inputs[-1].T @ delta
        grads["output.b"] = delta.sum(axis=0)
        delta = delta @ self.output.weights.T
        for i in range(len(self.decoder) - 1, -1, -1):
            delta = delta * (fwd.dec_pre[i] > 0)
            grads[f"decoder.{i}.w"] = fwd.dec_inputs[i].T @ delta
            grads[f"decoder.{i}.b"] = delta.sum(axis=0)
            delta = delta @ self.decoder[i].weights.T

        # Through the sample z = mu + sigma * noise, plus the KL terms.
        d_mu = delta
        d_logvar = delta * (0.5 * fwd.gauss.sigma * fwd.noise)
        if beta != 0.0:
            d_mu = d_mu + beta * fwd.gauss.mu / n
            d_logvar = d_logvar + beta * 0.5 * (np.exp(fwd.gauss.logvar) - 1.0) / n

        trunk = fwd.enc_inputs[-1]
        grads["mu_head.w"] = trunk.T @ d_mu
        grads["mu_head.b"] = d_mu.sum(axis=0)
        grads["logvar_head.w"] = trunk.T @ d_logvar
        grads["logvar_head.b"] = d_logvar.sum(axis=0)

        # Encoder stack.
        delta = d_mu @ self.mu_head.weights.T + d_logvar @ self.logvar_head.weights.T
        for i in range(len(self.encoder) - 1, -1, -1):
            delta = delta * (fwd.enc_pre[i] > 0)
            grads[f"encoder.{i}.w"] = fwd.enc_inputs[i].T @ delta
            grads[f"encoder.{i}.b"] = delta.sum(axis=0)
            delta = delta @ self.encoder[i].weights.T

        return grads
