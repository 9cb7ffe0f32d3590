"""Vanilla GAN (two 2-layer MLPs) with exact backprop and two trainers.

Weights follow the ``z = W^T x + b`` convention, so a layer's matrix has shape
``(fan_in, fan_out)`` and a batch ``X`` of row vectors maps to ``X @ W + b``.
Parameter names are fixed: ``gen_w1, gen_b1, gen_w2, gen_b2`` and
``disc_w1, disc_b1, disc_w2, disc_b2``.

The software trainer does plain mini-batch gradient steps. The hardware
trainer reads weights out of a :class:`~memgan.crossbar.CrossbarStack`, signs
the batch-mean gradients, and programs the stack with one pulse per weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from memgan import crossbar as xb
from memgan.device import DeviceParams

GEN_DIMS = (100, 128, 784)
DISC_DIMS = (784, 128, 1)
LEAK = 0.2
PROB_EPS = 1e-12

GEN_WEIGHTS = ("gen_w1", "gen_w2")
DISC_WEIGHTS = ("disc_w1", "disc_w2")
WEIGHT_NAMES = GEN_WEIGHTS + DISC_WEIGHTS
MODES = ("software", "hw-ideal", "hw-d2d")
LOSS_VARIANTS = ("non_saturating", "minimax")


# -- activations -------------------------------------------------------------

def leaky_relu(z):
    return np.where(z > 0, z, LEAK * z)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


_ACT = {
    "linear": (lambda z: z, lambda z, a: np.ones_like(z)),
    "leaky_relu": (leaky_relu, lambda z, a: np.where(z > 0, 1.0, LEAK)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "sigmoid": (sigmoid, lambda z, a: a * (1.0 - a)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)),
}


def forward(x, W, b, activation: str = "linear", matvec: Callable | None = None):
    """One layer: returns ``(a, z)`` with ``z = W^T x + b`` and ``a = f(z)``.

    ``matvec`` replaces the ``x @ W`` product, e.g. with a crossbar read.
    """
    x = np.asarray(x, dtype=float)
    W = None if W is None else np.asarray(W, dtype=float)
    if W is not None and x.shape[-1] != W.shape[0]:
        raise ValueError(f"input width {x.shape[-1]} does not match weights {W.shape}")
    z = (matvec(x) if matvec is not None else x @ W) + b
    return _ACT[activation][0](z), z


def gan_cost(d_real, d_fake) -> float:
    """Minimax value: batch-mean log D(x) plus batch-mean log(1 - D(G(z)))."""
    dr = np.clip(np.asarray(d_real, dtype=float), PROB_EPS, 1.0 - PROB_EPS)
    df = np.clip(np.asarray(d_fake, dtype=float), PROB_EPS, 1.0 - PROB_EPS)
    return float(np.mean(np.log(dr)) + np.mean(np.log1p(-df)))


def generator_loss(d_fake, variant: str = "non_saturating") -> float:
    df = np.clip(np.asarray(d_fake, dtype=float), PROB_EPS, 1.0 - PROB_EPS)
    if variant == "non_saturating":
        return float(-np.mean(np.log(df)))
    if variant == "minimax":
        return float(np.mean(np.log1p(-df)))
    raise ValueError(f"unknown loss variant {variant!r}")


# -- networks as pure functions of a parameter dict ---------------------------

@dataclass
class Cache:
    x: np.ndarray
    z1: np.ndarray
    h: np.ndarray
    z2: np.ndarray
    out: np.ndarray


def _mlp(params, prefix, x, out_act, matvec=None):
    mv1 = mv2 = None
    if matvec is not None:
        mv1 = lambda v: matvec(f"{prefix}_w1", v)  # noqa: E731
        mv2 = lambda v: matvec(f"{prefix}_w2", v)  # noqa: E731
    h, z1 = forward(x, params.get(f"{prefix}_w1"), params[f"{prefix}_b1"], "leaky_relu", mv1)
    out, z2 = forward(h, params.get(f"{prefix}_w2"), params[f"{prefix}_b2"], out_act, mv2)
    return Cache(np.asarray(x, dtype=float), z1, h, z2, out)


def generator_forward(params, noise, matvec=None) -> Cache:
    return _mlp(params, "gen", noise, "tanh", matvec)


def discriminator_forward(params, x, matvec=None) -> Cache:
    return _mlp(params, "disc", x, "sigmoid", matvec)


def _mlp_backward(params, prefix, cache: Cache, d_z2):
    """Gradients of the two layers given dLoss/dz2; also returns dLoss/dx."""
    W1, W2 = params[f"{prefix}_w1"], params[f"{prefix}_w2"]
    d_h = d_z2 @ W2.T
    d_z1 = d_h * np.where(cache.z1 > 0, 1.0, LEAK)
    grads = {
        f"{prefix}_w2": cache.h.T @ d_z2,
        f"{prefix}_b2": d_z2.sum(axis=0),
        f"{prefix}_w1": cache.x.T @ d_z1,
        f"{prefix}_b1": d_z1.sum(axis=0),
    }
    return grads, d_z1 @ W1.T


def backward_discriminator(params, real, fake, caches=None) -> dict:
    """Gradient of the minimax value (to be ascended) w.r.t. the discriminator.

    Real and fake batches are separate passes; each contributes the gradient
    of its own batch mean.
    """
    if caches is None:
        caches = (discriminator_forward(params, real), discriminator_forward(params, fake))
    c_real, c_fake = caches
    # d/ds log sigma(s) = 1 - sigma(s);  d/ds log(1 - sigma(s)) = -sigma(s)
    g_real, _ = _mlp_backward(params, "disc", c_real, (1.0 - c_real.out) / len(c_real.x))
    g_fake, _ = _mlp_backward(params, "disc", c_fake, -c_fake.out / len(c_fake.x))
    return {k: g_real[k] + g_fake[k] for k in g_real}


def backward_generator(params, noise, variant: str = "non_saturating", caches=None) -> dict:
    """Gradient of the generator loss (to be descended) through a frozen discriminator."""
    if caches is None:
        g_cache = generator_forward(params, noise)
        d_cache = discriminator_forward(params, g_cache.out)
    else:
        g_cache, d_cache = caches
    d = d_cache.out
    n = len(d)
    if variant == "non_saturating":
        d_s = -(1.0 - d) / n
    elif variant == "minimax":
        d_s = -d / n
    else:
        raise ValueError(f"unknown loss variant {variant!r}")
    _, d_img = _mlp_backward(params, "disc", d_cache, d_s)
    d_zo = d_img * (1.0 - g_cache.out ** 2)
    grads, _ = _mlp_backward(params, "gen", g_cache, d_zo)
    return grads


def discriminator_value(params, real, noise) -> float:
    fake = generator_forward(params, noise).out
    return gan_cost(discriminator_forward(params, real).out, discriminator_forward(params, fake).out)


def generator_objective(params, noise, variant: str = "non_saturating") -> float:
    fake = generator_forward(params, noise).out
    return generator_loss(discriminator_forward(params, fake).out, variant)


# -- model and config ---------------------------------------------------------

@dataclass
class TrainConfig:
    mode: str = "software"
    epochs: int = 2
    batch_size: int = 608
    lr0: float = 0.1
    decay: float = 1e-4
    bias_step: float = 0.01
    loss_variant: str = "non_saturating"
    seed: int = 0
    gen_mapping: xb.MappingSpec = field(default_factory=lambda: xb.GENERATOR_MAPPING)
    disc_mapping: xb.MappingSpec = field(default_factory=lambda: xb.DISCRIMINATOR_MAPPING)
    device: DeviceParams | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ValueError(f"loss_variant must be one of {LOSS_VARIANTS}")
        if self.lr0 <= 0 or self.decay < 0:
            raise ValueError("need lr0 > 0 and decay >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")

    @property
    def hardware(self) -> bool:
        return self.mode != "software"

    def device_params(self) -> DeviceParams:
        if self.device is not None:
            return self.device
        if self.mode == "hw-d2d":
            return DeviceParams.with_variation()
        return DeviceParams.ideal()

    def specs(self) -> dict:
        return {
            "gen_w1": self.gen_mapping,
            "gen_w2": self.gen_mapping,
            "disc_w1": self.disc_mapping,
            "disc_w2": self.disc_mapping,
        }


def learning_rate(t: int, lr0: float = 0.1, decay: float = 1e-4) -> float:
    return lr0 / (1.0 + decay * t)


def layer_shapes(gen_dims=GEN_DIMS, disc_dims=DISC_DIMS):
    return [
        (gen_dims[0], gen_dims[1]),
        (gen_dims[1], gen_dims[2]),
        (disc_dims[0], disc_dims[1]),
        (disc_dims[1], disc_dims[2]),
    ]


class GanModel:
    """Generator/discriminator pair whose weights live digitally or on a crossbar."""

    def __init__(self, biases: dict, weights: dict | None = None,
                 stack: xb.CrossbarStack | None = None,
                 gen_dims=GEN_DIMS, disc_dims=DISC_DIMS):
        if (weights is None) == (stack is None):
            raise ValueError("give exactly one of digital weights or a crossbar stack")
        self.gen_dims = tuple(gen_dims)
        self.disc_dims = tuple(disc_dims)
        self.biases = {k: np.asarray(v, dtype=float) for k, v in biases.items()}
        self.weights = weights
        self.stack = stack

    @property
    def hardware(self) -> bool:
        return self.stack is not None

    @classmethod
    def create(cls, cfg: TrainConfig, rng: np.random.Generator,
               gen_dims=GEN_DIMS, disc_dims=DISC_DIMS) -> "GanModel":
        """Initialise a model; both modes draw initial weights from a fresh stack.

        Software weights are the signed weight view of that stack, so software
        and hardware runs with the same seed start from the same network.
        """
        shapes = layer_shapes(gen_dims, disc_dims)
        stack = xb.init_stack(shapes, cfg.specs(), cfg.device_params(), rng, names=WEIGHT_NAMES)
        biases = {
            "gen_b1": np.zeros(gen_dims[1]), "gen_b2": np.zeros(gen_dims[2]),
            "disc_b1": np.zeros(disc_dims[1]), "disc_b2": np.zeros(disc_dims[2]),
        }
        if cfg.hardware:
            return cls(biases, stack=stack, gen_dims=gen_dims, disc_dims=disc_dims)
        weights = {n: xb.conductance_to_weights(stack, n) for n in WEIGHT_NAMES}
        return cls(biases, weights=weights, gen_dims=gen_dims, disc_dims=disc_dims)

    def weight(self, name: str) -> np.ndarray:
        if self.stack is not None:
            return xb.conductance_to_weights(self.stack, name)
        return self.weights[name]

    def params(self) -> dict:
        """Snapshot of all parameters; hardware weights are read through the mapping."""
        p = {n: self.weight(n) for n in WEIGHT_NAMES}
        p.update(self.biases)
        return p

    def matvec(self, name: str, x):
        if self.stack is not None:
            return xb.vmm(self.stack, name, x)
        return np.asarray(x, dtype=float) @ self.weights[name]

    def generate(self, noise) -> np.ndarray:
        return generator_forward(self.biases, noise, matvec=self.matvec).out

    def discriminate(self, x) -> np.ndarray:
        return discriminator_forward(self.biases, x, matvec=self.matvec).out


# -- trainers -----------------------------------------------------------------

@dataclass
class BatchResult:
    d_value: float
    g_loss: float
    lr: float = 0.0
    pulses: int = 0
    energy_j: float = 0.0


def train_batch_software(model: GanModel, real, noise, t: int, cfg: TrainConfig) -> BatchResult:
    if model.hardware:
        raise ValueError("software trainer needs a digital model")
    lr = learning_rate(t, cfg.lr0, cfg.decay)
    p = model.params()
    fake = generator_forward(p, noise).out
    c_real, c_fake = discriminator_forward(p, real), discriminator_forward(p, fake)
    d_value = gan_cost(c_real.out, c_fake.out)
    for k, g in backward_discriminator(p, real, fake, (c_real, c_fake)).items():
        _step(model, k, lr * g)

    p = model.params()
    g_cache = generator_forward(p, noise)
    d_cache = discriminator_forward(p, g_cache.out)
    g_loss = generator_loss(d_cache.out, cfg.loss_variant)
    for k, g in backward_generator(p, noise, cfg.loss_variant, (g_cache, d_cache)).items():
        _step(model, k, -lr * g)
    return BatchResult(d_value, g_loss, lr=lr)


def _step(model: GanModel, name: str, delta):
    target = model.weights if name in WEIGHT_NAMES else model.biases
    target[name] = target[name] + delta


def train_batch_hardware(model: GanModel, real, noise, cfg: TrainConfig,
                         rng: np.random.Generator) -> BatchResult:
    """One in-situ iteration: discriminator pulses first, then generator pulses.

    Weights are read from the conductances before each phase. Desired change
    is ``+sign(grad)`` for the ascending discriminator and ``-sign(grad)`` for
    the descending generator; biases move digitally by ``bias_step``.
    """
    if not model.hardware:
        raise ValueError("hardware trainer needs a crossbar-backed model")
    stack = model.stack
    pulses, energy = 0, 0.0

    p = model.params()
    fake = generator_forward(p, noise).out
    c_real, c_fake = discriminator_forward(p, real), discriminator_forward(p, fake)
    d_value = gan_cost(c_real.out, c_fake.out)
    grads = backward_discriminator(p, real, fake, (c_real, c_fake))
    for name in DISC_WEIGHTS:
        n, e = xb.apply_manhattan_update(stack, name, np.sign(grads[name]), rng)
        pulses, energy = pulses + n, energy + e
    for name in ("disc_b1", "disc_b2"):
        model.biases[name] = model.biases[name] + cfg.bias_step * np.sign(grads[name])

    p = model.params()
    g_cache = generator_forward(p, noise)
    d_cache = discriminator_forward(p, g_cache.out)
    g_loss = generator_loss(d_cache.out, cfg.loss_variant)
    grads = backward_generator(p, noise, cfg.loss_variant, (g_cache, d_cache))
    for name in GEN_WEIGHTS:
        n, e = xb.apply_manhattan_update(stack, name, -np.sign(grads[name]), rng)
        pulses, energy = pulses + n, energy + e
    for name in ("gen_b1", "gen_b2"):
        model.biases[name] = model.biases[name] - cfg.bias_step * np.sign(grads[name])
    return BatchResult(d_value, g_loss, pulses=pulses, energy_j=energy)


def run_training(cfg: TrainConfig, data_batches, noise_source, model: GanModel | None = None,
                 evaluate: Callable[[GanModel], float] | None = None,
                 on_batch: Callable[[int, GanModel], None] | None = None):
    """Train for ``cfg.epochs`` passes over ``data_batches``.

    After every batch the optional ``evaluate`` callback supplies the accuracy
    column and ``on_batch(step, model)`` may write snapshots. Returns
    ``(RunMetrics, model)``.
    """
    from memgan.metrics import RunMetrics

    if cfg.epochs < 1:
        raise ValueError("epochs must be >= 1")
    data_batches = list(data_batches)
    if not data_batches:
        raise ValueError("no training batches")
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = GanModel.create(cfg, rng)
    if model.hardware != cfg.hardware:
        raise ValueError(f"model storage does not match mode {cfg.mode!r}")
    metrics = RunMetrics()
    step = 0
    for _ in range(cfg.epochs):
        for real in data_batches:
            noise = noise_source.noise_batch(len(real), model.gen_dims[0])
            if cfg.hardware:
                res = train_batch_hardware(model, real, noise, cfg, rng)
            else:
                res = train_batch_software(model, real, noise, step, cfg)
            step += 1
            acc = evaluate(model) if evaluate is not None else float("nan")
            metrics.append(step, acc, res.pulses, res.energy_j,
                           d_value=res.d_value, g_loss=res.g_loss)
            if on_batch is not None:
                on_batch(step, model)
    return metrics, model
