"""Phenomenological model of one passive-array RRAM cell.

Conductance moves under fixed-amplitude set/reset pulses by a state-dependent
amount (linear window), scaled by a static per-device multiplier ``kappa``
(device-to-device spread) and perturbed by per-pulse multiplicative noise
(cycle-to-cycle). The result is clipped to ``[g_min, g_max]``.

All functions accept scalars or numpy arrays; the crossbar drives them with
whole arrays, tests drive them one cell at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

KAPPA_FLOOR = 0.05


class Polarity(IntEnum):
    RESET = -1
    NONE = 0
    SET = 1


@dataclass(frozen=True)
class DeviceParams:
    g_min: float = 150e-6
    g_max: float = 300e-6
    a_set: float = 10e-6
    a_reset: float = 10e-6
    sigma_d2d: float = 0.0
    sigma_c2c: float = 0.0
    v_set: float = 0.8
    v_reset: float = -0.8
    t_p: float = 100e-9

    def __post_init__(self):
        if not 0 < self.g_min < self.g_max:
            raise ValueError(f"need 0 < g_min < g_max, got {self.g_min}, {self.g_max}")
        if self.a_set <= 0 or self.a_reset <= 0:
            raise ValueError("a_set and a_reset must be positive")
        if self.sigma_d2d < 0 or self.sigma_c2c < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.t_p <= 0:
            raise ValueError("t_p must be positive")
        if self.v_set <= 0 or self.v_reset >= 0:
            raise ValueError("need v_set > 0 and v_reset < 0")

    @classmethod
    def ideal(cls, **overrides) -> "DeviceParams":
        return cls(**overrides)

    @classmethod
    def with_variation(cls, **overrides) -> "DeviceParams":
        """Defaults for the device-to-device + cycle-noise configuration."""
        kw = dict(sigma_d2d=0.2, sigma_c2c=0.05)
        kw.update(overrides)
        return cls(**kw)

    def evolve(self, **changes) -> "DeviceParams":
        return replace(self, **changes)


@dataclass
class DeviceState:
    g: float
    kappa: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def _check_domain(g0, params: DeviceParams):
    g0 = np.asarray(g0, dtype=float)
    # tolerate last-ulp excursions produced by the affine maps
    tol = 1e-12 * params.g_max
    if np.any(g0 < params.g_min - tol) or np.any(g0 > params.g_max + tol):
        raise ValueError(
            f"conductance outside [{params.g_min}, {params.g_max}] S"
        )
    return g0


def delta_g_mean(g0, polarity, params: DeviceParams):
    """Expected (noise-free) update magnitude for one pulse at state ``g0``.

    Set pulses shrink linearly to zero at ``g_max``; reset pulses shrink to zero
    at ``g_min``. ``polarity`` may be an array of Polarity codes; NONE gives 0.
    """
    g0 = _check_domain(g0, params)
    pol = np.asarray(polarity)
    span = params.g_max - params.g_min
    up = params.a_set * (params.g_max - g0) / span
    down = params.a_reset * (g0 - params.g_min) / span
    out = np.where(pol == Polarity.SET, up, np.where(pol == Polarity.RESET, down, 0.0))
    out = np.clip(out, 0.0, None)
    return out.item() if out.ndim == 0 else out


def apply_pulses(g, kappa, polarity, params: DeviceParams, rng: np.random.Generator):
    """Vectorised pulse application; returns ``(g_new, signed_delta)``.

    Noise is drawn only for cells that actually receive a pulse, in array
    order, so the scalar and array paths consume the stream identically.
    """
    g = _check_domain(g, params)
    pol = np.asarray(polarity)
    mag = np.asarray(delta_g_mean(g, pol, params), dtype=float) * np.asarray(kappa, dtype=float)
    fired = pol != Polarity.NONE
    if params.sigma_c2c > 0:
        eps = np.zeros(np.shape(mag))
        eps[fired] = rng.normal(0.0, params.sigma_c2c, size=int(np.count_nonzero(fired)))
        mag = mag * (1.0 + eps)
    g_new = np.clip(g + np.sign(pol) * mag, params.g_min, params.g_max)
    return g_new, g_new - g


def apply_pulse(state: DeviceState, polarity: Polarity, params: DeviceParams,
                rng: np.random.Generator) -> tuple[DeviceState, float]:
    g_new, dg = apply_pulses(
        np.array([state.g]), np.array([state.kappa]), np.array([int(polarity)]), params, rng
    )
    return DeviceState(g=float(g_new[0]), kappa=state.kappa), float(dg[0])


def pulse_energy(g_before, polarity, params: DeviceParams):
    """Energy of one fired pulse, ``V^2 * G_before * t_p``; zero when no pulse fires.

    A pulse that is clipped at a bound still dissipates energy.
    """
    g = np.asarray(g_before, dtype=float)
    pol = np.asarray(polarity)
    e = np.where(
        pol == Polarity.SET,
        params.v_set ** 2 * g * params.t_p,
        np.where(pol == Polarity.RESET, params.v_reset ** 2 * g * params.t_p, 0.0),
    )
    return e.item() if e.ndim == 0 else e


def sample_kappa(sigma_d2d: float, rng: np.random.Generator, size=None):
    """Static per-device update multiplier, Normal(1, sigma) truncated below at 0.05.

    Truncation is by rejection, so the retained samples keep the normal shape
    above the floor.
    """
    if sigma_d2d < 0:
        raise ValueError("sigma_d2d must be non-negative")
    if sigma_d2d == 0:
        return 1.0 if size is None else np.ones(size)
    n = 1 if size is None else int(np.prod(size))
    out = rng.normal(1.0, sigma_d2d, size=n)
    bad = out < KAPPA_FLOOR
    while np.any(bad):
        out[bad] = rng.normal(1.0, sigma_d2d, size=int(bad.sum()))
        bad = out < KAPPA_FLOOR
    return float(out[0]) if size is None else out.reshape(size)
