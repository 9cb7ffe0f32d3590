"""Latent-noise sources for the generator.

``PseudoNormalSource`` is a seeded numpy normal stream. ``TrueRRAMSource``
models a stochastic-switching RRAM bit cell behaviourally: each raw bit is
Bernoulli with a slowly drifting bias, the stream is von Neumann debiased,
packed into 32-bit uniforms and turned into normals by Box-Muller.
"""

from __future__ import annotations

import math

import numpy as np

DRIFT_PERIOD = 10_000
_TWO32 = float(2 ** 32)
_WEIGHTS32 = (1 << np.arange(31, -1, -1, dtype=np.uint64)).astype(np.uint64)


def debias(bits) -> np.ndarray:
    """Von Neumann extractor over consecutive pairs: 01 -> 0, 10 -> 1, 00/11 dropped.

    A trailing unpaired bit is ignored.
    """
    b = np.asarray(bits, dtype=np.uint8).ravel()
    b = b[: len(b) - len(b) % 2]
    first, second = b[0::2], b[1::2]
    return first[first != second].copy()


class PseudoNormalSource:
    kind = "pseudo"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def raw_bit(self):
        raise TypeError("raw_bit is only defined for a true_rram source")

    def next_normal(self) -> float:
        return float(self._rng.standard_normal())

    def noise_batch(self, batch: int, dim: int) -> np.ndarray:
        if batch <= 0 or dim <= 0:
            raise ValueError("batch and dim must be positive")
        return self._rng.standard_normal((batch, dim))


class TrueRRAMSource:
    """Behavioural RRAM switching TRNG.

    Raw bit ``t`` is one with probability
    ``p_switch + drift_amplitude * sin(2*pi*t / 10_000)``. With ``seed=None`` the
    underlying switching events draw from OS entropy; pass a seed only for
    reproducible tests.
    """

    kind = "true"

    def __init__(self, p_switch: float = 0.5, drift_amplitude: float = 0.05, seed=None):
        if not 0.0 < p_switch < 1.0:
            raise ValueError(f"p_switch must lie in (0, 1), got {p_switch}")
        if not 0.0 <= drift_amplitude < min(p_switch, 1.0 - p_switch):
            raise ValueError(
                f"drift_amplitude must lie in [0, {min(p_switch, 1.0 - p_switch)})"
            )
        self.p_switch = p_switch
        self.drift_amplitude = drift_amplitude
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self._bits = np.zeros(0, dtype=np.uint8)
        self._spare: list[float] = []

    def raw_bits(self, n: int) -> np.ndarray:
        t = self._t + np.arange(n)
        p = self.p_switch + self.drift_amplitude * np.sin(2.0 * np.pi * t / DRIFT_PERIOD)
        self._t += n
        return (self._rng.random(n) < p).astype(np.uint8)

    def raw_bit(self) -> int:
        return int(self.raw_bits(1)[0])

    def debiased_bits(self, n: int) -> np.ndarray:
        have = [self._bits]
        count = len(self._bits)
        while count < n:
            # expected yield is p(1-p) per pair; overshoot a little
            p = self.p_switch
            need = n - count
            raw = 2 * int(math.ceil(need / (p * (1 - p)) * 0.55)) + 64
            fresh = debias(self.raw_bits(raw))
            have.append(fresh)
            count += len(fresh)
        bits = np.concatenate(have)
        self._bits = bits[n:]
        return bits[:n]

    def uniforms32(self, n: int) -> np.ndarray:
        """``n`` integers in ``[0, 2**32)`` built from debiased bits, MSB first."""
        bits = self.debiased_bits(32 * n).reshape(n, 32).astype(np.uint64)
        return bits @ _WEIGHTS32

    def _normals(self, n: int) -> np.ndarray:
        out = np.empty(n)
        k = min(n, len(self._spare))
        out[:k] = self._spare[:k]
        del self._spare[:k]
        rest = n - k
        if rest:
            pairs = (rest + 1) // 2
            u = self.uniforms32(2 * pairs).astype(float)
            u1 = (u[0::2] + 1.0) / _TWO32  # (0, 1], keeps log finite
            u2 = u[1::2] / _TWO32
            r = np.sqrt(-2.0 * np.log(u1))
            z = np.empty(2 * pairs)
            z[0::2] = r * np.cos(2.0 * np.pi * u2)
            z[1::2] = r * np.sin(2.0 * np.pi * u2)
            out[k:] = z[:rest]
            if 2 * pairs > rest:
                self._spare.append(float(z[-1]))
        return out

    def next_normal(self) -> float:
        return float(self._normals(1)[0])

    def noise_batch(self, batch: int, dim: int) -> np.ndarray:
        if batch <= 0 or dim <= 0:
            raise ValueError("batch and dim must be positive")
        return self._normals(batch * dim).reshape(batch, dim)


def make_source(kind: str, seed=None, p_switch: float = 0.5, drift_amplitude: float = 0.05):
    if kind == "pseudo":
        return PseudoNormalSource(0 if seed is None else seed)
    if kind in ("true", "true_rram"):
        return TrueRRAMSource(p_switch, drift_amplitude, seed=seed)
    raise ValueError(f"unknown noise kind {kind!r}")


def monobit_test(bits) -> tuple[float, float]:
    """Return ``(bias, p_value)`` for the frequency test; bias is ``ones/n - 0.5``."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    n = len(b)
    s = 2 * int(b.sum()) - n
    p = math.erfc(abs(s) / math.sqrt(n) / math.sqrt(2.0))
    return b.mean() - 0.5, p


def runs_test(bits) -> float:
    """p-value of the runs test (count of uninterrupted same-bit runs).

    Returns 0.0 when the frequency prerequisite already fails.
    """
    b = np.asarray(bits, dtype=np.int64).ravel()
    n = len(b)
    pi = b.mean()
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return math.erfc(num / den)
