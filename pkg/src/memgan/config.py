"""TOML run configuration.

Sections: ``[device]``, ``[mapping.generator]``, ``[mapping.discriminator]``,
``[train]`` and ``[noise]``. Every key is optional; missing keys keep the
defaults of the corresponding dataclass. Units are SI.

Example::

    [device]
    a_set = 10e-6
    sigma_d2d = 0.2

    [train]
    mode = "hw-d2d"
    epochs = 2

    [noise]
    kind = "true"
    p_switch = 0.5
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from memgan.crossbar import DISCRIMINATOR_MAPPING, GENERATOR_MAPPING, MappingSpec
from memgan.device import DeviceParams
from memgan.gan import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class NoiseConfig:
    kind: str = "pseudo"
    seed: int | None = None
    p_switch: float = 0.5
    drift_amplitude: float = 0.05

    def __post_init__(self):
        if self.kind not in ("pseudo", "true"):
            raise ConfigError(f"noise.kind must be 'pseudo' or 'true', got {self.kind!r}")


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    device_overrides: dict = field(default_factory=dict)
    digit: int = 3
    digit_cap: int | None = 6080
    shuffle_seed: int | None = None
    eval_samples: int = 1024
    snapshot_every: int = 10

    def with_mode(self, mode: str, noise_kind: str | None = None) -> "RunConfig":
        """Copy with a different (mode, noise) pair; device defaults follow the mode."""
        train = replace(self.train, mode=mode, device=None)
        train = replace(train, device=device_for(mode, self.device_overrides))
        noise = self.noise if noise_kind is None else replace(self.noise, kind=noise_kind)
        return replace(self, train=train, noise=noise)


def device_for(mode: str, overrides: dict) -> DeviceParams:
    base = DeviceParams.with_variation() if mode == "hw-d2d" else DeviceParams.ideal()
    return base.evolve(**overrides) if overrides else base


def _take(cls, section: dict, where: str) -> dict:
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")
    return dict(section)


def from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    extra = set(raw) - {"device", "mapping", "train", "noise"}
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    try:
        dev = _take(DeviceParams, raw.get("device", {}), "device")
        mapping = raw.get("mapping", {})
        gen_map = replace(GENERATOR_MAPPING, **_take(MappingSpec, mapping.get("generator", {}), "mapping.generator"))
        disc_map = replace(DISCRIMINATOR_MAPPING, **_take(MappingSpec, mapping.get("discriminator", {}), "mapping.discriminator"))
        train_raw = dict(raw.get("train", {}))
        run_keys = {"digit", "digit_cap", "shuffle_seed", "eval_samples", "snapshot_every"}
        run_kw = {k: train_raw.pop(k) for k in list(train_raw) if k in run_keys}
        train_kw = _take(TrainConfig, train_raw, "train")
        for k in ("gen_mapping", "disc_mapping", "device"):
            if k in train_kw:
                raise ConfigError(f"[train] may not set {k}")
        mode = train_kw.get("mode", "software")
        train = TrainConfig(**train_kw, gen_mapping=gen_map, disc_mapping=disc_map,
                            device=device_for(mode, dev))
        noise = NoiseConfig(**_take(NoiseConfig, raw.get("noise", {}), "noise"))
        return RunConfig(train=train, noise=noise, device_overrides=dev, **run_kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None) -> RunConfig:
    if path is None:
        return from_dict({})
    try:
        raw = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(raw)
