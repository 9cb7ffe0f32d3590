"""Tiled passive crossbar holding the GAN weight matrices as conductances.

The physical envelope is a 6 x 9 arrangement of 64 x 64 tiles (384 x 576
cells). Each weight occupies one cell; its sign lives in a fixed sign mask and
its magnitude in the conductance via an affine map. Matrices are packed as
flattened row-major vectors, one after the other, over a cell order that walks
tiles column-major and cells row-major inside a tile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from memgan.device import (
    DeviceParams,
    Polarity,
    apply_pulses,
    pulse_energy,
    sample_kappa,
)

TILE = 64
GRID_SHAPE = (384, 576)
CELL_SIDE_UM = 0.6
INIT_FRACTION = 0.25


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class MappingSpec:
    g_min: float = 150e-6
    g_max: float = 300e-6
    w_min: float = 0.0
    w_max: float = 0.4

    def __post_init__(self):
        if not self.g_min < self.g_max:
            raise ValueError("g_min must be below g_max")
        if not self.w_min < self.w_max:
            raise ValueError("w_min must be below w_max")
        if self.w_min < 0:
            raise ValueError("w_min is a magnitude and must be >= 0")


GENERATOR_MAPPING = MappingSpec(w_max=0.4)
DISCRIMINATOR_MAPPING = MappingSpec(w_max=0.15)


@dataclass(frozen=True)
class Region:
    name: str
    rows: int
    cols: int
    offset: int  # first linear cell index in packing order

    @property
    def size(self) -> int:
        return self.rows * self.cols


@dataclass
class CrossbarStack:
    g: np.ndarray
    kappa: np.ndarray
    sign_mask: np.ndarray
    mapped: np.ndarray
    regions: dict[str, Region]
    specs: dict[str, MappingSpec]
    device_params: DeviceParams
    tile_dims: tuple[int, int] = (TILE, TILE)
    energy_j: float = 0.0
    pulses: int = 0
    pulse_log: list | None = None
    _index: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape

    @property
    def n_tiles(self) -> int:
        r, c = self.g.shape
        return (r // self.tile_dims[0]) * (c // self.tile_dims[1])

    def cells(self, name: str) -> np.ndarray:
        """Flat grid indices of ``name``'s weights, in row-major weight order."""
        if name not in self.regions:
            raise KeyError(f"unknown matrix id {name!r}")
        if name not in self._index:
            r = self.regions[name]
            self._index[name] = packing_order(self.g.shape)[r.offset:r.offset + r.size]
        return self._index[name]

    def conductances(self, name: str) -> np.ndarray:
        r = self.regions[name]
        return self.g.ravel()[self.cells(name)].reshape(r.rows, r.cols)

    def signs(self, name: str) -> np.ndarray:
        r = self.regions[name]
        return self.sign_mask.ravel()[self.cells(name)].reshape(r.rows, r.cols)


def packing_order(shape=GRID_SHAPE, tile=TILE) -> np.ndarray:
    """Flat (row-major) grid index of every cell in packing order."""
    rows, cols = shape
    tr, tc = rows // tile, cols // tile
    k = np.arange(rows * cols)
    t, o = np.divmod(k, tile * tile)
    tile_col, tile_row = np.divmod(t, tr)
    r = tile_row * tile + o // tile
    c = tile_col * tile + o % tile
    return r * cols + c


def weights_to_conductance(w_mag, spec: MappingSpec):
    w = np.asarray(w_mag, dtype=float)
    tol = 1e-12 * max(1.0, spec.w_max)
    if np.any(w < spec.w_min - tol) or np.any(w > spec.w_max + tol):
        raise ValueError(f"weight magnitude outside [{spec.w_min}, {spec.w_max}]")
    g = spec.g_min + (w - spec.w_min) / (spec.w_max - spec.w_min) * (spec.g_max - spec.g_min)
    return g.item() if g.ndim == 0 else g


def conductance_weights(g, sign, spec: MappingSpec):
    """Signed weight for conductance ``g`` under ``spec``; works element-wise."""
    g = np.asarray(g, dtype=float)
    mag = spec.w_min + (g - spec.g_min) / (spec.g_max - spec.g_min) * (spec.w_max - spec.w_min)
    w = np.asarray(sign) * mag
    return w.item() if np.ndim(w) == 0 else w


def init_stack(layer_shapes, specs, params: DeviceParams, rng: np.random.Generator,
               names=None, shape=GRID_SHAPE) -> CrossbarStack:
    """Allocate and initialise a stack for the given weight shapes.

    ``specs`` is a list parallel to ``layer_shapes`` (or a dict keyed by name).
    Signs are drawn uniformly, magnitudes uniformly from
    ``[w_min, 0.25 * w_max]``, and device multipliers from the d2d spread.
    """
    layer_shapes = [tuple(s) for s in layer_shapes]
    if names is None:
        names = [f"m{i}" for i in range(len(layer_shapes))]
    if len(names) != len(layer_shapes):
        raise ValueError("names and layer_shapes differ in length")
    if isinstance(specs, dict):
        specs = [specs[n] for n in names]
    capacity = shape[0] * shape[1]
    total = sum(r * c for r, c in layer_shapes)
    if total > capacity:
        raise CapacityError(f"{total} weights exceed crossbar capacity of {capacity} cells")

    g = np.full(shape, params.g_min)
    sign_mask = np.ones(shape, dtype=np.int8)
    mapped = np.zeros(shape, dtype=bool)
    kappa = np.asarray(sample_kappa(params.sigma_d2d, rng, size=shape), dtype=float)
    stack = CrossbarStack(
        g=g, kappa=kappa, sign_mask=sign_mask, mapped=mapped, regions={}, specs={},
        device_params=params,
    )
    offset = 0
    for name, (r, c), spec in zip(names, layer_shapes, specs):
        if spec.g_min != params.g_min or spec.g_max != params.g_max:
            raise ValueError(f"mapping for {name!r} disagrees with device conductance range")
        stack.regions[name] = Region(name, r, c, offset)
        stack.specs[name] = spec
        idx = stack.cells(name)
        n = r * c
        signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        mags = rng.uniform(spec.w_min, INIT_FRACTION * spec.w_max, size=n)
        g.ravel()[idx] = weights_to_conductance(mags, spec)
        sign_mask.ravel()[idx] = signs
        mapped.ravel()[idx] = True
        offset += n
    return stack


def conductance_to_weights(stack: CrossbarStack, name: str) -> np.ndarray:
    return conductance_weights(stack.conductances(name), stack.signs(name), stack.specs[name])


def vmm(stack: CrossbarStack, name: str, x) -> np.ndarray:
    """Column currents for input voltages ``x``: ``W^T x`` per input row.

    ``x`` may be a vector of length ``rows`` or a ``(batch, rows)`` matrix.
    """
    r = stack.regions.get(name)
    if r is None:
        raise KeyError(f"unknown matrix id {name!r}")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != r.rows:
        raise ValueError(f"input length {x.shape[-1]} != {r.rows} rows of {name!r}")
    return x @ conductance_to_weights(stack, name)


def apply_manhattan_update(stack: CrossbarStack, name: str, delta_sign,
                           rng: np.random.Generator) -> tuple[int, float]:
    """Fire one fixed-amplitude pulse per cell whose desired change is non-zero.

    ``delta_sign`` is the sign of the desired weight change. A negative-sign
    cell realises a weight increase by lowering its conductance, so the pulse
    polarity is ``sign(delta * sign_mask)``. Returns ``(pulses, energy_j)``.
    """
    r = stack.regions.get(name)
    if r is None:
        raise KeyError(f"unknown matrix id {name!r}")
    d = np.sign(np.asarray(delta_sign))
    if d.shape != (r.rows, r.cols):
        raise ValueError(f"update shape {d.shape} != {(r.rows, r.cols)}")
    idx = stack.cells(name)
    pol = (d.ravel() * stack.sign_mask.ravel()[idx]).astype(np.int8)
    fired = pol != Polarity.NONE
    cells = idx[fired]
    pol = pol[fired]
    flat = stack.g.ravel()
    g_before = flat[cells].copy()
    g_after, _ = apply_pulses(g_before, stack.kappa.ravel()[cells], pol, stack.device_params, rng)
    flat[cells] = g_after
    energy = math.fsum(pulse_energy(g_before, pol, stack.device_params))
    n = int(cells.size)
    stack.pulses += n
    stack.energy_j += energy
    if stack.pulse_log is not None:
        stack.pulse_log.append((name, cells, pol, g_before))
    return n, energy


def export_conductance_map(stack: CrossbarStack) -> np.ndarray:
    return stack.g.copy()


@dataclass(frozen=True)
class AreaReport:
    cell_um2: float
    tile_um2: float
    tiles: int
    total_um2: float


def area_report(stack: CrossbarStack | None = None, tiles: int | None = None,
                cell_side_um: float = CELL_SIDE_UM) -> AreaReport:
    if tiles is None:
        tiles = stack.n_tiles if stack is not None else (GRID_SHAPE[0] // TILE) * (GRID_SHAPE[1] // TILE)
    tile_cells = TILE * TILE if stack is None else stack.tile_dims[0] * stack.tile_dims[1]
    # rounded to kill binary noise in 0.6**2
    cell = round(cell_side_um * cell_side_um, 12)
    tile = round(tile_cells * cell, 9)
    return AreaReport(cell, tile, tiles, round(tiles * tile, 6))


def write_conductance_csv(g: np.ndarray, path) -> Path:
    path = Path(path)
    np.savetxt(path, g, delimiter=",", fmt="%.9e")
    return path


def write_conductance_pgm(g: np.ndarray, path, g_min=150e-6, g_max=300e-6) -> Path:
    from memgan.imaging import write_pgm

    scaled = np.rint((np.asarray(g) - g_min) / (g_max - g_min) * 255.0)
    return write_pgm(np.clip(scaled, 0, 255).astype(np.uint8), path)


def save_conductance_map(stack: CrossbarStack, out_dir, mode: str, batch: int) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g = export_conductance_map(stack)
    stem = f"gmap_{mode}_{batch:03d}"
    p = stack.device_params
    return (
        write_conductance_csv(g, out_dir / f"{stem}.csv"),
        write_conductance_pgm(g, out_dir / f"{stem}.pgm", p.g_min, p.g_max),
    )
