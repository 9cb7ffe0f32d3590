"""Binary PGM (P5) output for image grids and conductance maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

SIDE = 28


def write_pgm(pixels: np.ndarray, path) -> Path:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("write_pgm expects a 2-D uint8 array")
    h, w = pixels.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM supported")
    return np.frombuffer(parts[4], dtype=np.uint8, count=w * h).reshape(h, w)


def to_uint8(images) -> np.ndarray:
    """Map [-1, 1] pixels to [0, 255]."""
    x = np.clip(np.asarray(images, dtype=float), -1.0, 1.0)
    return np.rint((x + 1.0) * 127.5).astype(np.uint8)


def tile_images(images, grid) -> np.ndarray:
    rows, cols = grid
    images = np.asarray(images, dtype=float).reshape(-1, SIDE, SIDE)
    if len(images) > rows * cols:
        raise ValueError(f"{len(images)} images do not fit a {rows}x{cols} grid")
    canvas = np.full((rows * SIDE, cols * SIDE), -1.0)
    for k, img in enumerate(images):
        r, c = divmod(k, cols)
        canvas[r * SIDE:(r + 1) * SIDE, c * SIDE:(c + 1) * SIDE] = img
    return canvas


def export_image_grid(images, grid, path) -> Path:
    """Tile flattened 784-pixel images in [-1, 1] into one PGM; empty slots are black."""
    return write_pgm(to_uint8(tile_images(images, grid)), path)
