"""Built-in binary pattern gallery: 32x32 geometric shapes and the small 2x2 / 2x4 patterns."""

from typing import Dict

import numpy as np

from imaging import Image


def _grid(size: int):
    rows, cols = np.mgrid[0:size, 0:size]
    return rows.astype(float), cols.astype(float)


def square(size: int = 32) -> Image:
    rows, cols = _grid(size)
    lo, hi = size / 4, 3 * size / 4
    return Image(pixels=((rows >= lo) & (rows < hi) & (cols >= lo) & (cols < hi)).astype(float))


def circle(size: int = 32) -> Image:
    rows, cols = _grid(size)
    centre = (size - 1) / 2
    radius = 0.3 * size
    return Image(pixels=((rows - centre) ** 2 + (cols - centre) ** 2 <= radius ** 2).astype(float))


def triangle(size: int = 32) -> Image:
    rows, cols = _grid(size)
    centre = (size - 1) / 2
    top, bottom = size / 6, 5 * size / 6
    half_width = (rows - top) / (bottom - top) * 0.35 * size
    inside = (rows >= top) & (rows < bottom) & (np.abs(cols - centre) <= half_width)
    return Image(pixels=inside.astype(float))


def cross(size: int = 32) -> Image:
    rows, cols = _grid(size)
    centre = (size - 1) / 2
    arm = size / 16
    lo, hi = size / 8, 7 * size / 8
    horizontal = (np.abs(rows - centre) <= arm) & (cols >= lo) & (cols < hi)
    vertical = (np.abs(cols - centre) <= arm) & (rows >= lo) & (rows < hi)
    return Image(pixels=(horizontal | vertical).astype(float))


def diamond(size: int = 32) -> Image:
    rows, cols = _grid(size)
    centre = (size - 1) / 2
    return Image(pixels=(np.abs(rows - centre) + np.abs(cols - centre) <= 0.35 * size).astype(float))


def frame(size: int = 32) -> Image:
    rows, cols = _grid(size)
    lo, hi = size / 8, 7 * size / 8
    thickness = size / 16
    outer = (rows >= lo) & (rows < hi) & (cols >= lo) & (cols < hi)
    inner = (rows >= lo + thickness) & (rows < hi - thickness) & (cols >= lo + thickness) & (cols < hi - thickness)
    return Image(pixels=(outer & ~inner).astype(float))


SHAPES = {
    'circle': circle,
    'cross': cross,
    'diamond': diamond,
    'frame': frame,
    'square': square,
    'triangle': triangle,
}


def gallery(size: int = 32) -> Dict[str, Image]:
    return {name: build(size) for name, build in SHAPES.items()}


def two_qubit_patterns() -> Dict[str, Image]:
    return {
        'S1': Image(pixels=[[1, 0], [0, 1]]),
        'S2': Image(pixels=[[1, 1], [0, 0]]),
        'S3': Image(pixels=[[1, 0], [1, 0]]),
        'S4': Image(pixels=[[0, 1], [1, 0]]),
    }


def three_qubit_patterns() -> Dict[str, Image]:
    return {
        'T1': Image(pixels=[[1, 0, 1, 0], [0, 1, 0, 1]]),
        'T2': Image(pixels=[[1, 1, 1, 1], [0, 0, 0, 0]]),
        'T3': Image(pixels=[[1, 1, 0, 0], [1, 1, 0, 0]]),
        'T4': Image(pixels=[[0, 1, 0, 1], [1, 0, 1, 0]]),
    }
