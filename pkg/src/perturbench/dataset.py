"""Procedural toy dataset: 10 classes of colored shapes on gradient backgrounds.

Classes are the product of five shapes (square, circle, triangle, plus,
ring) and two palettes (warm, cool). Shapes are large and mostly
low-frequency, so denoising-style defenses can strip small perturbations
without destroying the class signal. Generation is fully determined by the
seed; labels cycle 0..9 so any prefix whose length divides by 10 is exactly
class-balanced.

An ingestion path for user-supplied PNG directories with a labels CSV is
provided for non-synthetic experiments.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .image import load_image
from .rng import Rng

IMAGE_SIZE = 32
NUM_CLASSES = 10

_WARM = np.array([0.80, 0.25, 0.20])
_COOL = np.array([0.20, 0.35, 0.85])


@dataclass
class ToyDataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    seed: int


def _shape_field(shape_id: int, yy, xx, cy, cx, r):
    """Signed inside-distance (in pixels) of the shape boundary; positive
    inside. Soft-thresholded by the caller for ~1px antialiasing."""
    dy = yy - cy
    dx = xx - cx
    if shape_id == 0:  # square
        return r - np.maximum(np.abs(dx), np.abs(dy))
    if shape_id == 1:  # circle
        return r - np.sqrt(dx * dx + dy * dy)
    if shape_id == 2:  # triangle, apex up
        ax, ay = cx, cy - r
        bx, by = cx - 0.9 * r, cy + 0.62 * r
        cx2, cy2 = cx + 0.9 * r, cy + 0.62 * r
        d = None
        for (x1, y1), (x2, y2) in (((ax, ay), (bx, by)), ((bx, by), (cx2, cy2)),
                                   ((cx2, cy2), (ax, ay))):
            ex, ey = x2 - x1, y2 - y1
            norm = np.hypot(ex, ey)
            # inward normal for counterclockwise vertex order
            di = ((xx - x1) * ey - (yy - y1) * ex) / norm
            d = di if d is None else np.minimum(d, di)
        return d
    if shape_id == 3:  # plus sign
        t = 0.38 * r
        horiz = np.minimum(r - np.abs(dx), t - np.abs(dy))
        vert = np.minimum(t - np.abs(dx), r - np.abs(dy))
        return np.maximum(horiz, vert)
    if shape_id == 4:  # ring
        band = 0.40 * r
        return band - np.abs(np.sqrt(dx * dx + dy * dy) - 0.75 * r)
    raise ValueError(f"unknown shape id {shape_id}")


def _render(rng: Rng, label: int, size: int) -> np.ndarray:
    shape_id, palette = divmod(label, 2)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    # smooth background gradient between two muted tones
    g0 = 0.42 + rng.uniform(-0.06, 0.06, size=3)
    g1 = 0.52 + rng.uniform(-0.06, 0.06, size=3)
    angle = rng.uniform(0, 2 * np.pi)
    t = ((np.cos(angle) * xx + np.sin(angle) * yy) / size + 1.0) / 2.0
    img = g0[None, None, :] * (1 - t[:, :, None]) + g1[None, None, :] * t[:, :, None]

    base = _WARM if palette == 0 else _COOL
    color = np.clip(base + rng.uniform(-0.08, 0.08, size=3), 0.0, 1.0)
    cy = size / 2 + rng.uniform(-3, 3)
    cx = size / 2 + rng.uniform(-3, 3)
    r = rng.uniform(8.0, 12.0)
    alpha = np.clip(_shape_field(shape_id, yy, xx, cy, cx, r) + 0.5, 0.0, 1.0)
    img = img * (1 - alpha[:, :, None]) + color[None, None, :] * alpha[:, :, None]

    img += rng.normal(0.0, 0.015, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_toy_dataset(seed: int, n_train: int, n_test: int,
                         size: int = IMAGE_SIZE) -> ToyDataset:
    """Deterministic procedural dataset; labels cycle over the 10 classes."""
    if n_train <= 0 or n_test <= 0:
        raise ValueError("sample counts must be positive")
    rng = Rng(seed, stream=21)

    def make(n, gen):
        ys = np.arange(n, dtype=np.int64) % NUM_CLASSES
        xs = np.stack([_render(gen, int(y), size) for y in ys])
        return xs, ys

    train_x, train_y = make(n_train, rng)
    test_x, test_y = make(n_test, rng.spawn(22))
    return ToyDataset(train_x, train_y, test_x, test_y, seed)


def load_labeled_dir(directory, labels_csv="labels.csv"):
    """Load PNG/PPM images listed in a labels CSV (columns: filename,label)."""
    path = os.path.join(str(directory), labels_csv)
    xs, ys = [], []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().lower() == "filename":
                continue
            xs.append(load_image(os.path.join(str(directory), row[0].strip())))
            ys.append(int(row[1]))
    if not xs:
        raise ValueError(f"no labeled images found in {directory}")
    return np.stack(xs), np.asarray(ys, dtype=np.int64)
