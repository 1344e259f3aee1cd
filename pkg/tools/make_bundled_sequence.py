"""Generate the bundled natural test sequence.

A high-resolution master image with sharp region boundaries and multi-scale
texture is built from seeded noise; frames are shifted crops of the master,
box-downsampled so the inter-frame motion is sub-pixel at frame resolution.
Run from the repository root:

    python3 tools/make_bundled_sequence.py
"""
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from warpdiff.tensor import Tensor, save_image

SEED = 20240811
FRAMES = 8
SIZE = 160          # frame resolution
BOX = 8             # master-to-frame downsampling factor
SHIFT_FINE = (3, 2)  # master-pixel shift per frame -> (0.375, 0.25) px/frame


def build_master(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    fine = gaussian_filter(rng.standard_normal((h, w)), 4.0, mode="wrap")
    mid = gaussian_filter(rng.standard_normal((h, w)), 16.0, mode="wrap")
    coarse = gaussian_filter(rng.standard_normal((h, w)), 48.0, mode="wrap")
    # Sharp region boundaries from thresholded smooth fields.
    regions = 0.5 * (gaussian_filter(rng.standard_normal((h, w)), 40.0, mode="wrap") > 0)
    regions += 0.3 * (gaussian_filter(rng.standard_normal((h, w)), 24.0, mode="wrap") > 0.2)
    img = 0.30 * fine + 0.25 * mid + 0.20 * coarse
    img = img / max(abs(img.min()), abs(img.max())) * 0.5
    img = img + regions
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def box_downsample(img: np.ndarray, k: int) -> np.ndarray:
    h, w = img.shape
    return img.reshape(h // k, k, w // k, k).mean(axis=(1, 3))


def main() -> None:
    rng = np.random.default_rng(SEED)
    margin = BOX * 8
    master_h = SIZE * BOX + margin
    master_w = SIZE * BOX + margin
    master = build_master(rng, master_h, master_w)

    out_dir = Path(__file__).resolve().parents[1] / "src" / "warpdiff" / "data" / "sequence"
    out_dir.mkdir(parents=True, exist_ok=True)
    dx, dy = SHIFT_FINE
    for i in range(FRAMES):
        x0 = dx * i
        y0 = dy * i
        crop = master[y0:y0 + SIZE * BOX, x0:x0 + SIZE * BOX]
        frame = box_downsample(crop, BOX)
        save_image(Tensor(frame[None]), out_dir / f"frame_{i:02d}.png")
    print(f"wrote {FRAMES} frames to {out_dir}")


if __name__ == "__main__":
    main()
