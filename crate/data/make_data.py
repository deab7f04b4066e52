"""Regenerates the bundled grayscale corpus from scikit-image's sample data.

Run from the repository root: python3 data/make_data.py
"""
import os

import numpy as np
from skimage import color, data, filters
from skimage.metrics import structural_similarity

OUT = os.path.dirname(os.path.abspath(__file__))


def gray(img):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3]) * 255.0
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def write_pgm(path, img):
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(img.astype(np.uint8).tobytes())


def box2(img):
    f = img.astype(np.float64)
    f = (f[0::2, 0::2] + f[1::2, 0::2] + f[0::2, 1::2] + f[1::2, 1::2]) / 4.0
    return np.clip(np.round(f), 0, 255).astype(np.uint8)


def main():
    os.makedirs(os.path.join(OUT, "train"), exist_ok=True)
    os.makedirs(os.path.join(OUT, "test"), exist_ok=True)
    os.makedirs(os.path.join(OUT, "metrics"), exist_ok=True)

    write_pgm(os.path.join(OUT, "train", "astronaut.pgm"), gray(data.astronaut()))
    write_pgm(os.path.join(OUT, "train", "coffee.pgm"), gray(data.coffee()))
    write_pgm(os.path.join(OUT, "train", "rocket.pgm"), gray(data.rocket()))

    camera = gray(data.camera())
    write_pgm(os.path.join(OUT, "test", "camera256.pgm"), box2(camera))

    crops = {
        "sr_camera": camera[100:196, 200:296],
        "sr_coins": gray(data.coins())[60:156, 100:196],
        "sr_clock": gray(data.clock())[100:196, 150:246],
        "sr_chelsea": gray(data.chelsea())[60:156, 120:216],
        "sr_moon": gray(data.moon())[200:296, 200:296],
    }
    for name, img in crops.items():
        write_pgm(os.path.join(OUT, "test", name + ".pgm"), img)

    # Distorted pairs for cross-checking MSSIM against scikit-image.
    rng = np.random.default_rng(7)
    refs = list(crops.items())
    distort = [
        lambda x: filters.gaussian(x.astype(float), sigma=1.2, preserve_range=True),
        lambda x: x.astype(float) + rng.normal(0, 15, x.shape),
        lambda x: 0.7 * x.astype(float) + 40,
        lambda x: np.floor(x.astype(float) / 32) * 32 + 16,
        lambda x: np.roll(x.astype(float), 2, axis=1),
    ]
    lines = []
    for (name, ref), fn in zip(refs, distort):
        test = np.clip(np.round(fn(ref)), 0, 255).astype(np.uint8)
        write_pgm(os.path.join(OUT, "metrics", name + "_distorted.pgm"), test)
        v = structural_similarity(
            ref.astype(float),
            test.astype(float),
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            data_range=255,
        )
        lines.append("%s %.10f" % (name, v))
    with open(os.path.join(OUT, "metrics", "reference_mssim.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
