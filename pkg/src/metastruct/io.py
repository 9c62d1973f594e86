"""Reading and writing masks, intensity images, NTMs, and CSV tables.

Masks are 8-bit grayscale images whose pixel value is the class index.
Binary PGM (P5, maxval 255) and 8-bit PNG are supported.
"""

import csv
import json
import re
from pathlib import Path

import numpy as np
from PIL import Image

from metastruct.masks import MaskError, as_label_image
from metastruct.ntm import ntm_from_dict, ntm_to_dict

IMAGE_SUFFIXES = (".pgm", ".png")


class FormatError(ValueError):
    """Raised for unreadable or malformed files."""


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval; '#' comments run to end of line
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*").match(data, pos)
        pos = m.end()
        m = re.compile(rb"\S+").match(data, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(m.group())
        pos = m.end()
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: PGM maxval must be 255, got {maxval}")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise FormatError(f"{path}: PGM raster has {len(raster)} bytes, expected {width * height}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def _write_pgm(path: Path, arr: np.ndarray):
    h, w = arr.shape
    path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + arr.astype(np.uint8).tobytes())


def read_gray(path) -> np.ndarray:
    """Raw 8-bit pixel values of a PGM or PNG file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return _read_pgm(path)
    if suffix == ".png":
        try:
            with Image.open(path) as im:
                if im.mode not in ("L", "P", "1"):
                    raise FormatError(f"{path}: expected 8-bit grayscale PNG, got mode {im.mode}")
                if im.mode == "P":
                    raise FormatError(f"{path}: palette PNGs are not class-index masks")
                return np.array(im.convert("L"), dtype=np.uint8)
        except OSError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    raise FormatError(f"{path}: unsupported image type {suffix!r}")


def write_gray(path, arr):
    path = Path(path)
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise FormatError("only single-channel images can be written")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise FormatError("pixel values must fit in 8 bits")
    arr = arr.astype(np.uint8)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        _write_pgm(path, arr)
    elif suffix == ".png":
        Image.fromarray(arr).save(path, format="PNG")
    else:
        raise FormatError(f"{path}: unsupported image type {suffix!r}")


def read_mask(path, num_classes: int | None = None) -> np.ndarray:
    """Class-index mask; ``num_classes`` (if given) bounds the pixel values."""
    arr = read_gray(path)
    try:
        return as_label_image(arr, num_classes)
    except MaskError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_mask(path, mask):
    write_gray(path, as_label_image(mask))


def read_intensity(path) -> np.ndarray:
    return read_gray(path).astype(float) / 255.0


def write_intensity(path, img):
    write_gray(path, np.rint(np.clip(np.asarray(img, dtype=float), 0.0, 1.0) * 255.0))


def write_heatmap(path, values):
    """Linearly scale ``values`` into 8 bits; ``min``/``max`` go to a JSON sidecar."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    scaled = np.zeros(values.shape) if hi == lo else (values - lo) / (hi - lo)
    write_gray(path, np.rint(scaled * 255.0))
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps({"min": lo, "max": hi}) + "\n")
    return sidecar


def read_heatmap(path) -> np.ndarray:
    path = Path(path)
    scale = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = read_gray(path).astype(float) / 255.0
    return scale["min"] + raw * (scale["max"] - scale["min"])


def load_ntm(path) -> np.ndarray:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return ntm_from_dict(obj)


def save_ntm(path, q):
    Path(path).write_text(json.dumps(ntm_to_dict(q)) + "\n")


def write_csv(path_or_file, header, rows):
    """RFC 4180 CSV (CRLF line endings)."""
    if hasattr(path_or_file, "write"):
        w = csv.writer(path_or_file, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path_or_file, "w", newline="") as fh:
        write_csv(fh, header, rows)


def list_images(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"{d} is not a directory")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
