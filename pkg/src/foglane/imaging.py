"""8-bit image file I/O and directory enumeration.

Pixels are handled in memory as float RGB arrays of shape (H, W, 3) with
values in [0, 1], obtained from 8-bit files by ``v / 255``.
"""
from pathlib import Path

import cv2
import numpy as np

from .errors import IngestionError, ParameterError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def check_image(img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ParameterError(f"expected an HxWx3 image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ParameterError("image must be at least 1x1")
    return img


def to_float(img_u8):
    return np.asarray(img_u8, dtype=np.float64) / 255.0


def to_uint8(img):
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def read_image_u8(path):
    """Decode an 8-bit PNG/JPEG into a uint8 RGB array."""
    data = np.fromfile(str(path), dtype=np.uint8)
    bgr = cv2.imdecode(data, cv2.IMREAD_COLOR) if data.size else None
    if bgr is None:
        raise IngestionError(f"cannot decode image {path}")
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)


def read_image(path):
    """Decode an 8-bit PNG/JPEG into float RGB in [0, 1]."""
    return to_float(read_image_u8(path))


def write_image_u8(path, img):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), cv2.cvtColor(np.asarray(img, dtype=np.uint8), cv2.COLOR_RGB2BGR)):
        raise IngestionError(f"cannot encode image {path}")


def write_image(path, img):
    """Encode a float RGB image, quantized to 8 bits, in the format implied by the suffix."""
    write_image_u8(path, to_uint8(img))


def write_mask(path, mask):
    """Write a binary mask as an 8-bit PNG holding 0/255."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.where(np.asarray(mask), 255, 0).astype(np.uint8)):
        raise IngestionError(f"cannot encode mask {path}")


def list_images(root):
    """Relative paths of all image files under ``root``, sorted lexicographically."""
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"not a directory: {root}")
    found = [p.relative_to(root) for p in root.rglob("*")
             if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES]
    return sorted(found, key=lambda p: p.as_posix())
