"""PNG output for render results (Pillow-backed)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import RenderIOError


def seg_path(path):
    """``view0.png`` -> ``view0.seg.png``."""
    path = Path(path)
    return path.with_name(path.stem + ".seg.png")


def write_png(output, path):
    """Write the RGB buffer as 8-bit RGB PNG and the instance map beside it.

    The instance map goes to ``<stem>.seg.png`` as 16-bit grayscale.
    Returns the two paths written.
    """
    path = Path(path)
    spath = seg_path(path)
    try:
        Image.fromarray(np.ascontiguousarray(output.rgb, dtype=np.uint8), "RGB").save(path, format="PNG")
        Image.fromarray(np.ascontiguousarray(output.instances, dtype=np.uint16)).save(spath, format="PNG")
    except OSError as exc:
        raise RenderIOError(path, exc) from exc
    return path, spath


def read_png(path):
    """Read an image back as a numpy array (uint8 RGB or uint16 gray)."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            return np.array(im, dtype=np.uint16)
        return np.array(im.convert("RGB"), dtype=np.uint8)


def read_render(path, camera_index=0):
    from .raytracer import RenderOutput

    rgb = read_png(path)
    inst = read_png(seg_path(path))
    h, w = inst.shape
    return RenderOutput(w, h, rgb, inst, camera_index)
