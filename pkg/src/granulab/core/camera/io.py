"""Reading and writing depth images and segmentation masks.

Native images are stored as a raw little-endian float32 grid (`.depth`)
with a JSON sidecar (`.depth.json`) describing its dimensions and camera.
Externally captured images can be imported from 16-bit millimetre grids,
either as PNG files or as raw `.u16` files.
"""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from marshmallow import ValidationError
from PIL import Image

from granulab.core.data.manifest import tool_version
from granulab.core.data.utils.io import atomic_write_bytes, read_json, write_json
from granulab.core.errors import SchemaMismatchError
from granulab.core.models.camera import CameraConfig, DepthImage
from granulab.core.schemas.artifacts import DEPTH_FORMAT, DEPTH_VERSION, DepthSidecarSchema

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def sidecar_path(fp: PathLike) -> Path:
    """Return the path of the JSON sidecar of a depth grid."""
    fp = Path(fp)
    return fp.with_name(fp.name + '.json')


def save_depth(img: DepthImage, fp: PathLike) -> list[Path]:
    """Save an image as a float32 grid plus its sidecar.

    Returns:
        The paths written: the grid, then the sidecar.
    """
    fp = Path(fp)
    atomic_write_bytes(fp, img.depth.astype('<f4').tobytes())
    sidecar = {
        'format': DEPTH_FORMAT,
        'version': DEPTH_VERSION,
        'width': img.width,
        'height': img.height,
        'dtype': 'float32le',
        'camera_height': img.camera_height,
        'intrinsics': img.intrinsics,
        'tool_version': tool_version(),
    }
    write_json(sidecar_path(fp), DepthSidecarSchema().dump(sidecar))
    return [fp, sidecar_path(fp)]


def load_depth(fp: PathLike) -> DepthImage:
    """Load an image saved by :func:`save_depth`.

    Raises:
        SchemaMismatchError: If the sidecar is invalid or does not match
            the size of the grid.
    """
    fp = Path(fp)
    try:
        meta = DepthSidecarSchema().load(read_json(sidecar_path(fp)))
    except ValidationError as e:
        raise SchemaMismatchError(f'invalid depth sidecar for {fp}: {e.messages}') from e
    if meta['version'] != DEPTH_VERSION:
        raise SchemaMismatchError(f'unsupported depth format version {meta["version"]}')
    raw = np.fromfile(fp, dtype='<f4')
    if raw.size != meta['width'] * meta['height']:
        raise SchemaMismatchError(
            f'{fp} holds {raw.size} values, sidecar expects '
            f'{meta["width"]}x{meta["height"]}')
    depth = raw.reshape(meta['height'], meta['width']).astype(np.float64)
    return DepthImage(depth, meta['intrinsics'], meta['camera_height'])


def import_depth(fp: PathLike, camera: CameraConfig,
                 shape: Optional[tuple[int, int]] = None) -> DepthImage:
    """Import an externally captured 16-bit millimetre depth grid.

    Zero-valued pixels carry no measurement and are set to the ground
    depth. The grid must match the camera's native resolution, whose
    intrinsics are attached to the image.

    Args:
        fp: A `.png` file or a raw little-endian `.u16` file.
        camera: The camera that captured the image.
        shape: `(height, width)` of a raw grid. Defaults to the camera's
            native resolution.

    Raises:
        SchemaMismatchError: If the grid does not match the camera.
    """
    fp = Path(fp)
    width, height = camera.native_resolution
    if fp.suffix.lower() == '.png':
        with Image.open(fp) as image:
            grid = np.array(image, dtype=np.uint16)
    else:
        rows, cols = shape or (height, width)
        raw = np.fromfile(fp, dtype='<u2')
        if raw.size != rows * cols:
            raise SchemaMismatchError(f'{fp} holds {raw.size} values, expected {rows}x{cols}')
        grid = raw.reshape(rows, cols)
    if grid.shape != (height, width):
        raise SchemaMismatchError(
            f'{fp} is {grid.shape[1]}x{grid.shape[0]}, camera expects {width}x{height}')

    depth = grid.astype(np.float64) / 1000.0
    missing = grid == 0
    if missing.any():
        logger.info('%s: %d pixels without depth set to ground', fp, int(missing.sum()))
        depth[missing] = camera.height_above_ground
    return DepthImage(depth, camera.K, camera.height_above_ground)


def load_mask(fp: PathLike, shape: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Load a boolean segmentation mask from a `.npy` or image file.

    Non-zero image pixels are grain pixels.

    Raises:
        SchemaMismatchError: If `shape` is given and does not match.
    """
    fp = Path(fp)
    if fp.suffix.lower() == '.npy':
        mask = np.load(fp).astype(bool)
    else:
        with Image.open(fp) as image:
            mask = np.array(image.convert('L')) > 0
    if shape is not None and mask.shape != tuple(shape):
        raise SchemaMismatchError(f'mask {fp} has shape {mask.shape}, expected {shape}')
    return mask


def save_mask(mask: np.ndarray, fp: PathLike) -> None:
    """Save a boolean mask as an 8-bit PNG, or as a `.npy` array."""
    fp = Path(fp)
    fp.parent.mkdir(parents=True, exist_ok=True)
    if fp.suffix.lower() == '.npy':
        np.save(fp, np.asarray(mask, dtype=bool))
        return
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(fp)

