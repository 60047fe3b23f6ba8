"""Foundation raster types and bit-exact codecs.

Images exist in two forms: coded (8-bit integer channels) and working
(float32 in [0, 1]).  All filtering happens on the working form; the
coded form is only produced once, at file-encode time.  Flow fields use
the conventional binary layout with the float sanity marker 202021.25
and NaN components marking invalid pixels.
"""

from __future__ import annotations

import io
import logging
import struct
import zlib
from dataclasses import dataclass

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
FLOW_MAGIC = 202021.25
OCC_INVALID = 255

# Clamp for -10*log10(x) so perfect predictions report 100 dB instead of inf.
MSE_FLOOR = 1e-10


class DecodeError(ValueError):
    """Malformed image stream; ``offset`` is the byte position of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedFormatError(ValueError):
    """Well-formed stream, but not the 8-bit layout this toolkit accepts."""


class FlowFormatError(ValueError):
    """Flow stream with a bad magic value or a size/header mismatch."""


@dataclass(frozen=True, eq=False)
class RasterImage:
    """H x W x 3 frame, either coded (uint8) or working (float32 in [0,1])."""

    data: np.ndarray
    coded: bool

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixel array, got shape {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {d.shape[1]}x{d.shape[0]}")
        if self.coded:
            if d.dtype != np.uint8:
                raise ValueError(f"coded images must be uint8, got {d.dtype}")
        else:
            if d.dtype != np.float32:
                raise ValueError(f"working images must be float32, got {d.dtype}")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def to_working(self) -> "RasterImage":
        if not self.coded:
            return self
        return RasterImage(self.data.astype(np.float32) / np.float32(255.0), coded=False)

    def to_coded(self) -> "RasterImage":
        if self.coded:
            return self
        q = np.clip(np.rint(self.data.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
        return RasterImage(q, coded=True)


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel (dx, dy) displacement in pixels with a validity mask.

    Invalid pixels carry (0, 0) and are excluded from every statistic.
    """

    vectors: np.ndarray  # (h, w, 2) float32
    valid: np.ndarray  # (h, w) bool

    def __post_init__(self):
        v = self.vectors
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValueError(f"expected (h, w, 2) flow array, got shape {v.shape}")
        if v.dtype != np.float32:
            raise ValueError(f"flow vectors must be float32, got {v.dtype}")
        if self.valid.shape != v.shape[:2] or self.valid.dtype != np.bool_:
            raise ValueError("validity mask must be bool with shape (h, w)")

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def height(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True, eq=False)
class OcclusionMask:
    """Per-pixel visibility class: 0 (both inputs), 1 (one input), 2 (neither)."""

    classes: np.ndarray  # (h, w) uint8 in {0, 1, 2}
    valid: np.ndarray  # (h, w) bool

    def __post_init__(self):
        c = self.classes
        if c.ndim != 2 or c.dtype != np.uint8:
            raise ValueError("occlusion classes must be a uint8 (h, w) array")
        if self.valid.shape != c.shape or self.valid.dtype != np.bool_:
            raise ValueError("validity mask must be bool with shape (h, w)")
        if c[self.valid].size and c[self.valid].max() > 2:
            raise ValueError("occlusion classes must lie in {0, 1, 2} on valid pixels")

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def height(self) -> int:
        return self.classes.shape[0]


@dataclass(frozen=True, eq=False)
class AttributeMap:
    """Per-pixel non-negative scalar attribute (photometric drift, nonlinearity, ...)."""

    values: np.ndarray  # (h, w) float
    valid: np.ndarray  # (h, w) bool

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError("attribute values must be a (h, w) array")
        if self.valid.shape != v.shape or self.valid.dtype != np.bool_:
            raise ValueError("validity mask must be bool with shape (h, w)")
        vals = v[self.valid]
        if vals.size and (not np.all(np.isfinite(vals)) or vals.min() < 0):
            raise ValueError("attribute values must be finite and non-negative")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# PNG container scanning
#
# Pillow does the pixel work, but it reports decode failures without byte
# positions.  This scan walks the chunk structure first so malformed streams
# fail with a precise offset, and extracts the IHDR fields the format checks
# need.
# ---------------------------------------------------------------------------


def _scan_png(data: bytes) -> dict:
    if len(data) < 8 or data[:8] != PNG_SIGNATURE:
        offset = 0
        for i in range(min(len(data), 8)):
            if data[i] != PNG_SIGNATURE[i]:
                offset = i
                break
        else:
            offset = len(data)
        raise DecodeError("not a PNG stream", offset)
    pos = 8
    info: dict = {"idat_offset": None}
    seen_ihdr = False
    while True:
        if pos + 8 > len(data):
            raise DecodeError("truncated chunk header", pos)
        length = int.from_bytes(data[pos : pos + 4], "big")
        ctype = data[pos + 4 : pos + 8]
        if pos + 12 + length > len(data):
            raise DecodeError(f"truncated {ctype.decode('latin1')} chunk", pos + 8)
        crc_expected = int.from_bytes(data[pos + 8 + length : pos + 12 + length], "big")
        crc_actual = zlib.crc32(data[pos + 4 : pos + 8 + length]) & 0xFFFFFFFF
        if crc_actual != crc_expected:
            raise DecodeError(f"bad CRC in {ctype.decode('latin1')} chunk", pos + 8 + length)
        if ctype == b"IHDR":
            if length != 13:
                raise DecodeError("IHDR chunk has wrong length", pos)
            body = data[pos + 8 : pos + 21]
            info["width"] = int.from_bytes(body[0:4], "big")
            info["height"] = int.from_bytes(body[4:8], "big")
            info["bit_depth"] = body[8]
            info["color_type"] = body[9]
            seen_ihdr = True
        elif ctype == b"IDAT" and info["idat_offset"] is None:
            info["idat_offset"] = pos + 8
        elif ctype == b"IEND":
            if not seen_ihdr:
                raise DecodeError("missing IHDR chunk", 8)
            return info
        pos += 12 + length


def _decode_png(data: bytes, info: dict) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            return np.asarray(im)
    except DecodeError:
        raise
    except Exception as exc:  # zlib/filter failures inside the pixel stream
        offset = info["idat_offset"] if info["idat_offset"] is not None else 8
        raise DecodeError(f"pixel stream decode failed: {exc}", offset) from exc


def read_image(data: bytes) -> RasterImage:
    """Decode a lossless 8-bit RGB PNG stream to a coded image."""
    info = _scan_png(data)
    if info.get("bit_depth") != 8 or info.get("color_type") != 2:
        raise UnsupportedFormatError(
            f"expected 8-bit RGB, got bit depth {info.get('bit_depth')} "
            f"color type {info.get('color_type')}"
        )
    arr = _decode_png(data, info)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise UnsupportedFormatError(f"decoded to unexpected layout {arr.shape} {arr.dtype}")
    return RasterImage(arr, coded=True)


def write_image(image: RasterImage) -> bytes:
    """Encode to PNG, losslessly; read_image(write_image(x)) == x bit-exactly."""
    coded = image.to_coded()
    buf = io.BytesIO()
    Image.fromarray(coded.data, mode="RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def read_mask_image(data: bytes) -> OcclusionMask:
    """Decode an 8-bit single-channel mask file; value 255 marks invalid pixels."""
    info = _scan_png(data)
    if info.get("bit_depth") != 8 or info.get("color_type") != 0:
        raise UnsupportedFormatError("occlusion masks must be 8-bit single-channel")
    arr = _decode_png(data, info)
    valid = arr != OCC_INVALID
    classes = np.where(valid, arr, 0).astype(np.uint8)
    return OcclusionMask(classes, valid)


def write_mask_image(mask: OcclusionMask) -> bytes:
    arr = np.where(mask.valid, mask.classes, np.uint8(OCC_INVALID)).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def read_attribute_image(data: bytes) -> AttributeMap:
    """Decode a 16-bit single-channel attribute file scaled by 1/65535 per unit."""
    info = _scan_png(data)
    if info.get("bit_depth") != 16 or info.get("color_type") != 0:
        raise UnsupportedFormatError("attribute maps must be 16-bit single-channel")
    try:
        with Image.open(io.BytesIO(data)) as im:
            arr = np.asarray(im, dtype=np.float64)
    except Exception as exc:
        offset = info["idat_offset"] if info["idat_offset"] is not None else 8
        raise DecodeError(f"pixel stream decode failed: {exc}", offset) from exc
    values = arr / 65535.0
    return AttributeMap(values, np.ones(values.shape, dtype=bool))


def write_attribute_image(attr: AttributeMap) -> bytes:
    scaled = np.clip(np.rint(attr.values * 65535.0), 0, 65535).astype(np.uint16)
    scaled = np.where(attr.valid, scaled, np.uint16(0))
    buf = io.BytesIO()
    Image.fromarray(scaled.astype(np.int32), mode="I").convert("I;16").save(
        buf, format="PNG", optimize=False
    )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Flow codec: float magic, int32 width/height, interleaved float32 (dx, dy)
# row-major, all little-endian.  NaN components serialize invalid pixels.
# ---------------------------------------------------------------------------


def read_flow_file(data: bytes) -> FlowField:
    if len(data) < 12:
        raise FlowFormatError(f"flow stream too short ({len(data)} bytes)")
    (magic,) = struct.unpack("<f", data[:4])
    if magic != np.float32(FLOW_MAGIC):
        raise FlowFormatError(f"bad flow magic {magic!r}, expected {FLOW_MAGIC}")
    width, height = struct.unpack("<ii", data[4:12])
    if width < 1 or height < 1:
        raise FlowFormatError(f"bad flow dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) != expected:
        raise FlowFormatError(
            f"flow payload is {len(data)} bytes, header implies {expected}"
        )
    raw = np.frombuffer(data, dtype="<f4", offset=12).reshape(height, width, 2)
    valid = ~np.isnan(raw).any(axis=2)
    vectors = np.where(valid[..., None], raw, np.float32(0.0)).astype(np.float32)
    return FlowField(vectors, valid)


def write_flow_file(flow: FlowField) -> bytes:
    vec = flow.vectors.astype("<f4", copy=True)
    vec[~flow.valid] = np.nan
    header = struct.pack("<fii", FLOW_MAGIC, flow.width, flow.height)
    return header + vec.tobytes()


# ---------------------------------------------------------------------------
# Anti-aliased separable resampling
# ---------------------------------------------------------------------------


def _kernel_box(x: np.ndarray) -> np.ndarray:
    # Half-open support keeps integer-factor box reductions an exact partition.
    return ((x >= -0.5) & (x < 0.5)).astype(np.float64)


def _kernel_lanczos3(x: np.ndarray) -> np.ndarray:
    out = np.sinc(x) * np.sinc(x / 3.0)
    out[np.abs(x) >= 3.0] = 0.0
    return out


_KERNELS = {
    "box": (_kernel_box, 0.5),
    "lanczos3": (_kernel_lanczos3, 3.0),
}


def _axis_weights(src: int, dst: int, kernel: str) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices and normalized weights for one resampling axis.

    Returns (indices (dst, taps), weights (dst, taps)); indices are clamped
    to the source range and weights rows sum to 1.
    """
    func, support = _KERNELS[kernel]
    scale = src / dst
    stretch = max(scale, 1.0)
    centers = (np.arange(dst, dtype=np.float64) + 0.5) * scale
    radius = support * stretch
    # First tap: smallest i whose texel center i+0.5 can fall inside the
    # footprint [center-radius, center+radius]; extra taps get zero weight.
    first = np.ceil(centers - radius - 0.5).astype(np.int64)
    taps = int(np.floor(2.0 * radius)) + 2
    idx = first[:, None] + np.arange(taps)[None, :]
    offsets = (idx + 0.5 - centers[:, None]) / stretch
    weights = func(offsets)
    idx = np.clip(idx, 0, src - 1)
    norm = weights.sum(axis=1, keepdims=True)
    if np.any(norm <= 0):
        raise ValueError(f"kernel {kernel!r} produced an empty tap row")
    weights = weights / norm
    return idx, weights


def _dense_axis_matrix(src: int, dst: int, kernel: str) -> np.ndarray:
    idx, weights = _axis_weights(src, dst, kernel)
    mat = np.zeros((dst, src), dtype=np.float64)
    rows = np.repeat(np.arange(dst), idx.shape[1])
    np.add.at(mat, (rows, idx.ravel()), weights.ravel())
    return mat


def resize_antialiased(
    image: RasterImage, new_width: int, new_height: int, kernel: str = "lanczos3"
) -> RasterImage:
    """Separable anti-aliased resample of a working image.

    The kernel footprint is stretched by the scale factor when
    downsampling, and tap rows are normalized, so constant images stay
    constant.  Output is clamped to [0, 1].
    """
    if image.coded:
        raise ValueError("resize operates on the working (float) representation")
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target dimensions must be >= 1, got {new_width}x{new_height}")
    if kernel not in _KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}, expected one of {sorted(_KERNELS)}")
    if new_width > image.width or new_height > image.height:
        logger.warning(
            "upscaling %dx%d -> %dx%d; the benchmark pyramid only downsamples",
            image.width,
            image.height,
            new_width,
            new_height,
        )
    data = image.data.astype(np.float64)
    h, w, _ = data.shape
    wx = _dense_axis_matrix(w, new_width, kernel)
    wy = _dense_axis_matrix(h, new_height, kernel)
    # Resample width: (h, w, 3) -> (h, new_w, 3), then height.
    tmp = np.einsum("hwc,dw->hdc", data, wx, optimize=True)
    out = np.einsum("hwc,dh->dwc", tmp, wy, optimize=True)
    out = np.clip(out, 0.0, 1.0).astype(np.float32)
    return RasterImage(out, coded=False)
