"""Readers and writers for frame sequences, dense flow fields and latent tensors.

All formats are bit-exact and documented here so externally produced files
drop in directly:

Frame sequences
    A directory of PNG images plus a JSON manifest::

        {"frames": ["frame_00000.png", ...], "frame_rate": 24.0}

    ``frames`` lists paths relative to the manifest's directory, in display
    order. ``frame_rate`` is optional (Hz). A bare JSON list of paths is also
    accepted on read. 8-bit samples map to floats by value/255; writing clamps
    to [0, 1] and quantizes with round-half-up.

Flow fields
    Middlebury ``.flo`` layout: little-endian float32 magic ``202021.25``,
    int32 width, int32 height, then height*width interleaved (dx, dy) float32
    pairs in row-major order.

Latent tensors
    Custom layout: 8-byte magic ``UAVLAT01``, four little-endian uint32 dims
    (T, C, H, W), then T*C*H*W little-endian float32 samples in C-order.

Read/write pairs are bitwise round-trip identities on valid inputs, and
decoders reject NaN/Inf payloads.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptySequence,
    InvalidParameter,
    IoFailure,
    MissingFile,
    NonFiniteData,
    TruncatedFile,
)

FLO_MAGIC = np.float32(202021.25)
LATENT_MAGIC = b"UAVLAT01"

_DIRECTIONS = ("forward", "backward")


@dataclass
class Video:
    """A pixel-space frame sequence.

    ``frames`` has shape (T, 3, H, W), float values in [0, 1].
    """

    frames: np.ndarray
    frame_rate: float | None = None
    source_paths: list[str] = field(default_factory=list)

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 4 or f.shape[1] != 3:
            raise InvalidParameter(
                f"video frames must have shape (T, 3, H, W), got {f.shape}"
            )
        if f.shape[0] < 1:
            raise EmptySequence("video must contain at least one frame")
        if not np.all(np.isfinite(f)):
            raise NonFiniteData("video frames contain NaN or Inf")
        if f.min() < 0.0 or f.max() > 1.0:
            raise InvalidParameter(
                "video samples must lie in [0, 1]",
                min=float(f.min()),
                max=float(f.max()),
            )
        self.frames = f

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[2]

    @property
    def width(self) -> int:
        return self.frames.shape[3]


@dataclass
class FlowField:
    """A dense displacement field between two adjacent frames.

    ``vectors`` has shape (2, H, W): component 0 is the x displacement,
    component 1 the y displacement, in pixels. Stored as float32, the native
    precision of the on-disk format.
    """

    vectors: np.ndarray
    direction: str = "forward"
    from_index: int = 0
    to_index: int = 1

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float32)
        if v.ndim != 3 or v.shape[0] != 2:
            raise InvalidParameter(
                f"flow vectors must have shape (2, H, W), got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise NonFiniteData("flow field contains NaN or Inf")
        if self.direction not in _DIRECTIONS:
            raise InvalidParameter(f"direction must be one of {_DIRECTIONS}")
        if abs(self.to_index - self.from_index) != 1:
            raise InvalidParameter(
                "flow must connect adjacent frames",
                from_index=self.from_index,
                to_index=self.to_index,
            )
        self.vectors = v

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.vectors.shape[1], self.vectors.shape[2]


@dataclass
class LatentVideo:
    """A latent-space frame sequence of shape (T, C, H, W).

    ``step_tag`` optionally records the diffusion step the tensor belongs to;
    it is bookkeeping only and is not persisted by :func:`write_latent`.
    """

    data: np.ndarray
    step_tag: int | None = None

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 4:
            raise InvalidParameter(
                f"latent data must have shape (T, C, H, W), got {d.shape}"
            )
        if not np.all(np.isfinite(d)):
            raise NonFiniteData("latent contains NaN or Inf")
        self.data = d

    @property
    def channels(self) -> int:
        return self.data.shape[1]


# --- frame sequences ----------------------------------------------------------


def read_frame_sequence(manifest_path: str) -> Video:
    """Load a PNG frame sequence described by a JSON manifest.

    Raises MissingFile if the manifest or any listed frame is absent,
    EmptySequence for a manifest with no frames, and DimensionMismatch
    (naming the first offending frame) if frames disagree on size.
    """
    if not os.path.isfile(manifest_path):
        raise MissingFile(f"manifest not found: {manifest_path}", path=manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot parse manifest {manifest_path}: {exc}") from exc

    if isinstance(doc, list):
        names, frame_rate = doc, None
    elif isinstance(doc, dict) and isinstance(doc.get("frames"), list):
        names, frame_rate = doc["frames"], doc.get("frame_rate")
    else:
        raise IoFailure(
            f"manifest {manifest_path} must be a JSON list or an object with a 'frames' list"
        )
    if not names:
        raise EmptySequence(f"manifest lists no frames: {manifest_path}")

    base = os.path.dirname(os.path.abspath(manifest_path))
    frames = []
    shape = None
    paths = []
    for name in names:
        path = os.path.join(base, name)
        if not os.path.isfile(path):
            raise MissingFile(f"frame not found: {path}", path=path)
        try:
            with Image.open(path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except OSError as exc:
            raise IoFailure(f"cannot decode frame {path}: {exc}") from exc
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise DimensionMismatch(
                f"frame {name} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}",
                frame=name,
            )
        frames.append(arr)
        paths.append(path)

    stack = np.stack(frames).astype(np.float64) / 255.0  # (T, H, W, 3)
    return Video(
        frames=np.transpose(stack, (0, 3, 1, 2)),
        frame_rate=frame_rate,
        source_paths=paths,
    )


def write_frame_sequence(video: Video, out_dir: str) -> str:
    """Write one PNG per frame plus ``manifest.json``; returns the manifest path.

    Samples are clamped to [0, 1] and quantized to 8 bit with round-half-up,
    so a sample of 0.5 stores byte 128.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        names = []
        for i, frame in enumerate(video.frames):
            name = f"frame_{i:05d}.png"
            data = quantize_to_u8(frame)
            Image.fromarray(np.transpose(data, (1, 2, 0)), mode="RGB").save(
                os.path.join(out_dir, name)
            )
            names.append(name)
        manifest = {"frames": names, "frame_rate": video.frame_rate}
        manifest_path = os.path.join(out_dir, "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write frame sequence to {out_dir}: {exc}") from exc
    return manifest_path


def quantize_to_u8(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize to uint8 with round-half-up."""
    clipped = np.clip(values, 0.0, 1.0)
    return np.floor(clipped * 255.0 + 0.5).astype(np.uint8)


# --- flow fields ----------------------------------------------------------------


def read_flow(path: str) -> FlowField:
    """Read a Middlebury .flo file.

    The file does not carry direction or frame indices; the returned field
    defaults to direction "forward" between frames 0 and 1, which callers
    relabel as needed.
    """
    if not os.path.isfile(path):
        raise MissingFile(f"flow file not found: {path}", path=path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise TruncatedFile(f"flow file too short: {path}", size=len(blob))
    magic = np.frombuffer(blob, dtype="<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise BadMagic(
            f"bad flow magic in {path}: {magic!r}", expected=float(FLO_MAGIC)
        )
    width, height = struct.unpack_from("<ii", blob, 4)
    if width < 1 or height < 1:
        raise TruncatedFile(
            f"flow header claims invalid size {width}x{height}: {path}"
        )
    expected = 12 + 8 * width * height
    if len(blob) != expected:
        raise TruncatedFile(
            f"flow file {path} holds {len(blob)} bytes, header implies {expected}",
            size=len(blob),
            expected=expected,
        )
    data = np.frombuffer(blob, dtype="<f4", offset=12).reshape(height, width, 2)
    if not np.all(np.isfinite(data)):
        raise NonFiniteData(f"flow file contains NaN or Inf: {path}")
    return FlowField(vectors=np.ascontiguousarray(np.transpose(data, (2, 0, 1))))


def write_flow(flow: FlowField, path: str) -> None:
    """Write a FlowField as a Middlebury .flo file (bitwise round-trip safe)."""
    height, width = flow.spatial_shape
    interleaved = np.ascontiguousarray(
        np.transpose(flow.vectors, (1, 2, 0)), dtype="<f4"
    )
    try:
        with open(path, "wb") as fh:
            fh.write(np.asarray([FLO_MAGIC], dtype="<f4").tobytes())
            fh.write(struct.pack("<ii", width, height))
            fh.write(interleaved.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write flow to {path}: {exc}") from exc


# --- latent tensors ----------------------------------------------------------


def read_latent(path: str) -> LatentVideo:
    """Read a latent tensor file (see module docstring for the layout)."""
    if not os.path.isfile(path):
        raise MissingFile(f"latent file not found: {path}", path=path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8:
        raise TruncatedFile(f"latent file too short: {path}", size=len(blob))
    if blob[:8] != LATENT_MAGIC:
        raise BadMagic(f"bad latent magic in {path}: {blob[:8]!r}")
    if len(blob) < 24:
        raise TruncatedFile(f"latent header incomplete: {path}", size=len(blob))
    t, c, h, w = struct.unpack_from("<4I", blob, 8)
    if min(t, c, h, w) < 1:
        raise TruncatedFile(f"latent header claims empty dims {(t, c, h, w)}: {path}")
    count = t * c * h * w
    expected = 24 + 4 * count
    if len(blob) != expected:
        raise TruncatedFile(
            f"latent file {path} holds {len(blob)} bytes, header implies {expected}",
            size=len(blob),
            expected=expected,
        )
    data = np.frombuffer(blob, dtype="<f4", offset=24).reshape(t, c, h, w)
    if not np.all(np.isfinite(data)):
        raise NonFiniteData(f"latent file contains NaN or Inf: {path}")
    return LatentVideo(data=data.copy())


def write_latent(latent: LatentVideo, path: str) -> None:
    """Write a latent tensor file. Data is stored as little-endian float32."""
    data = np.ascontiguousarray(latent.data, dtype="<f4")
    t, c, h, w = data.shape
    try:
        with open(path, "wb") as fh:
            fh.write(LATENT_MAGIC)
            fh.write(struct.pack("<4I", t, c, h, w))
            fh.write(data.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write latent to {path}: {exc}") from exc
