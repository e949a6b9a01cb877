"""Volume and label-mask containers plus on-disk formats.

Two formats are supported:

* "desk" -- a JSON header next to a raw little-endian payload file.
  Bit-exact round-trips are guaranteed, which makes it the exchange
  format used by the backends and the service.
* A NIfTI-1 subset: single uncompressed ``.nii`` file, little endian,
  datatypes int16 / uint16 / float32 only.

Axis order is (phase, slice, row, col) everywhere in memory.  NIfTI
stores (x, y, z, t) fastest-first, so payloads are transposed on load
and save; voxel (p, z, y, x) written equals voxel (p, z, y, x) read.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "SequenceKind",
    "CineVolume",
    "LabelMask",
    "VolumeFormatError",
    "LABEL_SCHEMAS",
    "load_volume",
    "save_volume",
    "validate_sequence",
]


class VolumeFormatError(ValueError):
    """Malformed header, inconsistent dims, or unsupported datatype."""


class SequenceKind(str, Enum):
    SAX_CINE = "SAX_CINE"
    CH2_CINE = "CH2_CINE"
    CH4_CINE = "CH4_CINE"
    SAX_LGE = "SAX_LGE"
    REST_MPI = "REST_MPI"

    @property
    def is_cine(self) -> bool:
        return self in (SequenceKind.SAX_CINE, SequenceKind.CH2_CINE, SequenceKind.CH4_CINE)

    @property
    def single_phase(self) -> bool:
        return self in (SequenceKind.SAX_LGE, SequenceKind.REST_MPI)


# Per-sequence label meanings; label 0 is always background.
LABEL_SCHEMAS: dict[SequenceKind, dict[int, str]] = {
    SequenceKind.SAX_CINE: {1: "LV cavity", 2: "LV myocardium", 3: "RV"},
    SequenceKind.CH4_CINE: {
        1: "LV cavity",
        2: "LV myocardium",
        3: "RV cavity",
        4: "RV myocardium",
        5: "LA",
        6: "RA",
    },
    SequenceKind.CH2_CINE: {1: "LV cavity", 2: "LV myocardium"},
    SequenceKind.SAX_LGE: {1: "LV cavity", 2: "LV myocardium", 3: "LGE"},
}

_DESK_DTYPES = {"int16": np.int16, "uint16": np.uint16, "float32": np.float32,
                "uint8": np.uint8, "float64": np.float64}


@dataclass
class CineVolume:
    """4D scalar field (phases, slices, rows, cols) with physical spacing."""

    kind: SequenceKind
    data: np.ndarray  # shape (phases, slices, rows, cols)
    spacing: tuple[float, float, float]  # (dz, dy, dx) mm
    phase_interval_ms: float | None = None
    heart_rate: float | None = None

    def __post_init__(self):
        self.kind = SequenceKind(self.kind)
        if self.data.ndim == 3:
            self.data = self.data[np.newaxis]
        if self.data.ndim != 4:
            raise VolumeFormatError(f"expected 3D or 4D data, got ndim={self.data.ndim}")
        if any(d < 1 for d in self.data.shape):
            raise VolumeFormatError(f"all dims must be >= 1, got {self.data.shape}")
        if any(s <= 0 for s in self.spacing):
            raise VolumeFormatError(f"spacing must be positive, got {self.spacing}")
        if self.kind.single_phase and self.phases != 1:
            what = "LGE" if self.kind is SequenceKind.SAX_LGE else self.kind.value
            raise VolumeFormatError(f"{what} must be single-phase, has {self.phases}")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.data.shape)

    @property
    def phases(self) -> int:
        return self.data.shape[0]

    @property
    def slices(self) -> int:
        return self.data.shape[1]

    def phase(self, p: int) -> np.ndarray:
        return self.data[p]


@dataclass
class LabelMask:
    """Integer label map aligned to one phase of a CineVolume."""

    labels: np.ndarray  # shape (slices, rows, cols), integer
    spacing: tuple[float, float, float]  # (dz, dy, dx) mm
    schema: dict[int, str]
    kind: SequenceKind | None = None
    phase: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim == 2:
            self.labels = self.labels[np.newaxis]
        if self.labels.ndim != 3:
            raise VolumeFormatError(f"mask must be 2D or 3D, got ndim={self.labels.ndim}")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise VolumeFormatError("label map must be integer-typed")
        present = set(np.unique(self.labels).tolist()) - {0}
        unknown = present - set(self.schema)
        if unknown:
            raise VolumeFormatError(f"labels {sorted(unknown)} absent from schema")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.labels.shape)

    def binary(self, label: int) -> np.ndarray:
        return self.labels == label

    def label_for(self, structure: str) -> int | None:
        for lab, name in self.schema.items():
            if name == structure:
                return lab
        return None


@dataclass
class SequenceDescriptor:
    kind: SequenceKind
    phases: int
    slices: int
    mismatch: str | None = None


# ---------------------------------------------------------------------------
# desk format

def _desk_paths(path: Path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix == ".json":
        return path, path.with_suffix(".raw")
    return path.with_suffix(".json"), path.with_suffix(".raw")


def _save_desk(volume: CineVolume, path: Path) -> None:
    header_path, payload_path = _desk_paths(path)
    data = np.ascontiguousarray(volume.data)
    dtype_name = data.dtype.name
    if dtype_name not in _DESK_DTYPES:
        data = data.astype(np.float32)
        dtype_name = "float32"
    header = {
        "kind": volume.kind.value,
        "dims": list(data.shape),
        "spacing_mm": list(volume.spacing),
        "phase_interval_ms": volume.phase_interval_ms,
        "heart_rate_bpm": volume.heart_rate,
        "datatype": dtype_name,
        "byte_order": "little",
        "payload": payload_path.name,
    }
    payload_path.write_bytes(data.astype(data.dtype.newbyteorder("<")).tobytes())
    header_path.write_text(json.dumps(header, indent=1))


def _load_desk(path: Path) -> CineVolume:
    header_path, _ = _desk_paths(path)
    if not header_path.exists():
        raise VolumeFormatError(f"desk header not found: {header_path}")
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise VolumeFormatError(f"malformed desk header: {exc}") from exc
    for key in ("kind", "dims", "spacing_mm", "datatype", "payload"):
        if key not in header:
            raise VolumeFormatError(f"desk header missing key {key!r}")
    if header.get("byte_order", "little") != "little":
        raise VolumeFormatError("only little-endian desk payloads supported")
    dtype_name = header["datatype"]
    if dtype_name not in _DESK_DTYPES:
        raise VolumeFormatError(f"unsupported desk datatype {dtype_name!r}")
    dims = tuple(int(d) for d in header["dims"])
    payload_path = header_path.parent / header["payload"]
    raw = payload_path.read_bytes()
    dtype = np.dtype(_DESK_DTYPES[dtype_name]).newbyteorder("<")
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) != expected:
        raise VolumeFormatError(
            f"payload size mismatch: expected {expected} bytes for dims {dims}, got {len(raw)}")
    data = np.frombuffer(raw, dtype=dtype).reshape(dims).astype(_DESK_DTYPES[dtype_name])
    return CineVolume(
        kind=SequenceKind(header["kind"]),
        data=data,
        spacing=tuple(float(s) for s in header["spacing_mm"]),
        phase_interval_ms=header.get("phase_interval_ms"),
        heart_rate=header.get("heart_rate_bpm"),
    )


# ---------------------------------------------------------------------------
# NIfTI-1 subset

_NIFTI_DTYPES = {4: np.int16, 512: np.uint16, 16: np.float32}
_NIFTI_CODES = {np.dtype(np.int16): 4, np.dtype(np.uint16): 512, np.dtype(np.float32): 16}
_HDR_SIZE = 348


def _load_nifti(path: Path, kind: SequenceKind | None) -> CineVolume:
    raw = Path(path).read_bytes()
    if len(raw) < _HDR_SIZE:
        raise VolumeFormatError("file shorter than a NIfTI-1 header")
    sizeof_hdr = struct.unpack_from("<i", raw, 0)[0]
    if sizeof_hdr != _HDR_SIZE:
        raise VolumeFormatError(f"bad sizeof_hdr {sizeof_hdr} (big-endian or not NIfTI-1)")
    magic = raw[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise VolumeFormatError(f"bad NIfTI magic {magic!r}")
    dim = struct.unpack_from("<8h", raw, 40)
    ndim = dim[0]
    if ndim not in (3, 4):
        raise VolumeFormatError(f"only 3D/4D NIfTI supported, dim[0]={ndim}")
    datatype = struct.unpack_from("<h", raw, 70)[0]
    if datatype not in _NIFTI_DTYPES:
        raise VolumeFormatError(f"unsupported NIfTI datatype code {datatype}")
    pixdim = struct.unpack_from("<8f", raw, 76)
    vox_offset = int(struct.unpack_from("<f", raw, 108)[0])
    nx, ny, nz = dim[1], dim[2], dim[3]
    nt = dim[4] if ndim == 4 else 1
    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder("<")
    count = nx * ny * nz * nt
    payload = raw[vox_offset:vox_offset + count * dtype.itemsize]
    if len(payload) != count * dtype.itemsize:
        raise VolumeFormatError("payload size mismatch against NIfTI dims")
    # fastest-varying x first on disk -> (t, z, y, x) in memory
    arr = np.frombuffer(payload, dtype=dtype).reshape(nt, nz, ny, nx)
    spacing = (float(pixdim[3]), float(pixdim[2]), float(pixdim[1]))
    if kind is None:
        kind = SequenceKind.SAX_CINE if nt > 1 else SequenceKind.SAX_LGE
    return CineVolume(kind=kind, data=arr.astype(_NIFTI_DTYPES[datatype]), spacing=spacing)


def _save_nifti(volume: CineVolume, path: Path) -> None:
    data = np.ascontiguousarray(volume.data)
    if data.dtype not in _NIFTI_CODES:
        data = data.astype(np.float32)
    nt, nz, ny, nx = data.shape
    ndim = 4 if nt > 1 else 3
    hdr = bytearray(_HDR_SIZE)
    struct.pack_into("<i", hdr, 0, _HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, ndim, nx, ny, nz, nt, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, _NIFTI_CODES[data.dtype])
    struct.pack_into("<h", hdr, 72, data.dtype.itemsize * 8)
    dz, dy, dx = volume.spacing
    dt = (volume.phase_interval_ms or 0.0) / 1000.0
    struct.pack_into("<8f", hdr, 76, 1.0, dx, dy, dz, dt, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, 352.0)  # vox_offset
    struct.pack_into("<4s", hdr, 344, b"n+1\x00")
    with open(path, "wb") as fh:
        fh.write(bytes(hdr))
        fh.write(b"\x00" * 4)  # extension flag
        fh.write(data.astype(data.dtype.newbyteorder("<")).tobytes())


# ---------------------------------------------------------------------------
# public API

def load_volume(path, format: str = "desk", kind: SequenceKind | None = None) -> CineVolume:
    """Load a CineVolume from a desk or NIfTI-1 file."""
    path = Path(path)
    if format == "desk":
        return _load_desk(path)
    if format == "nifti":
        return _load_nifti(path, kind)
    raise VolumeFormatError(f"unknown format {format!r}")


def save_volume(volume: CineVolume, path, format: str = "desk") -> None:
    """Persist a CineVolume; desk round-trips are bit-exact."""
    path = Path(path)
    if format == "desk":
        _save_desk(volume, path)
    elif format == "nifti":
        _save_nifti(volume, path)
    else:
        raise VolumeFormatError(f"unknown format {format!r}")


def validate_sequence(volume: CineVolume, expected: SequenceKind) -> SequenceDescriptor:
    """Metadata-level check that a volume is plausible for the expected kind."""
    expected = SequenceKind(expected)
    mismatch = None
    if volume.kind != expected:
        mismatch = f"declared kind {volume.kind.value}, expected {expected.value}"
    elif expected.single_phase and volume.phases > 1:
        mismatch = "LGE must be single-phase"
    elif expected.is_cine and volume.phases == 1:
        mismatch = f"{expected.value} expects multiple phases, found 1"
    return SequenceDescriptor(kind=volume.kind, phases=volume.phases,
                              slices=volume.slices, mismatch=mismatch)
