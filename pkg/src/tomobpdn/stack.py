"""On-disk pixel stack format and run manifests.

A stack file is a single-line JSON header followed by a raw payload of
little-endian float32 (re, im) pairs, pixel-major, N complex samples per
pixel. The header carries the magic/version tag, dimensions, and the full
acquisition geometry so a stack is self-describing.

Every batch command writes a sidecar manifest recording the configuration,
seed, code version, and SHA-256 digests of inputs and outputs. Manifests
include wall-clock timestamps and are therefore excluded from the
byte-determinism contract that covers the data products themselves.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path

import numpy as np

from .exceptions import StackFormatError
from .model import AcquisitionGeometry

MAGIC = "TSTK1"
BYTES_PER_SAMPLE = 8  # float32 re + float32 im


def write_stack(path: str | Path, geometry: AcquisitionGeometry, pixels: np.ndarray) -> None:
    """Write complex pixel rows (pixel_count x N) as a TSTK1 file."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise StackFormatError("pixels must be a 2-d array (pixel_count x N)")
    if pixels.shape[1] != geometry.n_acquisitions:
        raise StackFormatError(
            f"pixels have {pixels.shape[1]} samples but geometry has "
            f"{geometry.n_acquisitions} acquisitions"
        )
    header = {
        "magic": MAGIC,
        "n": int(pixels.shape[1]),
        "pixel_count": int(pixels.shape[0]),
        "geometry": geometry.to_dict(),
    }
    interleaved = np.empty((pixels.shape[0], pixels.shape[1], 2), dtype="<f4")
    interleaved[..., 0] = pixels.real
    interleaved[..., 1] = pixels.imag
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(interleaved.tobytes())


def read_stack(path: str | Path) -> tuple[AcquisitionGeometry, np.ndarray]:
    """Read a TSTK1 file; returns (geometry, complex64 pixel rows)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StackFormatError(f"unreadable stack header: {exc}") from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise StackFormatError(f"bad magic; expected {MAGIC!r}")
    missing = {"n", "pixel_count", "geometry"} - set(header)
    if missing:
        raise StackFormatError(f"stack header missing keys: {sorted(missing)}")
    n = int(header["n"])
    pixel_count = int(header["pixel_count"])
    expected = pixel_count * n * BYTES_PER_SAMPLE
    if len(payload) != expected:
        raise StackFormatError(
            f"payload has {len(payload)} bytes, expected {expected} "
            f"({pixel_count} pixels x {n} samples)"
        )
    geometry = AcquisitionGeometry.from_dict(header["geometry"])
    if geometry.n_acquisitions != n:
        raise StackFormatError("header n disagrees with embedded geometry length")
    floats = np.frombuffer(payload, dtype="<f4").reshape(pixel_count, n, 2)
    pixels = floats[..., 0] + 1j * floats[..., 1]
    return geometry, pixels.astype(np.complex64)


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


class ManifestWriter:
    """Collects run provenance and writes ``<output>.manifest.json``."""

    def __init__(self, command: str, config: dict, seed: int | None):
        from . import __version__

        self.record = {
            "command": command,
            "config": config,
            "seed": seed,
            "code_version": __version__,
            "inputs": {},
            "outputs": {},
            "started_utc": _utc_now(),
            "finished_utc": None,
        }

    def add_input(self, path: str | Path) -> None:
        self.record["inputs"][str(path)] = sha256_file(path)

    def add_output(self, path: str | Path) -> None:
        self.record["outputs"][str(path)] = sha256_file(path)

    def write(self, primary_output: str | Path) -> Path:
        self.record["finished_utc"] = _utc_now()
        manifest_path = Path(str(primary_output) + ".manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(self.record, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest_path


def verify_manifest(manifest_path: str | Path) -> bool:
    """True iff every recorded input/output digest still matches its file."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        record = json.load(fh)
    for section in ("inputs", "outputs"):
        for path, digest in record.get(section, {}).items():
            if not Path(path).exists() or sha256_file(path) != digest:
                return False
    return True
