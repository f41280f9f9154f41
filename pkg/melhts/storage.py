# melhts/storage.py

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from melhts.config import logger
from melhts.exceptions import DataError, FormatError, StorageError
from melhts.models import CorpusManifest, HeqLut, HeqMap, ManifestEntry, MelSpectrogram

# --- MelExport layout ---
# magic(8) version(u16) num_filters(u16) frame_shift_ms(f64)
# sample_rate_hz(u32) num_frames(u32) log_floor(f64), then <f4 row-major frames.
MEL_MAGIC = b"MHTSMEL\0"
MEL_VERSION = 1
MEL_HEADER = struct.Struct("<8sHHdIId")
_MEL_FIELD_OFFSETS = {"version": 8, "num_filters": 10, "frame_shift_ms": 12,
                      "sample_rate_hz": 20, "num_frames": 24, "log_floor": 28}

# --- Container layout shared by model and LUT files ---
# magic(8) version(u16) json_length(u32), UTF-8 JSON, then <f8 arrays in
# the order listed under the JSON "arrays" key.
CONTAINER_HEADER = struct.Struct("<8sHI")
MODEL_MAGIC = b"MHTSMODL"
LUT_MAGIC = b"MHTSHEQL"
CONTAINER_VERSION = 1


# ---------------------------
# ATOMIC FILE ACCESS
# ---------------------------

def atomic_write_bytes(path: Path, data: bytes) -> int:
    """
    Writes `data` to a temporary file next to `path` and renames it into place.

    Returns:
        int: Number of bytes written.

    Raises:
        StorageError: If the directory cannot be created or the write fails.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except OSError as e:
        Path(tmp_name).unlink(missing_ok=True)
        raise StorageError(f"cannot write {path}: {e}") from e
    logger.debug(f"event=file_written path={path} bytes={len(data)}")
    return len(data)


def atomic_write_text(path: Path, text: str) -> int:
    return atomic_write_bytes(path, text.encode("utf-8"))


def read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e


def read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise StorageError(f"{path} is not valid UTF-8: {e}") from e
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path: Path) -> List[Dict[str, str]]:
    return list(csv.DictReader(io.StringIO(read_text(path))))


# ---------------------------
# MEL EXPORT
# ---------------------------

def encode_mel(mel: MelSpectrogram) -> bytes:
    header = MEL_HEADER.pack(
        MEL_MAGIC, MEL_VERSION, mel.num_filters, float(mel.frame_shift_ms),
        int(mel.sample_rate_hz), mel.num_frames, float(mel.log_floor),
    )
    payload = np.ascontiguousarray(mel.frames, dtype="<f4").tobytes()
    return header + payload


def decode_mel(data: bytes, path=None) -> MelSpectrogram:
    """
    Parses a MelExport byte string.

    Raises:
        FormatError: On a bad magic, unsupported version, impossible header
            field or a payload whose length disagrees with the header.
    """
    if len(data) < MEL_HEADER.size:
        raise FormatError("truncated mel header", path=path, offset=len(data),
                          expected=MEL_HEADER.size, actual=len(data))
    magic, version, num_filters, frame_shift_ms, sample_rate_hz, num_frames, log_floor = \
        MEL_HEADER.unpack_from(data, 0)
    if magic != MEL_MAGIC:
        raise FormatError(f"bad mel magic {magic!r}", path=path, offset=0)
    if version != MEL_VERSION:
        raise FormatError(f"unsupported mel version {version}", path=path,
                          offset=_MEL_FIELD_OFFSETS["version"])
    if num_filters == 0:
        raise FormatError("num_filters must be positive", path=path,
                          offset=_MEL_FIELD_OFFSETS["num_filters"])
    if not frame_shift_ms > 0:
        raise FormatError("frame_shift_ms must be positive", path=path,
                          offset=_MEL_FIELD_OFFSETS["frame_shift_ms"])
    if num_frames == 0:
        raise FormatError("a mel file needs at least one frame", path=path,
                          offset=_MEL_FIELD_OFFSETS["num_frames"])

    expected = MEL_HEADER.size + 4 * num_frames * num_filters
    if len(data) != expected:
        raise FormatError("mel payload length does not match header", path=path,
                          offset=min(len(data), expected), expected=expected, actual=len(data))

    frames = np.frombuffer(data, dtype="<f4", offset=MEL_HEADER.size)
    frames = frames.reshape(num_frames, num_filters).astype(np.float64)
    try:
        return MelSpectrogram(frames=frames, frame_shift_ms=frame_shift_ms, num_filters=num_filters,
                              log_floor=log_floor, sample_rate_hz=sample_rate_hz)
    except ValidationError as e:
        raise FormatError(f"invalid mel payload: {e}", path=path, offset=MEL_HEADER.size) from e


def export_mel(mel: MelSpectrogram, path: Path) -> int:
    """Writes `mel` as a MelExport file. Returns the file size in bytes."""
    return atomic_write_bytes(path, encode_mel(mel))


def import_mel(path: Path) -> MelSpectrogram:
    return decode_mel(read_bytes(path), path=str(path))


# ---------------------------
# JSON + ARRAY CONTAINERS
# ---------------------------

def encode_container(magic: bytes, meta: dict, arrays: Dict[str, np.ndarray]) -> bytes:
    meta = dict(meta)
    meta["arrays"] = [[name, list(np.shape(array))] for name, array in arrays.items()]
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [CONTAINER_HEADER.pack(magic, CONTAINER_VERSION, len(blob)), blob]
    parts.extend(np.ascontiguousarray(array, dtype="<f8").tobytes() for array in arrays.values())
    return b"".join(parts)


def decode_container(data: bytes, magic: bytes, path=None) -> Tuple[dict, Dict[str, np.ndarray]]:
    if len(data) < CONTAINER_HEADER.size:
        raise FormatError("truncated header", path=path, offset=len(data),
                          expected=CONTAINER_HEADER.size, actual=len(data))
    found, version, blob_length = CONTAINER_HEADER.unpack_from(data, 0)
    if found != magic:
        raise FormatError(f"bad magic {found!r}, expected {magic!r}", path=path, offset=0)
    if version != CONTAINER_VERSION:
        raise FormatError(f"unsupported version {version}", path=path, offset=8)

    offset = CONTAINER_HEADER.size
    if len(data) < offset + blob_length:
        raise FormatError("truncated metadata block", path=path, offset=len(data),
                          expected=offset + blob_length, actual=len(data))
    try:
        meta = json.loads(data[offset:offset + blob_length].decode("utf-8"))
        layout = [(str(name), tuple(int(n) for n in shape)) for name, shape in meta.pop("arrays")]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
        raise FormatError(f"unreadable metadata block: {e}", path=path, offset=offset) from e
    offset += blob_length

    expected = offset + 8 * sum(int(np.prod(shape)) for _, shape in layout)
    if len(data) != expected:
        raise FormatError("array payload length does not match metadata", path=path,
                          offset=min(len(data), expected), expected=expected, actual=len(data))

    arrays = {}
    for name, shape in layout:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += 8 * count
    return meta, arrays


# ---------------------------
# ACOUSTIC MODEL FILES
# ---------------------------

def save_model(model, path: Path) -> int:
    """Serializes an AcousticModel. Returns the file size in bytes."""
    meta, arrays = model.to_payload()
    nbytes = atomic_write_bytes(path, encode_container(MODEL_MAGIC, meta, arrays))
    logger.info(f"event=model_saved path={path} model_bytes={nbytes}")
    return nbytes


def load_model(path: Path):
    from melhts.hmm.model import AcousticModel

    meta, arrays = decode_container(read_bytes(path), MODEL_MAGIC, path=str(path))
    try:
        return AcousticModel.from_payload(meta, arrays)
    except (ValidationError, KeyError, ValueError) as e:
        raise FormatError(f"invalid model content: {e}", path=str(path)) from e


def model_nbytes(path: Path) -> int:
    try:
        return Path(path).stat().st_size
    except OSError as e:
        raise StorageError(f"cannot stat {path}: {e}") from e


# ---------------------------
# HEQ LOOKUP TABLES
# ---------------------------

def save_lut(lut: HeqLut, path: Path) -> int:
    arrays = {}
    for index, heq_map in enumerate(lut.maps):
        arrays[f"knots_{index}"] = heq_map.knots
        arrays[f"values_{index}"] = heq_map.values
    return atomic_write_bytes(path, encode_container(LUT_MAGIC, {"num_coefficients": lut.num_coefficients}, arrays))


def load_lut(path: Path) -> HeqLut:
    meta, arrays = decode_container(read_bytes(path), LUT_MAGIC, path=str(path))
    try:
        count = int(meta["num_coefficients"])
        maps = [HeqMap(knots=arrays[f"knots_{d}"], values=arrays[f"values_{d}"]) for d in range(count)]
        return HeqLut(maps=maps)
    except (ValidationError, KeyError, ValueError) as e:
        raise FormatError(f"invalid lookup table: {e}", path=str(path)) from e


def export_lut_csv(lut: HeqLut, path: Path) -> int:
    rows = []
    for index, heq_map in enumerate(lut.maps):
        rows.extend((index, repr(float(k)), repr(float(v))) for k, v in zip(heq_map.knots, heq_map.values))
    return write_csv(path, ("coefficient", "knot", "value"), rows)


# ---------------------------
# CORPUS MANIFEST
# ---------------------------

def load_manifest(path: Path) -> CorpusManifest:
    """
    Reads a UTF-8 `id<TAB>wav_path<TAB>transcript` manifest.
    Relative wav paths resolve against the manifest directory.

    Raises:
        StorageError: If the file is unreadable or a line is malformed.
        DataError: If utterance ids repeat.
    """
    path = Path(path)
    base = path.resolve().parent
    entries = []
    for line_number, line in enumerate(read_text(path).splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise StorageError(f"{path}:{line_number}: expected 3 tab-separated fields, got {len(fields)}")
        utterance_id, wav, transcript = (field.strip() for field in fields)
        wav_path = Path(wav)
        if not wav_path.is_absolute():
            wav_path = base / wav_path
        entries.append(ManifestEntry(utterance_id=utterance_id, wav_path=wav_path, transcript=transcript))
    try:
        manifest = CorpusManifest(entries=entries)
    except ValidationError as e:
        raise DataError(f"invalid manifest {path}: {e}") from e
    logger.info(f"event=manifest_loaded path={path} utterances={len(manifest.entries)}")
    return manifest
