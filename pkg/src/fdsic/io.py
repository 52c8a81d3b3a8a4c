"""File formats: IQ captures, PA coefficient files, result CSVs.

IQ capture (little-endian throughout)::

    offset  size  field
    0       8     magic b"FDSICIQ\\0"
    8       4     uint32 format version (1)
    12      8     float64 sample rate in Hz
    20      8     uint64 number of complex samples N
    28      16*N  float64 pairs (real, imag), interleaved

PA coefficient file (text)::

    # optional comment lines
    K L
    re im        <- K*L lines, row-major over (k, l)
"""
from __future__ import annotations

import csv
import io as _io
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .impairments import HammersteinModel
from .signal import Waveform

CAPTURE_MAGIC = b"FDSICIQ\0"
CAPTURE_VERSION = 1
_HEADER = struct.Struct("<8sIdQ")
CSV_SCHEMA_VERSION = 1


def write_capture(path, wave: Waveform) -> None:
    data = np.empty(2 * len(wave), dtype="<f8")
    data[0::2] = wave.samples.real
    data[1::2] = wave.samples.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CAPTURE_MAGIC, CAPTURE_VERSION, wave.sample_rate_hz, len(wave)))
        fh.write(data.tobytes())


def read_capture(path) -> Waveform:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated capture header", "capture")
    magic, version, fs, n = _HEADER.unpack_from(raw)
    if magic != CAPTURE_MAGIC:
        raise ConfigError(f"{path}: not an IQ capture file", "capture")
    if version != CAPTURE_VERSION:
        raise ConfigError(f"{path}: unsupported capture version {version}", "capture")
    body = raw[_HEADER.size :]
    if len(body) != 16 * n:
        raise ConfigError(
            f"{path}: header says {n} samples but body holds {len(body) / 16:g}", "capture"
        )
    data = np.frombuffer(body, dtype="<f8")
    return Waveform(data[0::2] + 1j * data[1::2], fs)


def write_pa_coeffs(path, model: HammersteinModel) -> None:
    lines = [f"# parallel Hammerstein coefficients b[k,l], order {model.order}",
             f"{model.k_terms} {model.l_taps}"]
    for b in model.coeffs.reshape(-1):
        lines.append(f"{float(b.real)!r} {float(b.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_pa_coeffs(path) -> HammersteinModel:
    rows = [
        ln.split() for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    try:
        k, l = (int(v) for v in rows[0])
        vals = [complex(float(re), float(im)) for re, im in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed coefficient file ({exc})", "pa") from None
    if k < 1 or l < 1 or len(vals) != k * l:
        raise ConfigError(f"{path}: expected {k}x{l} coefficients, found {len(vals)}", "pa")
    return HammersteinModel(np.array(vals).reshape(k, l))


def format_value(v) -> str:
    """Fixed textual form so reruns are byte-identical."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(v)


def csv_text(columns: list[str], rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version", *columns])
    for row in rows:
        w.writerow([CSV_SCHEMA_VERSION, *(format_value(row[c]) for c in columns)])
    return buf.getvalue()


def write_csv(path, columns: list[str], rows) -> None:
    Path(path).write_text(csv_text(columns, rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
