"""PCM WAV reading and writing plus mono normalization.

Accepts RIFF/WAVE files holding 16- or 24-bit integer PCM or 32-bit float
PCM, 1 or 2 channels (plus the WAVE_FORMAT_EXTENSIBLE wrappers of those).
Stereo is downmixed by channel mean. Output is always 32-bit float mono,
which makes write/read round-trips bit-exact.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptHeader, EmptyAudio, IoFailure, UnsupportedFormat

_FMT_PCM = 0x0001
_FMT_FLOAT = 0x0003
_FMT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioClip:
    """Fixed-rate mono sample buffer with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def _parse_chunks(data: bytes) -> dict[str, tuple[int, int]]:
    """Map chunk id to (offset, size) for the top-level RIFF chunks."""
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader("not a RIFF/WAVE file")
    chunks: dict[str, tuple[int, int]] = {}
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            # data chunk may legitimately be the last one in a stream that
            # was flushed early, but a size past EOF means truncation
            raise CorruptHeader(f"chunk {cid!r} extends past end of file")
        chunks.setdefault(cid.decode("latin1"), (body, size))
        pos = body + size + (size & 1)  # chunks are word-aligned
    return chunks


def _decode_samples(raw: bytes, fmt: int, bits: int, channels: int) -> np.ndarray:
    frame_bytes = channels * (bits // 8)
    if frame_bytes == 0 or len(raw) % frame_bytes:
        raw = raw[: len(raw) - (len(raw) % frame_bytes)] if frame_bytes else b""
    if fmt == _FMT_PCM and bits == 16:
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif fmt == _FMT_PCM and bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        val = np.where(val >= 1 << 23, val - (1 << 24), val)
        x = val.astype(np.float64) / float(1 << 23)
    elif fmt == _FMT_FLOAT and bits == 32:
        x = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormat(f"unsupported encoding: format tag {fmt}, {bits}-bit")
    if channels > 1:
        x = x.reshape(-1, channels).mean(axis=1)
    return np.clip(x, -1.0, 1.0).astype(np.float32)


def read_wav_bytes(data: bytes, source_id: str = "<bytes>") -> AudioClip:
    """Decode an in-memory WAV payload into a mono AudioClip."""
    chunks = _parse_chunks(data)
    if "fmt " not in chunks or "data" not in chunks:
        raise CorruptHeader("missing fmt or data chunk")
    off, size = chunks["fmt "]
    if size < 16:
        raise CorruptHeader("fmt chunk too small")
    fmt, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, off)
    if fmt == _FMT_EXTENSIBLE:
        if size < 40:
            raise CorruptHeader("extensible fmt chunk too small")
        # first two bytes of the SubFormat GUID carry the real format tag
        (fmt,) = struct.unpack_from("<H", data, off + 24)
    if fmt not in (_FMT_PCM, _FMT_FLOAT):
        raise UnsupportedFormat(f"non-PCM codec (format tag {fmt})")
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{channels} channels (only mono/stereo supported)")
    doff, dsize = chunks["data"]
    samples = _decode_samples(data[doff : doff + dsize], fmt, bits, channels)
    if samples.size == 0:
        raise EmptyAudio("file contains zero frames")
    return AudioClip(samples, int(rate), source_id)


def read_wav(path) -> AudioClip:
    """Read a WAV file from disk. See module docstring for accepted formats."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return read_wav_bytes(data, source_id=str(path))


def write_wav_bytes(clip: AudioClip) -> bytes:
    """Encode a clip as a 32-bit float mono WAV payload."""
    if len(clip) == 0:
        raise EmptyAudio("refusing to write an empty clip")
    payload = np.asarray(clip.samples, dtype="<f4").tobytes()
    out = io.BytesIO()
    byte_rate = clip.sample_rate * 4
    out.write(b"RIFF")
    out.write(struct.pack("<I", 4 + (8 + 18) + (8 + 4) + (8 + len(payload))))
    out.write(b"WAVE")
    out.write(b"fmt ")
    out.write(struct.pack("<IHHIIHHH", 18, _FMT_FLOAT, 1, clip.sample_rate, byte_rate, 4, 32, 0))
    out.write(b"fact")
    out.write(struct.pack("<II", 4, len(clip)))
    out.write(b"data")
    out.write(struct.pack("<I", len(payload)))
    out.write(payload)
    if len(payload) & 1:
        out.write(b"\x00")
    return out.getvalue()


def write_wav(clip: AudioClip, path) -> None:
    """Write a clip to disk as 32-bit float mono WAV."""
    data = write_wav_bytes(clip)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def ensure_rate(clip: AudioClip, target: int) -> AudioClip:
    """Return the clip at the target rate, linearly resampling if needed.

    Resampling keeps the first and last input samples on the output grid:
    the output has floor((n - 1) * target / source) + 1 samples, so a
    22050 Hz clip of n samples becomes 2n - 1 samples at 44100 Hz.
    Duration is preserved to within one sample period.
    """
    if clip.sample_rate == target:
        return clip
    n = len(clip)
    if n == 0:
        return AudioClip(clip.samples, target, clip.source_id)
    out_len = (n - 1) * target // clip.sample_rate + 1
    positions = np.arange(out_len, dtype=np.float64) * (clip.sample_rate / target)
    resampled = np.interp(positions, np.arange(n, dtype=np.float64), clip.samples.astype(np.float64))
    return AudioClip(resampled.astype(np.float32), target, clip.source_id)
