"""Corpus ingestion, the texture statistic, and training pair construction.

Files are cut into consecutive non-overlapping segments (15 s by default);
short tails are dropped. Each segment gets a raw texture score (mean
spectral flux) which is percentile-normalized across the corpus into a
g value on [0, 1]. Training pairs come in two kinds:

- identity: (x, x, c=0), anchoring the effect to bypass
- transformation: two distinct segments ordered by g, with
  c = g_high - g_low and the low-g member as input

Magnitudes are divided by the corpus 99.5th-percentile cell value so
detector activations are scale-stable across corpora.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .audio_io import AudioClip, ensure_rate, read_wav
from .errors import CakError, CorruptIndex, EmptyCorpus
from .spectral import MagnitudeSpectrogram, StftConfig, split, stft

log = logging.getLogger(__name__)

INDEX_VERSION = 1
DEFAULT_SEGMENT_SECONDS = 15.0
NORM_PERCENTILE = 99.5
# cap on cells sampled per segment when estimating the corpus percentile
_NORM_SAMPLE_CAP = 1 << 16


@dataclass
class CorpusEntry:
    clip_id: str
    path: str
    offset: int  # sample offset of the segment within its file
    g: float  # percentile-normalized texture, in [0, 1]
    raw_g: float  # mean spectral flux before normalization


@dataclass
class CorpusIndex:
    entries: list[CorpusEntry]
    config: StftConfig
    norm: float  # corpus magnitude normalization constant
    segment_samples: int

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class TrainingPair:
    x_in: np.ndarray  # F x T magnitude grid, corpus-normalized
    x_real: np.ndarray
    c: float
    kind: str  # "identity" or "transformation"


def texture_g(mag: MagnitudeSpectrogram) -> float:
    """Raw texture score: mean spectral flux.

    Average over consecutive frame pairs of the L1 frame difference
    divided by the bin count. Constant spectrograms score 0; scaling the
    magnitudes scales the score by the same factor.
    """
    m = mag.mag
    if m.shape[1] < 2:
        return 0.0
    flux = np.abs(np.diff(m, axis=1)).sum(axis=0) / m.shape[0]
    return float(flux.mean())


def _percentile_ranks(values: np.ndarray) -> np.ndarray:
    """Map raw scores to [0, 1] ranks; ties share their average rank."""
    if values.size == 1:
        return np.zeros(1)
    ranks = stats.rankdata(values, method="average")
    return (ranks - 1.0) / (values.size - 1.0)


def ingest(
    directory,
    config: StftConfig | None = None,
    segment_seconds: float = DEFAULT_SEGMENT_SECONDS,
) -> CorpusIndex:
    """Scan a directory of WAVs and build the corpus index.

    Deterministic for a fixed file set: files are processed in sorted
    order. Needs at least two readable files.
    """
    config = config or StftConfig()
    directory = Path(directory)
    paths = sorted(p for p in directory.glob("*.wav") if p.is_file())
    if len(paths) < 2:
        raise EmptyCorpus(f"need at least 2 WAV files in {directory}, found {len(paths)}")
    seg_len = int(round(segment_seconds * config.sample_rate))
    if seg_len < config.fft_size:
        raise ValueError("segment shorter than one analysis frame")

    entries: list[CorpusEntry] = []
    raw_scores: list[float] = []
    norm_samples: list[np.ndarray] = []
    for path in paths:
        try:
            clip = ensure_rate(read_wav(path), config.sample_rate)
        except CakError as exc:
            raise type(exc)(f"{path}: {exc}") from exc
        n_segments = len(clip) // seg_len
        if n_segments == 0:
            log.warning("skipping %s: shorter than one segment", path)
            continue
        for i in range(n_segments):
            offset = i * seg_len
            piece = AudioClip(clip.samples[offset : offset + seg_len], config.sample_rate, str(path))
            mag, _ = split(stft(piece, config))
            raw_scores.append(texture_g(mag))
            flat = mag.mag.ravel()
            stride = max(1, flat.size // _NORM_SAMPLE_CAP)
            norm_samples.append(flat[::stride])
            entries.append(CorpusEntry(f"{path.name}#{i}", str(path), offset, 0.0, raw_scores[-1]))
    if len(entries) < 2:
        raise EmptyCorpus("corpus yields fewer than 2 usable segments")

    norm = float(np.percentile(np.concatenate(norm_samples), NORM_PERCENTILE))
    if norm <= 0:
        norm = 1.0
    for entry, g in zip(entries, _percentile_ranks(np.asarray(raw_scores))):
        entry.g = float(g)
    return CorpusIndex(entries, config, norm, seg_len)


def save_index(index: CorpusIndex, path) -> None:
    doc = {
        "version": INDEX_VERSION,
        "config": index.config.to_dict(),
        "norm": index.norm,
        "segment_samples": index.segment_samples,
        "entries": [
            {"clip_id": e.clip_id, "path": e.path, "offset": e.offset, "g": e.g, "raw_g": e.raw_g}
            for e in index.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_index(path) -> CorpusIndex:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptIndex(f"cannot load corpus index {path}: {exc}") from exc
    if doc.get("version") != INDEX_VERSION:
        raise CorruptIndex(f"corpus index version {doc.get('version')} unsupported")
    entries = [
        CorpusEntry(e["clip_id"], e["path"], int(e["offset"]), float(e["g"]), float(e["raw_g"]))
        for e in doc["entries"]
    ]
    return CorpusIndex(
        entries, StftConfig.from_dict(doc["config"]), float(doc["norm"]), int(doc["segment_samples"])
    )


class SegmentLoader:
    """Loads normalized magnitude grids for index entries, with a small cache."""

    def __init__(self, index: CorpusIndex, cache_size: int = 32):
        self.index = index
        self.cache_size = cache_size
        self._cache: dict[int, np.ndarray] = {}

    def magnitude(self, entry_idx: int) -> np.ndarray:
        if entry_idx in self._cache:
            return self._cache[entry_idx]
        entry = self.index.entries[entry_idx]
        clip = ensure_rate(read_wav(entry.path), self.index.config.sample_rate)
        seg = AudioClip(
            clip.samples[entry.offset : entry.offset + self.index.segment_samples],
            self.index.config.sample_rate,
            entry.clip_id,
        )
        mag, _ = split(stft(seg, self.index.config))
        grid = mag.mag / self.index.norm
        if len(self._cache) >= self.cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[entry_idx] = grid
        return grid


def _crop(grid: np.ndarray, crop: tuple[int, int] | None, rng: np.random.Generator) -> np.ndarray:
    if crop is None:
        return grid
    fb, tb = crop
    if grid.shape[0] < fb or grid.shape[1] < tb:
        raise ValueError(f"segment grid {grid.shape} smaller than crop {crop}")
    f0 = int(rng.integers(0, grid.shape[0] - fb + 1))
    t0 = int(rng.integers(0, grid.shape[1] - tb + 1))
    return grid[f0 : f0 + fb, t0 : t0 + tb]


def sample_batch(
    index: CorpusIndex,
    n: int,
    identity_fraction: float,
    rng: np.random.Generator,
    loader: SegmentLoader | None = None,
    crop: tuple[int, int] | None = None,
    c_mode: str = "paired",
) -> list[TrainingPair]:
    """Draw a batch of training pairs.

    Roughly identity_fraction * n identity pairs; the rest are
    transformation pairs between distinct-g segments. c_mode "paired"
    takes c from the g difference; "random" draws c uniformly from (0, 1]
    instead (experimental).
    """
    if len(index) == 0:
        raise EmptyCorpus("cannot sample from an empty index")
    if not 0.0 <= identity_fraction <= 1.0:
        raise ValueError("identity_fraction must be within [0, 1]")
    if c_mode not in ("paired", "random"):
        raise ValueError("c_mode must be 'paired' or 'random'")
    loader = loader or SegmentLoader(index)
    n_identity = int(round(identity_fraction * n))
    pairs: list[TrainingPair] = []
    for _ in range(n_identity):
        idx = int(rng.integers(0, len(index)))
        grid = _crop(loader.magnitude(idx), crop, rng)
        pairs.append(TrainingPair(grid, grid, 0.0, "identity"))
    for _ in range(n - n_identity):
        for _attempt in range(32):
            i, j = rng.choice(len(index), size=2, replace=False)
            gi, gj = index.entries[int(i)].g, index.entries[int(j)].g
            if gi != gj:
                break
        else:
            raise ValueError("corpus g values are too degenerate to form transformation pairs")
        lo, hi = (int(i), int(j)) if gi < gj else (int(j), int(i))
        if c_mode == "paired":
            c = index.entries[hi].g - index.entries[lo].g
        else:
            c = float(1.0 - rng.uniform(0.0, 1.0))  # uniform on (0, 1]
        x_in = _crop(loader.magnitude(lo), crop, rng)
        x_real = _crop(loader.magnitude(hi), crop, rng)
        pairs.append(TrainingPair(x_in, x_real, float(c), "transformation"))
    return pairs


def stack_batch(pairs: list[TrainingPair]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack pairs into (x_in, x_real, c) arrays for the loss functions."""
    x_in = np.stack([p.x_in for p in pairs])
    x_real = np.stack([p.x_real for p in pairs])
    c = np.asarray([p.c for p in pairs], dtype=np.float64)
    return x_in, x_real, c
