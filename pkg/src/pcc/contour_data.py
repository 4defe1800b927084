"""F0 contour ingestion: parsing, resampling, normalization, padding, folds.

File formats understood here:

* contour CSV: header ``time_s,f0_hz``, one sample point per row,
  decimal point ``.``, LF or CRLF endings;
* Praat PitchTier "short text format" (read-only);
* manifest CSV: header ``path,label,speaker_id`` with label tokens
  ``statement`` / ``wh_question`` and paths relative to a base directory.

An f0 value of 0 marks an unvoiced/undefined frame. Zeros are carried
through resampling as zeros (no interpolation across voicing gaps) so
that the padding value and the unvoiced value mean the same thing to the
models.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import DataError
from .seeding import KFOLD_SHUFFLE, derive_rng

# Frame grid of the experiment: one frame every 12.5 ms, zero-padded to 1024.
FRAME_STEP = 0.0125
PADDED_LEN = 1024

# Absolute slack (seconds) when deciding whether a time lies on the frame grid.
_GRID_TOL = 1e-9


class ClassLabel(IntEnum):
    STATEMENT = 0
    WH_QUESTION = 1

    @property
    def token(self) -> str:
        return _LABEL_TOKENS[self]


_LABEL_TOKENS = {ClassLabel.STATEMENT: "statement", ClassLabel.WH_QUESTION: "wh_question"}
_TOKEN_LABELS = {v: k for k, v in _LABEL_TOKENS.items()}


def label_from_token(token: str) -> ClassLabel:
    try:
        return _TOKEN_LABELS[token]
    except KeyError:
        raise DataError(f"unknown label token {token!r} (expected 'statement' or 'wh_question')") from None


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class F0Contour:
    """Time-stamped F0 samples for one utterance.

    Times are strictly increasing and non-negative; f0 values are
    non-negative with 0 meaning unvoiced; at least one value is voiced.
    """

    times: np.ndarray
    f0: np.ndarray
    label: ClassLabel | None = None
    speaker_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "times", _freeze(self.times))
        object.__setattr__(self, "f0", _freeze(self.f0))
        if self.times.ndim != 1 or self.times.shape != self.f0.shape:
            raise DataError("contour times and f0 must be 1-D arrays of equal length")
        if self.times.size == 0:
            raise DataError("contour has no points")
        if self.times[0] < 0:
            raise DataError("contour times must be >= 0")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise DataError("contour times must be strictly increasing")
        if np.any(self.f0 < 0):
            raise DataError("f0 values must be >= 0")
        if not np.any(self.f0 > 0):
            raise DataError("contour has no voiced points")

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class PaddedSample:
    """Fixed-length frame vector: a voiced prefix followed by zero padding."""

    values: np.ndarray
    valid_len: int
    label: ClassLabel
    speaker_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        n = self.values.size
        if not 0 < self.valid_len <= n:
            raise DataError(f"valid_len {self.valid_len} outside (0, {n}]")
        if not np.all(np.isfinite(self.values)):
            raise DataError("sample contains non-finite values")
        if np.any(self.values[self.valid_len:] != 0.0):
            raise DataError("padding region must be exactly zero")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[PaddedSample, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise DataError("dataset is empty")

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def matrix(self) -> np.ndarray:
        """Samples stacked row-wise, shape [n, padded_len]."""
        return np.stack([s.values for s in self.samples])

    def valid_lens(self) -> np.ndarray:
        return np.array([s.valid_len for s in self.samples], dtype=np.int64)

    def subset(self, indices, provenance: str | None = None) -> "Dataset":
        return Dataset(tuple(self.samples[int(i)] for i in indices),
                       provenance if provenance is not None else self.provenance)

    def digest(self) -> str:
        """SHA-256 over frame values, labels and valid lengths."""
        h = hashlib.sha256()
        for s in self.samples:
            h.update(s.values.tobytes())
            h.update(bytes([int(s.label)]))
            h.update(int(s.valid_len).to_bytes(4, "little"))
        return h.hexdigest()


@dataclass(frozen=True)
class FoldSplit:
    """k disjoint index sets covering 0..n-1, sizes differing by at most 1."""

    folds: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "folds", tuple(np.asarray(f, dtype=np.int64) for f in self.folds))

    @property
    def k(self) -> int:
        return len(self.folds)

    def n(self) -> int:
        return int(sum(f.size for f in self.folds))

    def train_indices(self, fold: int) -> np.ndarray:
        return np.concatenate([f for i, f in enumerate(self.folds) if i != fold])


def parse_contour_csv(text: str) -> F0Contour:
    """Parse a ``time_s,f0_hz`` document into a contour (label unset)."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "time_s,f0_hz":
        raise DataError("contour CSV must start with header 'time_s,f0_hz'")
    times, values = [], []
    for i, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DataError(f"line {i}: expected 'time,f0', got {line!r}")
        try:
            t, hz = float(parts[0]), float(parts[1])
        except ValueError:
            raise DataError(f"line {i}: non-numeric value in {line!r}") from None
        if times and t <= times[-1]:
            raise DataError(f"line {i}: time {t} not increasing")
        if hz < 0:
            raise DataError(f"line {i}: negative f0 {hz}")
        times.append(t)
        values.append(hz)
    if not times:
        raise DataError("contour CSV has no data rows")
    return F0Contour(np.array(times), np.array(values))


def parse_pitchtier(text: str) -> F0Contour:
    """Parse a Praat PitchTier in short text format."""
    raw = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in raw if ln]
    if len(lines) < 5:
        raise DataError("PitchTier file too short")
    if lines[0] != 'File type = "ooTextFile"':
        raise DataError("not an ooTextFile")
    if lines[1] != 'Object class = "PitchTier"':
        raise DataError(f"wrong object class: {lines[1]!r}")

    def num(idx, what):
        try:
            return float(lines[idx])
        except (IndexError, ValueError):
            raise DataError(f"PitchTier: bad or missing {what}") from None

    xmin = num(2, "xmin")
    xmax = num(3, "xmax")
    n = num(4, "point count")
    if n != int(n) or n < 1:
        raise DataError(f"PitchTier: invalid point count {n}")
    n = int(n)
    body = lines[5:]
    if len(body) != 2 * n:
        raise DataError(f"PitchTier: declared {n} points but found {len(body) // 2}")
    times = np.array([float(body[2 * i]) for i in range(n)])
    values = np.array([float(body[2 * i + 1]) for i in range(n)])
    if np.any(times < xmin) or np.any(times > xmax):
        raise DataError("PitchTier: point time outside [xmin, xmax]")
    return F0Contour(times, values)


def resample_contour(contour: F0Contour, frame_step: float = FRAME_STEP) -> np.ndarray:
    """Sample the contour on the t = k*frame_step grid.

    Only grid points between the first and last contour point are
    emitted. A grid point that coincides with a contour point takes that
    point's value; one that falls between two voiced points is linearly
    interpolated; one inside a gap adjacent to an unvoiced (f0=0) point
    is 0.
    """
    if frame_step <= 0:
        raise ValueError("frame_step must be > 0")
    times, values = contour.times, contour.f0
    k0 = int(np.ceil(times[0] / frame_step - _GRID_TOL))
    k1 = int(np.floor(times[-1] / frame_step + _GRID_TOL))
    if k1 < k0:
        return np.zeros(0)
    frames = np.empty(k1 - k0 + 1)
    for out, k in enumerate(range(k0, k1 + 1)):
        t = k * frame_step
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = max(j, 0)
        if abs(t - times[j]) <= _GRID_TOL:
            frames[out] = values[j]
        elif j + 1 < len(times) and abs(t - times[j + 1]) <= _GRID_TOL:
            frames[out] = values[j + 1]
        elif values[j] > 0 and values[j + 1] > 0:
            w = (t - times[j]) / (times[j + 1] - times[j])
            frames[out] = values[j] + w * (values[j + 1] - values[j])
        else:
            frames[out] = 0.0
    return frames


NORM_SCHEMES = ("none", "scale500")


def normalize_frames(frames: np.ndarray, scheme: str = "scale500") -> np.ndarray:
    """'none' is the identity; 'scale500' divides Hz by 500. 0 stays 0."""
    frames = np.asarray(frames, dtype=np.float64)
    if scheme == "none":
        return frames.copy()
    if scheme == "scale500":
        return frames / 500.0
    raise ValueError(f"unknown normalization scheme {scheme!r}")


def pad_to_fixed(frames: np.ndarray, target: int = PADDED_LEN,
                 truncate: bool = False) -> tuple[np.ndarray, int]:
    """Right-pad with zeros to ``target``; returns (values, valid_len)."""
    frames = np.asarray(frames, dtype=np.float64)
    n = frames.size
    if n == 0:
        raise DataError("cannot pad an empty frame vector")
    if n > target:
        if not truncate:
            raise DataError(f"contour needs {n} frames but only {target} are available "
                            "(pass truncate to cut)")
        frames, n = frames[:target], target
    out = np.zeros(target)
    out[:n] = frames
    return out, n


def contour_to_sample(contour: F0Contour, scheme: str = "scale500",
                      frame_step: float = FRAME_STEP, target: int = PADDED_LEN,
                      truncate: bool = False) -> PaddedSample:
    """Full resample -> normalize -> pad pipeline for one labelled contour."""
    if contour.label is None:
        raise DataError("contour has no label")
    frames = normalize_frames(resample_contour(contour, frame_step), scheme)
    values, valid_len = pad_to_fixed(frames, target, truncate)
    return PaddedSample(values, valid_len, contour.label, contour.speaker_id)


def _parse_contour_file(path: Path) -> F0Contour:
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return parse_contour_csv(text)
    if suffix == ".pitchtier":
        return parse_pitchtier(text)
    raise DataError(f"unsupported contour file extension {path.suffix!r}")


def load_dataset(manifest_text: str, base_dir: str | Path, scheme: str = "scale500",
                 frame_step: float = FRAME_STEP, target: int = PADDED_LEN,
                 truncate: bool = False, provenance: str = "") -> Dataset:
    """Build a Dataset from a ``path,label,speaker_id`` manifest document."""
    base = Path(base_dir)
    reader = csv.reader(io.StringIO(manifest_text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("manifest is empty") from None
    if [h.strip() for h in header] != ["path", "label", "speaker_id"]:
        raise DataError("manifest must start with header 'path,label,speaker_id'")
    samples = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"manifest row {row_no}: expected 3 fields, got {len(row)}")
        rel, token, speaker = (c.strip() for c in row)
        label = _parse_row_label(token, row_no)
        path = base / rel
        try:
            contour = _parse_contour_file(path)
        except FileNotFoundError:
            raise DataError(f"manifest row {row_no}: file not found: {path}") from None
        except DataError as exc:
            raise DataError(f"manifest row {row_no} ({rel}): {exc}") from None
        contour = F0Contour(contour.times, contour.f0, label, speaker)
        samples.append(contour_to_sample(contour, scheme, frame_step, target, truncate))
    if not samples:
        raise DataError("manifest has no data rows")
    return Dataset(tuple(samples), provenance)


def _parse_row_label(token: str, row_no: int) -> ClassLabel:
    try:
        return label_from_token(token)
    except DataError as exc:
        raise DataError(f"manifest row {row_no}: {exc}") from None


def load_manifest(manifest_path: str | Path, scheme: str = "scale500",
                  frame_step: float = FRAME_STEP, target: int = PADDED_LEN,
                  truncate: bool = False) -> Dataset:
    """Read a manifest file; contour paths resolve against its directory."""
    path = Path(manifest_path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}") from None
    return load_dataset(text, path.parent, scheme, frame_step, target, truncate,
                        provenance=str(path))


def split_kfold(n: int, k: int, seed: int) -> FoldSplit:
    """Shuffle 0..n-1 and deal into k folds of near-equal size.

    The first n % k folds get the extra element. The shuffle comes from
    the (seed, KFOLD_SHUFFLE) stream, so the split is a pure function of
    (n, k, seed).
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = derive_rng(seed, KFOLD_SHUFFLE).permutation(n)
    return FoldSplit(tuple(np.array_split(perm, k)))
