"""Labeled datasets: ingestion, per-class splitting, standardization.

Samples are stored column-wise: ``features`` is an (n_dims, n_samples)
float64 matrix and ``labels[j]`` is the class of column j. Labels are
always contiguous integers 1..class_count after loading. Datasets are
treated as immutable once constructed.

All randomness goes through numpy's PCG64 generator
(``numpy.random.default_rng``), which is seedable and platform-stable,
so splits reproduce bit-for-bit across machines.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

HSB_MAGIC = b"HSB1"


@dataclass(frozen=True)
class LabeledDataset:
    """Column-oriented sample matrix with integer class labels in 1..c."""

    features: np.ndarray  # (n, p) float64
    labels: np.ndarray  # (p,) int64, values in 1..class_count
    class_count: int
    # original label -> contiguous label, recorded by the loaders
    label_map: dict[int, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise DataError("features must be a 2-D (dims x samples) matrix")
        if labs.ndim != 1 or labs.shape[0] != feats.shape[1]:
            raise DataError("labels length must equal the number of feature columns")
        if not np.all(np.isfinite(feats)):
            raise DataError("features contain NaN or infinite entries")
        if labs.size and (labs.min() < 1 or labs.max() > self.class_count):
            raise DataError(f"labels must lie in 1..{self.class_count}")
        present = np.unique(labs)
        if present.size != self.class_count:
            missing = sorted(set(range(1, self.class_count + 1)) - set(present.tolist()))
            raise DataError(f"classes without samples: {missing}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def sample_count(self) -> int:
        return self.features.shape[1]

    def class_indices(self, label: int) -> np.ndarray:
        """Column indices of the given class, ascending."""
        return np.flatnonzero(self.labels == label)

    def take(self, columns: np.ndarray) -> "LabeledDataset":
        """Sub-dataset of the given columns (order preserved)."""
        return LabeledDataset(
            self.features[:, columns], self.labels[columns], self.class_count, self.label_map
        )


@dataclass(frozen=True)
class SplitSpec:
    """Per-class train sampling: k samples per class, seeded."""

    train_per_class: int
    seed: int = 0

    def __post_init__(self):
        if self.train_per_class < 1:
            raise DataError("train_per_class must be >= 1")


@dataclass(frozen=True)
class StandardizeStats:
    """Per-band mean/std; std == 0 marks a constant band left untouched."""

    mean: np.ndarray  # (n,)
    std: np.ndarray  # (n,), entries >= 0


def _remap_labels(raw: np.ndarray) -> tuple[np.ndarray, dict[int, int]]:
    """Remap arbitrary integer labels to contiguous 1..c, preserving sorted order."""
    distinct = np.unique(raw)
    mapping = {int(orig): i + 1 for i, orig in enumerate(distinct)}
    remapped = np.searchsorted(distinct, raw) + 1
    return remapped.astype(np.int64), mapping


def load_csv(path) -> LabeledDataset:
    """Load a header-less CSV of `n floats, 1 integer label` per row.

    Rows become sample columns in file order. Labels are remapped to
    contiguous 1..c (sorted original order) with the mapping recorded on
    the dataset.
    """
    rows: list[list[float]] = []
    raw_labels: list[int] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
                if width < 2:
                    raise DataError(f"{path}: line {lineno}: need at least one feature and a label")
            elif len(fields) != width:
                raise DataError(
                    f"{path}: line {lineno}: expected {width} fields, got {len(fields)}"
                )
            try:
                values = [float(f) for f in fields[:-1]]
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric feature field") from None
            try:
                label = int(fields[-1])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-integer label field") from None
            rows.append(values)
            raw_labels.append(label)
    if not rows:
        raise DataError(f"{path}: empty file")
    labels_arr = np.asarray(raw_labels, dtype=np.int64)
    if np.unique(labels_arr).size < 2:
        raise DataError(f"{path}: a single class is present; need at least 2")
    remapped, mapping = _remap_labels(labels_arr)
    features = np.asarray(rows, dtype=np.float64).T
    return LabeledDataset(features, remapped, len(mapping), mapping)


def save_csv(ds: LabeledDataset, path) -> None:
    """Write the dataset in the CSV interchange format (one sample per row)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for j in range(ds.sample_count):
            vals = ",".join(repr(float(v)) for v in ds.features[:, j])
            fh.write(f"{vals},{int(ds.labels[j])}\n")


def load_hsb(path) -> LabeledDataset:
    """Load an HSB binary cube and keep only labeled pixels.

    Format: magic "HSB1"; u32 rows, cols, bands (little-endian);
    rows*cols*bands float64 values interleaved band-by-pixel; then
    rows*cols u16 labels with 0 meaning unlabeled. Unlabeled pixels are
    dropped and spatial coordinates are discarded.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != HSB_MAGIC:
        raise DataError(f"{path}: bad magic, not an HSB file")
    header_end = 4 + 12
    if len(blob) < header_end:
        raise DataError(f"{path}: truncated header")
    rows, cols, bands = struct.unpack("<III", blob[4:header_end])
    n_pixels = rows * cols
    payload = n_pixels * bands * 8 + n_pixels * 2
    if len(blob) != header_end + payload:
        raise DataError(
            f"{path}: payload is {len(blob) - header_end} bytes, "
            f"expected {payload} for {rows}x{cols}x{bands}"
        )
    values = np.frombuffer(blob, dtype="<f8", count=n_pixels * bands, offset=header_end)
    labels = np.frombuffer(blob, dtype="<u2", count=n_pixels, offset=header_end + n_pixels * bands * 8)
    keep = labels != 0
    if not np.any(keep):
        raise DataError(f"{path}: no labeled pixels")
    features = values.reshape(n_pixels, bands).T[:, keep]
    remapped, mapping = _remap_labels(labels[keep].astype(np.int64))
    return LabeledDataset(np.ascontiguousarray(features), remapped, len(mapping), mapping)


def save_hsb(ds: LabeledDataset, path) -> None:
    """Write the dataset as an HSB cube laid out as a 1 x p pixel grid."""
    p, n = ds.sample_count, ds.dim
    if ds.class_count > np.iinfo(np.uint16).max:
        raise DataError("HSB labels are u16; too many classes")
    with open(path, "wb") as fh:
        fh.write(HSB_MAGIC)
        fh.write(struct.pack("<III", 1, p, n))
        fh.write(np.ascontiguousarray(ds.features.T, dtype="<f8").tobytes())
        fh.write(ds.labels.astype("<u2").tobytes())


def split_per_class(ds: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic per-class split: k train samples per class, rest test.

    Classes are visited in ascending label order and sampled without
    replacement from one PCG64 stream seeded with ``spec.seed``, so the
    same (dataset, spec) always yields the same split.
    """
    k = spec.train_per_class
    rng = np.random.default_rng(spec.seed)
    train_idx: list[np.ndarray] = []
    for cls in range(1, ds.class_count + 1):
        members = ds.class_indices(cls)
        if members.size < k + 1:
            raise DataError(
                f"class {cls} has {members.size} samples; need more than train_per_class={k}"
            )
        perm = rng.permutation(members.size)
        train_idx.append(members[perm[:k]])
    chosen = np.sort(np.concatenate(train_idx))
    mask = np.zeros(ds.sample_count, dtype=bool)
    mask[chosen] = True
    rest = np.flatnonzero(~mask)
    return ds.take(chosen), ds.take(rest)


def standardize(
    ds: LabeledDataset, stats: StandardizeStats | None = None
) -> tuple[LabeledDataset, StandardizeStats]:
    """Per-band z-score; supply train stats for the test path.

    Bands with zero std pass through unscaled and uncentered.
    """
    if stats is None:
        mean = ds.features.mean(axis=1)
        std = ds.features.std(axis=1)
        stats = StandardizeStats(mean, std)
    if stats.mean.shape[0] != ds.dim or stats.std.shape[0] != ds.dim:
        raise DataError("standardization stats dimension does not match dataset")
    scale = np.where(stats.std > 0, stats.std, 1.0)
    shift = np.where(stats.std > 0, stats.mean, 0.0)
    out = (ds.features - shift[:, None]) / scale[:, None]
    return LabeledDataset(out, ds.labels, ds.class_count, ds.label_map), stats


def unstandardize(ds: LabeledDataset, stats: StandardizeStats) -> LabeledDataset:
    """Invert `standardize` with the same stats."""
    if stats.mean.shape[0] != ds.dim:
        raise DataError("standardization stats dimension does not match dataset")
    scale = np.where(stats.std > 0, stats.std, 1.0)
    shift = np.where(stats.std > 0, stats.mean, 0.0)
    out = ds.features * scale[:, None] + shift[:, None]
    return LabeledDataset(out, ds.labels, ds.class_count, ds.label_map)
