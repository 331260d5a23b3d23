"""Seeded synthetic two-modality data plus the evaluation perturbations.

Each class owns one prototype per modality, drawn on a sphere whose radius
is the configured separation scaled by that modality's informativeness.
Samples are prototype + isotropic Gaussian noise.  Features are
standardized with train-split statistics so corruption sigmas are always
relative to unit-variance features.

Perturbations: test-time Gaussian corruption of one modality, zero-filling
a missing modality, and near-OOD substitution of one modality from a
foreign generator.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Sample",
    "SyntheticConfig",
    "Split",
    "Dataset",
    "generate",
    "corrupt_gaussian",
    "mask_modality",
    "mask_split",
    "make_near_ood",
    "save_split",
    "load_split",
    "save_dataset",
    "load_dataset",
]

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Sample:
    """One paired two-modality record with an integer class label."""

    x1: np.ndarray
    x2: np.ndarray
    label: int


@dataclass(frozen=True)
class SyntheticConfig:
    classes: int = 3
    d1: int = 16
    d2: int = 16
    separation: float = 2.0
    sigma1: float = 0.5
    sigma2: float = 0.5
    informativeness: tuple[float, float] = (1.0, 0.65)
    n: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError("feature dims must be >= 1")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("intrinsic noise sigmas must be > 0")
        if self.n < self.classes:
            raise ValueError("need at least one sample per class")
        for inf in self.informativeness:
            if not 0.0 <= inf <= 1.0:
                raise ValueError("informativeness must lie in [0, 1]")


@dataclass(frozen=True)
class Split:
    x1: np.ndarray
    x2: np.ndarray
    labels: np.ndarray

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def sample(self, i: int) -> Sample:
        return Sample(x1=self.x1[i].copy(), x2=self.x2[i].copy(), label=int(self.labels[i]))


@dataclass(frozen=True)
class Dataset:
    train: Split
    val: Split
    test: Split
    config: SyntheticConfig


def _prototypes(rng: np.random.Generator, k: int, dim: int, radius: float) -> np.ndarray:
    raw = rng.normal(size=(k, dim))
    unit = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return radius * unit


def generate(config: SyntheticConfig) -> Dataset:
    """Generate a standardized, balanced, seeded dataset with an 8:1:1 split.

    Pure function of the config: identical seeds give identical bytes.
    """
    rng = np.random.default_rng(config.seed)
    k = config.classes
    proto1 = _prototypes(rng, k, config.d1, config.separation * config.informativeness[0])
    proto2 = _prototypes(rng, k, config.d2, config.separation * config.informativeness[1])

    # balanced labels: counts within +-1 of n/K
    counts = [config.n // k + (1 if c < config.n % k else 0) for c in range(k)]
    labels = np.concatenate([np.full(c, i, dtype=np.int64) for i, c in enumerate(counts)])

    x1 = proto1[labels] + rng.normal(0.0, config.sigma1, size=(config.n, config.d1))
    x2 = proto2[labels] + rng.normal(0.0, config.sigma2, size=(config.n, config.d2))

    perm = rng.permutation(config.n)
    x1, x2, labels = x1[perm], x2[perm], labels[perm]

    n_train = int(round(config.n * 0.8))
    n_val = int(round(config.n * 0.1))
    sl = {
        "train": slice(0, n_train),
        "val": slice(n_train, n_train + n_val),
        "test": slice(n_train + n_val, config.n),
    }

    # standardize with train statistics only
    stats = []
    for x in (x1, x2):
        mean = x[sl["train"]].mean(axis=0)
        std = np.maximum(x[sl["train"]].std(axis=0), _STD_FLOOR)
        stats.append((mean, std))
    x1 = (x1 - stats[0][0]) / stats[0][1]
    x2 = (x2 - stats[1][0]) / stats[1][1]

    splits = {
        name: Split(x1=x1[s].copy(), x2=x2[s].copy(), labels=labels[s].copy())
        for name, s in sl.items()
    }
    return Dataset(train=splits["train"], val=splits["val"], test=splits["test"], config=config)


def corrupt_gaussian(x: np.ndarray, sigma: float, seed) -> np.ndarray:
    """Add seeded isotropic Gaussian noise; sigma = 0 returns an exact copy.

    ``seed`` may be anything ``np.random.default_rng`` accepts, including a
    sequence like (master_seed, cell_index) for per-cell streams.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.array(x, copy=True)
    rng = np.random.default_rng(seed)
    return x + rng.normal(0.0, sigma, size=np.shape(x))


def mask_modality(sample: Sample, which: int) -> Sample:
    """Zero-fill one modality's features; the label is untouched."""
    if which not in (1, 2):
        raise ValueError(f"modality id must be 1 or 2, got {which}")
    x1 = np.zeros_like(sample.x1) if which == 1 else sample.x1.copy()
    x2 = np.zeros_like(sample.x2) if which == 2 else sample.x2.copy()
    return Sample(x1=x1, x2=x2, label=sample.label)


def mask_split(split: Split, which: int) -> Split:
    """Zero-fill one modality across a whole split."""
    if which not in (1, 2):
        raise ValueError(f"modality id must be 1 or 2, got {which}")
    x1 = np.zeros_like(split.x1) if which == 1 else split.x1.copy()
    x2 = np.zeros_like(split.x2) if which == 2 else split.x2.copy()
    return Split(x1=x1, x2=x2, labels=split.labels.copy())


def make_near_ood(dataset: Dataset, config2: SyntheticConfig, which: int) -> Dataset:
    """Substitute one modality with features from a foreign generator.

    The substituted features come positionally from a dataset generated
    with ``config2``; labels and the other modality stay untouched.
    """
    if which not in (1, 2):
        raise ValueError(f"modality id must be 1 or 2, got {which}")
    src_dim = dataset.config.d1 if which == 1 else dataset.config.d2
    new_dim = config2.d1 if which == 1 else config2.d2
    if src_dim != new_dim:
        raise ValueError(f"substituted modality dim mismatch: {src_dim} vs {new_dim}")
    if config2.n != dataset.config.n:
        raise ValueError("foreign generator must produce the same sample count")
    foreign = generate(config2)
    out = {}
    for name in ("train", "val", "test"):
        s: Split = getattr(dataset, name)
        f: Split = getattr(foreign, name)
        x1 = f.x1.copy() if which == 1 else s.x1.copy()
        x2 = f.x2.copy() if which == 2 else s.x2.copy()
        out[name] = Split(x1=x1, x2=x2, labels=s.labels.copy())
    return Dataset(train=out["train"], val=out["val"], test=out["test"], config=dataset.config)


# --- file format ------------------------------------------------------------
#
# One CSV per split: header "label,x1_0,...,x1_{d1-1},x2_0,...,x2_{d2-1}",
# then one sample per line.  Floats are written with repr() so parsing with
# float() round-trips bit-exactly.


def save_split(path: str | Path, split: Split) -> None:
    d1 = split.x1.shape[1]
    d2 = split.x2.shape[1]
    header = (
        ["label"]
        + [f"x1_{i}" for i in range(d1)]
        + [f"x2_{i}" for i in range(d2)]
    )
    lines = [",".join(header)]
    for i in range(split.n):
        cells = [str(int(split.labels[i]))]
        cells += [repr(float(v)) for v in split.x1[i]]
        cells += [repr(float(v)) for v in split.x2[i]]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def load_split(path: str | Path) -> Split:
    text = Path(path).read_text().strip().split("\n")
    header = text[0].split(",")
    d1 = sum(1 for h in header if h.startswith("x1_"))
    d2 = sum(1 for h in header if h.startswith("x2_"))
    if header[0] != "label" or d1 == 0 or d2 == 0 or len(header) != 1 + d1 + d2:
        raise ValueError(f"malformed dataset header in {path}")
    labels, x1, x2 = [], [], []
    for line in text[1:]:
        cells = line.split(",")
        labels.append(int(cells[0]))
        x1.append([float(v) for v in cells[1 : 1 + d1]])
        x2.append([float(v) for v in cells[1 + d1 :]])
    return Split(
        x1=np.array(x1, dtype=np.float64),
        x2=np.array(x2, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
    )


def save_dataset(directory: str | Path, dataset: Dataset) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in ("train", "val", "test"):
        save_split(directory / f"{name}.csv", getattr(dataset, name))
    meta = asdict(dataset.config)
    meta["informativeness"] = list(meta["informativeness"])
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    meta["informativeness"] = tuple(meta["informativeness"])
    config = SyntheticConfig(**meta)
    return Dataset(
        train=load_split(directory / "train.csv"),
        val=load_split(directory / "val.csv"),
        test=load_split(directory / "test.csv"),
        config=config,
    )
