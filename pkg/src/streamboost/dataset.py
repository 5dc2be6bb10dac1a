"""Loading, splitting and streaming labelled data.

A :class:`Dataset` keeps its samples as dense arrays (``features`` is
``(n, d)``; ``targets`` is ``(n, m)`` for regression, ``labels`` is ``(n,)``
for classification). Individual :class:`Sample` views are produced on
demand. Binary labels are normalised to {-1, +1} at load time.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

TASKS = ("regression", "binary", "multiclass")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    index: int
    target: Optional[np.ndarray] = None
    label: Optional[int] = None


@dataclass
class Dataset:
    features: np.ndarray
    task: str
    targets: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    num_classes: int = 0
    indices: Optional[np.ndarray] = None
    # Known generating function, mapping a feature matrix to supervision
    # (targets, or +-1 labels / class ids). Only synthetic data has one.
    oracle: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise DatasetError("empty dataset")
        if self.task not in TASKS:
            raise DatasetError(f"unknown task {self.task!r}")
        n = self.features.shape[0]
        if self.task == "regression":
            if self.targets is None:
                raise DatasetError("regression dataset needs targets")
            t = np.asarray(self.targets, dtype=np.float64)
            if t.ndim == 1:
                t = t[:, None]
            if t.shape[0] != n:
                raise DatasetError("targets and features disagree in length")
            self.targets = np.ascontiguousarray(t)
        else:
            if self.labels is None:
                raise DatasetError("classification dataset needs labels")
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (n,):
                raise DatasetError("labels and features disagree in length")
            if self.task == "binary":
                if not np.all(np.isin(lab, (-1, 1))):
                    raise DatasetError("binary labels must be -1/+1 after normalisation")
                self.num_classes = 2
            else:
                if self.num_classes <= 0:
                    self.num_classes = int(lab.max()) + 1
                if lab.min() < 0 or lab.max() >= self.num_classes:
                    raise DatasetError("class label outside [0, k)")
            self.labels = lab
        if self.indices is None:
            self.indices = np.arange(n, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def m(self) -> int:
        """Output dimension of a predictor for this data."""
        if self.task == "regression":
            return self.targets.shape[1]
        if self.task == "binary":
            return 1
        return self.num_classes

    def __len__(self):
        return self.n

    def __getitem__(self, i: int) -> Sample:
        x = self.features[i]
        idx = int(self.indices[i])
        if self.task == "regression":
            return Sample(x, idx, target=self.targets[i])
        return Sample(x, idx, label=int(self.labels[i]))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(self.n):
            yield self[i]

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    def supervision(self) -> np.ndarray:
        """Supervision matrix ``(n, m)`` consumed by the loss kernels.

        Regression targets as-is; binary labels as a single +-1 column;
        multiclass labels one-hot encoded.
        """
        if self.task == "regression":
            return self.targets
        if self.task == "binary":
            return self.labels.astype(np.float64)[:, None]
        onehot = np.zeros((self.n, self.num_classes))
        onehot[np.arange(self.n), self.labels] = 1.0
        return onehot

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            features=self.features[rows],
            task=self.task,
            targets=None if self.targets is None else self.targets[rows],
            labels=None if self.labels is None else self.labels[rows],
            num_classes=self.num_classes,
            indices=self.indices[rows],
            oracle=self.oracle,
            name=self.name,
        )


def _parse_label(token: str, task: str, lineno: int):
    try:
        value = float(token)
    except ValueError:
        raise DatasetError(f"line {lineno}: bad label {token!r}") from None
    if task == "regression":
        return value
    if value != int(value):
        raise DatasetError(f"line {lineno}: non-integer class label {token!r}")
    return int(value)


def _normalise_binary(labels: np.ndarray) -> np.ndarray:
    """Map any two-valued label set onto {-1, +1} (larger value -> +1)."""
    values = np.unique(labels)
    if len(values) > 2:
        raise DatasetError(f"binary task but found {len(values)} distinct labels")
    if set(values.tolist()) <= {-1, 1}:
        return labels.astype(np.int64)
    if len(values) == 1:
        return np.where(labels > 0, 1, -1).astype(np.int64)
    return np.where(labels == values[1], 1, -1).astype(np.int64)


def _finish(features, raw_labels, task, num_classes=0, name=""):
    if task == "regression":
        return Dataset(features, task, targets=np.asarray(raw_labels, dtype=np.float64), name=name)
    labels = np.asarray(raw_labels, dtype=np.int64)
    if task == "binary":
        labels = _normalise_binary(labels)
    return Dataset(features, task, labels=labels, num_classes=num_classes, name=name)


def load_libsvm(path, task: str = "regression", n_features: Optional[int] = None,
                num_classes: int = 0) -> Dataset:
    """Read a LIBSVM sparse text file into a dense :class:`Dataset`.

    Indices are 1-based on disk and must be strictly ascending within a line.
    ``n_features`` overrides the dimension (defaults to the largest index
    seen); it must be at least that large.
    """
    if task not in TASKS:
        raise DatasetError(f"unknown task {task!r}")
    rows: list[tuple[list[int], list[float]]] = []
    labels = []
    max_index = 0
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            labels.append(_parse_label(parts[0], task, lineno))
            cols, vals = [], []
            prev = 0
            for tok in parts[1:]:
                key, sep, val = tok.partition(":")
                if not sep:
                    raise DatasetError(f"line {lineno}: malformed entry {tok!r}")
                try:
                    j = int(key)
                    v = float(val)
                except ValueError:
                    raise DatasetError(f"line {lineno}: malformed entry {tok!r}") from None
                if j <= prev:
                    raise DatasetError(f"line {lineno}: indices must be 1-based and ascending")
                prev = j
                cols.append(j - 1)
                vals.append(v)
            max_index = max(max_index, prev)
            rows.append((cols, vals))
    if not rows:
        raise DatasetError("empty dataset")
    d = max_index if n_features is None else int(n_features)
    if d < max_index:
        raise DatasetError(f"n_features={d} smaller than largest index {max_index}")
    X = np.zeros((len(rows), max(d, 1)))
    for r, (cols, vals) in enumerate(rows):
        X[r, cols] = vals
    return _finish(X, labels, task, num_classes, name=str(path))


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, target_column: int = -1, task: str = "regression",
             num_classes: int = 0) -> Dataset:
    """Read a rectangular numeric CSV. A non-numeric first row is a header."""
    with open(path, newline="") as fh:
        table = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if table and not all(_is_number(c) for c in table[0]):
        table = table[1:]
    if not table:
        raise DatasetError("empty dataset")
    width = len(table[0])
    data = np.empty((len(table), width))
    for r, row in enumerate(table):
        if len(row) != width:
            raise DatasetError(f"row {r + 1}: expected {width} cells, found {len(row)}")
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise DatasetError(f"row {r + 1}: non-numeric cell {cell!r}") from None
    col = target_column % width
    features = np.delete(data, col, axis=1)
    raw = data[:, col]
    if task != "regression":
        if np.any(raw != np.round(raw)):
            raise DatasetError("non-integer class label in target column")
        raw = raw.astype(np.int64)
    return _finish(features, raw, task, num_classes, name=str(path))


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random train/test partition; ``|test| = round(test_fraction * n)``."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError("test_fraction must lie in (0, 1)")
    n = dataset.n
    n_test = int(np.floor(test_fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return dataset.subset(train_rows), dataset.subset(test_rows)


def stream_order(n: int, seed: int, shuffle: bool = True, passes: int = 1) -> np.ndarray:
    """Row order for ``passes`` sweeps; each shuffled sweep is a fresh permutation."""
    if passes < 1:
        raise DatasetError("passes must be >= 1")
    if not shuffle:
        return np.tile(np.arange(n, dtype=np.int64), passes)
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.permutation(n) for _ in range(passes)]).astype(np.int64)


def stream(dataset: Dataset, seed: int, shuffle: bool = True, passes: int = 1) -> Iterator[Sample]:
    for r in stream_order(dataset.n, seed, shuffle, passes):
        yield dataset[r]


def minmax_scaler(train: Dataset):
    """Per-feature min-max scaling fitted on ``train``; returns ``apply(dataset)``."""
    lo = train.features.min(axis=0)
    span = train.features.max(axis=0) - lo
    span[span == 0] = 1.0

    def apply(ds: Dataset) -> Dataset:
        out = ds.subset(np.arange(ds.n))
        out.features = (ds.features - lo) / span
        return out

    return apply
