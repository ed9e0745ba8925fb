"""Dataset files and synthetic generators.

Two text formats are read and written (UTF-8, LF or CRLF):

* CSV -- first column is the label, remaining columns are features; an
  optional header row is detected by a non-numeric first cell.
* SvmLight -- ``label idx:val idx:val ...`` with 1-based indices, densified
  to the largest index in the file.  ``#`` starts a comment.

Labels that are all positive integers are kept as class ids; any other label
set is remapped to ``1..K`` in sorted order (numeric order when every label
is a number).
"""
from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Domain, InvalidArgumentError


class ParseError(InvalidArgumentError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class FileFormat(str, enum.Enum):
    CSV = "csv"
    SVMLIGHT = "svmlight"


def _read_text(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif hasattr(source, "read"):
        data = source.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        raise InvalidArgumentError(f"cannot read features from {type(source).__name__}")
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data.replace("\r\n", "\n").replace("\r", "\n")


def _to_float(token, line):
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {token!r}", line)
    return v


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _class_ids(raw_labels):
    if all(_is_number(t) for t in raw_labels):
        as_num = np.array([float(t) for t in raw_labels])
        if np.all(as_num >= 1) and np.all(as_num == np.round(as_num)):
            return as_num.astype(np.int64)
        _, ids = np.unique(as_num, return_inverse=True)
        return ids.astype(np.int64) + 1
    uniq = sorted(set(raw_labels))
    lookup = {lab: i + 1 for i, lab in enumerate(uniq)}
    return np.array([lookup[t] for t in raw_labels], dtype=np.int64)


def _parse_csv(text):
    rows = [(n, r) for n, r in enumerate(csv.reader(io.StringIO(text)), start=1)
            if r and any(c.strip() for c in r)]
    if rows and not _is_number(rows[0][1][0].strip()):
        rows = rows[1:]
    if not rows:
        raise InvalidArgumentError("no samples in input")
    width = len(rows[0][1])
    if width < 2:
        raise ParseError("need a label and at least one feature", rows[0][0])
    labels, feats = [], []
    for line, row in rows:
        if len(row) != width:
            raise ParseError(f"expected {width} columns, found {len(row)}", line)
        labels.append(row[0].strip())
        feats.append([_to_float(c.strip(), line) for c in row[1:]])
    return labels, np.array(feats)


def _parse_svmlight(text, dim=None):
    labels, entries = [], []
    max_idx = 0
    for line, raw in enumerate(text.split("\n"), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        parts = content.split()
        labels.append(parts[0])
        row = {}
        for tok in parts[1:]:
            idx, sep, val = tok.partition(":")
            if not sep or not idx.isdigit() or int(idx) < 1:
                raise ParseError(f"bad feature token {tok!r}", line)
            row[int(idx)] = _to_float(val, line)
            max_idx = max(max_idx, int(idx))
        entries.append((line, row))
    if not labels:
        raise InvalidArgumentError("no samples in input")
    if dim is None:
        dim = max_idx
    if dim < 1:
        raise ParseError("no feature values in input")
    X = np.zeros((len(entries), dim))
    for r, (line, row) in enumerate(entries):
        for idx, val in row.items():
            if idx > dim:
                raise ParseError(f"feature index {idx} exceeds dimension {dim}", line)
            X[r, idx - 1] = val
    return labels, X


def parse_features(source, format=FileFormat.CSV, domain=Domain.SOURCE, n_classes=None,
                   dim=None) -> Dataset:
    """Read a labeled dataset from a path, a binary or text stream, or raw bytes.

    A ``str`` is always taken as a path; wrap literal text in ``io.StringIO``.
    """
    text = _read_text(source)
    fmt = FileFormat(format)
    if not text.strip():
        raise InvalidArgumentError("empty input")
    if fmt is FileFormat.CSV:
        raw, X = _parse_csv(text)
    else:
        raw, X = _parse_svmlight(text, dim)
    y = _class_ids(raw)
    return Dataset(X, y, domain, n_classes)


def format_features(ds: Dataset, format=FileFormat.CSV) -> str:
    fmt = FileFormat(format)
    lines = []
    for lab, row in zip(ds.labels, ds.features):
        if fmt is FileFormat.CSV:
            lines.append(",".join([str(int(lab))] + [repr(float(v)) for v in row]))
        else:
            toks = [f"{j + 1}:{float(v)!r}" for j, v in enumerate(row)
                    if v != 0 or j == len(row) - 1]  # last index pins the dimension
            lines.append(" ".join([str(int(lab))] + toks))
    return "\n".join(lines) + "\n"


def write_features(ds: Dataset, dest, format=FileFormat.CSV):
    text = format_features(ds, format)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


def format_from_path(path):
    ext = os.path.splitext(str(path))[1].lower()
    return FileFormat.SVMLIGHT if ext in (".svm", ".svmlight", ".libsvm", ".txt") else FileFormat.CSV


TOY_SOURCE_MEANS = np.array([[-2.0, 0.0], [2.0, 0.0]])
TOY_TARGET_MEANS = np.array([[-1.0, 3.0], [1.0, 3.0]])
TOY_SPREAD = 0.4
TOY_PER_CLASS = 20


def gen_toy_two_class(seed=0):
    """Two-class 2-D toy: source means (-2,0)/(2,0), target means (-1,3)/(1,3).

    Isotropic Gaussian clusters with standard deviation 0.4, 20 samples per
    class per domain.  Class 1 sits on the negative side in both domains.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat([1, 2], TOY_PER_CLASS)

    def draw(means):
        return np.vstack([m + TOY_SPREAD * rng.standard_normal((TOY_PER_CLASS, 2)) for m in means])

    source = Dataset(draw(TOY_SOURCE_MEANS), labels, Domain.SOURCE, 2)
    target = Dataset(draw(TOY_TARGET_MEANS), labels, Domain.TARGET, 2)
    return source, target


@dataclass(frozen=True, eq=False)
class ShiftSpec:
    """Parameters of the synthetic source/target pair.

    ``shift_map`` has shape ``(dim_source, dim_target)``: it is the ground-truth
    transform taking target features back to the source space.  Target samples
    are source-like draws pushed through its pseudo-inverse, plus noise.
    """

    dim_source: int
    dim_target: int
    class_means: np.ndarray
    class_spread: float
    shift_map: np.ndarray
    noise_sigma: float = 0.0
    seed: int = 0
    n_source_per_class: int = 200
    n_target_per_class: int = 90

    def __post_init__(self):
        means = np.asarray(self.class_means, dtype=float)
        S = np.asarray(self.shift_map, dtype=float)
        if self.dim_source < 1 or self.dim_target < 1:
            raise InvalidArgumentError("dimensions must be positive")
        if means.ndim != 2 or means.shape[1] != self.dim_source or means.shape[0] < 2:
            raise InvalidArgumentError(
                f"class_means must be K x {self.dim_source} with K >= 2, got {means.shape}")
        if S.shape != (self.dim_source, self.dim_target):
            raise InvalidArgumentError(
                f"shift_map must be {(self.dim_source, self.dim_target)}, got {S.shape}")
        diffs = means[:, None, :] - means[None, :, :]
        off = ~np.eye(means.shape[0], dtype=bool)
        if np.any(np.all(diffs[off] == 0, axis=-1)):
            raise InvalidArgumentError("class means must be pairwise distinct")
        if not self.class_spread > 0 or self.noise_sigma < 0:
            raise InvalidArgumentError("class_spread must be > 0 and noise_sigma >= 0")
        if self.n_source_per_class < 1 or self.n_target_per_class < 1:
            raise InvalidArgumentError("per-class sample counts must be positive")
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "shift_map", S)

    @property
    def n_classes(self):
        return self.class_means.shape[0]


def default_shift_spec(dim, seed=0, separation=30.0, distortion=0.5, noise_sigma=1.0,
                       n_source_per_class=200, n_target_per_class=90, spread=10.0,
                       target_scale=1.0):
    """Two classes with means ``+-separation/2`` along a random unit direction,
    isotropic spread ``spread``, and a shift map ``Q (I + distortion * G / sqrt(dim))``
    mixing a random rotation ``Q`` with a random Gaussian distortion ``G``.

    The feature scale matters because the distance weight acts like ``D * s**2``
    for features scaled by ``s``.  The defaults (spread 10, separation 3 spreads,
    target noise 0.1 spreads) put the unit-``D`` distance term on a footing where
    it regularizes the transform rather than dominating it.
    """
    rng = np.random.default_rng([seed, dim, 7])
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    means = np.vstack([-0.5 * separation * u, 0.5 * separation * u])
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
    Q *= np.sign(np.diag(R))
    S = Q @ (np.eye(dim) + distortion * rng.standard_normal((dim, dim)) / np.sqrt(dim))
    S = S / target_scale
    return ShiftSpec(dim, dim, means, spread, S, noise_sigma, seed,
                     n_source_per_class, n_target_per_class)


def gen_shifted(spec: ShiftSpec):
    """Sample a (source, target) pair from a :class:`ShiftSpec`."""
    rng = np.random.default_rng(spec.seed)
    K = spec.n_classes

    def draw(n_per):
        X = np.vstack([m + spec.class_spread * rng.standard_normal((n_per, spec.dim_source))
                       for m in spec.class_means])
        return X, np.repeat(np.arange(1, K + 1), n_per)

    Xs, ys = draw(spec.n_source_per_class)
    Z, yt = draw(spec.n_target_per_class)
    Xt = Z @ np.linalg.pinv(spec.shift_map).T
    if spec.noise_sigma > 0:
        Xt = Xt + spec.noise_sigma * rng.standard_normal(Xt.shape)
    return Dataset(Xs, ys, Domain.SOURCE, K), Dataset(Xt, yt, Domain.TARGET, K)
