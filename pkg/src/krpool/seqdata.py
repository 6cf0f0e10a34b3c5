"""Sequences, labelled datasets, CSV/binary I/O and a synthetic generator."""

from __future__ import annotations

import csv
import enum
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptors import PREIMAGE_METHODS, PreimageDescriptor, SubspaceDescriptor
from .errors import DegenerateSequence, FormatError, IoError, ParamError


@dataclass(frozen=True, eq=False)
class Sequence:
    """Temporally ordered n x d frame matrix; row order is time order."""

    frames: np.ndarray

    def __post_init__(self):
        arr = np.array(self.frames, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise FormatError(f"frames must be an n x d matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise FormatError("frames contain non-finite values")
        if arr.shape[0] < 2:
            raise DegenerateSequence(f"need at least 2 frames, got {arr.shape[0]}")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @property
    def n(self):
        return self.frames.shape[0]

    @property
    def d(self):
        return self.frames.shape[1]

    def reversed(self):
        return Sequence(self.frames[::-1])

    def l2_normalized(self):
        norms = np.linalg.norm(self.frames, axis=1, keepdims=True)
        return Sequence(self.frames / np.where(norms > 0, norms, 1.0))


def as_frames(X):
    """Frame matrix of a Sequence or array-like, always 2-d float64."""
    if isinstance(X, Sequence):
        return X.frames
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    items: tuple
    class_count: int
    label_names: tuple = ()
    sources: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.class_count < 2:
            raise FormatError("a dataset needs at least two classes")
        seen = set()
        for _, label in self.items:
            if not 0 <= label < self.class_count:
                raise FormatError(f"label {label} outside [0, {self.class_count})")
            seen.add(label)
        if len(seen) != self.class_count:
            raise FormatError("every class needs at least one sequence")

    @property
    def sequences(self):
        return [s for s, _ in self.items]

    @property
    def labels(self):
        return np.array([y for _, y in self.items], dtype=int)

    def __len__(self):
        return len(self.items)


# ---------------------------------------------------------------- CSV input


def load_sequence(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise IoError(f"no such sequence file: {path}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    lines = text.split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    rows = []
    for lineno, line in enumerate(lines, 1):
        cells = line.rstrip("\r").split(",")
        try:
            row = [float(c) for c in cells]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric cell") from exc
        if rows and len(row) != len(rows[0]):
            raise FormatError(
                f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(row)}"
            )
        rows.append(row)
    if len(rows) < 2:
        raise DegenerateSequence(f"{path}: need at least 2 frames, got {len(rows)}")
    try:
        return Sequence(np.array(rows))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def read_manifest_rows(path):
    """(absolute path, label string) pairs; paths resolve against the manifest."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            raw = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except FileNotFoundError as exc:
        raise IoError(f"no such manifest: {path}") from exc
    if not raw:
        raise FormatError(f"{path}: empty manifest")
    rows = []
    for lineno, r in enumerate(raw, 1):
        if len(r) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'path,label'")
        rows.append(((path.parent / r[0].strip()).resolve(), r[1].strip()))
    return rows


def load_manifest(path):
    rows = read_manifest_rows(path)
    names = list(dict.fromkeys(label for _, label in rows))
    index = {name: i for i, name in enumerate(names)}
    items = []
    for file, label in rows:
        if not file.exists():
            raise IoError(f"manifest {path} references missing file {file}")
        items.append((load_sequence(file), index[label]))
    if len(names) < 2:
        raise FormatError(f"{path}: need at least two classes, found {len(names)}")
    return LabeledDataset(items, len(names), tuple(names), tuple(f for f, _ in rows))


def write_sequence(seq, path):
    frames = as_frames(seq)
    body = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in frames)
    atomic_write(path, body.encode("utf-8"))


def write_manifest(rows, path):
    """Write ``(relative path, label)`` rows."""
    body = "".join(f"{p},{label}\n" for p, label in rows)
    atomic_write(path, body.encode("utf-8"))


def atomic_write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------- synthetic data


class Dynamics(str, enum.Enum):
    MONOTONE_LINE = "monotone-line"
    SPIRAL = "spiral"
    FREQUENCY_CODED = "frequency-coded"


@dataclass(frozen=True)
class SynthSpec:
    classes: int
    sequences_per_class: int
    n: int
    d: int
    noise: float = 0.0
    dynamics: Dynamics = Dynamics.SPIRAL

    def __post_init__(self):
        object.__setattr__(self, "dynamics", Dynamics(self.dynamics))
        for name in ("classes", "sequences_per_class", "n", "d"):
            if getattr(self, name) < 1:
                raise ParamError(f"{name} must be positive")
        if self.classes < 2:
            raise ParamError("a labelled dataset needs at least two classes")
        if self.n < 2:
            raise ParamError("sequences need at least 2 frames")
        if not self.noise >= 0:
            raise ParamError("noise must be non-negative")


def _rng(*key):
    # one stream per (seed, class, sequence[, frame]) so generation order is irrelevant
    return np.random.default_rng([int(k) for k in key])


def spiral_angles(spec, seed, c, s):
    """Generating angle of each frame of spiral sequence (c, s)."""
    t = np.linspace(0.0, 1.0, spec.n)
    theta0 = _rng(seed, c, s, 0xA).uniform(0.0, 2 * np.pi)
    rate = np.pi * (2.0 + c)
    return theta0 + rate * t


def _clean_frames(spec, seed, c, s):
    n, d = spec.n, spec.d
    if spec.dynamics is Dynamics.MONOTONE_LINE:
        direction = _rng(seed, c, 0xD).standard_normal(d)
        direction /= np.linalg.norm(direction)
        start = _rng(seed, c, s, 0xB).standard_normal(d)
        step = 2.0 * direction / (n - 1)
        return start + np.arange(n)[:, None] * step
    if spec.dynamics is Dynamics.SPIRAL:
        t = np.linspace(0.0, 1.0, n)
        theta = spiral_angles(spec, seed, c, s)
        # shrinking radius: later frames sit closer to the centre
        radius = 2.0 - 1.8 * t
        out = np.empty((n, d))
        for k in range(d):
            harmonic = k // 2 + 1
            trig = np.cos if k % 2 == 0 else np.sin
            out[:, k] = radius * trig(harmonic * theta)
        if d > 2 and d % 2 == 1:
            out[:, -1] = 2.0 * t - 1.0
        return out
    # frequency-coded: one closed curve per class, random start along it; the
    # frame mean is ~0 for every class so only the dynamics separate them
    freq = c + 2
    t = np.arange(n) / n + _rng(seed, c, s, 0xC).uniform()
    if d == 1:
        return np.sin(2 * np.pi * freq * t)[:, None]
    out = np.empty((n, d))
    out[:, 0] = np.cos(2 * np.pi * t)
    if d == 2:
        out[:, 1] = np.sin(2 * np.pi * freq * t)
        return out
    out[:, 1] = np.sin(2 * np.pi * t)
    for k in range(2, d):
        out[:, k] = np.sin(2 * np.pi * freq * (k - 1) * t)
    return out


def synth_sequence(spec, seed, c, s):
    frames = _clean_frames(spec, seed, c, s)
    if spec.noise > 0:
        noise = np.stack([_rng(seed, c, s, 1, i).standard_normal(spec.d) for i in range(spec.n)])
        frames = frames + spec.noise * noise
    return Sequence(frames)


def synth_dataset(spec, seed):
    items = [
        (synth_sequence(spec, seed, c, s), c)
        for c in range(spec.classes)
        for s in range(spec.sequences_per_class)
    ]
    names = tuple(f"class{c}" for c in range(spec.classes))
    return LabeledDataset(items, spec.classes, names)


def stratified_split(labels, train_fraction=0.5, seed=0):
    """Index arrays (train, test), splitting every class by a seeded shuffle."""
    labels = np.asarray(labels, dtype=int)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[_rng(seed, c, 0x5).permutation(idx.size)]
        cut = int(round(train_fraction * idx.size))
        train.extend(idx[:cut])
        test.extend(idx[cut:])
    return np.sort(train), np.sort(test)


# ------------------------------------------------------ descriptor files

DESCRIPTOR_MAGIC = b"KRPD"
DESCRIPTOR_VERSION = 1
_KIND_PREIMAGE, _KIND_SUBSPACE = 0, 1


def _f8(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def descriptor_bytes(desc):
    head = DESCRIPTOR_MAGIC + struct.pack("<I", DESCRIPTOR_VERSION)
    if isinstance(desc, PreimageDescriptor):
        body = struct.pack(
            "<BBIdddddI",
            _KIND_PREIMAGE,
            PREIMAGE_METHODS.index(desc.method),
            desc.d,
            desc.eta,
            desc.lam,
            desc.slack_weight,
            desc.sigma,
            desc.objective,
            desc.iterations,
        )
        return head + body + _f8(desc.z)
    if isinstance(desc, SubspaceDescriptor):
        body = struct.pack(
            "<BIIIdddI", _KIND_SUBSPACE, desc.n, desc.p, desc.d,
            desc.sigma, desc.jitter, desc.objective, desc.iterations,
        )
        return head + body + _f8(desc.A) + _f8(desc.frames)
    raise TypeError(f"not a descriptor: {type(desc).__name__}")


def descriptor_from_bytes(buf, name="<bytes>"):
    if len(buf) < 9 or buf[:4] != DESCRIPTOR_MAGIC:
        raise FormatError(f"{name}: not a descriptor file (bad magic)")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != DESCRIPTOR_VERSION:
        raise FormatError(f"{name}: unsupported descriptor version {version}")
    kind = buf[8]
    try:
        if kind == _KIND_PREIMAGE:
            fmt = "<BBIdddddI"
            _, m, d, eta, lam, c, sigma, obj, iters = struct.unpack_from(fmt, buf, 8)
            off = 8 + struct.calcsize(fmt)
            z = _read_f8(buf, off, d, name)
            return PreimageDescriptor(z, PREIMAGE_METHODS[m], eta, lam, c, sigma, iters, obj)
        if kind == _KIND_SUBSPACE:
            fmt = "<BIIIdddI"
            _, n, p, d, sigma, jitter, obj, iters = struct.unpack_from(fmt, buf, 8)
            off = 8 + struct.calcsize(fmt)
            A = _read_f8(buf, off, n * p, name).reshape(n, p)
            frames = _read_f8(buf, off + 8 * n * p, n * d, name).reshape(n, d)
            return SubspaceDescriptor(A, frames, sigma, jitter, obj, iters)
    except (struct.error, IndexError) as exc:
        raise FormatError(f"{name}: truncated descriptor") from exc
    raise FormatError(f"{name}: unknown descriptor kind {kind}")


def _read_f8(buf, off, count, name):
    end = off + 8 * count
    if end > len(buf):
        raise FormatError(f"{name}: truncated descriptor")
    return np.frombuffer(buf[off:end], dtype="<f8").astype(np.float64)


def write_descriptor(desc, path):
    atomic_write(path, descriptor_bytes(desc))


def read_descriptor(path):
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError as exc:
        raise IoError(f"no such descriptor file: {path}") from exc
    return descriptor_from_bytes(buf, str(path))
