"""Synthetic noisy-sequence benchmark data, persistence, and checkpoints.

Each sample hides a class-specific multichannel sinusoid burst between
white-noise pads of randomized length, with a ground-truth salience mask
marking the burst. That gives a desk-scale task where (a) an ungated
recurrence is badly hurt by the pads and (b) learned gates can be scored
against the mask.

Binary formats (shared 16-byte header):
    magic(4) | version(uint32 LE) | payload_len(uint64 LE)
then meta_len(uint64 LE) | metadata JSON (UTF-8) | payload.
The payload is the concatenation of little-endian float64 tensors,
row-major, in the order declared by the metadata. Magic "TGMD" marks a
dataset (payload: per sequence, the T x D observation block, then the
length-T mask when present), "TGMC" a checkpoint (payload: the model
tensors in canonical order, then optimizer accumulators when present).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .numerics import INIT_SCHEME, require_finite

__all__ = [
    "FormatError",
    "Sequence",
    "GenConfig",
    "Dataset",
    "generate",
    "class_template",
    "save_dataset",
    "load_dataset",
    "save_checkpoint",
    "load_checkpoint",
    "export_csv",
    "as_multilabel",
    "with_train_subset",
    "DATASET_MAGIC",
    "CHECKPOINT_MAGIC",
    "FORMAT_VERSION",
]

DATASET_MAGIC = b"TGMD"
CHECKPOINT_MAGIC = b"TGMC"
FORMAT_VERSION = 1
SPLIT_NAMES = ("train", "val", "test")


class FormatError(ValueError):
    """A file does not conform to the TGMD/TGMC format."""


@dataclass
class Sequence:
    """One sample: (T, D) observations, a label, optional salience mask."""

    x: np.ndarray
    label: object  # int for multiclass, (K,) 0/1 float array for multilabel
    mask: Optional[np.ndarray] = None  # (T,) 0/1, 1 = ground-truth salient step

    @property
    def t_len(self) -> int:
        return self.x.shape[0]


@dataclass
class GenConfig:
    classes: int = 10
    dim: int = 13
    salient_min: int = 20
    salient_max: int = 40
    pad_min: int = 10
    pad_max: int = 30
    noise_sigma: float = 0.5
    pattern_jitter_sigma: float = 0.1
    train_count: int = 3000
    val_count: int = 500
    test_count: int = 1500
    seed: int = 0

    def validate(self) -> None:
        if self.classes < 1 or self.dim < 1:
            raise ValueError("classes and dim must be positive")
        if not 1 <= self.salient_min <= self.salient_max:
            raise ValueError("salient length range is empty or non-positive")
        if not 0 <= self.pad_min <= self.pad_max:
            raise ValueError("pad length range is empty or negative")
        if self.noise_sigma < 0 or self.pattern_jitter_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if min(self.train_count, self.val_count, self.test_count) < 0:
            raise ValueError("split counts must be non-negative")

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class Dataset:
    sequences: list
    dim: int
    classes: int
    mode: str = "multiclass"
    splits: dict = field(default_factory=dict)  # name -> list of sequence indices
    seed: Optional[int] = None
    config_hash: Optional[str] = None
    config: Optional[dict] = None

    def split(self, name: str) -> list:
        return [self.sequences[i] for i in self.splits.get(name, [])]

    def __len__(self) -> int:
        return len(self.sequences)


def class_template(k: int, classes: int, length: int, dim: int, salient_max: int) -> np.ndarray:
    """Deterministic class pattern: a multichannel sinusoid.

    Frequency (k+1)/(2*salient_max) cycles per step, channel d phased by
    d*pi/dim. No stored template bank; the pattern is a pure function of
    (k, dim, length).
    """
    if not 0 <= k < classes:
        raise ValueError(f"class {k} out of range")
    freq = (k + 1) / (2.0 * salient_max)
    t = np.arange(length)[:, None]
    phases = np.arange(dim)[None, :] * np.pi / dim
    return np.sin(2.0 * np.pi * freq * t + phases)


def _make_sample(cfg: GenConfig, k: int, index: int) -> Sequence:
    # per-sample derived generator: fully determined by (seed, sample index)
    rng = np.random.default_rng((cfg.seed, index))
    s_len = int(rng.integers(cfg.salient_min, cfg.salient_max + 1))
    pre = int(rng.integers(cfg.pad_min, cfg.pad_max + 1))
    suf = int(rng.integers(cfg.pad_min, cfg.pad_max + 1))
    core = class_template(k, cfg.classes, s_len, cfg.dim, cfg.salient_max)
    core = core + rng.normal(0.0, cfg.pattern_jitter_sigma, size=core.shape)
    head = rng.normal(0.0, cfg.noise_sigma, size=(pre, cfg.dim))
    tail = rng.normal(0.0, cfg.noise_sigma, size=(suf, cfg.dim))
    x = np.vstack([head, core, tail])
    mask = np.zeros(x.shape[0])
    mask[pre : pre + s_len] = 1.0
    return Sequence(x=x, label=k, mask=mask)


def generate(cfg: GenConfig) -> Dataset:
    """Build the synthetic dataset: template burst between white-noise pads.

    Classes are assigned round-robin inside each split (exact balance);
    every random draw comes from a per-sample generator derived from
    (seed, global sample index), so identical configs give bit-identical
    datasets.
    """
    cfg.validate()
    sequences = []
    splits = {name: [] for name in SPLIT_NAMES}
    counts = {"train": cfg.train_count, "val": cfg.val_count, "test": cfg.test_count}
    index = 0
    for name in SPLIT_NAMES:
        for j in range(counts[name]):
            seq = _make_sample(cfg, j % cfg.classes, index)
            splits[name].append(index)
            sequences.append(seq)
            index += 1
    return Dataset(
        sequences=sequences,
        dim=cfg.dim,
        classes=cfg.classes,
        mode="multiclass",
        splits=splits,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
        config=asdict(cfg),
    )


def with_train_subset(ds: Dataset, n: int) -> Dataset:
    """Compact copy keeping only the first n train samples (val/test intact)."""
    if n < 1 or n > len(ds.splits["train"]):
        raise ValueError(f"train subset size {n} out of range")
    keep = ds.splits["train"][:n] + ds.splits["val"] + ds.splits["test"]
    remap = {old: new for new, old in enumerate(keep)}
    return Dataset(
        sequences=[ds.sequences[i] for i in keep],
        dim=ds.dim,
        classes=ds.classes,
        mode=ds.mode,
        splits={
            "train": [remap[i] for i in ds.splits["train"][:n]],
            "val": [remap[i] for i in ds.splits["val"]],
            "test": [remap[i] for i in ds.splits["test"]],
        },
        seed=ds.seed,
        config_hash=ds.config_hash,
        config=ds.config,
    )


def as_multilabel(ds: Dataset) -> Dataset:
    """One-hot view of a multiclass dataset for the sigmoid/BCE head."""
    if ds.mode != "multiclass":
        raise ValueError("already multilabel")
    seqs = []
    for s in ds.sequences:
        target = np.zeros(ds.classes)
        target[int(s.label)] = 1.0
        seqs.append(Sequence(x=s.x, label=target, mask=s.mask))
    return Dataset(
        sequences=seqs,
        dim=ds.dim,
        classes=ds.classes,
        mode="multilabel",
        splits={k: list(v) for k, v in ds.splits.items()},
        seed=ds.seed,
        config_hash=ds.config_hash,
        config=ds.config,
    )


def _write_blob(path, magic: bytes, meta: dict, payload: bytes) -> None:
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(payload)


def _read_blob(path, magic: bytes) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16:
            raise FormatError(f"{path}: truncated header, expected 16 bytes, got {len(head)}")
        if head[:4] != magic:
            raise FormatError(f"{path}: bad magic {head[:4]!r}, expected {magic!r}")
        version = struct.unpack("<I", head[4:8])[0]
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported format version {version}, expected {FORMAT_VERSION}")
        payload_len = struct.unpack("<Q", head[8:16])[0]
        raw = fh.read(8)
        if len(raw) < 8:
            raise FormatError(f"{path}: truncated metadata length field")
        meta_len = struct.unpack("<Q", raw)[0]
        meta_bytes = fh.read(meta_len)
        if len(meta_bytes) < meta_len:
            raise FormatError(f"{path}: truncated metadata, expected {meta_len} bytes, got {len(meta_bytes)}")
        payload = fh.read(payload_len)
        if len(payload) < payload_len:
            raise FormatError(f"{path}: truncated payload, expected {payload_len} bytes, got {len(payload)}")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after declared payload")
    try:
        meta = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata block: {exc}") from exc
    return meta, payload


def _label_to_json(label):
    if isinstance(label, np.ndarray):
        return [int(v) for v in label]
    return int(label)


def _label_from_json(raw, mode: str):
    if mode == "multilabel":
        return np.asarray(raw, dtype=np.float64)
    return int(raw)


def save_dataset(ds: Dataset, path) -> None:
    split_of = {}
    for name, idxs in ds.splits.items():
        for i in idxs:
            split_of[i] = name
    records = []
    chunks = []
    for i, s in enumerate(ds.sequences):
        require_finite(f"sequence {i}", s.x)
        records.append(
            {
                "t": int(s.t_len),
                "label": _label_to_json(s.label),
                "mask": s.mask is not None,
                "split": split_of.get(i, "train"),
            }
        )
        chunks.append(np.ascontiguousarray(s.x, dtype="<f8").tobytes())
        if s.mask is not None:
            chunks.append(np.ascontiguousarray(s.mask, dtype="<f8").tobytes())
    meta = {
        "dim": ds.dim,
        "classes": ds.classes,
        "mode": ds.mode,
        "seed": ds.seed,
        "config": ds.config,
        "config_hash": ds.config_hash,
        "records": records,
    }
    _write_blob(path, DATASET_MAGIC, meta, b"".join(chunks))


def load_dataset(path) -> Dataset:
    meta, payload = _read_blob(path, DATASET_MAGIC)
    dim = int(meta["dim"])
    mode = meta["mode"]
    expected = sum(r["t"] * dim + (r["t"] if r["mask"] else 0) for r in meta["records"]) * 8
    if expected != len(payload):
        raise FormatError(f"{path}: payload size mismatch, metadata implies {expected} bytes, got {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f8")
    sequences = []
    splits = {name: [] for name in SPLIT_NAMES}
    offset = 0
    for i, rec in enumerate(meta["records"]):
        t_len = int(rec["t"])
        x = flat[offset : offset + t_len * dim].reshape(t_len, dim).copy()
        offset += t_len * dim
        mask = None
        if rec["mask"]:
            mask = flat[offset : offset + t_len].copy()
            offset += t_len
        sequences.append(Sequence(x=x, label=_label_from_json(rec["label"], mode), mask=mask))
        splits.setdefault(rec["split"], []).append(i)
    return Dataset(
        sequences=sequences,
        dim=dim,
        classes=int(meta["classes"]),
        mode=mode,
        splits=splits,
        seed=meta.get("seed"),
        config_hash=meta.get("config_hash"),
        config=meta.get("config"),
    )


def save_checkpoint(model, path, optimizer_state: Optional[dict] = None, seed: Optional[int] = None) -> None:
    """Persist a model (and optionally its RMSprop accumulators) bit-exactly."""
    names = []
    chunks = []
    for name, arr in model.tensors():
        require_finite(f"tensor {name}", arr)
        names.append({"name": name, "shape": list(arr.shape)})
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    if optimizer_state is not None:
        for name, _ in model.tensors():
            chunks.append(np.ascontiguousarray(optimizer_state[name], dtype="<f8").tobytes())
    meta = {
        "kind": model.kind,
        "dim": model.dim,
        "attn_hidden": model.attn_hidden,
        "cell_hidden": model.cell_hidden,
        "classes": model.classes,
        "head_mode": model.head_mode,
        "init_scheme": INIT_SCHEME,
        "seed": seed,
        "has_optimizer_state": optimizer_state is not None,
        "tensors": names,
    }
    _write_blob(path, CHECKPOINT_MAGIC, meta, b"".join(chunks))


def load_checkpoint(path):
    """Load a checkpoint; returns (model, optimizer_state or None, metadata).

    Tensor shapes are validated against the declared dimensions before any
    array is filled; a mismatch is rejected as corruption.
    """
    from .training import init_model  # local import; training depends on this module

    meta, payload = _read_blob(path, CHECKPOINT_MAGIC)
    model = init_model(
        meta["kind"],
        int(meta["dim"]),
        int(meta["attn_hidden"]),
        int(meta["cell_hidden"]),
        int(meta["classes"]),
        meta["head_mode"],
        rng=None,
    )
    expected_tensors = dict(model.tensors())
    declared = meta["tensors"]
    if [d["name"] for d in declared] != [n for n, _ in model.tensors()]:
        raise FormatError(f"{path}: tensor list does not match a {meta['kind']!r} model")
    for d in declared:
        if tuple(d["shape"]) != expected_tensors[d["name"]].shape:
            raise FormatError(
                f"{path}: tensor {d['name']} has shape {tuple(d['shape'])}, "
                f"expected {expected_tensors[d['name']].shape} for the declared dims"
            )
    n_scalars = sum(arr.size for arr in expected_tensors.values())
    copies = 2 if meta["has_optimizer_state"] else 1
    if n_scalars * copies * 8 != len(payload):
        raise FormatError(
            f"{path}: payload size mismatch, expected {n_scalars * copies * 8} bytes, got {len(payload)}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    offset = 0
    for name, arr in model.tensors():
        arr[...] = flat[offset : offset + arr.size].reshape(arr.shape)
        offset += arr.size
    state = None
    if meta["has_optimizer_state"]:
        state = {}
        for name, arr in model.tensors():
            state[name] = flat[offset : offset + arr.size].reshape(arr.shape).copy()
            offset += arr.size
    return model, state, meta


def export_csv(ds: Dataset, path) -> None:
    """Plot-ready dump: one row per timestep with label and mask columns."""
    split_of = {}
    for name, idxs in ds.splits.items():
        for i in idxs:
            split_of[i] = name
    has_mask = any(s.mask is not None for s in ds.sequences)
    with open(path, "w") as fh:
        cols = ["sample_id", "t"] + [f"x_{d + 1}" for d in range(ds.dim)] + ["label"]
        if has_mask:
            cols.append("mask")
        fh.write(",".join(cols) + "\n")
        for i, s in enumerate(ds.sequences):
            label = ";".join(str(int(v)) for v in s.label) if isinstance(s.label, np.ndarray) else str(int(s.label))
            for t in range(s.t_len):
                row = [str(i), str(t)] + [repr(float(v)) for v in s.x[t]] + [label]
                if has_mask:
                    row.append("" if s.mask is None else str(int(s.mask[t])))
                fh.write(",".join(row) + "\n")
