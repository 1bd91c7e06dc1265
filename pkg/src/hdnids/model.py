"""Class-representative model: centroid training, retraining, inference, IO.

Representatives start as per-class sums of the binary training encodings.
Retraining then walks the samples in one fixed seeded order per run and,
for every sample the current model gets wrong, moves alpha times the
sample vector from the wrongly predicted class onto the true class.
Correct samples cause no update, so a fully correct epoch is a fixed
point and triggers early stop.

The inner loop is chunked for speed but is exactly equivalent to the
one-sample-at-a-time procedure: within a chunk, samples before the first
miss were scored under the unchanged model, and a miss update touches at
most two representative rows, so only the chunk tail's scores against
those two rows need recomputing.

Model files are a versioned binary container (magic, format version,
JSON header, raw array payload, SHA-256 trailer); see README for the
exact byte layout.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codebook import Codebook, FeatureSchema, codebook_from_state, codebook_to_state
from .dataset import LabelMap
from .encoding import EncodedDataset, EncodedRecord
from .hypervector import AccumulatorVector, Hypervector, cosine, popcount

log = logging.getLogger(__name__)

MAGIC = b"HDNIDS01"
FORMAT_VERSION = 1

_RETRAIN_STREAM_TAG = 0x7EA11
# results are chunk-size independent; 128 keeps the per-miss tail rescore cheap
_CHUNK = 128

_BYTE_POPCOUNT = np.bitwise_count if hasattr(np, "bitwise_count") else None
if _BYTE_POPCOUNT is None:  # numpy < 2.0
    _LUT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

    def _BYTE_POPCOUNT(a):
        return _LUT[a]


class CorruptModelError(ValueError):
    """Model file is truncated, checksum-mismatched, or wrongly versioned."""


@dataclass
class Hyperparams:
    dim: int = 10000
    bins: int = 10
    threshold: float | None = None  # None means features/2, resolved at train time
    alpha: float = 1.0
    iterations: int = 50
    seed: int = 42
    log_scale: bool = False

    def to_dict(self) -> dict:
        return {
            "dim": self.dim, "bins": self.bins, "threshold": self.threshold,
            "alpha": self.alpha, "iterations": self.iterations,
            "seed": self.seed, "log_scale": self.log_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


@dataclass
class Prediction:
    """Argmax class plus the per-class cosine similarities."""

    class_index: int
    similarities: list
    degenerate: bool = False


@dataclass
class ClassModel:
    representatives: list  # one AccumulatorVector per class
    codebook: Codebook
    schema: FeatureSchema
    label_map: LabelMap
    hyperparams: Hyperparams

    @property
    def num_classes(self) -> int:
        return len(self.representatives)

    @property
    def threshold(self) -> float:
        t = self.hyperparams.threshold
        return self.schema.num_features / 2.0 if t is None else t

    def rep_matrix(self) -> np.ndarray:
        """Representatives stacked to a (num_classes, dim) float64 matrix."""
        return np.stack([r.values for r in self.representatives])


def _as_dataset(encoded) -> EncodedDataset:
    if isinstance(encoded, EncodedDataset):
        return encoded
    return EncodedDataset.from_records(list(encoded))


def train_initial(encoded, num_classes: int) -> list:
    """Per-class sums of the binary training vectors.

    A class with no samples keeps the all-zero vector (logged); cosine
    against an all-zero representative is defined as 0, so inference
    still works.
    """
    data = _as_dataset(encoded)
    if len(data) == 0:
        raise ValueError("empty training set")
    if data.labels is None:
        raise ValueError("training data must carry labels")
    if int(data.labels.max()) >= num_classes or int(data.labels.min()) < 0:
        raise ValueError(
            f"class index {int(data.labels.max())} outside [0, {num_classes})"
        )
    reps = np.zeros((num_classes, data.dim), dtype=np.float64)
    for start in range(0, len(data), _CHUNK):
        stop = min(start + _CHUNK, len(data))
        block = data.unpack(start, stop)
        labels = data.labels[start:stop]
        for c in np.unique(labels):
            reps[c] += block[labels == c].sum(axis=0)
    for c in range(num_classes):
        if not reps[c].any():
            log.warning("class %d has no training samples; representative is zero", c)
    return [AccumulatorVector(reps[c]) for c in range(num_classes)]


def predict(h: Hypervector, model: ClassModel) -> Prediction:
    """Cosine against every representative; argmax wins, lowest index on ties."""
    if h.dim != model.hyperparams.dim:
        raise ValueError(f"dimension mismatch: {h.dim} != {model.hyperparams.dim}")
    sims = [cosine(h, rep) for rep in model.representatives]
    degenerate = popcount(h) == 0 or any(
        not rep.values.any() for rep in model.representatives
    )
    return Prediction(
        class_index=int(np.argmax(sims)), similarities=sims, degenerate=degenerate
    )


def predict_batch(model: ClassModel, data: EncodedDataset, jobs: int | None = None):
    """Predictions and cosine similarities for a whole encoded dataset.

    Returns (preds, sims): int64 (n,) and float64 (n, num_classes).
    Read-only on the model, chunked, and safe to parallelize; chunk
    boundaries are fixed so worker count cannot change the output.
    """
    reps = model.rep_matrix()
    norms = np.linalg.norm(reps, axis=1)
    safe_norms = np.where(norms > 0, norms, 1.0)
    n = len(data)
    preds = np.empty(n, dtype=np.int64)
    sims = np.empty((n, model.num_classes), dtype=np.float64)

    def score(start: int, stop: int) -> None:
        block = data.unpack(start, stop)
        ones = _BYTE_POPCOUNT(data.packed[start:stop]).sum(axis=1, dtype=np.int64)
        h_norm = np.sqrt(ones.astype(np.float64))
        safe_h = np.where(h_norm > 0, h_norm, 1.0)
        dots = block @ reps.T
        s = (dots / safe_norms) / safe_h[:, None]
        sims[start:stop] = s
        preds[start:stop] = np.argmax(s, axis=1)

    bounds = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]
    if jobs is None or jobs <= 1 or len(bounds) == 1:
        for s, e in bounds:
            score(s, e)
    else:
        import concurrent.futures

        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(lambda b: score(b[0], b[1]), bounds))
    return preds, sims


def retrain(model: ClassModel, encoded, alpha: float, iterations: int):
    """Iterative miss/match refinement of the representatives.

    For each misclassified sample, alpha times its vector is subtracted
    from the wrongly predicted representative and added to the true one;
    correct samples change nothing. Samples are visited in one seeded
    shuffle that is fixed across epochs. Stops early on a zero-update
    epoch. Returns (updated model, per-epoch accuracy trace); the trace
    records the fraction of samples correct at the moment they were
    visited.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    data = _as_dataset(encoded)
    if data.labels is None:
        raise ValueError("retraining data must carry labels")
    m = len(data)

    reps = model.rep_matrix().copy()
    norms = np.linalg.norm(reps, axis=1)
    rng = np.random.Generator(
        np.random.PCG64(
            np.random.SeedSequence([model.hyperparams.seed, _RETRAIN_STREAM_TAG])
        )
    )
    order = rng.permutation(m)
    packed = data.packed[order]
    labels = data.labels[order]
    shuffled = EncodedDataset(packed, data.dim, labels)

    trace: list[float] = []
    for _ in range(iterations):
        correct = 0
        updates = 0
        for start in range(0, m, _CHUNK):
            stop = min(start + _CHUNK, m)
            block = shuffled.unpack(start, stop)
            y = labels[start:stop]
            dots = block @ reps.T
            pos = 0
            b = stop - start
            while pos < b:
                safe = np.where(norms > 0, norms, 1.0)
                preds = np.argmax(dots[pos:] / safe, axis=1)
                misses = np.nonzero(preds != y[pos:])[0]
                if misses.size == 0:
                    correct += b - pos
                    break
                i = pos + int(misses[0])
                correct += int(misses[0])
                wrong = int(preds[misses[0]])
                true = int(y[i])
                h = block[i]
                reps[wrong] -= alpha * h
                reps[true] += alpha * h
                norms[wrong] = np.linalg.norm(reps[wrong])
                norms[true] = np.linalg.norm(reps[true])
                updates += 1
                pos = i + 1
                if pos < b:
                    dots[pos:, wrong] = block[pos:] @ reps[wrong]
                    dots[pos:, true] = block[pos:] @ reps[true]
        trace.append(correct / m)
        if updates == 0:
            break

    out = ClassModel(
        representatives=[AccumulatorVector(reps[c]) for c in range(reps.shape[0])],
        codebook=model.codebook,
        schema=model.schema,
        label_map=model.label_map,
        hyperparams=model.hyperparams,
    )
    return out, trace


def save_model(model: ClassModel, path) -> None:
    """Write the model container atomically (temp file + rename)."""
    cb_manifest, cb_matrix = codebook_to_state(model.codebook, model.schema)
    reps = np.ascontiguousarray(model.rep_matrix())
    header = {
        "format_version": FORMAT_VERSION,
        "hyperparams": model.hyperparams.to_dict(),
        "schema": model.schema.to_dict(),
        "label_map": model.label_map.to_dict(),
        "codebook": cb_manifest,
        "arrays": [
            {"name": "codebook", "dtype": "uint8", "shape": list(cb_matrix.shape)},
            {"name": "representatives", "dtype": "float64", "shape": list(reps.shape)},
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    body = bytearray()
    body += MAGIC
    body += FORMAT_VERSION.to_bytes(4, "little")
    body += len(header_bytes).to_bytes(8, "little")
    body += header_bytes
    body += np.ascontiguousarray(cb_matrix).tobytes()
    body += reps.tobytes()
    body += hashlib.sha256(bytes(body)).digest()

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(body))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> ClassModel:
    """Read a model container; any structural damage raises CorruptModelError."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 4 + 8 + 32:
        raise CorruptModelError(f"{path}: file too short to be a model")
    if blob[: len(MAGIC)] != MAGIC:
        raise CorruptModelError(f"{path}: bad magic bytes")
    digest = hashlib.sha256(blob[:-32]).digest()
    if digest != blob[-32:]:
        raise CorruptModelError(f"{path}: checksum mismatch (truncated or edited?)")
    version = int.from_bytes(blob[8:12], "little")
    if version != FORMAT_VERSION:
        raise CorruptModelError(
            f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})"
        )
    header_len = int.from_bytes(blob[12:20], "little")
    header_end = 20 + header_len
    try:
        header = json.loads(blob[20:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelError(f"{path}: unreadable header: {exc}") from None

    offset = header_end
    arrays = {}
    for spec in header["arrays"]:
        dtype = np.dtype(spec["dtype"])
        shape = tuple(spec["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape))
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CorruptModelError(f"{path}: array {spec['name']!r} truncated")
        arrays[spec["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob) - 32:
        raise CorruptModelError(f"{path}: trailing bytes after arrays")

    schema = FeatureSchema.from_dict(header["schema"])
    label_map = LabelMap.from_dict(header["label_map"])
    hyper = Hyperparams.from_dict(header["hyperparams"])
    codebook = codebook_from_state(header["codebook"], arrays["codebook"], schema)
    reps = arrays["representatives"]
    return ClassModel(
        representatives=[AccumulatorVector(reps[c]) for c in range(reps.shape[0])],
        codebook=codebook,
        schema=schema,
        label_map=label_map,
        hyperparams=hyper,
    )
