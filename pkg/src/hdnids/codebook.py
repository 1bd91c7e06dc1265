"""Feature schema and the deterministic hypervector codebook.

A codebook assigns every feature a random base hypervector plus, per
feature kind:
    continuous  - a chain of K level vectors where adjacent levels differ
                  by exactly floor(D/K) flipped bits, so nearby value bins
                  stay correlated and distant bins drift apart;
    categorical - one independent random vector per vocabulary entry
                  (categories carry no order, so no flip chain).
A single reserved out-of-vocabulary vector covers category values never
seen during training.

Every vector is drawn from a sub-stream of the master seed keyed by
(purpose tag, sha256 of the feature name), so adding or reordering
features never perturbs the codes of existing ones.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .hypervector import Hypervector, RandomSource, flip_bits, random_hv

KIND_CONTINUOUS = "continuous"
KIND_CATEGORICAL = "categorical"

TRANSFORM_NONE = "none"
TRANSFORM_LOG1P = "log1p"

# Sub-stream purpose tags (documented layout of the master seed).
_TAG_BASE = 1
_TAG_LEVELS = 2
_TAG_CATEGORIES = 3
_TAG_OOV = 4


def _name_key(name: str) -> int:
    """Stable 128-bit integer key for a feature name."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:16], "little")


@dataclass
class FeatureSpec:
    """Metadata for one feature column.

    Continuous features carry the training-data [min, max] (in transformed
    space when transform != "none"); categorical features carry a sorted,
    duplicate-free vocabulary.
    """

    name: str
    kind: str
    min: float | None = None
    max: float | None = None
    vocabulary: list[str] | None = None
    transform: str = TRANSFORM_NONE

    def __post_init__(self):
        if self.kind not in (KIND_CONTINUOUS, KIND_CATEGORICAL):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == KIND_CONTINUOUS:
            if self.min is None or self.max is None:
                raise ValueError(f"continuous feature {self.name!r} needs min and max")
            if self.min > self.max:
                raise ValueError(f"feature {self.name!r}: min {self.min} > max {self.max}")
            if self.transform not in (TRANSFORM_NONE, TRANSFORM_LOG1P):
                raise ValueError(f"unknown transform {self.transform!r}")
        else:
            if not self.vocabulary:
                raise ValueError(f"categorical feature {self.name!r} needs a vocabulary")
            if len(set(self.vocabulary)) != len(self.vocabulary):
                raise ValueError(f"feature {self.name!r}: vocabulary has duplicates")

    def transform_value(self, value: float) -> float:
        if self.transform == TRANSFORM_LOG1P:
            # np.log1p, not math.log1p: the batch encoder uses the numpy
            # ufunc, whose SIMD path can differ from libm in the last ulp.
            return float(np.log1p(np.float64(max(value, 0.0))))
        return value

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == KIND_CONTINUOUS:
            d["min"] = self.min
            d["max"] = self.max
            d["transform"] = self.transform
        else:
            d["vocabulary"] = list(self.vocabulary)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(
            name=d["name"],
            kind=d["kind"],
            min=d.get("min"),
            max=d.get("max"),
            vocabulary=d.get("vocabulary"),
            transform=d.get("transform", TRANSFORM_NONE),
        )


@dataclass
class FeatureSchema:
    """Ordered feature specs plus the class-name list.

    Feature order is fixed at inference-schema time and must be identical
    between training and inference; names must be unique because codebook
    sub-streams are keyed by them.
    """

    features: list[FeatureSpec]
    class_names: list[str]

    def __post_init__(self):
        if not self.features:
            raise ValueError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")

    @property
    def num_features(self) -> int:
        return len(self.features)

    def to_dict(self) -> dict:
        return {
            "features": [f.to_dict() for f in self.features],
            "class_names": list(self.class_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            features=[FeatureSpec.from_dict(f) for f in d["features"]],
            class_names=list(d["class_names"]),
        )


@dataclass
class Codebook:
    """All hypervectors needed to encode records under one schema.

    base[j] identifies feature j; levels[j] holds the K-vector flip chain
    for continuous feature j; categories[j] maps vocabulary entries of
    categorical feature j to their codes; oov is the shared fallback for
    unseen category values. Immutable after build.
    """

    dim: int
    bins: int
    seed: int
    base: list[Hypervector]
    levels: dict[int, list[Hypervector]]
    categories: dict[int, dict[str, Hypervector]]
    oov: Hypervector = field(repr=False)


def build_codebook(schema: FeatureSchema, dim: int, bins: int, seed: int) -> Codebook:
    """Deterministically generate the codebook for a schema.

    Fully determined by (schema, dim, bins, seed): same inputs give
    bit-identical vectors. Adjacent level vectors differ by exactly
    floor(dim / bins) positions.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if dim < bins:
        raise ValueError(f"bins ({bins}) cannot exceed hypervector dim ({dim})")
    root = RandomSource(seed)
    flips = dim // bins

    base: list[Hypervector] = []
    levels: dict[int, list[Hypervector]] = {}
    categories: dict[int, dict[str, Hypervector]] = {}
    for j, spec in enumerate(schema.features):
        key = _name_key(spec.name)
        base.append(random_hv(dim, root.derive(_TAG_BASE, key)))
        if spec.kind == KIND_CONTINUOUS:
            rng = root.derive(_TAG_LEVELS, key)
            chain = [random_hv(dim, rng)]
            for _ in range(1, bins):
                chain.append(flip_bits(chain[-1], flips, rng))
            levels[j] = chain
        else:
            rng = root.derive(_TAG_CATEGORIES, key)
            categories[j] = {v: random_hv(dim, rng) for v in sorted(spec.vocabulary)}

    oov = random_hv(dim, root.derive(_TAG_OOV))
    return Codebook(
        dim=dim, bins=bins, seed=seed, base=base,
        levels=levels, categories=categories, oov=oov,
    )


def level_index(value: float, spec: FeatureSpec, bins: int) -> int:
    """Uniform-width bin of a continuous value, 1-based in [1, bins].

    Out-of-range values clamp to the nearest edge bin, so the function is
    total; a degenerate training range (min == max) maps everything to 1.
    """
    lo, hi = spec.min, spec.max
    if lo == hi:
        return 1
    if value >= hi:
        return bins
    width = (hi - lo) / bins
    idx = 1 + math.floor((value - lo) / width)
    return min(max(idx, 1), bins)


def lookup_level(
    feature_index: int,
    raw_value,
    codebook: Codebook,
    schema: FeatureSchema,
) -> Hypervector:
    """Value hypervector for one feature of one record.

    Continuous values are transformed (when the schema entry asks) and binned;
    categorical values hit the vocabulary table, falling back to the
    shared OOV vector, so the lookup is total.
    """
    spec = schema.features[feature_index]
    if spec.kind == KIND_CONTINUOUS:
        value = float(raw_value) if not isinstance(raw_value, float) else raw_value
        idx = level_index(spec.transform_value(value), spec, codebook.bins)
        return codebook.levels[feature_index][idx - 1]
    return codebook.categories[feature_index].get(str(raw_value), codebook.oov)


def codebook_to_state(cb: Codebook, schema: FeatureSchema) -> tuple[dict, np.ndarray]:
    """Flatten a codebook into (manifest, packed-vector matrix) for storage.

    Row order is fixed: per feature its base then its levels or sorted
    category vectors, with the OOV vector last. The manifest records only
    scalars; the schema recreates the row layout on load.
    """
    rows = []
    for j, spec in enumerate(schema.features):
        rows.append(cb.base[j].packed)
        if spec.kind == KIND_CONTINUOUS:
            rows.extend(hv.packed for hv in cb.levels[j])
        else:
            rows.extend(cb.categories[j][v].packed for v in sorted(spec.vocabulary))
    rows.append(cb.oov.packed)
    manifest = {"dim": cb.dim, "bins": cb.bins, "seed": cb.seed, "rows": len(rows)}
    return manifest, np.vstack(rows)


def codebook_from_state(
    manifest: dict, matrix: np.ndarray, schema: FeatureSchema
) -> Codebook:
    """Inverse of codebook_to_state; round-trips bit-exactly."""
    dim, bins = int(manifest["dim"]), int(manifest["bins"])
    if matrix.shape[0] != manifest["rows"]:
        raise ValueError(
            f"codebook matrix has {matrix.shape[0]} rows, manifest says {manifest['rows']}"
        )
    it = iter(range(matrix.shape[0]))

    def take() -> Hypervector:
        return Hypervector(np.ascontiguousarray(matrix[next(it)]), dim)

    base, levels, categories = [], {}, {}
    for j, spec in enumerate(schema.features):
        base.append(take())
        if spec.kind == KIND_CONTINUOUS:
            levels[j] = [take() for _ in range(bins)]
        else:
            categories[j] = {v: take() for v in sorted(spec.vocabulary)}
    oov = take()
    return Codebook(
        dim=dim, bins=bins, seed=int(manifest["seed"]), base=base,
        levels=levels, categories=categories, oov=oov,
    )
