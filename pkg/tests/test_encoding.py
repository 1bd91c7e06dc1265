"""Scalar-vs-batch encoder equivalence and encoding edge cases."""

import numpy as np
import pytest

from hdnids.codebook import FeatureSchema, FeatureSpec, build_codebook, lookup_level
from hdnids.encoding import (
    EncodedDataset,
    binarize,
    default_threshold,
    encode,
    encode_binary,
    encode_dataset,
)
from hdnids.hypervector import AccumulatorVector, Hypervector
from reference import ref_encode_binary


def cont(name, lo=0.0, hi=100.0, transform="none"):
    return FeatureSpec(name=name, kind="continuous", min=lo, max=hi, transform=transform)


def cat(name, vocab):
    return FeatureSpec(name=name, kind="categorical", vocabulary=list(vocab))


def mixed_schema(n_cont=4, n_cat=2, transform="none"):
    feats = [cont(f"c{i}", 0.0, 1000.0, transform=transform) for i in range(n_cont)]
    feats += [cat(f"k{i}", ["a", "b", "c", "d"]) for i in range(n_cat)]
    return FeatureSchema(features=feats, class_names=["x", "y"])


def random_rows(schema, n, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        row = []
        for spec in schema.features:
            if spec.kind == "continuous":
                # spill past both range edges now and then
                row.append(str(rng.uniform(-100.0, 1200.0)))
            else:
                vocab = list(spec.vocabulary) + ["never-seen"]
                row.append(vocab[rng.integers(len(vocab))])
        rows.append(tuple(row))
    return rows


class TestScalarPath:
    def test_default_threshold_is_half_feature_count(self):
        assert default_threshold(mixed_schema(4, 2)) == 3.0
        assert default_threshold(mixed_schema(5, 2)) == 3.5

    def test_binarize_is_strict(self):
        acc = AccumulatorVector(np.array([1.0, 2.0, 3.0]))
        assert binarize(acc, 2.0).to_bits().tolist() == [0, 0, 1]

    def test_encode_coordinate_range(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        acc = encode(random_rows(schema, 1, 0)[0], cb, schema)
        assert acc.values.min() >= 0
        assert acc.values.max() <= schema.num_features
        assert np.array_equal(acc.values, acc.values.astype(np.int64))

    def test_encode_rejects_wrong_arity(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        with pytest.raises(ValueError, match="6"):
            encode(("1", "2"), cb, schema)

    def test_matches_unpacked_reference(self):
        schema = mixed_schema(3, 2)
        cb = build_codebook(schema, dim=64, bins=8, seed=11)
        threshold = default_threshold(schema)
        for row in random_rows(schema, 25, seed=1):
            got = encode_binary(row, cb, schema, threshold).binary.to_bits().tolist()
            want = ref_encode_binary(
                row, cb, schema, threshold,
                level_for=lambda j, raw: lookup_level(j, raw, cb, schema),
            )
            assert got == want

    def test_encode_binary_keeps_sum_and_label(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        row = random_rows(schema, 1, 0)[0]
        rec = encode_binary(row, cb, schema, default_threshold(schema), label=3)
        assert rec.label == 3
        assert rec.binary == binarize(rec.sum, default_threshold(schema))


class TestEncodedDataset:
    def test_from_records_and_access(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        t = default_threshold(schema)
        recs = [encode_binary(r, cb, schema, t, label=i % 2)
                for i, r in enumerate(random_rows(schema, 5, 0))]
        data = EncodedDataset.from_records(recs)
        assert len(data) == 5
        assert data.labels.tolist() == [0, 1, 0, 1, 0]
        for i, rec in enumerate(recs):
            assert data.record(i) == rec.binary
            assert np.array_equal(data.unpack(i, i + 1)[0], rec.binary.to_bits())

    def test_label_length_mismatch(self):
        with pytest.raises(ValueError):
            EncodedDataset(np.zeros((3, 2), dtype=np.uint8), 16, labels=np.zeros(2))

    def test_requires_uint8(self):
        with pytest.raises(ValueError):
            EncodedDataset(np.zeros((3, 2), dtype=np.int32), 16)


class TestBatchPath:
    @pytest.mark.parametrize("transform", ["none", "log1p"])
    def test_batch_equals_scalar(self, transform):
        schema = mixed_schema(5, 3, transform=transform)
        cb = build_codebook(schema, dim=333, bins=7, seed=21)
        t = default_threshold(schema)
        rows = random_rows(schema, 40, seed=2)
        data = encode_dataset(rows, cb, schema, t)
        for i, row in enumerate(rows):
            assert data.record(i) == encode_binary(row, cb, schema, t).binary

    def test_batch_boundaries_do_not_matter(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        t = default_threshold(schema)
        rows = random_rows(schema, 57, seed=4)
        reference = encode_dataset(rows, cb, schema, t, batch_size=2048)
        for bs in (1, 7, 56, 57, 58):
            other = encode_dataset(rows, cb, schema, t, batch_size=bs)
            assert np.array_equal(other.packed, reference.packed)

    def test_worker_count_does_not_matter(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        t = default_threshold(schema)
        rows = random_rows(schema, 64, seed=5)
        a = encode_dataset(rows, cb, schema, t, jobs=1, batch_size=8)
        b = encode_dataset(rows, cb, schema, t, jobs=4, batch_size=8)
        assert np.array_equal(a.packed, b.packed)

    def test_wide_schema_uses_exact_sums(self):
        # >=250 features forces the uint16 accumulator; coordinate sums
        # past 255 must not wrap
        feats = [cont(f"c{i}", 0.0, 10.0) for i in range(300)]
        schema = FeatureSchema(features=feats, class_names=["x"])
        cb = build_codebook(schema, dim=64, bins=4, seed=8)
        t = default_threshold(schema)
        rows = [tuple(str(v % 10) for v in range(300)) for _ in range(3)]
        data = encode_dataset(rows, cb, schema, t)
        for i, row in enumerate(rows):
            assert data.record(i) == encode_binary(row, cb, schema, t).binary

    def test_arity_checked_on_every_row(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        rows = random_rows(schema, 5, seed=6)
        rows[3] = rows[3][:-1]
        with pytest.raises(ValueError, match="record 3"):
            encode_dataset(rows, cb, schema, default_threshold(schema))

    def test_non_numeric_value_names_column(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        rows = [list(r) for r in random_rows(schema, 3, seed=7)]
        rows[1][2] = "not-a-number"
        with pytest.raises(ValueError, match="c2"):
            encode_dataset(rows, cb, schema, default_threshold(schema))

    def test_non_finite_value_names_column(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        rows = [list(r) for r in random_rows(schema, 3, seed=7)]
        rows[2][0] = "inf"
        with pytest.raises(ValueError, match="c0"):
            encode_dataset(rows, cb, schema, default_threshold(schema))

    def test_empty_input_rejected(self):
        schema = mixed_schema()
        cb = build_codebook(schema, dim=128, bins=8, seed=3)
        with pytest.raises(ValueError):
            encode_dataset([], cb, schema, 3.0)
