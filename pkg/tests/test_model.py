"""Centroid training, retraining invariants, prediction, persistence."""

import numpy as np
import pytest

from hdnids.codebook import FeatureSchema, FeatureSpec
from hdnids.dataset import LabelMap
from hdnids.encoding import EncodedDataset
from hdnids.hypervector import AccumulatorVector, Hypervector
from hdnids.model import (
    _RETRAIN_STREAM_TAG,
    ClassModel,
    CorruptModelError,
    Hyperparams,
    load_model,
    predict,
    predict_batch,
    retrain,
    save_model,
    train_initial,
)
from conftest import train_small_model
from reference import ref_retrain_epoch


def packed(bits):
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")


def tiny_label_map(names):
    return LabelMap(raw_to_class={n: i for i, n in enumerate(names)},
                    class_names=list(names))


def tiny_schema(names):
    return FeatureSchema(
        features=[FeatureSpec(name="f", kind="continuous", min=0.0, max=1.0)],
        class_names=list(names),
    )


def toy_clusters(seed=6, n_per=30, dim=64, flip=24, classes=3):
    """Bit clusters around random prototypes; separable but the centroids
    start out wrong on a few samples, so retraining has real work to do."""
    rng = np.random.default_rng(seed)
    protos = (rng.random((classes, dim)) < 0.5).astype(np.uint8)
    rows, labels = [], []
    for c in range(classes):
        for _ in range(n_per):
            bits = protos[c].copy()
            pos = rng.choice(dim, size=flip, replace=False)
            bits[pos] ^= 1
            rows.append(np.packbits(bits, bitorder="little"))
            labels.append(c)
    return EncodedDataset(np.vstack(rows), dim, np.array(labels))


def toy_model(data, classes=3, seed=6, alpha=1.0):
    names = ["a", "b", "c", "d", "e"][:classes]
    return ClassModel(
        representatives=train_initial(data, classes),
        codebook=None,
        schema=tiny_schema(names),
        label_map=tiny_label_map(names),
        hyperparams=Hyperparams(dim=data.dim, alpha=alpha, seed=seed),
    )


class TestTrainInitial:
    def test_sums_exact(self):
        rows = [packed([1, 1, 0, 0]), packed([1, 0, 1, 0]), packed([0, 0, 1, 1])]
        data = EncodedDataset(np.vstack(rows), 4, np.array([0, 0, 1]))
        reps = train_initial(data, 2)
        assert reps[0].values.tolist() == [2, 1, 1, 0]
        assert reps[1].values.tolist() == [0, 0, 1, 1]

    def test_empty_class_is_zero_vector(self, caplog):
        data = EncodedDataset(np.vstack([packed([1, 0])]), 2, np.array([0]))
        with caplog.at_level("WARNING"):
            reps = train_initial(data, 3)
        assert not reps[1].values.any() and not reps[2].values.any()
        assert "no training samples" in caplog.text

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_initial([], 2)

    def test_labels_required(self):
        data = EncodedDataset(np.vstack([packed([1, 0])]), 2)
        with pytest.raises(ValueError, match="labels"):
            train_initial(data, 2)

    def test_label_out_of_range(self):
        data = EncodedDataset(np.vstack([packed([1, 0])]), 2, np.array([5]))
        with pytest.raises(ValueError, match="5"):
            train_initial(data, 2)


class TestPredict:
    def test_separable_clusters_classified(self):
        data = toy_clusters(flip=8)
        model = toy_model(data)
        correct = sum(
            predict(data.record(i), model).class_index == data.labels[i]
            for i in range(len(data))
        )
        assert correct == len(data)

    def test_tie_breaks_to_lowest_index(self):
        rep = AccumulatorVector(np.array([1.0, 1.0, 0.0, 0.0]))
        model = ClassModel(
            representatives=[rep.copy(), rep.copy()],
            codebook=None, schema=tiny_schema(["a", "b"]),
            label_map=tiny_label_map(["a", "b"]),
            hyperparams=Hyperparams(dim=4),
        )
        p = predict(Hypervector.from_bits([1, 1, 0, 0]), model)
        assert p.similarities[0] == p.similarities[1]
        assert p.class_index == 0

    def test_degenerate_flag(self):
        data = toy_clusters()
        model = toy_model(data)
        p = predict(Hypervector.zeros(data.dim), model)
        assert p.degenerate and p.class_index == 0
        assert all(s == 0.0 for s in p.similarities)

    def test_dim_mismatch(self):
        model = toy_model(toy_clusters())
        with pytest.raises(ValueError):
            predict(Hypervector.zeros(32), model)

    def test_batch_matches_scalar(self):
        data = toy_clusters()
        model = toy_model(data)
        preds, sims = predict_batch(model, data)
        for i in range(len(data)):
            p = predict(data.record(i), model)
            assert preds[i] == p.class_index
            assert sims[i] == pytest.approx(p.similarities, abs=1e-12)

    def test_batch_worker_count_invariant(self):
        data = toy_clusters(n_per=200)
        model = toy_model(data)
        p1, s1 = predict_batch(model, data, jobs=1)
        p4, s4 = predict_batch(model, data, jobs=4)
        assert np.array_equal(p1, p4)
        assert np.array_equal(s1, s4)


class TestRetrain:
    def test_parameter_validation(self):
        data = toy_clusters()
        model = toy_model(data)
        with pytest.raises(ValueError):
            retrain(model, data, alpha=0.0, iterations=5)
        with pytest.raises(ValueError):
            retrain(model, data, alpha=1.0, iterations=0)

    def test_representative_mass_conserved(self):
        data = toy_clusters()
        model = toy_model(data)
        before = model.rep_matrix().sum(axis=0)
        out, trace = retrain(model, data, alpha=1.0, iterations=10)
        after = out.rep_matrix().sum(axis=0)
        assert np.array_equal(before, after)
        assert any(t < 1.0 for t in trace)  # updates actually happened

    def test_does_not_mutate_input_model(self):
        data = toy_clusters()
        model = toy_model(data)
        snapshot = model.rep_matrix().copy()
        retrain(model, data, alpha=1.0, iterations=5)
        assert np.array_equal(model.rep_matrix(), snapshot)

    def test_zero_update_epoch_is_fixed_point(self):
        data = toy_clusters(flip=8)  # centroids already perfect
        model = toy_model(data)
        out, trace = retrain(model, data, alpha=1.0, iterations=50)
        assert trace == [1.0]  # early stop after one clean pass
        assert np.array_equal(out.rep_matrix(), model.rep_matrix())

    def test_separable_toy_reaches_full_accuracy(self):
        data = toy_clusters()  # starts at ~92%
        model = toy_model(data)
        preds, _ = predict_batch(model, data)
        assert (preds == data.labels).mean() < 1.0
        out, trace = retrain(model, data, alpha=1.0, iterations=50)
        assert len(trace) < 50
        assert trace[-1] == 1.0
        preds, _ = predict_batch(out, data)
        assert (preds == data.labels).mean() == 1.0

    def test_trace_is_visit_time_accuracy(self):
        data = toy_clusters()
        model = toy_model(data)
        _, trace = retrain(model, data, alpha=1.0, iterations=3)
        assert len(trace) == 3
        assert all(0.0 <= t <= 1.0 for t in trace)

    @pytest.mark.parametrize("alpha", [1.0, 0.5])
    def test_chunked_loop_equals_naive_sequential(self, alpha):
        data = toy_clusters()
        model = toy_model(data, alpha=alpha)
        epochs = 3
        got, _ = retrain(model, data, alpha=alpha, iterations=epochs)

        # replay the identical visit order through the pure-Python loop
        rng = np.random.Generator(
            np.random.PCG64(
                np.random.SeedSequence([model.hyperparams.seed, _RETRAIN_STREAM_TAG])
            )
        )
        order = rng.permutation(len(data))
        samples = [data.unpack(i, i + 1)[0].astype(int).tolist() for i in order]
        labels = [int(data.labels[i]) for i in order]
        reps = [r.values.tolist() for r in model.representatives]
        for _ in range(epochs):
            reps, updates, _ = ref_retrain_epoch(reps, samples, labels, alpha)
            if updates == 0:
                break
        assert np.array_equal(got.rep_matrix(), np.array(reps))

    def test_retrain_deterministic(self):
        data = toy_clusters()
        model = toy_model(data)
        a, trace_a = retrain(model, data, alpha=1.0, iterations=5)
        b, trace_b = retrain(model, data, alpha=1.0, iterations=5)
        assert trace_a == trace_b
        assert np.array_equal(a.rep_matrix(), b.rep_matrix())


class TestPersistence:
    def build(self, tmp_path, synth_lines):
        src = tmp_path / "train.txt"
        src.write_text("\n".join(synth_lines) + "\n")
        model, data, records = train_small_model(src, dim=512, iterations=5)
        return model, data, records

    def test_roundtrip_exact(self, tmp_path, synth_lines):
        model, _, _ = self.build(tmp_path, synth_lines)
        path = tmp_path / "m.hdm"
        save_model(model, path)
        back = load_model(path)
        assert back.hyperparams == model.hyperparams
        assert back.schema == model.schema
        assert back.label_map.to_dict() == model.label_map.to_dict()
        assert np.array_equal(back.rep_matrix(), model.rep_matrix())
        assert back.codebook.base == model.codebook.base
        assert back.codebook.levels == model.codebook.levels
        assert back.codebook.categories == model.codebook.categories
        assert back.codebook.oov == model.codebook.oov

    def test_save_is_deterministic(self, tmp_path, synth_lines):
        model, _, _ = self.build(tmp_path, synth_lines)
        save_model(model, tmp_path / "a.hdm")
        save_model(model, tmp_path / "b.hdm")
        assert (tmp_path / "a.hdm").read_bytes() == (tmp_path / "b.hdm").read_bytes()

    def test_no_temp_files_left(self, tmp_path, synth_lines):
        model, _, _ = self.build(tmp_path, synth_lines)
        save_model(model, tmp_path / "m.hdm")
        leftovers = [p.name for p in tmp_path.iterdir() if p.suffix == ".tmp"]
        assert leftovers == []

    def test_missing_directory_is_oserror(self, tmp_path, synth_lines):
        model, _, _ = self.build(tmp_path, synth_lines)
        with pytest.raises(OSError):
            save_model(model, tmp_path / "no" / "such" / "dir" / "m.hdm")

    @pytest.mark.parametrize("mangle", [
        lambda b: b[: len(b) // 2],                          # truncated
        lambda b: b"XXXXXXXX" + b[8:],                       # bad magic
        lambda b: b[:50] + bytes([b[50] ^ 0xFF]) + b[51:],   # flipped byte
        lambda b: b + b"extra",                              # appended garbage
        lambda b: b[:10],                                    # far too short
    ])
    def test_corruption_detected(self, tmp_path, synth_lines, mangle):
        model, _, _ = self.build(tmp_path, synth_lines)
        path = tmp_path / "m.hdm"
        save_model(model, path)
        (tmp_path / "bad.hdm").write_bytes(mangle(path.read_bytes()))
        with pytest.raises(CorruptModelError):
            load_model(tmp_path / "bad.hdm")

    def test_loaded_model_predicts_identically(self, tmp_path, synth_lines):
        model, data, _ = self.build(tmp_path, synth_lines)
        path = tmp_path / "m.hdm"
        save_model(model, path)
        back = load_model(path)
        p1, s1 = predict_batch(model, data)
        p2, s2 = predict_batch(back, data)
        assert np.array_equal(p1, p2)
        assert np.array_equal(s1, s2)
