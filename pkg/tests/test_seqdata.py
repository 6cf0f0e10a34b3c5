import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krpool.descriptors import PreimageDescriptor, SubspaceDescriptor
from krpool.errors import DegenerateSequence, FormatError, IoError, ParamError
from krpool.kernel import bandwidth, gram
from krpool.seqdata import (
    Dynamics,
    Sequence,
    SynthSpec,
    descriptor_bytes,
    descriptor_from_bytes,
    load_manifest,
    load_sequence,
    read_descriptor,
    spiral_angles,
    stratified_split,
    synth_dataset,
    write_descriptor,
    write_sequence,
)


def test_load_sequence_parses_rows(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("1,2\n3,4\n5,6")
    seq = load_sequence(f)
    assert (seq.n, seq.d) == (3, 2)
    np.testing.assert_array_equal(seq.frames, [[1, 2], [3, 4], [5, 6]])


@pytest.mark.parametrize(
    "text,err",
    [("1,2\n3", FormatError), ("1,x\n3,4", FormatError), ("0.5\n", DegenerateSequence),
     ("1,nan\n2,3", FormatError)],
)
def test_load_sequence_errors(tmp_path, text, err):
    f = tmp_path / "s.csv"
    f.write_text(text)
    with pytest.raises(err):
        load_sequence(f)


def test_load_sequence_missing(tmp_path):
    with pytest.raises(IoError):
        load_sequence(tmp_path / "nope.csv")


def _write(tmp_path, name, rows):
    write_sequence(np.array(rows, dtype=float), tmp_path / name)


def test_manifest_relabels_in_first_appearance_order(tmp_path):
    _write(tmp_path, "a.csv", [[0.0], [1.0]])
    _write(tmp_path, "b.csv", [[1.0], [0.0]])
    (tmp_path / "m.csv").write_text("b.csv,b\na.csv,a\n")
    ds = load_manifest(tmp_path / "m.csv")
    assert ds.class_count == 2
    assert ds.label_names == ("b", "a")
    assert list(ds.labels) == [0, 1]


def test_manifest_single_class_rejected(tmp_path):
    for i in range(3):
        _write(tmp_path, f"{i}.csv", [[0.0], [float(i + 1)]])
    (tmp_path / "m.csv").write_text("0.csv,x\n1.csv,x\n2.csv,x\n")
    with pytest.raises(FormatError):
        load_manifest(tmp_path / "m.csv")


def test_manifest_missing_file_named(tmp_path):
    _write(tmp_path, "a.csv", [[0.0], [1.0]])
    (tmp_path / "m.csv").write_text("a.csv,a\nghost.csv,b\n")
    with pytest.raises(IoError, match="ghost.csv"):
        load_manifest(tmp_path / "m.csv")


def test_manifest_empty(tmp_path):
    (tmp_path / "m.csv").write_text("\n")
    with pytest.raises(FormatError):
        load_manifest(tmp_path / "m.csv")


def test_sequence_round_trip_bit_exact(tmp_path, rng):
    X = rng.standard_normal((7, 3)) * 1e3
    write_sequence(X, tmp_path / "x.csv")
    np.testing.assert_array_equal(load_sequence(tmp_path / "x.csv").frames, X)


# ----------------------------------------------------------------- synth


def _same(a, b):
    return all(
        np.array_equal(sa.frames, sb.frames) and ya == yb
        for (sa, ya), (sb, yb) in zip(a.items, b.items)
    )


def test_synth_deterministic():
    spec = SynthSpec(2, 5, 20, 2, 0.0)
    assert _same(synth_dataset(spec, 7), synth_dataset(spec, 7))
    noisy = SynthSpec(2, 5, 20, 2, 0.3, "frequency-coded")
    assert _same(synth_dataset(noisy, 7), synth_dataset(noisy, 7))
    assert not _same(synth_dataset(noisy, 7), synth_dataset(noisy, 8))


def test_synth_monotone_line_constant_steps():
    ds = synth_dataset(SynthSpec(2, 3, 15, 4, 0.0, Dynamics.MONOTONE_LINE), 1)
    for seq in ds.sequences:
        steps = np.diff(seq.frames, axis=0)
        np.testing.assert_allclose(steps, np.broadcast_to(steps[0], steps.shape), atol=1e-12)
        assert np.linalg.norm(steps[0]) > 0


def test_synth_class_counts():
    ds = synth_dataset(SynthSpec(3, 4, 10, 2, 0.1), 0)
    assert sorted(np.bincount(ds.labels)) == [4, 4, 4]


def test_spiral_angle_strictly_increasing():
    spec = SynthSpec(3, 2, 25, 3, 0.0, "spiral")
    for c in range(3):
        assert np.all(np.diff(spiral_angles(spec, 5, c, 1)) > 0)


def test_synth_generation_order_independent():
    spec = SynthSpec(3, 4, 12, 2, 0.2, "spiral")
    full = synth_dataset(spec, 3)
    from krpool.seqdata import synth_sequence

    np.testing.assert_array_equal(synth_sequence(spec, 3, 2, 1).frames, full.items[9][0].frames)


@pytest.mark.parametrize(
    "kw", [dict(noise=-1.0), dict(classes=0), dict(n=1), dict(classes=1)]
)
def test_synth_spec_validation(kw):
    base = dict(classes=2, sequences_per_class=2, n=5, d=2, noise=0.0)
    base.update(kw)
    with pytest.raises(ParamError):
        SynthSpec(**base)


def test_stratified_split_halves_each_class():
    y = np.repeat([0, 1, 2], 20)
    tr, te = stratified_split(y, 0.5, 7)
    assert len(set(tr) & set(te)) == 0
    assert list(np.bincount(y[tr])) == [10, 10, 10]
    tr2, _ = stratified_split(y, 0.5, 7)
    np.testing.assert_array_equal(tr, tr2)


def test_sequence_requires_two_frames():
    with pytest.raises(DegenerateSequence):
        Sequence([[1.0, 2.0]])


# ----------------------------------------------------------- descriptors


def test_preimage_descriptor_round_trip(tmp_path):
    d = PreimageDescriptor(np.array([1.5, -2.0]), "ibkrp", 0.01, 1.0, 1.0, 0.7, 12, 3.25)
    write_descriptor(d, tmp_path / "d.krpd")
    back = read_descriptor(tmp_path / "d.krpd")
    np.testing.assert_array_equal(back.z, [1.5, -2.0])
    assert (back.method, back.iterations, back.objective, back.sigma) == ("ibkrp", 12, 3.25, 0.7)


def test_subspace_descriptor_round_trip(tmp_path, rng):
    from krpool.krpfs import kpca_oracle

    X = rng.standard_normal((4, 3))
    K = gram(X, bandwidth(X), 1e-8)
    P, _ = kpca_oracle(K, 2)
    d = SubspaceDescriptor(P.A, X, K.sigma, 1e-8, -1.0, 5)
    write_descriptor(d, tmp_path / "s.krpd")
    back = read_descriptor(tmp_path / "s.krpd")
    np.testing.assert_array_equal(back.A, d.A)
    np.testing.assert_array_equal(back.frames, X)
    stored = d.A.T @ K.values @ d.A
    K2 = gram(back.frames, back.sigma, back.jitter)
    np.testing.assert_allclose(back.A.T @ K2.values @ back.A, stored, atol=1e-12)
    np.testing.assert_allclose(stored, np.eye(2), atol=1e-10)


def test_descriptor_bad_magic(tmp_path):
    buf = bytearray(descriptor_bytes(PreimageDescriptor(np.ones(2), "avg")))
    buf[:4] = b"XXXX"
    (tmp_path / "bad.krpd").write_bytes(bytes(buf))
    with pytest.raises(FormatError):
        read_descriptor(tmp_path / "bad.krpd")


def test_descriptor_version_mismatch():
    buf = bytearray(descriptor_bytes(PreimageDescriptor(np.ones(2), "avg")))
    buf[4] = 99
    with pytest.raises(FormatError, match="version"):
        descriptor_from_bytes(bytes(buf))


def test_descriptor_truncated():
    buf = descriptor_bytes(PreimageDescriptor(np.ones(3), "avg"))
    with pytest.raises(FormatError):
        descriptor_from_bytes(buf[:-4])


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=1, max_size=6))
def test_preimage_round_trip_property(values):
    d = PreimageDescriptor(np.array(values), "rp")
    back = descriptor_from_bytes(descriptor_bytes(d))
    np.testing.assert_array_equal(back.z, d.z)
