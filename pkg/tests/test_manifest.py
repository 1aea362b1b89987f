from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diacnn.datapipe.manifest import (
    ODIR_CLASSES,
    ODIR_COUNTS,
    Dataset,
    ManifestError,
    Sample,
    binary_task_filter,
    format_manifest,
    load_manifest,
    parse_manifest,
    split_dataset,
    split_sizes,
)

TABLE1 = {"N": 1135, "D": 1131, "G": 207, "C": 211, "A": 171, "H": 94, "M": 177, "O": 944}


def table1_dataset() -> Dataset:
    samples = []
    for c, token in enumerate(ODIR_CLASSES):
        for i in range(TABLE1[token]):
            samples.append(Sample(f"{token}/{i}.jpg", "left" if i % 2 else "right", c))
    return Dataset(samples)


def sizes_oracle(n, ratios):
    """Exact-rational floor + largest remainder (ties to the earlier split)."""
    shares = [Fraction(r).limit_denominator(10**6) * n for r in ratios]
    base = [s.numerator // s.denominator for s in shares]
    rem = sorted(range(3), key=lambda i: (-(shares[i] - base[i]), i))
    for i in rem[: n - sum(base)]:
        base[i] += 1
    return base


def test_three_row_fixture(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("image_path,eye,label\na.jpg,left,N\nb.jpg,right,D\nc.png,left,C\n")
    ds = load_manifest(path)
    assert len(ds) == 3
    assert {k: v for k, v in ds.counts.items() if v} == {"N": 1, "D": 1, "C": 1}
    assert ds.resolve(ds.samples[0]) == str(tmp_path / "a.jpg")


def test_unknown_label_names_row():
    with pytest.raises(ManifestError, match="row 3"):
        parse_manifest("image_path,eye,label\na.jpg,left,N\nb.jpg,left,X\n")


@pytest.mark.parametrize(
    "text,match",
    [
        ("image_path,label\na.jpg,N\n", "missing column 'eye'"),
        ("image_path,eye,label\na,b.jpg,left,N\n", "row 2"),
        ("image_path,eye,label\na.jpg,middle,N\n", "row 2"),
        ("", "empty"),
    ],
)
def test_malformed_manifests(text, match):
    with pytest.raises(ManifestError, match=match):
        parse_manifest(text)


def test_unreadable_file(tmp_path):
    with pytest.raises(ManifestError, match="cannot read"):
        load_manifest(tmp_path / "absent.csv")


def test_table1_counts():
    assert ODIR_COUNTS == TABLE1
    ds = parse_manifest(format_manifest(table1_dataset(), with_split=False))
    assert ds.counts == TABLE1


def test_comma_in_path_rejected_on_write():
    with pytest.raises(ManifestError, match="comma"):
        format_manifest(Dataset([Sample("a,b.jpg", "left", 0)]))


def test_round_trip_with_split():
    ds = split_dataset(table1_dataset(), seed=3)
    again = parse_manifest(format_manifest(ds))
    assert [(s.image_path, s.label, s.split) for s in again.samples] == [(s.image_path, s.label, s.split) for s in ds.samples]


def test_hundred_samples_80_10_10():
    ds = Dataset([Sample(f"{i}.png", "left", 0) for i in range(100)])
    out = split_dataset(ds, (0.8, 0.1, 0.1), seed=0, stratify=False)
    assert [len(out.subset(s)) for s in ("train", "val", "test")] == [80, 10, 10]


def test_split_deterministic():
    a = split_dataset(table1_dataset(), seed=11)
    b = split_dataset(table1_dataset(), seed=11)
    c = split_dataset(table1_dataset(), seed=12)
    assert [s.split for s in a.samples] == [s.split for s in b.samples]
    assert [s.split for s in a.samples] != [s.split for s in c.samples]


def test_stratified_table1_train_counts():
    out = split_dataset(table1_dataset(), (0.8, 0.1, 0.1), seed=0)
    train = out.split_counts("train")
    assert train["N"] == 908
    for token, n in TABLE1.items():
        want = sizes_oracle(n, (0.8, 0.1, 0.1))
        got = [out.split_counts(s)[token] for s in ("train", "val", "test")]
        assert got == want, token


@given(st.integers(0, 500), st.sampled_from([(0.8, 0.1, 0.1), (0.7, 0.15, 0.15), (0.6, 0.2, 0.2), (1 / 3, 1 / 3, 1 / 3), (0.8, 0.0, 0.2)]))
@settings(max_examples=200, deadline=None)
def test_split_sizes_match_oracle(n, ratios):
    got = split_sizes(n, ratios)
    assert sum(got) == n
    assert got == sizes_oracle(n, ratios)
    assert all(abs(g - r * n) < 1 for g, r in zip(got, ratios))


def test_split_is_partition():
    ds = table1_dataset()
    out = split_dataset(ds, seed=5)
    assert sum(len(out.subset(s)) for s in ("train", "val", "test")) == len(ds)
    assert all(s.split in ("train", "val", "test") for s in out.samples)


def test_split_errors():
    ds = Dataset([Sample("a.png", "left", 0), Sample("b.png", "left", 0)])
    with pytest.raises(ValueError, match="fewer than"):
        split_dataset(ds, (0.8, 0.1, 0.1))
    with pytest.raises(ValueError, match="sum"):
        split_dataset(ds, (0.5, 0.1, 0.1))


def test_cataract_vs_normal():
    ds = binary_task_filter(table1_dataset(), {"C"}, {"N"})
    labels = ds.labels()
    assert labels.count(1) == 211 and labels.count(0) == 1135
    assert ds.class_names == ("negative", "positive")


def test_normal_vs_abnormal_and_exclusion():
    ds = table1_dataset()
    abn = binary_task_filter(ds, set("DGCAHMO"), {"N"})
    assert len(abn) == len(ds)
    assert abn.labels().count(0) == 1135
    g = Dataset([Sample("g.png", "left", ODIR_CLASSES.index("G"))])
    assert len(binary_task_filter(g, {"C"}, {"N"})) == 0


def test_overlapping_sets_rejected():
    with pytest.raises(ValueError, match="overlap"):
        binary_task_filter(table1_dataset(), {"C", "N"}, {"N"})
