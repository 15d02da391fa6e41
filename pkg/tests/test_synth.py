import numpy as np
import pytest

from fundusgate.bayes import ClassLabel
from fundusgate.image import green_plane
from fundusgate.manifest import read_manifest
from fundusgate.netpbm import load_image
from fundusgate.rng import SplitMix64
from fundusgate.synth import LesionKind, Severity, SynthSpec, corpus_specs, generate, generate_corpus

from oracles import splitmix64_scalar


# ---------------------------------------------------------------------- rng


def test_splitmix64_known_first_output():
    assert SplitMix64(0).next_int() == 0xE220A8397B1DCDAF


@pytest.mark.parametrize("seed", [0, 1, 42, 2**64 - 1, 0x9E3779B97F4A7C15])
def test_splitmix64_matches_scalar_recurrence(seed):
    rng = SplitMix64(seed)
    got = [int(v) for v in rng.next_u64(5)] + [int(v) for v in rng.next_u64(3)]
    assert got == splitmix64_scalar(seed, 8)


def test_uniform_and_normal_ranges():
    rng = SplitMix64(9)
    u = rng.uniform(10_000)
    assert u.min() >= 0 and u.max() < 1 and abs(u.mean() - 0.5) < 0.02
    z = SplitMix64(9).normal(10_000)
    assert abs(z.mean()) < 0.05 and abs(z.std() - 1) < 0.05
    assert all(3 <= SplitMix64(s).integer(3, 7) < 7 for s in range(50))


# -------------------------------------------------------------------- synth


def test_same_spec_same_bytes():
    spec = SynthSpec(seed=123, width=128, height=96, severity=Severity.LESIONED, lesion_count=1)
    a, ta = generate(spec)
    b, tb = generate(spec)
    assert a.tobytes() == b.tobytes()
    assert all(np.array_equal(x, y) for x, y in zip(ta.lesion_masks, tb.lesion_masks))


def test_different_seeds_differ():
    a, _ = generate(SynthSpec(seed=1, width=96, height=96))
    b, _ = generate(SynthSpec(seed=2, width=96, height=96))
    assert a.tobytes() != b.tobytes()


def test_normal_has_no_lesions():
    rgb, truth = generate(SynthSpec(seed=3, width=128, height=128))
    assert truth.lesion_masks == [] and truth.class_label is ClassLabel.PROCESS_FURTHER
    assert (rgb[~truth.fov] == 0).all()


def test_spec_invariants():
    with pytest.raises(ValueError):
        SynthSpec(seed=1, severity=Severity.NORMAL, lesion_count=2)
    with pytest.raises(ValueError):
        SynthSpec(seed=1, severity=Severity.LESIONED, lesion_count=0)
    with pytest.raises(ValueError):
        SynthSpec(seed=1, width=63)
    with pytest.raises(ValueError):
        SynthSpec(seed=1, severity=Severity.LESIONED, lesion_count=1, lesion_depth=59)


@pytest.mark.parametrize("seed", range(8))
def test_dark_blob_depth_against_local_background(seed):
    spec = SynthSpec(seed=seed, severity=Severity.LESIONED, lesion_count=2)
    rgb, truth = generate(spec)
    g = green_plane(rgb).astype(int)
    for (y, x), mask in zip(truth.lesion_centers, truth.lesion_masks):
        window = g[y - 15 : y + 16, x - 15 : x + 16]
        far = np.hypot(*np.mgrid[-15:16, -15:16]) > 10
        background = np.median(window[far])
        assert background - g[y, x] >= 60
        assert mask[y, x]
        assert mask.sum() > 20
        # half-peak mask lies inside the field of view
        assert truth.fov[mask].all()


def test_lesion_radius_in_range():
    rgb, truth = generate(SynthSpec(seed=4, severity=Severity.LESIONED, lesion_count=3))
    for mask in truth.lesion_masks:
        r = np.sqrt(mask.sum() / np.pi)
        assert 3 <= r <= 8


def test_bright_blob_raises_green():
    rgb, truth = generate(SynthSpec(seed=6, severity=Severity.LESIONED, lesion_count=1, lesion_kind=LesionKind.BRIGHT_BLOB))
    g = green_plane(rgb).astype(int)
    y, x = truth.lesion_centers[0]
    assert g[y, x] - np.median(g[y - 15 : y + 16, x - 25 : x - 15]) >= 40


def test_severe_images_are_patchy_over_the_field():
    rgb, truth = generate(SynthSpec(seed=8, severity=Severity.SEVERELY_ABNORMAL, lesion_count=4))
    normal, ntruth = generate(SynthSpec(seed=8))
    g, n = green_plane(rgb).astype(float), green_plane(normal).astype(float)
    fov = truth.fov & ntruth.fov
    # the patch field is the only difference besides the dark blobs
    dev = np.abs(g - n)
    lesions = np.zeros_like(fov)
    for m in truth.lesion_masks:
        lesions |= m
    assert (dev[fov & ~lesions] > 15).mean() >= 0.30
    assert truth.class_label is ClassLabel.ABNORMAL


def test_corpus_on_disk(tmp_path):
    path = generate_corpus(tmp_path / "a", seed=7, normal=3, abnormal=3, lesioned=1, width=96, height=96)
    manifest = read_manifest(path)
    assert len(manifest) == 7
    assert [r.label for r in manifest] == ["process_further"] * 3 + ["abnormal"] * 3 + ["process_further"]
    for row in manifest:
        img = load_image(manifest.resolve(row.image))
        assert img.shape == (96, 96, 3)
        assert load_image(manifest.resolve(row.vessels)).shape == (96, 96)
        assert load_image(manifest.resolve(row.lesions)).shape == (96, 96)
    again = generate_corpus(tmp_path / "b", seed=7, normal=3, abnormal=3, lesioned=1, width=96, height=96)
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (again.parent / f.name).read_bytes()


def test_balanced_corpus_specs():
    specs = corpus_specs(7, normal=17, abnormal=17)
    assert len(specs) == 34
    assert sum(s.severity is Severity.SEVERELY_ABNORMAL for s in specs) == 17
    assert len({s.seed for s in specs}) == 34
