import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfb.atlas import (
    atlas_equivalence,
    atlas_to_bundle,
    bundle_to_atlas,
    certify,
    check_w_atlas,
    demo_atlases,
    demo_samples,
    fiber_classes,
    punctured_plane_atlas,
    punctured_plane_samples,
)
from mfb.errors import AtlasInconsistent, NonHausdorffQuotient
from mfb.harness.scenarios import builtin
from mfb.harness.suites import atlas_round_trip

ATLASES = demo_atlases()


def samples(seed=0):
    return demo_samples(np.random.default_rng(seed))


@pytest.mark.parametrize("name,want", [
    ("single", (True, True, True)),
    ("consistent", (True, True, True)),
    ("wa_only", (True, True, False)),
    ("mixing", (True, False, False)),
])
def test_verdict_triple(name, want):
    pts, _ = samples()
    v = check_w_atlas(ATLASES[name], pts)
    assert tuple(v[c] for c in ("W", "a", "b")) == want
    for c, ok in zip(("W", "a", "b"), want):
        assert (v.witnesses[c] is None) == ok


def test_certify_sets_flags():
    pts, _ = samples()
    a = certify(ATLASES["wa_only"], pts)
    assert a.is_w_atlas and a.is_wa_atlas and not a.is_wb_atlas


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_fiber_classes_count(seed):
    pts, expected = samples(seed)
    labels = fiber_classes(ATLASES["consistent"], pts)
    assert len(set(labels)) == expected
    # samples were generated four per fiber
    assert all(len(set(labels[i:i + 4])) == 1 for i in range(0, len(pts), 4))


def test_atlas_to_bundle_fibers_and_detectors():
    pts, expected = samples()
    b = atlas_to_bundle(ATLASES["consistent"], pts)
    assert len(set(b.fiber_labels)) == expected
    with pytest.raises(AtlasInconsistent):
        atlas_to_bundle(ATLASES["inconsistent"], pts)
    with pytest.raises(NonHausdorffQuotient) as err:
        atlas_to_bundle(punctured_plane_atlas(), punctured_plane_samples(), multi=False)
    assert err.value.witness is not None


def test_equivalence():
    pts, _ = samples()
    assert atlas_equivalence(ATLASES["single"], ATLASES["consistent"], pts).equivalent
    assert not atlas_equivalence(ATLASES["single"], ATLASES["mixing"], pts).equivalent


def test_bundle_atlas_round_trip_twisted():
    s = builtin("twisted_phi")
    pts = s.samples(np.random.default_rng(2), 3)
    verdict, dist = atlas_round_trip(s.bundle, pts, per_axis=3)
    assert all(verdict.passed.values())
    assert dist < 1e-9


def test_bundle_to_atlas_chart_per_piece():
    s = builtin("warped_kk")
    atlas = bundle_to_atlas(s.bundle)
    assert len(atlas.charts) == len(s.bundle.pieces)
    x = s.samples(np.random.default_rng(0), 1)[0]
    c = atlas.chart_at(x)
    th = np.asarray(c.phi(x))
    assert np.allclose(np.asarray(c.phi_inv(th[:4], th[4:5], th[5:])), x, atol=1e-12)
