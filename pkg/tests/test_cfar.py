import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radkit.cfar import CfarConfig, ca_alpha, cfar_2d

from oracles import cfar_reference

SMALL = CfarConfig(train=(3, 2), guard=(1, 1), alpha=2.0)


def test_constant_map_no_detections():
    rd = np.ones((32, 16))
    assert not cfar_2d(rd, SMALL).any()


def test_single_spike_detected_exactly():
    rd = np.ones((64, 32))
    rd[20, 7] = 100.0
    cfg = CfarConfig(variant="ca", train=(4, 4), guard=(1, 1), alpha=5.0)
    mask = cfar_2d(rd, cfg)
    ref = cfar_reference(rd, "ca", (4, 4), (1, 1), 5.0)
    np.testing.assert_array_equal(mask, ref)
    assert mask[20, 7]
    assert mask.sum() == 1


def test_ca_alpha_values():
    assert ca_alpha(0.5, 1) == pytest.approx(1.0)
    assert ca_alpha(1e-2, 16) == pytest.approx(16 * (10 ** (2 / 16) - 1))
    assert ca_alpha(1e-2, 16) == pytest.approx(5.3363, abs=1e-4)
    assert ca_alpha(0.999999, 8) < 1e-5  # pfa -> 1 gives alpha -> 0


def test_ca_alpha_domain():
    with pytest.raises(ValueError):
        ca_alpha(0.0, 4)
    with pytest.raises(ValueError):
        ca_alpha(1.0, 4)
    with pytest.raises(ValueError):
        ca_alpha(0.5, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        CfarConfig(variant="go")
    with pytest.raises(ValueError):
        CfarConfig(train=(0, 1))
    with pytest.raises(ValueError):
        CfarConfig(os_rank=0.0)
    with pytest.raises(ValueError):
        CfarConfig(alpha=-1.0)


def test_n_train_full():
    cfg = CfarConfig(train=(8, 4), guard=(2, 2))
    assert cfg.n_train_full == 21 * 13 - 5 * 5


@pytest.mark.parametrize("variant", ["ca", "os"])
def test_matches_reference_on_random_maps(variant):
    rng = np.random.default_rng(42)
    for _ in range(10):
        rd = rng.exponential(1.0, size=(32, 16))
        cfg = CfarConfig(variant=variant, train=(3, 2), guard=(1, 1),
                         alpha=3.0, os_rank=0.75)
        mask = cfar_2d(rd, cfg)
        ref = cfar_reference(rd, variant, (3, 2), (1, 1), 3.0, 0.75)
        np.testing.assert_array_equal(mask, ref)


def test_scale_invariance():
    rng = np.random.default_rng(1)
    rd = rng.exponential(1.0, size=(64, 32))
    cfg = CfarConfig(train=(4, 2), guard=(1, 1), alpha=4.0)
    base = cfar_2d(rd, cfg)
    np.testing.assert_array_equal(cfar_2d(rd * 1e6, cfg), base)
    np.testing.assert_array_equal(cfar_2d(rd * 1e-6, cfg), base)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.5, max_value=3.0),
       st.floats(min_value=3.0, max_value=10.0),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_monotone_in_alpha(a1, a2, seed):
    rng = np.random.default_rng(seed)
    rd = rng.exponential(1.0, size=(24, 12))
    lo = cfar_2d(rd, CfarConfig(train=(2, 2), guard=(1, 1), alpha=min(a1, a2)))
    hi = cfar_2d(rd, CfarConfig(train=(2, 2), guard=(1, 1), alpha=max(a1, a2)))
    assert np.all(lo[hi])  # detections at the higher alpha are a subset


def test_os_rank_extremes_match_reference():
    rng = np.random.default_rng(3)
    rd = rng.exponential(1.0, size=(24, 12))
    for rank in (0.05, 1.0):
        cfg = CfarConfig(variant="os", train=(2, 2), guard=(0, 0),
                         alpha=2.0, os_rank=rank)
        ref = cfar_reference(rd, "os", (2, 2), (0, 0), 2.0, rank)
        np.testing.assert_array_equal(cfar_2d(rd, cfg), ref)


def test_monte_carlo_pfa_calibration():
    # square-law detected complex-Gaussian noise: exponential power cells,
    # the regime ca_alpha is exact for
    rng = np.random.default_rng(2024)
    cfg = CfarConfig(variant="ca", train=(8, 4), guard=(2, 2))
    alpha = ca_alpha(1e-2, cfg.n_train_full)
    cells = 0
    alarms = 0
    while cells < 1_100_000:
        noise = (rng.standard_normal((256, 64)) ** 2
                 + rng.standard_normal((256, 64)) ** 2) / 2.0
        mask = cfar_2d(noise, CfarConfig(variant="ca", train=(8, 4),
                                         guard=(2, 2), alpha=alpha))
        cells += mask.size
        alarms += int(mask.sum())
    pfa = alarms / cells
    assert 0.5e-2 <= pfa <= 2e-2


def test_doppler_wrap_vs_range_clip():
    # a spike at the doppler edge must suppress detections across the seam,
    # while the range border simply sees fewer training cells
    rd = np.ones((32, 16))
    rd[10, 0] = 50.0
    rd[10, 15] = 45.0
    cfg = CfarConfig(train=(2, 2), guard=(1, 1), alpha=3.0)
    mask = cfar_2d(rd, cfg)
    ref = cfar_reference(rd, "ca", (2, 2), (1, 1), 3.0)
    np.testing.assert_array_equal(mask, ref)
