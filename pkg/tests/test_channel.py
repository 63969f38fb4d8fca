import numpy as np
import pytest

from mmwave_ia.channel import LOS, NLOS, ChannelParams, mean_path_loss, preset, reference_path_loss, sample_path_loss
from mmwave_ia.errors import ConfigError


def test_reference_loss_at_28ghz():
    assert mean_path_loss(1.0, LOS) == pytest.approx(61.38, abs=0.05)
    assert reference_path_loss(LOS) == mean_path_loss(1.0, LOS)


@pytest.mark.parametrize("params, slope", [(LOS, 19.0), (NLOS, 45.0)])
def test_one_decade_adds_ten_n(params, slope):
    assert mean_path_loss(10.0, params) - mean_path_loss(1.0, params) == pytest.approx(slope)


def test_monotone_and_vectorised():
    d = np.linspace(1, 40, 500)
    pl = mean_path_loss(d, NLOS)
    assert pl.shape == d.shape and np.all(np.diff(pl) > 0)
    assert isinstance(mean_path_loss(3.0, LOS), float)


def test_below_reference_distance_rejected():
    with pytest.raises(ValueError):
        mean_path_loss(0.5, LOS)


def test_zero_shadowing_is_deterministic():
    d = np.linspace(1, 30, 100)
    np.testing.assert_array_equal(sample_path_loss(d, ChannelParams(2.0, 0.0), np.random.default_rng(0)), mean_path_loss(d, ChannelParams(2.0, 0.0)))


@pytest.mark.parametrize("params, mean_tol, std_tol", [(LOS, 0.01, 0.02), (NLOS, 0.05, 0.1)])
def test_shadowing_statistics(params, mean_tol, std_tol):
    d = np.full(1_000_000, 7.0)
    x = sample_path_loss(d, params, np.random.default_rng(1)) - mean_path_loss(7.0, params)
    assert abs(x.mean()) < mean_tol
    assert abs(x.std() - params.shadow_std) < std_tol


def test_reproducible_sequence():
    a = sample_path_loss(np.ones(10) * 5, NLOS, np.random.default_rng(3))
    b = sample_path_loss(np.ones(10) * 5, NLOS, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_presets_and_validation():
    assert (LOS.ple, LOS.shadow_std) == (1.9, 1.1)
    assert (NLOS.ple, NLOS.shadow_std) == (4.5, 10.0)
    assert preset("NLoS") == NLOS
    assert preset("los", 60e9).carrier_frequency == 60e9
    with pytest.raises(ConfigError):
        preset("indoor")
    for bad in (dict(ple=0, shadow_std=1), dict(ple=2, shadow_std=-1), dict(ple=2, shadow_std=1, ref_distance=0)):
        with pytest.raises(ConfigError):
            ChannelParams(**bad)
