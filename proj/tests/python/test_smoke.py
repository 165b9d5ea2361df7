"""Smoke tests for the python bindings."""

import numpy as np
import pytest

import mmsr


def test_ssim_loss_values():
    ones = np.ones((8, 8))
    assert mmsr.ssim_loss(ones, ones) == pytest.approx(1.0 - 1.02 / 2.02, abs=1e-9)
    assert mmsr.ssim_loss(ones, ones, form=mmsr.SsimForm.standard) == pytest.approx(
        0.0, abs=1e-9
    )
    zm = np.array([[0.5, -0.5], [0.3, -0.3]])
    assert mmsr.ssim_loss(zm, zm) == pytest.approx(0.0, abs=1e-12)


def test_rescale_identity():
    rng = np.random.default_rng(3)
    p = rng.uniform(-1, 1, size=(4, 4))
    up = mmsr.nn_upsample(p, 8)
    assert up.shape == (32, 32)
    np.testing.assert_allclose(mmsr.avg_downsample(up, 8), p, atol=1e-12)


def test_consistency_losses():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, size=(2, 2))
    assert mmsr.downsample_loss(x, mmsr.nn_upsample(x, 8)) == pytest.approx(0.0)
    assert mmsr.upsample_loss(np.ones((8, 8)), np.zeros((1, 1))) == pytest.approx(1.0)
    assert mmsr.mse(np.zeros((2, 2)), np.ones((2, 2))) == pytest.approx(1.0)


def test_mmsr_total_weighting():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, size=(4, 4))
    y_lr = rng.uniform(-1, 1, size=(4, 4))
    y = mmsr.nn_upsample(y_lr, 8)
    out = mmsr.mmsr_total(1.0, x, mmsr.nn_upsample(x, 8), y, y_lr)
    w = mmsr.LossWeights()
    expected = (
        1.0
        + w.lambda1 * out["s_x"]
        + w.lambda2 * out["s_y"]
        + w.lambda3 * out["d_term"]
        + w.lambda4 * out["u_term"]
    )
    assert out["total"] == pytest.approx(expected, abs=1e-12)
    assert out["d_term"] == pytest.approx(0.0, abs=1e-12)
    assert out["u_term"] == pytest.approx(0.0, abs=1e-12)


def test_psnr_and_bicubic():
    assert mmsr.psnr_from_mse(0.0) == pytest.approx(99.0)
    assert mmsr.psnr_from_mse(1.0) == pytest.approx(6.0206, abs=1e-4)
    up = mmsr.bicubic_upsample(np.full((4, 4), 0.3), 8)
    assert up.shape == (32, 32)
    np.testing.assert_allclose(up, 0.3, atol=1e-9)


def test_generator_inference():
    spec = mmsr.SRGeneratorSpec()
    spec.base_width = 6
    spec.n_res_blocks = 1
    g = mmsr.SRGenerator(spec, seed=1)
    assert g.param_count > 0
    out = g.infer(np.zeros((8, 8)))
    assert out.shape == (64, 64)
    assert np.isfinite(out).all()
    assert (np.abs(out) <= 1.0).all()
    # same seed, same parameters, same output
    out2 = mmsr.SRGenerator(spec, seed=1).infer(np.zeros((8, 8)))
    np.testing.assert_array_equal(out, out2)


def test_shape_errors():
    with pytest.raises(Exception):
        mmsr.ssim_loss(np.zeros((4, 4)), np.zeros((4, 5)))
