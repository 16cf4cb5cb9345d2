import numpy as np
import pytest

import ronet


def test_rank_one_components_sum_to_image():
    rng = np.random.default_rng(0)
    img = rng.random((3, 20, 24))
    d = ronet.svd_decompose(img, 4)
    assert len(d["components"]) == 4
    total = sum(d["components"]) + d["residual"]
    np.testing.assert_allclose(total, img, atol=1e-10)
    sv = np.linalg.svd(img[0], compute_uv=False)
    np.testing.assert_allclose([s[0] for s in d["sigmas"]], sv[:4], rtol=1e-9)


def test_rank_one_defect_matches_numpy():
    m = np.random.default_rng(1).random((8, 11))
    sv = np.linalg.svd(m, compute_uv=False)
    assert ronet.rank_one_defect(m) == pytest.approx(sv[1] / sv[0], rel=1e-9)


def test_psnr_against_formula():
    rng = np.random.default_rng(2)
    x = rng.random((16, 16))
    y = x + 0.01 * rng.standard_normal((16, 16))
    expected = 10 * np.log10(1.0 / np.mean((x - y) ** 2))
    assert ronet.psnr(x, y) == pytest.approx(expected, rel=1e-12)
    assert np.isinf(ronet.psnr(x, x))
    assert ronet.format_psnr(ronet.psnr(x, x)) == "identical"


def test_ssim_identical_is_one():
    x = np.random.default_rng(3).random((32, 32))
    assert ronet.ssim(x, x) == pytest.approx(1.0)


def test_degradations_keep_shapes_and_seed():
    x = np.full((3, 24, 24), 0.5)
    assert ronet.bicubic_downsample(x, 2).shape == (3, 12, 12)
    np.testing.assert_allclose(ronet.bicubic_downsample(x, 4), 0.25 * 2, atol=1e-12)
    np.testing.assert_allclose(ronet.motion_blur(x, 9, 30.0), x, atol=1e-12)
    a = ronet.awgn(x, 25.0, 7)
    np.testing.assert_array_equal(a, ronet.awgn(x, 25.0, 7))
    assert np.std(a - x) == pytest.approx(25.0 / 255.0, rel=0.1)


def test_bad_arguments_raise():
    x = np.zeros((8, 8))
    with pytest.raises(ValueError):
        ronet.awgn(x, -1.0, 0)
    with pytest.raises(ValueError):
        ronet.psnr(x, np.zeros((4, 4)))
    with pytest.raises(OSError):
        ronet.load_png("/nonexistent/image.png")


def test_png_and_checkpoint_round_trip(tmp_path):
    img = np.arange(48, dtype=float).reshape(3, 4, 4) / 255.0
    ronet.save_png(img, tmp_path / "a.png")
    np.testing.assert_allclose(ronet.load_png(tmp_path / "a.png"), img, atol=1e-12)

    tensors = {"w": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.ones(4, np.float32)}
    ronet.save_checkpoint(tensors, tmp_path / "m.ckpt")
    back = ronet.load_checkpoint(tmp_path / "m.ckpt")
    assert list(back) == ["w", "b"]
    np.testing.assert_array_equal(back["w"], tensors["w"])
    assert (tmp_path / "m.ckpt").read_bytes()[:8] == b"RONETCK1"


def test_cli_usage_exit_code():
    code, _, err = ronet.run_cli(["no-such-command"])
    assert code == 2
    code, out, _ = ronet.run_cli(["--help"])
    assert code == 0 and "decompose" in out
