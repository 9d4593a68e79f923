import numpy as np
import pytest

from vqekit.degrade import (
    DEFAULT_PROFILE,
    DegradationRecipe,
    add_gauss_noise,
    add_poisson_noise,
    apply_blur,
    blur_step,
    gauss_noise_step,
    gg_blur_kernel,
    intensity_histogram,
    jpeg_simulate,
    jpeg_step,
    poisson_step,
    quality_tables,
    resize_step,
    run_recipe,
    run_recipe_frame,
    sample_recipe,
)
from vqekit.io import Clip
from vqekit.rand import frame_rng, seeded_rng
from vqekit.validation import ValidationError


def test_kernel_normalized_and_symmetric():
    k = gg_blur_kernel(1.5, 3.0, 11)
    assert k.shape == (11, 11)
    assert np.sum(k) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(k, k[::-1, ::-1], atol=1e-15)
    assert np.allclose(k, k.T, atol=1e-15)


def test_beta2_matches_gaussian():
    # exp(-(r/sigma)^2) is a Gaussian with std sigma/sqrt(2)
    sigma, ksize = 1.2, 13
    k = gg_blur_kernel(sigma, 2.0, ksize)
    ax = np.arange(ksize) - ksize // 2
    xx, yy = np.meshgrid(ax, ax)
    s = sigma / np.sqrt(2.0)
    ref = np.exp(-(xx ** 2 + yy ** 2) / (2 * s ** 2))
    ref /= ref.sum()
    assert np.max(np.abs(k - ref)) < 1e-12


def test_high_beta_flat_top():
    # beta >> 2 approaches a disc: center and its neighbor nearly equal
    k = gg_blur_kernel(3.0, 8.0, 15)
    c = 15 // 2
    assert k[c, c] / k[c, c + 1] < 1.01


def test_kernel_validation():
    with pytest.raises(ValidationError):
        gg_blur_kernel(0.0, 2.0, 7)
    with pytest.raises(ValidationError):
        gg_blur_kernel(1.0, 0.4, 7)
    with pytest.raises(ValidationError):
        gg_blur_kernel(1.0, 2.0, 8)


def test_blur_preserves_constant():
    frame = np.full((16, 16, 3), 0.42)
    out = apply_blur(frame, gg_blur_kernel(2.0, 2.0, 9))
    assert np.max(np.abs(out - 0.42)) < 1e-12


def test_gauss_noise_statistics():
    rng = seeded_rng(0)
    frame = np.full((256, 256, 3), 0.5)
    out = add_gauss_noise(frame, 0.1, False, rng)
    assert 0.095 < np.std(out - frame) < 0.105


def test_gray_noise_preserves_channel_differences():
    rng = seeded_rng(1)
    frame = seeded_rng(2).uniform(0.2, 0.8, (32, 32, 3))
    out = add_gauss_noise(frame, 0.05, True, rng)
    # same additive plane on all channels: R-G and G-B untouched
    assert np.allclose(out[..., 0] - out[..., 1], frame[..., 0] - frame[..., 1], atol=1e-12)
    assert np.allclose(out[..., 1] - out[..., 2], frame[..., 1] - frame[..., 2], atol=1e-12)


def test_color_noise_changes_channel_differences():
    rng = seeded_rng(3)
    frame = np.full((32, 32, 3), 0.5)
    out = add_gauss_noise(frame, 0.05, False, rng)
    assert np.std(out[..., 0] - out[..., 1]) > 0.01


def test_poisson_mean_and_zero():
    rng = seeded_rng(4)
    frame = np.full((1000, 1000, 1), 0.5)[..., [0, 0, 0]]
    out = add_poisson_noise(frame, 255.0, rng)
    tol = 3.0 * np.sqrt(0.5 / 255.0) / 1e3
    assert abs(np.mean(out) - 0.5) < tol
    zero = np.zeros((8, 8, 3))
    assert np.array_equal(add_poisson_noise(zero, 100.0, rng), zero)


def test_jpeg_constant_frame_survives():
    frame = np.full((24, 24, 3), 0.5)
    out = jpeg_simulate(frame, 95)
    assert np.max(np.abs(out - frame)) < 1e-7


def test_jpeg_quality_100_near_lossless():
    rng = seeded_rng(5)
    frame = rng.uniform(0.1, 0.9, (32, 32, 3))
    out = jpeg_simulate(frame, 100)
    assert np.max(np.abs(out - frame)) < 0.02


def test_jpeg_lower_quality_more_error():
    rng = seeded_rng(6)
    base = rng.uniform(0, 1, (8, 8, 3))
    frame = np.kron(base, np.ones((6, 6, 1)))  # blocky content
    frame = np.clip(frame + rng.normal(0, 0.1, frame.shape), 0, 1)
    e90 = np.mean((jpeg_simulate(frame, 90) - frame) ** 2)
    e20 = np.mean((jpeg_simulate(frame, 20) - frame) ** 2)
    assert e20 > e90


def test_jpeg_pads_odd_sizes():
    rng = seeded_rng(7)
    frame = rng.uniform(0, 1, (13, 19, 3))
    out = jpeg_simulate(frame, 70)
    assert out.shape == frame.shape


def test_quality_tables_scaling():
    # q=50 is the reference point: tables equal the standard ones
    luma50, _ = quality_tables(50)
    luma90, _ = quality_tables(90)
    luma10, _ = quality_tables(10)
    assert np.all(luma90 <= luma50)
    assert np.all(luma10 >= luma50)
    assert luma50[0, 0] == 16  # standard luminance table corner
    with pytest.raises(ValidationError):
        quality_tables(0)
    with pytest.raises(ValidationError):
        quality_tables(101)


def test_step_builders_validate():
    with pytest.raises(ValidationError):
        blur_step(1.0, 2.0, 4)
    with pytest.raises(ValidationError):
        gauss_noise_step(-0.1)
    with pytest.raises(ValidationError):
        poisson_step(0.0)
    with pytest.raises(ValidationError):
        resize_step(2.5)
    with pytest.raises(ValidationError):
        jpeg_step(0)


def test_recipe_roundtrip_and_equality():
    r = DegradationRecipe(7, [blur_step(1.0, 2.0, 9), jpeg_step(80)])
    r2 = DegradationRecipe.from_json(r.to_json())
    assert r == r2
    r3 = DegradationRecipe(8, [blur_step(1.0, 2.0, 9), jpeg_step(80)])
    assert r != r3


def test_recipe_rejects_unknown_kind():
    with pytest.raises(ValidationError, match="unknown degradation step"):
        DegradationRecipe(0, [{"kind": "sharpen"}])


def test_recipe_deterministic_per_seed_and_frame():
    rng = seeded_rng(8)
    frame = rng.uniform(0, 1, (24, 24, 3))
    recipe = DegradationRecipe(11, [gauss_noise_step(0.05), jpeg_step(60)])
    a = run_recipe_frame(frame, recipe, 3)
    b = run_recipe_frame(frame, recipe, 3)
    assert np.array_equal(a, b)
    # different frame index draws different noise
    c = run_recipe_frame(frame, recipe, 4)
    assert not np.array_equal(a, c)
    # different seed draws different noise
    other = DegradationRecipe(12, recipe.steps)
    d = run_recipe_frame(frame, other, 3)
    assert not np.array_equal(a, d)


def test_run_recipe_clip():
    rng = seeded_rng(9)
    clip = Clip(rng.uniform(0, 1, (3, 16, 16, 3)), fps=30.0, clip_id="x")
    recipe = DegradationRecipe(5, [gauss_noise_step(0.03)])
    out = run_recipe(clip, recipe)
    assert out.frames.shape == clip.frames.shape
    assert out.clip_id == "x"
    assert np.all(out.frames >= 0.0) and np.all(out.frames <= 1.0)
    # per-frame noise is independent
    d0 = out.frames[0] - clip.frames[0]
    d1 = out.frames[1] - clip.frames[1]
    assert not np.array_equal(d0, d1)


def test_resize_step_roundtrip_shape():
    rng = seeded_rng(10)
    frame = rng.uniform(0, 1, (20, 30, 3))
    recipe = DegradationRecipe(0, [resize_step(0.5, back=True)])
    out = run_recipe_frame(frame, recipe, 0)
    assert out.shape == frame.shape


def test_sample_recipe_profile_statistics():
    rng = seeded_rng(11)
    betas = []
    for _ in range(10_000):
        r = sample_recipe(rng)
        betas.append(r.steps[0]["beta"])
        assert len(r.steps) == 5
        assert [s["kind"] for s in r.steps] == [
            "blur", "gauss_noise", "poisson", "resize", "jpeg"]
    # uniform over [0.5, 4] -> mean 2.25
    assert abs(np.mean(betas) - 2.25) < 0.03


def test_sample_recipe_respects_ranges():
    rng = seeded_rng(12)
    for _ in range(200):
        r = sample_recipe(rng)
        blur, noise, poisson, resize, jpeg = r.steps
        assert DEFAULT_PROFILE["sigma"][0] <= blur["sigma"] <= DEFAULT_PROFILE["sigma"][1]
        assert blur["ksize"] % 2 == 1
        assert 0.0 <= noise["sigma_n"] <= 0.06
        assert 50.0 <= poisson["scale"] <= 500.0
        assert 0.5 <= resize["factor"] <= 1.0
        assert 30 <= jpeg["quality"] <= 95


def test_sample_recipe_explicit_seed():
    rng = seeded_rng(13)
    r = sample_recipe(rng, seed=99)
    assert r.seed == 99


def test_frame_rng_streams_differ():
    a = frame_rng(0, 0).uniform(size=8)
    b = frame_rng(0, 1).uniform(size=8)
    c = frame_rng(0, 0).uniform(size=8)
    assert np.array_equal(a, c)
    assert not np.array_equal(a, b)


def test_intensity_histogram():
    clip = Clip(np.zeros((2, 4, 4, 3)), fps=30.0)
    counts, edges = intensity_histogram(clip, bins=16)
    assert counts.sum() == 2 * 16
    assert counts[0] == 2 * 16  # all pixels are black
    assert len(edges) == 17
    with pytest.raises(ValidationError):
        intensity_histogram(clip, bins=1)
