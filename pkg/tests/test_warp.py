import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from warpdiff.errors import InvalidArgumentError
from warpdiff.flow import FlowField
from warpdiff.tensor import Tensor, upscale_nearest
from warpdiff.warp import backward_warp_bilinear, ogwm_align, warp_direct


def naive_warp(src, u, v, border="clamp"):
    """Per-pixel scalar oracle for backward bilinear warping."""
    c, h, w = src.shape
    out = np.zeros_like(src)
    for k in range(c):
        for y in range(h):
            for x in range(w):
                sx = x + u[y, x]
                sy = y + v[y, x]
                if border == "clamp":
                    sx = min(max(sx, 0.0), w - 1.0)
                    sy = min(max(sy, 0.0), h - 1.0)
                x0 = int(np.floor(sx))
                y0 = int(np.floor(sy))
                fx = sx - x0
                fy = sy - y0

                def at(yy, xx):
                    if border == "zero" and not (0 <= yy < h and 0 <= xx < w):
                        return 0.0
                    return src[k, min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)]

                out[k, y, x] = ((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
                                + fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1)))
    return out


def rand_field(rng, h, w, amp=2.0):
    cap_u, cap_v = w - 1.0, h - 1.0
    return FlowField(u=np.clip(amp * rng.standard_normal((h, w)), -cap_u, cap_u),
                     v=np.clip(amp * rng.standard_normal((h, w)), -cap_v, cap_v))


class TestBackwardWarp:
    def test_matches_naive_oracle_clamp(self):
        rng = np.random.default_rng(0)
        src = Tensor(rng.random((2, 9, 11)))
        field = rand_field(rng, 9, 11)
        out = backward_warp_bilinear(src, field, border="clamp")
        np.testing.assert_allclose(out.data, naive_warp(src.data, field.u, field.v),
                                   atol=1e-12)

    def test_matches_naive_oracle_zero(self):
        rng = np.random.default_rng(1)
        src = Tensor(rng.random((1, 8, 8)))
        field = rand_field(rng, 8, 8, amp=3.0)
        out = backward_warp_bilinear(src, field, border="zero")
        np.testing.assert_allclose(
            out.data, naive_warp(src.data, field.u, field.v, border="zero"), atol=1e-12)

    def test_zero_flow_identity(self):
        rng = np.random.default_rng(2)
        src = Tensor(rng.random((3, 6, 7)))
        field = FlowField(u=np.zeros((6, 7)), v=np.zeros((6, 7)))
        out = backward_warp_bilinear(src, field)
        np.testing.assert_array_equal(out.data, src.data)

    def test_hand_case_row_shift(self):
        # u = +1 samples the next source pixel; clamped at the right border.
        src = Tensor(np.array([[[1.0, 2.0, 3.0]]]))
        field = FlowField(u=np.ones((1, 3)), v=np.zeros((1, 3)))
        out = backward_warp_bilinear(src, field)
        np.testing.assert_allclose(out.data, [[[2.0, 3.0, 3.0]]])

    def test_half_pixel_interpolation(self):
        src = Tensor(np.array([[[0.0, 1.0]]]))
        field = FlowField(u=np.full((1, 2), 0.5), v=np.zeros((1, 2)))
        out = backward_warp_bilinear(src, field)
        np.testing.assert_allclose(out.data, [[[0.5, 1.0]]])

    def test_linearity_in_source(self):
        rng = np.random.default_rng(3)
        a = rng.random((1, 7, 7))
        b = rng.random((1, 7, 7))
        field = rand_field(rng, 7, 7)
        combo = backward_warp_bilinear(Tensor(2.0 * a + 3.0 * b), field)
        parts = (2.0 * backward_warp_bilinear(Tensor(a), field).data
                 + 3.0 * backward_warp_bilinear(Tensor(b), field).data)
        np.testing.assert_allclose(combo.data, parts, atol=1e-12)

    def test_output_within_source_range_clamp(self):
        rng = np.random.default_rng(4)
        src = Tensor(rng.random((1, 12, 12)))
        field = rand_field(rng, 12, 12, amp=5.0)
        out = backward_warp_bilinear(src, field, border="clamp")
        assert out.data.min() >= src.data.min() - 1e-12
        assert out.data.max() <= src.data.max() + 1e-12

    def test_rejects_bad_border(self):
        src = Tensor(np.zeros((1, 4, 4)))
        field = FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 4)))
        with pytest.raises(InvalidArgumentError):
            backward_warp_bilinear(src, field, border="wrap")

    def test_rejects_shape_mismatch(self):
        src = Tensor(np.zeros((1, 4, 4)))
        field = FlowField(u=np.zeros((4, 5)), v=np.zeros((4, 5)))
        with pytest.raises(InvalidArgumentError):
            backward_warp_bilinear(src, field)

    def test_warp_direct_is_backward_warp(self):
        rng = np.random.default_rng(5)
        src = Tensor(rng.random((1, 6, 6)))
        field = rand_field(rng, 6, 6)
        np.testing.assert_array_equal(warp_direct(src, field).data,
                                      backward_warp_bilinear(src, field).data)


class TestOgwmAlign:
    def test_zero_flow_identity(self):
        # Upscale and downscale are exact inverses, so zero flow is lossless.
        rng = np.random.default_rng(6)
        src = Tensor(rng.random((2, 8, 8)))
        field = FlowField(u=np.zeros((32, 32)), v=np.zeros((32, 32)))
        out = ogwm_align(src, field, 4)
        np.testing.assert_array_equal(out.data, src.data)

    def test_constant_image_invariant(self):
        src = Tensor(np.full((1, 8, 8), 0.42))
        rng = np.random.default_rng(7)
        field = FlowField(u=2.0 * rng.standard_normal((16, 16)),
                          v=2.0 * rng.standard_normal((16, 16)))
        out = ogwm_align(src, field, 2)
        np.testing.assert_allclose(out.data, 0.42, atol=1e-12)

    def test_integer_hr_translation_exact(self):
        # An integer shift at high resolution is a pure sample relocation:
        # no interpolation blur at all.
        rng = np.random.default_rng(8)
        src = Tensor(rng.random((1, 8, 8)))
        s = 4
        field = FlowField(u=np.full((32, 32), float(s)), v=np.zeros((32, 32)))
        out = ogwm_align(src, field, s)
        np.testing.assert_allclose(out.data[0, :, :-1], src.data[0, :, 1:], atol=1e-12)

    def test_equals_manual_pipeline(self):
        rng = np.random.default_rng(9)
        src = Tensor(rng.random((1, 6, 6)))
        field = rand_field(rng, 12, 12)
        out = ogwm_align(src, field, 2)
        manual = backward_warp_bilinear(upscale_nearest(src, 2), field)
        np.testing.assert_array_equal(out.data, manual.data[:, ::2, ::2])

    def test_rejects_mismatched_flow(self):
        src = Tensor(np.zeros((1, 8, 8)))
        field = FlowField(u=np.zeros((16, 16)), v=np.zeros((16, 16)))
        with pytest.raises(InvalidArgumentError):
            ogwm_align(src, field, 4)

    def test_rejects_bad_factor(self):
        src = Tensor(np.zeros((1, 4, 4)))
        field = FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 4)))
        with pytest.raises(InvalidArgumentError):
            ogwm_align(src, field, 0)

    def test_subpixel_shift_sharper_than_direct(self):
        # Half-pixel LR motion: the rescaled pipeline warps by an integer
        # number of HR pixels and keeps the texture crisp, while direct LR
        # warping averages neighboring samples.
        rng = np.random.default_rng(10)
        tex = gaussian_filter(rng.standard_normal((16, 16)), 1.0)
        src = Tensor(tex[None])
        s = 4
        field_hr = FlowField(u=np.full((64, 64), 2.0), v=np.zeros((64, 64)))
        field_lr = FlowField(u=np.full((16, 16), 0.5), v=np.zeros((16, 16)))
        sharp = ogwm_align(src, field_hr, s)
        blurred = warp_direct(src, field_lr)
        grad_sharp = np.abs(np.diff(sharp.data[0], axis=1)).mean()
        grad_blur = np.abs(np.diff(blurred.data[0], axis=1)).mean()
        assert grad_sharp > grad_blur
