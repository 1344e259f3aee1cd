import struct

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from warpdiff.errors import FormatError, InvalidArgumentError
from warpdiff.flow import (FlowConfig, FlowField, estimate_flow, luminance,
                           prescaled_flow, read_flo, write_flo)
from warpdiff.tensor import Tensor


def textured_image(seed, h=128, w=128, pad=0):
    """Smooth random texture with margin so shifts do not expose borders."""
    rng = np.random.default_rng(seed)
    big = gaussian_filter(rng.standard_normal((h + 2 * pad, w + 2 * pad)), 3.0)
    lo, hi = big.min(), big.max()
    return (big - lo) / (hi - lo)


def shifted_pair(seed, dx, dy, h=128, w=128):
    """Reference and target where target(x) = reference(x + dx, y + dy)."""
    pad = 16
    big = textured_image(seed, h, w, pad)
    ref = big[pad:pad + h, pad:pad + w]
    tgt = big[pad + dy:pad + dy + h, pad + dx:pad + dx + w]
    return Tensor(ref[None]), Tensor(tgt[None])


def mean_epe(field, dx, dy, margin=16):
    u = field.u[margin:-margin, margin:-margin]
    v = field.v[margin:-margin, margin:-margin]
    return float(np.mean(np.hypot(u - dx, v - dy)))


class TestFlowField:
    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 5)))

    def test_rejects_nonfinite(self):
        u = np.zeros((4, 4))
        u[0, 0] = np.inf
        with pytest.raises(InvalidArgumentError):
            FlowField(u=u, v=np.zeros((4, 4)))

    def test_rejects_out_of_frame_displacement(self):
        u = np.zeros((4, 4))
        u[0, 0] = 4.0
        with pytest.raises(InvalidArgumentError):
            FlowField(u=u, v=np.zeros((4, 4)))


class TestFlowConfig:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            FlowConfig(pyramid_levels=0)
        with pytest.raises(InvalidArgumentError):
            FlowConfig(window_radius=0)
        with pytest.raises(InvalidArgumentError):
            FlowConfig(estimator="raft")


class TestLuminance:
    def test_single_channel_passthrough(self):
        t = Tensor(np.random.default_rng(0).random((1, 4, 4)))
        np.testing.assert_array_equal(luminance(t), t.data[0])

    def test_rgb_601_weights(self):
        t = Tensor(np.ones((3, 2, 2)) * np.array([1.0, 0.0, 0.0])[:, None, None])
        np.testing.assert_allclose(luminance(t), 0.299)


class TestEstimateFlow:
    def test_identical_frames_near_zero(self):
        ref, _ = shifted_pair(0, 0, 0)
        field = estimate_flow(ref, ref)
        assert float(np.mean(np.hypot(field.u, field.v))) < 0.05

    def test_constant_frames_zero_flow(self):
        gray = Tensor(np.full((1, 64, 64), 0.5))
        field = estimate_flow(gray, gray)
        np.testing.assert_allclose(field.u, 0.0, atol=1e-9)
        np.testing.assert_allclose(field.v, 0.0, atol=1e-9)

    def test_translation_recovered(self):
        ref, tgt = shifted_pair(1, 3, 0)
        field = estimate_flow(ref, tgt)
        assert mean_epe(field, 3, 0) < 0.25

    def test_diagonal_translation_recovered(self):
        ref, tgt = shifted_pair(2, 2, 3)
        field = estimate_flow(ref, tgt)
        assert mean_epe(field, 2, 3) < 0.25

    def test_dimension_mismatch(self):
        a = Tensor(np.zeros((1, 32, 32)))
        b = Tensor(np.zeros((1, 32, 33)))
        with pytest.raises(InvalidArgumentError):
            estimate_flow(a, b)

    def test_deterministic(self):
        ref, tgt = shifted_pair(3, 2, 1)
        f1 = estimate_flow(ref, tgt)
        f2 = estimate_flow(ref, tgt)
        np.testing.assert_array_equal(f1.u, f2.u)
        np.testing.assert_array_equal(f1.v, f2.v)

    def test_farneback_translation(self):
        ref, tgt = shifted_pair(4, 3, 0)
        cfg = FlowConfig(estimator="farneback_polynomial")
        field = estimate_flow(ref, tgt, cfg)
        assert mean_epe(field, 3, 0) < 0.5


class TestPrescaledFlow:
    def test_s1_matches_estimate_flow(self):
        ref, tgt = shifted_pair(5, 1, 0)
        f1 = prescaled_flow(ref, tgt, 1)
        f2 = estimate_flow(ref, tgt)
        np.testing.assert_array_equal(f1.u, f2.u)

    def test_identical_frames_any_s(self):
        ref, _ = shifted_pair(6, 0, 0)
        field = prescaled_flow(ref, ref, 4)
        assert field.shape == (512, 512)
        assert float(np.mean(np.hypot(field.u, field.v))) < 0.05

    def test_scaling_law(self):
        # 2 px translation at native resolution, factor 4 -> mean flow ~ 8 px.
        ref, tgt = shifted_pair(7, 2, 0)
        field = prescaled_flow(ref, tgt, 4)
        margin = 64
        mean_u = float(np.mean(field.u[margin:-margin, margin:-margin]))
        mean_v = float(np.mean(field.v[margin:-margin, margin:-margin]))
        assert abs(mean_u - 8.0) < 0.4  # within 5%
        assert abs(mean_v) < 0.4

    def test_rejects_bad_factor(self):
        ref, tgt = shifted_pair(8, 1, 0)
        with pytest.raises(InvalidArgumentError):
            prescaled_flow(ref, tgt, 0)


class TestFloIO:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        field = FlowField(u=rng.standard_normal((6, 5)).astype(np.float32),
                          v=rng.standard_normal((6, 5)).astype(np.float32))
        path = tmp_path / "f.flo"
        write_flo(field, path)
        back = read_flo(path)
        np.testing.assert_array_equal(back.u, field.u)
        np.testing.assert_array_equal(back.v, field.v)

    def test_single_pixel_layout(self, tmp_path):
        field = FlowField(u=np.array([[0.5]]), v=np.array([[-0.25]]))
        path = tmp_path / "f.flo"
        write_flo(field, path)
        blob = path.read_bytes()
        assert len(blob) == 20
        assert struct.unpack("<f", blob[:4])[0] == np.float32(202021.25)
        assert struct.unpack("<ii", blob[4:12]) == (1, 1)
        assert struct.unpack("<ff", blob[12:]) == (0.5, -0.25)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.flo"
        path.write_bytes(struct.pack("<f", 123.0) + struct.pack("<ii", 1, 1) + b"\0" * 8)
        with pytest.raises(FormatError):
            read_flo(path)

    def test_truncated_payload(self, tmp_path):
        field = FlowField(u=np.zeros((3, 3)), v=np.zeros((3, 3)))
        path = tmp_path / "f.flo"
        write_flo(field, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError):
            read_flo(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_flo(tmp_path / "absent.flo")
