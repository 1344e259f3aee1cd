import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpdiff.errors import FormatError, InvalidArgumentError
from warpdiff.tensor import (Tensor, downscale_nearest, load_image, load_raw,
                             save_image, save_raw, upscale_bicubic,
                             upscale_nearest)


def rand_tensor(rng, c, h, w):
    return Tensor(rng.standard_normal((c, h, w)))


class TestTensorType:
    def test_rejects_wrong_ndim(self):
        with pytest.raises(InvalidArgumentError):
            Tensor(np.zeros((4, 4)))

    def test_rejects_nonfinite(self):
        data = np.zeros((1, 2, 2))
        data[0, 0, 0] = np.nan
        with pytest.raises(InvalidArgumentError):
            Tensor(data)

    def test_shape_properties(self):
        t = Tensor(np.zeros((3, 5, 7)))
        assert (t.channels, t.height, t.width) == (3, 5, 7)

    def test_immutable(self):
        t = Tensor(np.zeros((1, 2, 2)))
        with pytest.raises(ValueError):
            t.data[0, 0, 0] = 1.0


class TestNearest:
    def test_upscale_identity_s1(self):
        t = rand_tensor(np.random.default_rng(0), 2, 4, 4)
        assert upscale_nearest(t, 1) is t

    def test_upscale_block_replication(self):
        t = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        out = upscale_nearest(t, 2)
        expected = np.array([[[1, 1, 2, 2], [1, 1, 2, 2],
                              [3, 3, 4, 4], [3, 3, 4, 4]]], dtype=float)
        np.testing.assert_array_equal(out.data, expected)

    def test_round_trip_bit_exact(self):
        t = rand_tensor(np.random.default_rng(1), 3, 16, 16)
        back = downscale_nearest(upscale_nearest(t, 4), 4)
        np.testing.assert_array_equal(back.data, t.data)

    def test_downscale_identity_s1(self):
        t = rand_tensor(np.random.default_rng(2), 1, 4, 4)
        assert downscale_nearest(t, 1) is t

    def test_downscale_top_left_phase(self):
        # Oracle: explicit loop selecting pixels (2i, 2j).
        rng = np.random.default_rng(3)
        t = rand_tensor(rng, 1, 8, 8)
        out = downscale_nearest(t, 2)
        for i in range(4):
            for j in range(4):
                assert out.data[0, i, j] == t.data[0, 2 * i, 2 * j]

    def test_downscale_rejects_non_divisible(self):
        t = rand_tensor(np.random.default_rng(4), 1, 6, 6)
        with pytest.raises(InvalidArgumentError):
            downscale_nearest(t, 4)

    def test_rejects_bad_factor(self):
        t = rand_tensor(np.random.default_rng(5), 1, 4, 4)
        for s in (0, -1, 2.0):
            with pytest.raises(InvalidArgumentError):
                upscale_nearest(t, s)

    @settings(max_examples=25, deadline=None)
    @given(c=st.integers(1, 3), h=st.integers(1, 12), w=st.integers(1, 12),
           s=st.integers(1, 4), seed=st.integers(0, 1000))
    def test_up_down_identity_property(self, c, h, w, s, seed):
        t = rand_tensor(np.random.default_rng(seed), c, h, w)
        back = downscale_nearest(upscale_nearest(t, s), s)
        np.testing.assert_array_equal(back.data, t.data)

    def test_channel_independence(self):
        rng = np.random.default_rng(6)
        t = rand_tensor(rng, 3, 5, 5)
        stacked = upscale_nearest(t, 3)
        for c in range(3):
            single = upscale_nearest(Tensor(t.data[c:c + 1]), 3)
            np.testing.assert_array_equal(stacked.data[c], single.data[0])


class TestBicubic:
    def test_identity_s1(self):
        t = rand_tensor(np.random.default_rng(7), 1, 6, 6)
        assert upscale_bicubic(t, 1) is t

    def test_constant_preserved(self):
        t = Tensor(np.full((2, 5, 5), 0.37))
        for s in (2, 3, 4):
            out = upscale_bicubic(t, s)
            np.testing.assert_allclose(out.data, 0.37, atol=1e-12)

    def test_linear_ramp_interior(self):
        # Interior of an upscaled linear ramp stays on the same line:
        # output x sits at source coordinate x / s.
        ramp = np.arange(8, dtype=float)[None, None, :]
        out = upscale_bicubic(Tensor(ramp), 2)
        xs = np.arange(16) / 2.0
        interior = slice(4, 12)
        np.testing.assert_allclose(out.data[0, 0, interior], xs[interior], atol=1e-6)

    def test_output_shape_and_finite(self):
        t = rand_tensor(np.random.default_rng(8), 3, 7, 9)
        out = upscale_bicubic(t, 3)
        assert out.shape == (3, 21, 27)
        assert np.all(np.isfinite(out.data))

    def test_channel_independence(self):
        rng = np.random.default_rng(9)
        t = rand_tensor(rng, 2, 6, 6)
        stacked = upscale_bicubic(t, 2)
        for c in range(2):
            single = upscale_bicubic(Tensor(t.data[c:c + 1]), 2)
            np.testing.assert_allclose(stacked.data[c], single.data[0], atol=1e-12)


class TestRawIO:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(10)
        t = Tensor(rng.standard_normal((3, 5, 4)).astype(np.float32))
        path = tmp_path / "t.wdt"
        save_raw(t, path)
        back = load_raw(path)
        np.testing.assert_array_equal(back.data, t.data)
        assert path.stat().st_size == 4 + 12 + 3 * 5 * 4 * 4

    def test_truncated_payload(self, tmp_path):
        t = Tensor(np.zeros((1, 4, 4)))
        path = tmp_path / "t.wdt"
        save_raw(t, path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError):
            load_raw(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "t.wdt"
        path.write_bytes(b"WDT1\x01")
        with pytest.raises(FormatError):
            load_raw(path)

    def test_bad_magic(self, tmp_path):
        t = Tensor(np.zeros((1, 2, 2)))
        path = tmp_path / "t.wdt"
        save_raw(t, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_raw(path)

    def test_dimension_overflow(self, tmp_path):
        import struct
        path = tmp_path / "t.wdt"
        path.write_bytes(b"WDT1" + struct.pack("<III", 1 << 30, 1 << 30, 4))
        with pytest.raises(FormatError):
            load_raw(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_raw(tmp_path / "absent.wdt")


class TestImageIO:
    def test_checker_png(self, tmp_path):
        checker = Tensor(np.array([[[0.0, 1.0], [1.0, 0.0]]]))
        path = tmp_path / "checker.png"
        save_image(checker, path)
        back = load_image(path)
        np.testing.assert_array_equal(back.data, checker.data)

    def test_rgb_round_trip_quantized(self, tmp_path):
        rng = np.random.default_rng(11)
        t = Tensor(rng.random((3, 8, 8)))
        path = tmp_path / "t.png"
        save_image(t, path)
        back = load_image(path)
        assert back.shape == t.shape
        assert np.abs(back.data - t.data).max() <= 0.5 / 255.0 + 1e-12

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "absent.png")

    def test_rejects_bad_channel_count(self, tmp_path):
        t = Tensor(np.zeros((2, 4, 4)))
        with pytest.raises(InvalidArgumentError):
            save_image(t, tmp_path / "x.png")

    def test_pgm_round_trip(self, tmp_path):
        t = Tensor((np.arange(16, dtype=float) / 15.0).reshape(1, 4, 4))
        path = tmp_path / "t.pgm"
        save_image(t, path)
        back = load_image(path)
        assert np.abs(back.data - t.data).max() <= 0.5 / 255.0 + 1e-12
