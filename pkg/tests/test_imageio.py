import numpy as np
import pytest

from smre.imageio import (FormatError, read_image, read_pgm, read_raw_f32,
                          write_image, write_pgm, write_raw_f32)


def reference_p5_reader(data: bytes):
    """Minimal independent raw-PGM reader used to cross-check ours."""
    import re
    m = re.match(rb"P5\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s",
                 data)
    width, height, maxval = (int(g) for g in m.groups())
    dt = np.uint8 if maxval < 256 else np.dtype(">u2")
    return np.frombuffer(data[m.end():], dtype=dt,
                         count=width * height).reshape(height, width), maxval


class TestRawF32:
    def test_roundtrip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        # float32-representable field round-trips exactly
        f = rng.normal(size=(5, 7)).astype(np.float32).astype(np.float64)
        path = tmp_path / "x.f32"
        write_raw_f32(f, path)
        back = read_raw_f32(path)
        np.testing.assert_array_equal(back, f)

    def test_repeated_write_byte_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        f = rng.normal(size=(4, 4))
        p1, p2 = tmp_path / "a.f32", tmp_path / "b.f32"
        write_raw_f32(f, p1)
        write_raw_f32(f, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_format(self, tmp_path):
        path = tmp_path / "x.f32"
        write_raw_f32(np.zeros((3, 2)), path)
        assert path.read_bytes().startswith(b"SMRE-F32 v1 3 2\n")

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "x.f32"
        write_raw_f32(np.zeros((3, 3)), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(FormatError) as exc:
            read_raw_f32(path)
        assert exc.value.offset == len(raw) - 5


class TestPgm:
    def test_p2_single_pixel_normalization(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2\n1 1\n255\n128\n")
        img = read_pgm(path)
        assert img.shape == (1, 1)
        assert img[0, 0] == pytest.approx(128 / 255)

    def test_p2_with_comments(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2 # comment\n# another\n2 1\n10\n3 7\n")
        img = read_pgm(path, normalize=False)
        np.testing.assert_array_equal(img, [[3.0, 7.0]])

    def test_p5_16bit_big_endian(self, tmp_path):
        # two-byte big-endian samples per the format convention
        path = tmp_path / "x.pgm"
        samples = np.array([[1000, 40000], [0, 65535]], dtype=">u2")
        path.write_bytes(b"P5\n2 2\n65535\n" + samples.tobytes())
        img = read_pgm(path, normalize=False)
        np.testing.assert_array_equal(img, samples.astype(np.float64))
        ref, maxval = reference_p5_reader(path.read_bytes())
        np.testing.assert_array_equal(img, ref.astype(np.float64))

    def test_p5_roundtrip_8bit_cross_reader(self, tmp_path):
        rng = np.random.default_rng(2)
        f = rng.random((6, 9))
        path = tmp_path / "x.pgm"
        write_pgm(f, path, maxval=255)
        ours = read_pgm(path, normalize=False)
        ref, maxval = reference_p5_reader(path.read_bytes())
        assert maxval == 255
        np.testing.assert_array_equal(ours, ref.astype(np.float64))
        np.testing.assert_array_equal(ours, np.rint(np.clip(f, 0, 1) * 255))

    def test_p5_roundtrip_16bit(self, tmp_path):
        rng = np.random.default_rng(3)
        f = rng.random((4, 5))
        path = tmp_path / "x.pgm"
        write_pgm(f, path, maxval=65535)
        back = read_pgm(path)
        assert np.max(np.abs(back - np.clip(f, 0, 1))) <= 0.5 / 65535 + 1e-12

    def test_write_clamps(self, tmp_path):
        path = tmp_path / "x.pgm"
        write_pgm(np.array([[-0.5, 1.5]]), path)
        np.testing.assert_array_equal(read_pgm(path, normalize=False), [[0.0, 255.0]])

    def test_p2_roundtrip(self, tmp_path):
        f = np.array([[0.0, 0.5], [0.25, 1.0]])
        path = tmp_path / "x.pgm"
        write_pgm(f, path, maxval=100, ascii_format=True)
        assert path.read_bytes().startswith(b"P2\n")
        back = read_pgm(path, normalize=False)
        np.testing.assert_array_equal(back, [[0, 50], [25, 100]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P7\n1 1\n255\n\x00")
        with pytest.raises(FormatError) as exc:
            read_pgm(path)
        assert exc.value.offset == 0

    def test_truncated_p5_payload_offset(self, tmp_path):
        path = tmp_path / "x.pgm"
        header = b"P5\n2 2\n255\n"
        path.write_bytes(header + b"\x01\x02")
        with pytest.raises(FormatError) as exc:
            read_pgm(path)
        assert exc.value.offset == len(header) + 2

    def test_maxval_out_of_range(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2\n1 1\n70000\n5\n")
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_bad_header_token(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2\nxx 1\n255\n5\n")
        with pytest.raises(FormatError):
            read_pgm(path)


class TestReadWriteImage:
    def test_sniffs_formats(self, tmp_path):
        f = np.array([[0.25, 0.75]])
        p_raw = tmp_path / "a.f32"
        p_pgm = tmp_path / "a.pgm"
        write_image(f, p_raw)
        write_image(f, p_pgm)
        raw = read_image(p_raw)
        pgm = read_image(p_pgm)
        np.testing.assert_allclose(raw, f, atol=1e-7)
        np.testing.assert_allclose(pgm, f, atol=0.5 / 255)

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"GIF89a....")
        with pytest.raises(FormatError):
            read_image(path)

    def test_counts_bypass_normalization(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P2\n3 1\n200\n0 37 200\n")
        counts = read_image(path, normalize=False)
        np.testing.assert_array_equal(counts, [[0.0, 37.0, 200.0]])
