import struct

import numpy as np
import pytest
from pydantic import ValidationError

from errors import AllZeroImageError, DimensionMismatchError, MalformedInputError
from imaging import (
    Image,
    binarize,
    detect_format,
    encode_qpie,
    grid_shape,
    idx_image_count,
    load_idx_labels,
    load_image,
    pad_to_pow2,
    reassemble,
    segment,
    write_pgm,
)


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    path.write_bytes(struct.pack('>IIII', 0x00000803, count, rows, cols) + images.tobytes())
    return path


def write_idx_labels(path, labels):
    path.write_bytes(struct.pack('>II', 0x00000801, len(labels)) + bytes(labels))
    return path


class TestEncoding:
    def test_column_major_amplitudes(self):
        qi = encode_qpie(Image(pixels=[[1, 2], [3, 4]]))
        assert qi.n_qubits == 2
        np.testing.assert_allclose(qi.state.amplitudes.real, np.array([1, 3, 2, 4]) / np.sqrt(30))

    def test_scale_invariance(self):
        pixels = np.array([[0, 5, 1, 2], [3, 0, 0, 7]], dtype=float)
        a = encode_qpie(Image(pixels=pixels)).state.amplitudes
        b = encode_qpie(Image(pixels=pixels * 13.5)).state.amplitudes
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_amplitudes_proportional_to_pixels(self, rng):
        for _ in range(1000):
            rows, cols = 2 ** rng.integers(0, 4, size=2)
            if rows * cols < 2:
                cols = 2
            pixels = rng.integers(0, 256, size=(rows, cols)).astype(float)
            pixels[rng.integers(rows), rng.integers(cols)] += 1
            amplitudes = encode_qpie(Image(pixels=pixels)).state.amplitudes
            assert np.linalg.norm(amplitudes) == pytest.approx(1.0, abs=1e-12)
            np.testing.assert_allclose(amplitudes.real, pixels.flatten(order='F') / np.linalg.norm(pixels), atol=1e-12)
            assert np.all(amplitudes.imag == 0)

    def test_all_zero_image(self):
        with pytest.raises(AllZeroImageError):
            encode_qpie(Image(pixels=np.zeros((2, 2))))

    def test_non_power_of_two(self):
        with pytest.raises(DimensionMismatchError):
            encode_qpie(Image(pixels=np.ones((3, 2))))
        with pytest.raises(DimensionMismatchError):
            encode_qpie(Image(pixels=[[1]]))

    def test_image_rejects_negative_pixels(self):
        with pytest.raises(ValidationError):
            Image(pixels=[[1, -1]])


class TestPreprocessing:
    def test_binarize_threshold_is_inclusive(self):
        img = binarize(Image(pixels=[[0.2, 0.5], [0.7, 0.49]]), 0.5)
        np.testing.assert_array_equal(img.pixels, [[0, 1], [1, 0]])

    def test_pad_appends_bottom_right(self):
        padded = pad_to_pow2(Image(pixels=np.ones((3, 5))))
        assert padded.shape == (4, 8)
        assert padded.pixels[:3, :5].all()
        assert not padded.pixels[3:, :].any()
        assert not padded.pixels[:, 5:].any()

    def test_pad_leaves_power_of_two_alone(self):
        img = Image(pixels=np.ones((4, 2)))
        assert pad_to_pow2(img) is img


class TestSegmentation:
    def test_grid_is_row_major(self):
        pixels = np.arange(16, dtype=float).reshape(4, 4)
        blocks = segment(Image(pixels=pixels), 2, 2)
        assert [(b.row, b.col) for b in blocks] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        np.testing.assert_array_equal(blocks[1].image.pixels, [[2, 3], [6, 7]])

    def test_reassemble_inverts_segment(self):
        pixels = np.arange(32, dtype=float).reshape(4, 8)
        assert np.array_equal(reassemble(segment(Image(pixels=pixels), 2, 4)).pixels, pixels)

    def test_block_must_tile_image(self):
        with pytest.raises(DimensionMismatchError):
            grid_shape(Image(pixels=np.ones((4, 4))), 3, 2)

    def test_block_pixel_count_power_of_two(self):
        with pytest.raises(DimensionMismatchError):
            grid_shape(Image(pixels=np.ones((6, 6))), 3, 2)

    def test_single_pixel_blocks_are_rejected(self):
        with pytest.raises(DimensionMismatchError, match='1x1 blocks'):
            grid_shape(Image(pixels=np.ones((4, 4))), 1, 1)
        assert grid_shape(Image(pixels=np.ones((4, 4))), 1, 2) == (4, 2)


class TestReaders:
    def test_matrix_text(self, write_matrix):
        img = load_image(write_matrix('m.txt', [[0, 1], [1, 0]]))
        np.testing.assert_array_equal(img.pixels, [[0, 1], [1, 0]])

    def test_ragged_matrix(self, tmp_path):
        path = tmp_path / 'ragged.txt'
        path.write_text('1 0\n1\n')
        with pytest.raises(MalformedInputError):
            load_image(path)

    def test_ascii_pgm_with_comment(self, tmp_path):
        path = tmp_path / 'a.pgm'
        path.write_text('P2\n# made by hand\n3 2\n9\n0 1 2\n3 4 9\n')
        img = load_image(path)
        assert img.shape == (2, 3)
        assert img.pixels[1, 2] == 9

    def test_binary_pgm_round_trip(self, tmp_path):
        img = Image(pixels=[[0, 200], [17, 255]])
        loaded = load_image(write_pgm(img, tmp_path / 'b.pgm', binary=True))
        np.testing.assert_array_equal(loaded.pixels, img.pixels)

    def test_sixteen_bit_pgm(self, tmp_path):
        path = tmp_path / 'wide.pgm'
        path.write_bytes(b'P5\n2 1\n1000\n' + struct.pack('>HH', 999, 1000))
        np.testing.assert_array_equal(load_image(path).pixels, [[999, 1000]])

    def test_pgm_invert(self, tmp_path):
        path = tmp_path / 'inv.pgm'
        path.write_text('P2\n2 1\n255\n0 255\n')
        np.testing.assert_array_equal(load_image(path, invert=True).pixels, [[255, 0]])

    def test_truncated_pgm(self, tmp_path):
        path = tmp_path / 'short.pgm'
        path.write_bytes(b'P5\n4 4\n255\n\x00\x01')
        with pytest.raises(MalformedInputError):
            load_image(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / 'x.pgm'
        path.write_text('P3\n1 1\n255\n0 0 0\n')
        with pytest.raises(MalformedInputError):
            load_image(path)

    def test_idx_images_and_labels(self, tmp_path):
        images = np.zeros((3, 4, 4), dtype=np.uint8)
        images[1, 0, 0] = 255
        images[2, 3, 3] = 9
        idx = write_idx_images(tmp_path / 'train.idx', images)
        labels = write_idx_labels(tmp_path / 'labels.idx1', [7, 2, 1])
        assert idx_image_count(idx) == 3
        assert load_image(idx, index=1).pixels[0, 0] == 255
        assert load_image(idx, index=2).pixels[3, 3] == 9
        np.testing.assert_array_equal(load_idx_labels(labels), [7, 2, 1])

    def test_idx_index_out_of_range(self, tmp_path):
        idx = write_idx_images(tmp_path / 'train.idx', np.zeros((2, 2, 2)))
        with pytest.raises(MalformedInputError):
            load_image(idx, index=2)

    def test_idx_wrong_magic(self, tmp_path):
        path = tmp_path / 'labels.idx'
        write_idx_labels(path, [1, 2])
        with pytest.raises(MalformedInputError):
            load_image(path, fmt='idx')

    def test_missing_file(self, tmp_path):
        with pytest.raises(MalformedInputError):
            load_image(tmp_path / 'nope.txt')

    def test_detect_format(self):
        assert detect_format('digits.PGM') == 'pgm'
        assert detect_format('train-images-idx3-ubyte') == 'idx'
        assert detect_format('pattern.txt') == 'text'


def test_write_pgm_ascii_maxval(tmp_path):
    path = write_pgm(Image(pixels=[[0, 0], [0, 0]]), tmp_path / 'blank.pgm')
    assert path.read_text().splitlines()[:3] == ['P2', '2 2', '1']
