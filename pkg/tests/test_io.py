import numpy as np
import pytest

from irstd import io
from irstd.tensor import write_nlt1


def test_pgm_white_is_one(tmp_path):
    path = tmp_path / "w.pgm"
    path.write_bytes(b"P5\n# comment\n3 2\n255\n" + bytes([255, 0, 128, 1, 2, 3]))
    img = io.read_pgm(str(path))
    assert img.shape == (2, 3)
    assert img[0, 0] == 1.0 and img[0, 1] == 0.0
    assert np.isclose(img[0, 2], 128 / 255)


def test_pgm_rejects_other_formats(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(ValueError):
        io.read_pgm(str(path))
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(ValueError):
        io.read_pgm(str(path))


def test_pgm_sequence_round_trip_at_8_bits(tmp_path):
    stack = np.random.default_rng(0).random((7, 9, 3))
    io.save_sequence(str(tmp_path / "seq"), stack)
    back = io.load_sequence(str(tmp_path / "seq"))
    assert back.shape == stack.shape
    assert np.abs(back - stack).max() <= 0.5 / 255 + 1e-12


def test_nlt_sequence_round_trip(tmp_path):
    stack = np.random.default_rng(1).random((5, 4, 3))
    path = str(tmp_path / "s.nlt")
    io.save_sequence(path, stack)
    assert np.array_equal(io.load_sequence(path), stack.astype(np.float32))


def test_nlt_sequence_must_be_three_way(tmp_path):
    path = tmp_path / "m.nlt"
    write_nlt1(str(path), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        io.load_sequence(str(path))


def test_png_frames(tmp_path):
    from PIL import Image

    for f in range(2):
        Image.fromarray(np.full((4, 5), 51 * (f + 1), dtype=np.uint8)).save(tmp_path / f"frame_{f:04d}.png")
    stack = io.load_sequence(str(tmp_path))
    assert stack.shape == (4, 5, 2)
    assert np.allclose(stack[..., 1], 0.4)


def test_empty_directory_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        io.load_sequence(str(tmp_path))
    with pytest.raises(FileNotFoundError):
        io.load_sequence(str(tmp_path / "missing"))


def test_missing_frame_raises(tmp_path):
    for f in (0, 1, 3):
        io.write_pgm(str(tmp_path / f"frame_{f:04d}.pgm"), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        io.load_sequence(str(tmp_path))


def test_inconsistent_sizes_raise(tmp_path):
    io.write_pgm(str(tmp_path / "frame_0000.pgm"), np.zeros((3, 3)))
    io.write_pgm(str(tmp_path / "frame_0001.pgm"), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        io.load_sequence(str(tmp_path))


def test_masks_round_trip(tmp_path):
    m = np.random.default_rng(2).random((6, 6, 2)) > 0.7
    io.save_masks(str(tmp_path / "m"), m)
    assert np.array_equal(io.load_masks(str(tmp_path / "m")), m)
