"""Frame-sequence I/O: directories of 8-bit PGM frames or single NLT1 files."""

import glob
import os
import re

import numpy as np

from irstd.tensor import read_nlt1, write_nlt1

FRAME_RE = re.compile(r"frame_(\d{4,})\.(pgm|png)$")


def _tokens(data):
    """Yield header tokens of a binary PNM, skipping comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        yield data[start:pos], pos


def read_pgm(path):
    """Binary (P5) 8-bit PGM as floats in ``[0, 1]``."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        w, _ = next(toks)
        h, _ = next(toks)
        maxval, end = next(toks)
        w, h, maxval = int(w), int(h), int(maxval)
    except (StopIteration, ValueError) as err:
        raise ValueError(f"{path}: malformed PGM header") from err
    if magic != b"P5" or maxval != 255:
        raise ValueError(f"{path}: only binary 8-bit PGM (P5, maxval 255) is supported")
    pixels = data[end + 1:end + 1 + w * h]
    if len(pixels) != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).astype(float) / 255.0


def write_pgm(path, img):
    """Write ``img`` (values in ``[0, 1]``) as a binary 8-bit PGM."""
    q = np.clip(np.rint(np.asarray(img, dtype=float) * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{q.shape[1]} {q.shape[0]}\n255\n".encode())
        fh.write(q.tobytes())


def _read_image(path):
    if path.endswith(".pgm"):
        return read_pgm(path)
    from PIL import Image

    img = np.asarray(Image.open(path).convert("L"), dtype=float)
    return img / 255.0


def load_sequence(path):
    """Load ``(n1, n2, n3)`` frames from an NLT1 file or a frame directory."""
    if os.path.isfile(path):
        stack = read_nlt1(path)
        if stack.ndim != 3:
            raise ValueError(f"{path}: expected a 3-way tensor, got {stack.ndim}-way")
        return stack
    if not os.path.isdir(path):
        raise FileNotFoundError(path)
    files = []
    for name in os.listdir(path):
        m = FRAME_RE.match(name)
        if m:
            files.append((int(m.group(1)), os.path.join(path, name)))
    if not files:
        raise FileNotFoundError(f"{path}: no frame_NNNN.pgm/.png files")
    files.sort()
    numbers = [n for n, _ in files]
    expected = list(range(numbers[0], numbers[0] + len(numbers)))
    if numbers != expected:
        missing = sorted(set(expected) - set(numbers))
        raise ValueError(f"{path}: missing or duplicate frames near {missing[:5] or numbers}")
    frames = [_read_image(p) for _, p in files]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"{path}: inconsistent frame sizes {sorted(shapes)}")
    return np.stack(frames, axis=2)


def save_sequence(path, stack):
    """Save to ``path`` as NLT1 if it ends in ``.nlt``, else as a PGM directory."""
    stack = np.asarray(stack, dtype=float)
    if path.endswith(".nlt"):
        write_nlt1(path, stack)
        return
    os.makedirs(path, exist_ok=True)
    for old in glob.glob(os.path.join(path, "frame_*.pgm")):
        os.remove(old)
    for f in range(stack.shape[2]):
        write_pgm(os.path.join(path, f"frame_{f:04d}.pgm"), stack[..., f])


def save_masks(path, masks):
    save_sequence(path, np.asarray(masks, dtype=float))


def load_masks(path):
    return load_sequence(path) > 0.5
