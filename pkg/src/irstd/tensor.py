"""Dense tensor algebra and the NLT1 raw tensor format.

Tensors are plain float64 ``numpy.ndarray`` objects in C order (last index
varying fastest). Mode arguments follow the mathematical convention and are
1-based: ``mode=1`` is ``axis=0``. ``forward_diff`` takes a numpy ``axis``.

The mode-``n`` unfolding places the chosen mode on the rows and enumerates the
remaining modes in ascending order, last varying fastest, along the columns.
"""

import struct

import numpy as np

NLT1_MAGIC = b"NLT1"


def _check_mode(ndim, mode):
    if not 1 <= mode <= ndim:
        raise ValueError(f"mode {mode} out of range for a {ndim}-way tensor")


def unfold(t, mode):
    """Mode-``mode`` unfolding of ``t`` into a ``dims[mode] x rest`` matrix."""
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    return np.moveaxis(t, mode - 1, 0).reshape(t.shape[mode - 1], -1)


def fold(m, mode, dims):
    """Inverse of :func:`unfold`."""
    m = np.asarray(m)
    dims = tuple(int(d) for d in dims)
    _check_mode(len(dims), mode)
    if m.ndim != 2:
        raise ValueError("fold expects a matrix")
    rest = int(np.prod(dims)) // dims[mode - 1] if dims[mode - 1] else 0
    if m.shape != (dims[mode - 1], rest):
        raise ValueError(f"matrix of shape {m.shape} cannot be folded into {dims} along mode {mode}")
    moved = (dims[mode - 1],) + dims[: mode - 1] + dims[mode:]
    return np.moveaxis(m.reshape(moved), 0, mode - 1)


def mode_product(t, a, mode):
    """Mode-``mode`` product ``t x_mode a``; equals ``fold(a @ unfold(t, mode))``."""
    t = np.asarray(t)
    a = np.asarray(a)
    _check_mode(t.ndim, mode)
    if a.ndim != 2 or a.shape[1] != t.shape[mode - 1]:
        raise ValueError(
            f"matrix of shape {a.shape} does not match mode-{mode} extent {t.shape[mode - 1]}"
        )
    # tensordot puts the new axis last; move it back into place.
    out = np.tensordot(t, a, axes=([mode - 1], [1]))
    return np.moveaxis(out, -1, mode - 1)


def multi_mode_product(t, mats, modes):
    """Apply several mode products in sequence (order is irrelevant for distinct modes)."""
    for a, mode in zip(mats, modes):
        t = mode_product(t, a, mode)
    return t


def fro_norm(t):
    return float(np.sqrt(np.sum(np.square(t))))


def l1_norm(t):
    return float(np.sum(np.abs(t)))


def forward_diff(t, axis):
    """First-order forward difference along ``axis`` with a zero last slice.

    ``out[..., i, ...] = t[..., i + 1, ...] - t[..., i, ...]`` for all but the
    last index, which is zero, so the output keeps the input shape.
    """
    t = np.asarray(t, dtype=float)
    if not -t.ndim <= axis < t.ndim:
        raise ValueError(f"axis {axis} out of range for a {t.ndim}-way tensor")
    if t.shape[axis] < 1:
        raise ValueError("forward_diff needs a non-empty axis")
    out = np.zeros_like(t)
    n = t.shape[axis]
    if n > 1:
        head = [slice(None)] * t.ndim
        tail = [slice(None)] * t.ndim
        head[axis] = slice(0, n - 1)
        tail[axis] = slice(1, n)
        out[tuple(head)] = t[tuple(tail)] - t[tuple(head)]
    return out


def forward_diff_adjoint(g, axis):
    """Adjoint of :func:`forward_diff`: returns ``D^T g`` for the same axis."""
    g = np.asarray(g, dtype=float)
    n = g.shape[axis]
    out = np.zeros_like(g)
    if n > 1:
        gm = np.moveaxis(g, axis, 0)
        om = np.moveaxis(out, axis, 0)
        om[1:] += gm[: n - 1]
        om[: n - 1] -= gm[: n - 1]
    return out


def write_nlt1(path_or_file, t):
    """Write ``t`` as NLT1: magic, u32 N, N u32 extents, float32 LE data."""
    t = np.asarray(t)
    if t.ndim < 1:
        t = t.reshape(1)
    header = NLT1_MAGIC + struct.pack(f"<I{t.ndim}I", t.ndim, *t.shape)
    payload = np.ascontiguousarray(t, dtype="<f4").tobytes()
    if hasattr(path_or_file, "write"):
        path_or_file.write(header + payload)
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(header + payload)


def read_nlt1(path_or_file):
    """Read an NLT1 tensor; returns a float64 array."""
    if hasattr(path_or_file, "read"):
        return _read_nlt1_stream(path_or_file)
    with open(path_or_file, "rb") as fh:
        return _read_nlt1_stream(fh)


def _read_nlt1_stream(fh):
    magic = fh.read(4)
    if magic != NLT1_MAGIC:
        raise ValueError(f"bad NLT1 magic {magic!r}")
    raw = fh.read(4)
    if len(raw) != 4:
        raise ValueError("truncated NLT1 header")
    (ndim,) = struct.unpack("<I", raw)
    raw = fh.read(4 * ndim)
    if len(raw) != 4 * ndim:
        raise ValueError("truncated NLT1 header")
    dims = struct.unpack(f"<{ndim}I", raw)
    count = int(np.prod(dims))
    raw = fh.read(4 * count)
    if len(raw) != 4 * count:
        raise ValueError(f"NLT1 payload holds {len(raw) // 4} values, expected {count}")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(dims)
