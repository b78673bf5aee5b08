"""Matrix CSV files, PGM images, patch extraction and JSON output."""

import gzip
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from dlsphere.errors import ParameterError, ParseError


# --- matrix CSV ---------------------------------------------------------------


def _open_text(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="ascii", newline="")
    return open(path, mode, encoding="ascii", newline="")


def write_matrix(path, m):
    """Header ``rows,cols`` then one row-major line per row, 17 significant digits.

    Paths ending in ``.gz`` are gzip-compressed.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ParameterError("write_matrix expects a 1-D or 2-D array")
    with _open_text(path, "w") as fh:
        fh.write(f"{m.shape[0]},{m.shape[1]}\n")
        for row in m:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_matrix(path):
    with _open_text(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty matrix file", 0)
    try:
        rows, cols = (int(t) for t in lines[0].split(","))
    except ValueError:
        raise ParseError(f"{path}: bad header {lines[0]!r}", 0) from None
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != rows:
        raise ParseError(f"{path}: expected {rows} rows, found {len(body)}")
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols))
    out = np.empty((rows, cols))
    for i, ln in enumerate(body):
        vals = ln.split(",")
        if len(vals) != cols:
            raise ParseError(f"{path}: row {i} has {len(vals)} values, expected {cols}")
        try:
            out[i] = [float(v) for v in vals]
        except ValueError:
            raise ParseError(f"{path}: non-numeric value in row {i}") from None
    return out


# --- PGM ----------------------------------------------------------------------


@dataclass
class GrayImage:
    width: int
    height: int
    maxval: int
    pixels: np.ndarray  # height x width integers

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.int64)
        if self.pixels.shape != (self.height, self.width):
            raise ParameterError("pixel array does not match width/height")
        if not 1 <= self.maxval <= 65535:
            raise ParameterError("maxval must lie in [1, 65535]")
        if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() > self.maxval):
            raise ParameterError("pixel values must lie in [0, maxval]")


class _Tokens:
    """Whitespace/comment aware header tokenizer over raw bytes."""

    def __init__(self, data):
        self.data = data
        self.pos = 0

    def _skip(self):
        d = self.data
        while self.pos < len(d):
            c = d[self.pos : self.pos + 1]
            if c == b"#":
                while self.pos < len(d) and d[self.pos : self.pos + 1] not in (b"\n", b"\r"):
                    self.pos += 1
            elif c.isspace():
                self.pos += 1
            else:
                break

    def next(self, what):
        self._skip()
        start = self.pos
        d = self.data
        while self.pos < len(d) and not d[self.pos : self.pos + 1].isspace() and d[self.pos : self.pos + 1] != b"#":
            self.pos += 1
        if self.pos == start:
            raise ParseError(f"missing {what}", start)
        return d[start : self.pos], start

    def next_int(self, what, lo, hi):
        tok, off = self.next(what)
        if not tok.isdigit():
            raise ParseError(f"bad {what} {tok!r}", off)
        v = int(tok)
        if not lo <= v <= hi:
            raise ParseError(f"{what} {v} out of range [{lo}, {hi}]", off)
        return v


def parse_pgm(data):
    tk = _Tokens(data)
    if data[:2] not in (b"P2", b"P5"):
        raise ParseError("bad magic number, expected P2 or P5", 0)
    magic = data[:2]
    tk.pos = 2
    if tk.pos < len(data) and not data[2:3].isspace() and data[2:3] != b"#":
        raise ParseError("bad magic number, expected P2 or P5", 0)
    width = tk.next_int("width", 1, 2**31)
    height = tk.next_int("height", 1, 2**31)
    maxval = tk.next_int("maxval", 1, 65535)
    count = width * height
    if magic == b"P2":
        vals = []
        for _ in range(count):
            try:
                vals.append(tk.next_int("pixel", 0, maxval))
            except ParseError as exc:
                if exc.offset is not None and exc.offset >= len(data):
                    raise ParseError(f"truncated payload: {len(vals)} of {count} pixels", len(data)) from None
                raise
        pixels = np.array(vals, dtype=np.int64)
    else:
        # exactly one whitespace byte separates the header from the payload
        if tk.pos >= len(data) or not data[tk.pos : tk.pos + 1].isspace():
            raise ParseError("missing whitespace after maxval", tk.pos)
        start = tk.pos + 1
        depth = 2 if maxval > 255 else 1
        need = count * depth
        payload = data[start : start + need]
        if len(payload) < need:
            raise ParseError(f"truncated payload: {len(payload)} of {need} bytes", start + len(payload))
        dtype = ">u2" if depth == 2 else "u1"
        pixels = np.frombuffer(payload, dtype=dtype).astype(np.int64)
        if pixels.max(initial=0) > maxval:
            bad = int(np.argmax(pixels > maxval))
            raise ParseError(f"pixel value exceeds maxval {maxval}", start + bad * depth)
    return GrayImage(width=width, height=height, maxval=maxval, pixels=pixels.reshape(height, width))


def read_pgm(path):
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def write_pgm(path, img, binary=True):
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n{img.maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            dtype = ">u2" if img.maxval > 255 else "u1"
            fh.write(img.pixels.astype(dtype).tobytes())
        else:
            for row in img.pixels:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))


def extract_patches(img, patch=8, center=False, unit_norm=False):
    """Non-overlapping ``patch x patch`` blocks as columns.

    Blocks are scanned left to right, then top to bottom; each block is
    vectorized column-major. Trailing rows/columns that do not fill a block
    are dropped with a warning. ``center`` subtracts each column's mean and
    ``unit_norm`` rescales nonzero columns to unit length, in that order.
    """
    if patch < 1:
        raise ParameterError("patch must be >= 1")
    if img.width < patch or img.height < patch:
        raise ParameterError(f"image {img.width}x{img.height} is smaller than one {patch}x{patch} patch")
    bw, bh = img.width // patch, img.height // patch
    if bw * patch != img.width or bh * patch != img.height:
        warnings.warn("image size is not a multiple of the patch size; remainder discarded", RuntimeWarning, stacklevel=2)
    px = img.pixels[: bh * patch, : bw * patch].astype(float)
    # (bh, patch_row, bw, patch_col) -> (bh, bw, patch_col, patch_row)
    blocks = px.reshape(bh, patch, bw, patch).transpose(0, 2, 3, 1)
    cols = blocks.reshape(bh * bw, patch * patch).T.copy()
    if center:
        cols -= cols.mean(axis=0, keepdims=True)
    if unit_norm:
        nrm = np.linalg.norm(cols, axis=0)
        nz = nrm > 0
        cols[:, nz] /= nrm[nz]
    return cols


# --- JSON ---------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj):
    """Canonical JSON: sorted keys, fixed separators, non-finite floats as null."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
