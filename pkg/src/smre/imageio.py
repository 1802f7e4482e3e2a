"""Image file I/O: plain/binary PGM and a lossless 32-bit float format.

PGM samples are normalized to [0, 1] on read (divide by maxval) unless
normalization is turned off, e.g. for photon counts.  The raw format is
a one-line ASCII header `SMRE-F32 v1 <m> <n>` followed by little-endian
float32 samples in row-major order.
"""
from __future__ import annotations

import numpy as np

from .grid import as_field

__all__ = ["FormatError", "read_image", "write_image",
           "read_pgm", "write_pgm", "read_raw_f32", "write_raw_f32"]

F32_MAGIC = b"SMRE-F32 v1"


class FormatError(ValueError):
    """Malformed image file; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class _Tokenizer:
    """PGM header tokenizer over raw bytes, skipping comments, tracking
    the current byte offset."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        d, n = self.data, len(self.data)
        while self.pos < n:
            c = d[self.pos]
            if c in b" \t\r\n":
                self.pos += 1
            elif c == ord("#"):
                while self.pos < n and d[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def token(self) -> bytes:
        self.skip_space()
        start = self.pos
        d, n = self.data, len(self.data)
        while self.pos < n and d[self.pos] not in b" \t\r\n":
            self.pos += 1
        if self.pos == start:
            raise FormatError("unexpected end of header", start)
        return d[start:self.pos]

    def int_token(self, what: str) -> int:
        start_err = self.pos
        tok = self.token()
        try:
            return int(tok)
        except ValueError:
            raise FormatError(f"bad {what} token {tok!r}", start_err) from None


def read_pgm(path, normalize: bool = True) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tk = _Tokenizer(data)
    magic = tk.token()
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"not a PGM file (magic {magic!r})", 0)
    width = tk.int_token("width")
    height = tk.int_token("height")
    maxval = tk.int_token("maxval")
    if width < 1 or height < 1:
        raise FormatError("non-positive image dimensions", tk.pos)
    if not (0 < maxval <= 65535):
        raise FormatError(f"maxval {maxval} out of range (1..65535)", tk.pos)
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the payload
        if tk.pos >= len(data):
            raise FormatError("missing payload", tk.pos)
        tk.pos += 1
        bytes_per = 1 if maxval < 256 else 2
        need = width * height * bytes_per
        payload = data[tk.pos:tk.pos + need]
        if len(payload) < need:
            raise FormatError("truncated payload", tk.pos + len(payload))
        dt = np.uint8 if bytes_per == 1 else np.dtype(">u2")
        img = np.frombuffer(payload, dtype=dt).astype(np.float64)
    else:
        vals = np.empty(width * height, dtype=np.float64)
        for i in range(width * height):
            vals[i] = tk.int_token("sample")
        img = vals
    img = img.reshape(height, width)
    if np.any(img > maxval):
        raise FormatError("sample exceeds maxval", tk.pos)
    return img / maxval if normalize else img


def write_pgm(field, path, maxval: int = 255, ascii_format: bool = False) -> None:
    """Clamp to [0, 1], quantize by round(v * maxval) and write P5 (or P2)."""
    f = as_field(field)
    if not (0 < maxval <= 65535):
        raise ValueError("maxval must be in 1..65535")
    q = np.rint(np.clip(f, 0.0, 1.0) * maxval).astype(np.uint32)
    m, n = f.shape
    header = f"{'P2' if ascii_format else 'P5'}\n{n} {m}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if ascii_format:
            body = "\n".join(" ".join(str(v) for v in row) for row in q)
            fh.write(body.encode("ascii") + b"\n")
        elif maxval < 256:
            fh.write(q.astype(np.uint8).tobytes())
        else:
            fh.write(q.astype(">u2").tobytes())


def read_raw_f32(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(F32_MAGIC):
        raise FormatError("not a raw float file", 0)
    parts = data[:nl].split()
    if len(parts) != 4:
        raise FormatError("bad raw float header", nl)
    try:
        m, n = int(parts[2]), int(parts[3])
    except ValueError:
        raise FormatError("bad raw float dimensions", len(F32_MAGIC)) from None
    if m < 1 or n < 1:
        raise FormatError("non-positive image dimensions", len(F32_MAGIC))
    need = m * n * 4
    payload = data[nl + 1:nl + 1 + need]
    if len(payload) < need:
        raise FormatError("truncated payload", nl + 1 + len(payload))
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(m, n)


def write_raw_f32(field, path) -> None:
    f = as_field(field)
    m, n = f.shape
    with open(path, "wb") as fh:
        fh.write(f"SMRE-F32 v1 {m} {n}\n".encode("ascii"))
        fh.write(f.astype("<f4").tobytes())


def read_image(path, normalize: bool = True) -> np.ndarray:
    """Read PGM or raw float by sniffing the magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(len(F32_MAGIC))
    if magic.startswith(F32_MAGIC):
        return read_raw_f32(path)
    if magic[:2] in (b"P2", b"P5"):
        return read_pgm(path, normalize=normalize)
    raise FormatError(f"unrecognized image format (magic {magic[:2]!r})", 0)


def write_image(field, path, maxval: int = 255) -> None:
    """Write by extension: .pgm quantized, anything else raw float."""
    if str(path).lower().endswith(".pgm"):
        write_pgm(field, path, maxval=maxval)
    else:
        write_raw_f32(field, path)
