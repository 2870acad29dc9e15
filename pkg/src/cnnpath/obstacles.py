"""Template images, PGM I/O, obstacle-to-coupling mapping and fixtures.

Template convention: bright pixels (255) are free space, dark pixels (0)
are obstacles. Coupling only depends on intensity differences, so the
convention matters only for deciding where start and target may sit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import CouplingMap, ShapeError

FREE = 255
WALL = 0


class PGMError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class TemplateImage:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ShapeError(f"template must be a non-empty 2-D array, got shape {px.shape}")
        if np.any(px < 0) or np.any(px > 255):
            raise ValueError("intensities must lie in 0..255")
        px = px.astype(np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self):
        return self.pixels.shape

    def __eq__(self, other):
        return isinstance(other, TemplateImage) and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.shape, self.pixels.tobytes()))

    def free_mask(self, threshold=127):
        return self.pixels > threshold


def _tokens(data, start, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    pos = start
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMError("truncated header", pos)
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        begin = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tok = data[begin:pos]
        if not tok.isdigit():
            raise PGMError(f"expected an integer, got {tok!r}", begin)
        out.append((int(tok), begin))
    return out, pos


def parse_pgm(data):
    if data[:2] not in (b"P2", b"P5"):
        raise PGMError(f"unsupported magic {data[:2]!r}, expected P2 or P5", 0)
    binary = data[:2] == b"P5"
    header, pos = _tokens(data, 2, 3)
    (width, w_at), (height, _), (maxval, m_at) = header
    if width < 1 or height < 1:
        raise PGMError(f"bad dimensions {width}x{height}", w_at)
    if maxval != 255:
        raise PGMError(f"maxval must be 255, got {maxval}", m_at)
    count = width * height
    if binary:
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise PGMError("missing whitespace after maxval", pos)
        pos += 1
        raster = data[pos:pos + count]
        if len(raster) < count:
            raise PGMError(f"truncated raster: {len(raster)} of {count} bytes", pos + len(raster))
        pixels = np.frombuffer(raster, dtype=np.uint8)
    else:
        values = []
        for _ in range(count):
            try:
                ((val, at),), pos = _tokens(data, pos, 1)
            except PGMError as exc:
                raise PGMError(f"truncated raster: {len(values)} of {count} samples",
                               exc.offset) from None
            if val > maxval:
                raise PGMError(f"sample {val} exceeds maxval", at)
            values.append(val)
        pixels = np.array(values, dtype=np.uint8)
    return TemplateImage(pixels.reshape(height, width))


def load_pgm(path):
    return parse_pgm(Path(path).read_bytes())


def format_pgm(pixels, binary=True, comment=None):
    px = np.asarray(pixels)
    if px.ndim != 2:
        raise ShapeError("PGM data must be 2-D")
    px = np.clip(px, 0, 255).astype(np.uint8)
    rows, cols = px.shape
    head = "P5\n" if binary else "P2\n"
    if comment:
        head += f"# {comment}\n"
    head += f"{cols} {rows}\n255\n"
    if binary:
        return head.encode("ascii") + px.tobytes()
    body = "\n".join(" ".join(str(int(x)) for x in row) for row in px)
    return (head + body + "\n").encode("ascii")


def save_pgm(path, image, binary=True, comment=None):
    pixels = image.pixels if isinstance(image, TemplateImage) else image
    Path(path).write_bytes(format_pgm(pixels, binary=binary, comment=comment))


def build_coupling(img, params, mode="threshold", threshold=127, alpha=1.0):
    """Map adjacent-pixel contrast onto edge conductances.

    ``threshold`` mode keeps the nominal conductance where the intensity
    step is at most ``threshold`` and cuts the edge otherwise.
    ``proportional`` mode grows the edge resistance linearly with the step:
    ``G / (1 + alpha * d)``.
    """
    if img.shape != params.shape:
        raise ShapeError(f"template is {img.shape}, grid is {params.shape}")
    px = img.pixels.astype(np.int32)
    dh = np.abs(np.diff(px, axis=1)).astype(float)
    dv = np.abs(np.diff(px, axis=0)).astype(float)
    g = params.conductance
    if mode == "threshold":
        h = np.where(dh <= threshold, g, 0.0)
        v = np.where(dv <= threshold, g, 0.0)
    elif mode == "proportional":
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        h = g / (1.0 + alpha * dh)
        v = g / (1.0 + alpha * dv)
    else:
        raise ValueError(f"unknown coupling mode {mode!r}")
    return CouplingMap(h, v)


FIXTURES = ("room", "maze", "corridor", "sealed")


def make_fixture(kind, rows, cols, seed=0):
    """Procedural template image.

    room
        white field with sparse dark rectangles and a clear one-pixel border
    maze
        perfect maze (recursive backtracker); free cells at odd coordinates,
        walls one pixel thick
    corridor
        a single free lane (use ``rows=1``)
    sealed
        white field with a dark square ring enclosing the centre cell, which
        is the intended target
    """
    rng = random.Random(seed)
    if kind == "corridor":
        if rows < 1 or cols < 2:
            raise ShapeError("corridor needs at least 1x2 cells")
        return TemplateImage(np.full((rows, cols), FREE, dtype=np.uint8))
    if rows < 3 or cols < 3:
        raise ShapeError(f"{kind} fixture needs at least 3x3 cells, got {rows}x{cols}")
    if kind == "room":
        return TemplateImage(_room(rows, cols, rng))
    if kind == "maze":
        return TemplateImage(_maze(rows, cols, rng))
    if kind == "sealed":
        if rows < 5 or cols < 5:
            raise ShapeError("sealed fixture needs at least 5x5 cells")
        px = np.full((rows, cols), FREE, dtype=np.uint8)
        ci, cj = rows // 2, cols // 2
        px[ci - 2:ci + 3, cj - 2:cj + 3] = WALL
        px[ci - 1:ci + 2, cj - 1:cj + 2] = FREE
        return TemplateImage(px)
    raise ValueError(f"unknown fixture kind {kind!r}; choose from {FIXTURES}")


def _room(rows, cols, rng):
    px = np.full((rows, cols), FREE, dtype=np.uint8)
    # roughly 12% of the interior covered, in boxes of 1..max(2, n/6) cells
    target = 0.12 * (rows - 2) * (cols - 2)
    hmax = max(2, rows // 6)
    wmax = max(2, cols // 6)
    covered = 0
    for _ in range(200):
        if covered >= target:
            break
        h = rng.randint(1, hmax)
        w = rng.randint(1, wmax)
        if rows - 2 - h < 1 or cols - 2 - w < 1:
            continue
        i = rng.randint(1, rows - 1 - h)
        j = rng.randint(1, cols - 1 - w)
        block = px[i:i + h, j:j + w]
        covered += int(np.count_nonzero(block == FREE))
        block[...] = WALL
    return px


def _maze(rows, cols, rng):
    px = np.full((rows, cols), WALL, dtype=np.uint8)
    ni, nj = (rows - 1) // 2, (cols - 1) // 2
    seen = np.zeros((ni, nj), dtype=bool)
    stack = [(0, 0)]
    seen[0, 0] = True
    px[1, 1] = FREE
    while stack:
        ci, cj = stack[-1]
        options = [(ci + di, cj + dj) for di, dj in ((-1, 0), (0, 1), (1, 0), (0, -1))
                   if 0 <= ci + di < ni and 0 <= cj + dj < nj and not seen[ci + di, cj + dj]]
        if not options:
            stack.pop()
            continue
        ni_, nj_ = rng.choice(options)
        seen[ni_, nj_] = True
        px[2 * ni_ + 1, 2 * nj_ + 1] = FREE
        px[ci + ni_ + 1, cj + nj_ + 1] = FREE
        stack.append((ni_, nj_))
    return px


def overlay_path(img, path, start=None, target=None):
    """Template dimmed to half intensity with the path drawn at full white."""
    px = (img.pixels.astype(np.int32) // 2).astype(np.uint8)
    for cell in path:
        px[cell] = 255
    if start is not None:
        px[tuple(start)] = 200
    if target is not None:
        px[tuple(target)] = 230
    return px
