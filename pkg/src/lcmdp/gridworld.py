"""Grid-world LCMDPs built from terrain: elevation, risk, regions, rendering.

Cells are numbered row-major, ``s = r * width + c``, row 0 at the top.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import STAY, Lcmdp, ModelError, check, from_rows

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_NAMES = ("up", "down", "left", "right", "stay")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
REGIONS = ("A", "B", "C", "D")


class MapError(ValueError):
    pass


@dataclass
class ElevationMap:
    heights: np.ndarray

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.heights.ndim != 2 or min(self.heights.shape) < 2:
            raise MapError(f"elevation map must be at least 2x2, got shape {self.heights.shape}")

    @property
    def height(self) -> int:
        return self.heights.shape[0]

    @property
    def width(self) -> int:
        return self.heights.shape[1]


@dataclass
class GridConfig:
    start: tuple[int, int]
    goal: list[tuple[int, int]]
    mask: np.ndarray | None = None
    slope: float = 2.0
    p_min: float = 0.55
    risk_scale: float = 4.0
    semantics: str = "exact"

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("mask")
        d["start"] = list(self.start)
        d["goal"] = [list(g) for g in self.goal]
        return d

    @classmethod
    def from_dict(cls, d: dict, mask: np.ndarray | None = None) -> "GridConfig":
        return cls(
            start=tuple(d["start"]),
            goal=[tuple(g) for g in d["goal"]],
            mask=mask,
            slope=float(d.get("slope", 2.0)),
            p_min=float(d.get("p_min", 0.55)),
            risk_scale=float(d.get("risk_scale", 4.0)),
            semantics=d.get("semantics", "exact"),
        )


# --- file input ---------------------------------------------------------------

def _read_pgm(data: bytes, path) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise MapError(f"{path}: not a PGM file")
    # header: magic, width, height, maxval separated by whitespace/comments
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MapError(f"{path}: truncated PGM header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError:
            raise MapError(f"{path}: bad PGM header field {data[start:pos]!r}") from None
    w, h, maxval = fields
    if not 0 < maxval <= 65535:
        raise MapError(f"{path}: PGM maxval {maxval} out of range")
    if magic == b"P2":
        try:
            vals = [int(t) for t in data[pos:].split()]
        except ValueError:
            raise MapError(f"{path}: non-integer PGM sample") from None
        if len(vals) != w * h:
            raise MapError(f"{path}: expected {w * h} samples, found {len(vals)}")
        return np.array(vals, dtype=float).reshape(h, w)
    pos += 1  # single whitespace after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raw = data[pos:pos + w * h * dtype.itemsize]
    if len(raw) != w * h * dtype.itemsize:
        raise MapError(f"{path}: truncated PGM raster")
    return np.frombuffer(raw, dtype=dtype).astype(float).reshape(h, w)


def _read_csv(text: str, path) -> np.ndarray:
    rows = []
    for ln, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(x) for x in line.replace(";", ",").split(",")])
        except ValueError:
            raise MapError(f"{path}:{ln}: non-numeric value") from None
        if len(rows[-1]) != len(rows[0]):
            raise MapError(f"{path}:{ln}: row has {len(rows[-1])} values, expected {len(rows[0])}")
    if not rows:
        raise MapError(f"{path}: empty file")
    return np.array(rows)


def read_grid(path) -> np.ndarray:
    """Read a numeric grid from CSV or PGM (P2/P5)."""
    data = Path(path).read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return _read_pgm(data, path)
    return _read_csv(data.decode(), path)


def load_elevation(path) -> ElevationMap:
    return ElevationMap(read_grid(path))


def load_mask(path) -> np.ndarray:
    mask = read_grid(path)
    if np.any(mask != np.round(mask)) or mask.min() < 0 or mask.max() >= len(REGIONS):
        raise MapError(f"{path}: region mask entries must be integers in 0..{len(REGIONS) - 1}")
    return mask.astype(np.int64)


def write_grid_csv(grid: np.ndarray, path) -> None:
    np.savetxt(path, grid, delimiter=",", fmt="%.17g")


def write_pgm(grid: np.ndarray, path, maxval: int = 255) -> None:
    g = np.clip(np.round(grid), 0, maxval).astype(np.int64)
    h, w = g.shape
    body = "\n".join(" ".join(str(v) for v in row) for row in g)
    Path(path).write_text(f"P2\n{w} {h}\n{maxval}\n{body}\n")


# --- risk and model -------------------------------------------------------------

def neighbors(r: int, c: int, h: int, w: int) -> list[tuple[int, int]]:
    return [(r + dr, c + dc) for dr, dc in MOVES if 0 <= r + dr < h and 0 <= c + dc < w]


def max_gradient(heights: np.ndarray) -> np.ndarray:
    """Largest absolute height difference from each cell to a 4-neighbor."""
    h = heights
    g = np.zeros_like(h)
    dv = np.abs(np.diff(h, axis=0))
    dh = np.abs(np.diff(h, axis=1))
    g[:-1] = np.maximum(g[:-1], dv)
    g[1:] = np.maximum(g[1:], dv)
    g[:, :-1] = np.maximum(g[:, :-1], dh)
    g[:, 1:] = np.maximum(g[:, 1:], dh)
    return g


def derive_risk(elev: ElevationMap) -> np.ndarray:
    g = max_gradient(elev.heights)
    g95 = np.percentile(g, 95)
    if g95 <= 0:
        return np.zeros_like(g)
    return np.minimum(1.0, g / g95)


def success_probability(elev: ElevationMap, src: tuple[int, int], dst: tuple[int, int],
                        slope: float, p_min: float) -> float:
    h = elev.heights
    span = float(h.max() - h.min())
    if span == 0:
        return 1.0
    dh = abs(h[dst] - h[src]) / span
    return float(min(1.0, max(p_min, 1.0 - slope * dh)))


def build_grid_lcmdp(elev: ElevationMap, risk: np.ndarray | None, cfg: GridConfig) -> Lcmdp:
    """Four-action grid model; costs are ``[risk, length]``.

    ``risk`` is accepted for symmetry with rendering; the risk cost itself is
    the scaled failure probability of each move.
    """
    H, W = elev.heights.shape
    if risk is not None and np.shape(risk) != (H, W):
        raise MapError(f"risk map shape {np.shape(risk)} does not match elevation {(H, W)}")
    mask = cfg.mask
    if mask is None:
        raise MapError("grid config has no region mask")
    mask = np.asarray(mask)
    if mask.shape != (H, W):
        raise MapError(f"mask shape {mask.shape} does not match elevation {(H, W)}")
    if mask.min() < 0 or mask.max() >= len(REGIONS):
        raise MapError("mask has cells without a region label")

    def inside(cell):
        return 0 <= cell[0] < H and 0 <= cell[1] < W

    start = tuple(cfg.start)
    goals = {tuple(g) for g in cfg.goal}
    if not inside(start):
        raise MapError(f"start {start} outside the {H}x{W} grid")
    if not goals:
        raise MapError("goal region is empty")
    for g in goals:
        if not inside(g):
            raise MapError(f"goal cell {g} outside the {H}x{W} grid")
    if start in goals:
        raise MapError("start lies inside the goal region")

    transitions, risk_cost, length_cost = [], [], []
    for r in range(H):
        for c in range(W):
            s = r * W + c
            if (r, c) in goals:
                transitions.append((s, STAY, [(s, 1.0)]))
                risk_cost.append(0.0)
                length_cost.append(0.0)
                continue
            nbrs = neighbors(r, c, H, W)
            for a, (dr, dc) in enumerate(MOVES):
                dst = (r + dr, c + dc)
                if not inside(dst):
                    continue
                p = success_probability(elev, (r, c), dst, cfg.slope, cfg.p_min)
                fail = (1.0 - p) / len(nbrs)
                row: dict[int, float] = {}
                for nr, nc in nbrs if fail > 0 else ():
                    row[nr * W + nc] = row.get(nr * W + nc, 0.0) + fail
                row[dst[0] * W + dst[1]] = row.get(dst[0] * W + dst[1], 0.0) + p
                transitions.append((s, a, sorted(row.items())))
                risk_cost.append(cfg.risk_scale * (1.0 - p))
                length_cost.append(1.0)
    labels = [1 << int(v) for v in mask.ravel()]
    absorbing = [(r, c) in goals for r in range(H) for c in range(W)]
    model = from_rows(list(REGIONS), labels, {start[0] * W + start[1]: 1.0}, transitions,
                      [risk_cost, length_cost], absorbing)
    return check(model)


def manhattan_to_goal(cfg: GridConfig) -> int:
    r, c = cfg.start
    return min(abs(r - gr) + abs(c - gc) for gr, gc in cfg.goal)


def cell_of(s: int, width: int) -> tuple[int, int]:
    return divmod(int(s), width)


# --- synthetic terrain ----------------------------------------------------------

def synthetic_terrain(size: int, seed: int = 7, n_hills: int = 6) -> ElevationMap:
    """Smooth hills on a gentle slope, defined on the unit square so that
    different ``size`` values sample the same landscape."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.15, 0.85, size=(n_hills, 2))
    widths = rng.uniform(0.06, 0.14, size=n_hills)
    amps = rng.uniform(40.0, 100.0, size=n_hills)
    v, u = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    h = 20.0 * (1 - v) + 10.0 * u
    for (cv, cu), wdt, amp in zip(centers, widths, amps):
        h += amp * np.exp(-((v - cv) ** 2 + (u - cu) ** 2) / (2 * wdt ** 2))
    return ElevationMap(h)


def synthetic_regions(size: int) -> tuple[np.ndarray, tuple[int, int], list[tuple[int, int]]]:
    """Region mask, start (top right) and goal block (bottom left).

    Along the diagonal from start to goal the map reads A/B/C, then a D band,
    then C with B pockets; the goal block is D.
    """
    v, u = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    t = (v + (1 - u)) / 2
    mask = np.full((size, size), REGIONS.index("C"), dtype=np.int64)
    mask[t < 0.45] = REGIONS.index("A")
    mask[(t < 0.45) & (u < 0.5)] = REGIONS.index("B")
    mask[(t < 0.45) & (v > 0.5)] = REGIONS.index("B")
    mask[(t < 0.3) & (np.abs(u - v) < 0.2)] = REGIONS.index("C")
    mask[(t >= 0.45) & (t < 0.55)] = REGIONS.index("D")
    pocket = (t >= 0.6) & (t < 0.85) & (np.abs(u + v - 1) > 0.3)
    mask[pocket] = REGIONS.index("B")
    k = max(1, size // 8)
    goal = [(r, c) for r in range(size - k, size) for c in range(k)]
    for r, c in goal:
        mask[r, c] = REGIONS.index("D")
    return mask, (0, size - 1), goal


def synthetic_instance(size: int, seed: int = 7, **cfg_kw) -> tuple[ElevationMap, np.ndarray, GridConfig]:
    elev = synthetic_terrain(size, seed)
    mask, start, goal = synthetic_regions(size)
    cfg = GridConfig(start=start, goal=goal, mask=mask, **cfg_kw)
    return elev, derive_risk(elev), cfg


# --- rendering --------------------------------------------------------------------

REGION_TINT = np.array([[0, 40, 0], [40, 0, 40], [0, 40, 40], [40, 40, 0]], dtype=float)
PATH_COLOR = (0, 0, 0)


def render(path, risk: np.ndarray, mask: np.ndarray | None = None,
           cells: Sequence[tuple[int, int]] = (), heat: np.ndarray | None = None,
           scale: int = 1) -> np.ndarray:
    """Write a binary PPM and return the RGB raster.

    Background is ``heat`` if given, else ``risk``, as a blue-to-red ramp
    tinted by region; ``cells`` are painted black.
    """
    field_ = np.asarray(risk if heat is None else heat, dtype=float)
    lo, hi = field_.min(), field_.max()
    f = (field_ - lo) / (hi - lo) if hi > lo else np.zeros_like(field_)
    img = np.empty(field_.shape + (3,))
    img[..., 0] = 60 + 180 * f
    img[..., 1] = 60
    img[..., 2] = 60 + 180 * (1 - f)
    if mask is not None:
        img += REGION_TINT[np.asarray(mask)]
    for r, c in cells:
        img[r, c] = PATH_COLOR
    img = np.clip(np.round(img), 0, 255).astype(np.uint8)
    if scale > 1:
        img = img.repeat(scale, axis=0).repeat(scale, axis=1)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())
    return img


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise MapError(f"{path}: not a binary PPM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end():m.end() + w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def save_config(cfg: GridConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2))


def load_config(path, mask: np.ndarray | None = None) -> GridConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from None
    return GridConfig.from_dict(d, mask)
