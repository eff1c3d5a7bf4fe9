"""Periodic square lattice with spin-1/2 links and its Gauss-law sector.

Links are indexed from their anchor vertex ``(x, y)``: the x-link leaving the
vertex is ``2 * (y * Lx + x)`` and the y-link is that plus one.  A
configuration is an ``N``-bit integer with bit ``j`` set when the spin on link
``j`` points up (``S^z = +1/2``).

Each plaquette stores its links as ``(bottom, right, top, left)``.  The plaquette
raising operator ``S+_bottom S+_right S-_top S-_left`` maps the anticlockwise
pattern (bottom, right, top, left) = (0, 0, 1, 1) onto the clockwise pattern
(1, 1, 0, 0).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

X_DIR, Y_DIR = 0, 1


class PlaquetteState(enum.Enum):
    CLOCKWISE = "C"
    ANTICLOCKWISE = "A"
    INACTIVE = "-"


class Parity(enum.IntEnum):
    EVEN = 0
    ODD = 1

    @classmethod
    def parse(cls, value) -> "Parity":
        if isinstance(value, Parity):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


@dataclass(frozen=True)
class LatticeGeometry:
    """Index tables for an ``Lx x Ly`` periodic plaquette lattice."""

    Lx: int
    Ly: int
    plaquette_links: tuple = field(repr=False)
    vertex_links: tuple = field(repr=False)

    @property
    def N(self) -> int:
        return 2 * self.Lx * self.Ly

    @property
    def n_plaquettes(self) -> int:
        return self.Lx * self.Ly

    @property
    def n_vertices(self) -> int:
        return self.Lx * self.Ly

    def link_index(self, vertex, direction: int) -> int:
        x, y = vertex
        x %= self.Lx
        y %= self.Ly
        return 2 * (y * self.Lx + x) + direction

    def link_anchor(self, link: int) -> tuple[tuple[int, int], int]:
        site, direction = divmod(link, 2)
        y, x = divmod(site, self.Lx)
        return (x, y), direction

    def plaquettes(self) -> list[tuple[int, int]]:
        return [(px, py) for py in range(self.Ly) for px in range(self.Lx)]

    def vertices(self) -> list[tuple[int, int]]:
        return [(x, y) for y in range(self.Ly) for x in range(self.Lx)]

    def plaquette_id(self, p) -> int:
        px, py = p
        return (py % self.Ly) * self.Lx + (px % self.Lx)

    def plaquette_coords(self, pid: int) -> tuple[int, int]:
        py, px = divmod(pid, self.Lx)
        return px, py

    def sublattice(self, p) -> Parity:
        return Parity((p[0] + p[1]) % 2)

    def plaquette_mask(self, p) -> int:
        mask = 0
        for link in self.plaquette_links[self.plaquette_id(p)]:
            mask |= 1 << link
        return mask

    def half_cut_mask(self) -> int:
        """Links whose anchor vertex lies in the left half, ``x < Lx / 2``."""
        mask = 0
        for link in range(self.N):
            (x, _), _ = self.link_anchor(link)
            if x < self.Lx // 2:
                mask |= 1 << link
        return mask


def build_geometry(Lx: int, Ly: int) -> LatticeGeometry:
    """Construct the index tables for an even ``Lx x Ly`` torus."""
    for name, L in (("Lx", Lx), ("Ly", Ly)):
        if not isinstance(L, (int, np.integer)) or isinstance(L, bool):
            raise TypeError(f"{name} must be an integer, got {L!r}")
        if L < 2 or L % 2:
            raise ValueError(
                f"{name}={L}: lattice extents must be even and >= 2 so the "
                "checkerboard sublattices tile the torus"
            )
    Lx, Ly = int(Lx), int(Ly)

    def link(x, y, d):
        return 2 * ((y % Ly) * Lx + (x % Lx)) + d

    plaquette_links = tuple(
        (link(px, py, X_DIR), link(px + 1, py, Y_DIR), link(px, py + 1, X_DIR), link(px, py, Y_DIR))
        for py in range(Ly)
        for px in range(Lx)
    )
    vertex_links = tuple(
        (link(x, y, X_DIR), link(x, y, Y_DIR), link(x - 1, y, X_DIR), link(x, y - 1, Y_DIR))
        for y in range(Ly)
        for x in range(Lx)
    )
    return LatticeGeometry(Lx, Ly, plaquette_links, vertex_links)


def _bit(c: int, j: int) -> int:
    return (c >> j) & 1


def gauss_divergence(geometry: LatticeGeometry, c: int, vertex) -> int:
    """Outgoing minus incoming up-spins at ``vertex``; zero on physical states."""
    x, y = vertex
    out_x, out_y, in_x, in_y = geometry.vertex_links[(y % geometry.Ly) * geometry.Lx + (x % geometry.Lx)]
    return _bit(c, out_x) + _bit(c, out_y) - _bit(c, in_x) - _bit(c, in_y)


def is_gauge_invariant(geometry: LatticeGeometry, c: int) -> bool:
    return all(gauss_divergence(geometry, c, v) == 0 for v in geometry.vertices())


def plaquette_state(geometry: LatticeGeometry, c: int, p) -> PlaquetteState:
    bottom, right, top, left = geometry.plaquette_links[geometry.plaquette_id(p)]
    pattern = (_bit(c, bottom), _bit(c, right), _bit(c, top), _bit(c, left))
    if pattern == (0, 0, 1, 1):
        return PlaquetteState.ANTICLOCKWISE
    if pattern == (1, 1, 0, 0):
        return PlaquetteState.CLOCKWISE
    return PlaquetteState.INACTIVE


def flippable_counts(geometry: LatticeGeometry, c: int) -> tuple[int, int]:
    counts = [0, 0]
    for p in geometry.plaquettes():
        if plaquette_state(geometry, c, p) is not PlaquetteState.INACTIVE:
            counts[geometry.sublattice(p)] += 1
    return counts[0], counts[1]


def flip_plaquette(geometry: LatticeGeometry, c: int, p) -> int:
    """Exchange C and A on an active plaquette."""
    if plaquette_state(geometry, c, p) is PlaquetteState.INACTIVE:
        raise ValueError(f"plaquette {p} is not flippable in configuration {c:#x}")
    return c ^ geometry.plaquette_mask(p)


# ---------------------------------------------------------------------------
# sector enumeration


def _enumerate_dfs(geometry: LatticeGeometry) -> list[int]:
    N = geometry.N
    # per link: (vertex it leaves, vertex it enters)
    tail = [0] * N
    head = [0] * N
    for v, (ox, oy, ix, iy) in enumerate(geometry.vertex_links):
        tail[ox] = tail[oy] = v
        head[ix] = head[iy] = v
    partial = [0] * geometry.n_vertices
    free_out = [2] * geometry.n_vertices
    free_in = [2] * geometry.n_vertices
    found: list[int] = []

    def feasible(v: int) -> bool:
        # remaining links can move the divergence within [-free_in, +free_out]
        return -free_out[v] <= partial[v] <= free_in[v]

    def dfs(j: int, word: int) -> None:
        if j == N:
            found.append(word)
            return
        t, h = tail[j], head[j]
        free_out[t] -= 1
        free_in[h] -= 1
        for bit in (0, 1):
            partial[t] += bit
            partial[h] -= bit
            if feasible(t) and feasible(h):
                dfs(j + 1, word | (bit << j))
            partial[t] -= bit
            partial[h] += bit
        free_out[t] += 1
        free_in[h] += 1

    dfs(0, 0)
    return found


@dataclass(frozen=True)
class GaugeSector:
    """Sorted zero-charge configurations and their index map."""

    geometry: LatticeGeometry
    configs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {int(c): i for i, c in enumerate(self.configs)})

    def __len__(self) -> int:
        return len(self.configs)

    def __contains__(self, c) -> bool:
        return int(c) in self._index

    def index_of(self, c) -> int:
        return self._index[int(c)]

    def indices_of(self, words: np.ndarray) -> np.ndarray:
        """Vectorised lookup; raises ``KeyError`` if any word is missing."""
        words = np.asarray(words, dtype=np.uint64)
        idx = np.searchsorted(self.configs, words)
        idx = np.minimum(idx, len(self.configs) - 1)
        if len(words) and not np.array_equal(self.configs[idx], words):
            bad = words[self.configs[idx] != words][0]
            raise KeyError(f"configuration {int(bad):#x} is not in the gauge sector")
        return idx

    def config_list(self) -> list[int]:
        return [int(c) for c in self.configs]

    def to_text(self) -> str:
        g = self.geometry
        header = json.dumps({"Lx": g.Lx, "Ly": g.Ly, "N": g.N, "count": len(self)})
        lines = [header] + [format(int(c), f"0{g.N}b") for c in self.configs]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GaugeSector":
        lines = [line for line in text.splitlines() if line.strip()]
        header = json.loads(lines[0])
        geometry = build_geometry(header["Lx"], header["Ly"])
        configs = np.array([int(s, 2) for s in lines[1:]], dtype=np.uint64)
        if len(configs) != header["count"]:
            raise ValueError(f"sector file declares {header['count']} configurations, holds {len(configs)}")
        if np.any(np.diff(configs.astype(np.int64)) <= 0):
            raise ValueError("sector file is not strictly ascending")
        return cls(geometry, configs)


def enumerate_gauge_sector(geometry: LatticeGeometry) -> GaugeSector:
    """All configurations with vanishing divergence at every vertex."""
    configs = sorted(_enumerate_dfs(geometry))
    return GaugeSector(geometry, np.array(configs, dtype=np.uint64))


# ---------------------------------------------------------------------------
# vectorised helpers over many configurations


def plaquette_patterns(geometry: LatticeGeometry):
    """Per plaquette: (mask, anticlockwise word, clockwise word) as uint64 arrays."""
    masks, anti, clock = [], [], []
    for bottom, right, top, left in geometry.plaquette_links:
        masks.append((1 << bottom) | (1 << right) | (1 << top) | (1 << left))
        anti.append((1 << top) | (1 << left))
        clock.append((1 << bottom) | (1 << right))
    as_u64 = lambda xs: np.array(xs, dtype=np.uint64)  # noqa: E731
    return as_u64(masks), as_u64(anti), as_u64(clock)


def flippability_table(geometry: LatticeGeometry, configs: Iterable[int] | np.ndarray) -> np.ndarray:
    """Boolean array ``[n_configs, n_plaquettes]`` marking active plaquettes."""
    words = np.asarray(configs, dtype=np.uint64)
    masks, anti, clock = plaquette_patterns(geometry)
    local = words[:, None] & masks[None, :]
    return (local == anti[None, :]) | (local == clock[None, :])


def sublattice_of_plaquettes(geometry: LatticeGeometry) -> np.ndarray:
    return np.array([geometry.sublattice(p) for p in geometry.plaquettes()], dtype=np.int64)
