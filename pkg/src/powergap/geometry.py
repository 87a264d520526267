"""Reference domains, inclusion masks, interior offsets and boundary charts.

All domains are generated at unit scale, so the r0-normalised norms used in the
size estimates coincide with the standard ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import InvalidArgument, InvalidMesh

DOMAIN_KINDS = ("unit_square", "unit_disc", "interval")

# Nominal a priori constants (Lipschitz character M0 and |Omega| <= M1 r0^n).
NOMINAL_CONSTANTS = {
    "unit_square": {"r0": 1.0, "M0": 1.0, "M1": 1.0},
    "unit_disc": {"r0": 1.0, "M0": 1.0, "M1": math.pi},
    "interval": {"r0": 1.0, "M0": 0.0, "M1": 2.0},
}


@dataclass(frozen=True, eq=False)
class MeshTopology:
    """Conforming simplicial mesh.

    ``cells`` holds vertex triples (2D) or pairs (1D). ``boundary_edges`` are
    oriented so the domain lies to their left, hence the outward normal of an
    edge with tangent (tx, ty) is (ty, -tx).
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_edges: np.ndarray
    cell_tags: np.ndarray
    kind: str = "custom"
    resolution: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.cells.shape[1] - 1

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        if self.dim == 1:
            p = self.vertices[self.cells]
            return p[:, 1, 0] - p[:, 0, 0]
        p = self.vertices[self.cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def cell_areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @property
    def area(self) -> float:
        return float(self.cell_areas.sum())

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs."""
        if self.dim == 1:
            return np.sort(self.cells, axis=1)
        e = np.concatenate([self.cells[:, [0, 1]], self.cells[:, [1, 2]], self.cells[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self) -> int:
        if self.dim == 1:
            return self.n_vertices - self.n_cells
        return self.n_vertices - len(self.edges) + self.n_cells

    @cached_property
    def boundary_lengths(self) -> np.ndarray:
        p = self.vertices[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        p = self.vertices[self.boundary_edges]
        t = p[:, 1] - p[:, 0]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1)[:, None]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        if self.dim == 1:
            x = self.vertices[:, 0]
            return np.array([int(np.argmin(x)), int(np.argmax(x))])
        return np.unique(self.boundary_edges)

    @property
    def boundary_length(self) -> float:
        return float(self.boundary_lengths.sum())

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """Exact distance from points to the polygonal boundary."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 1:
            x = self.vertices[self.boundary_vertices, 0]
            return np.min(np.abs(points[:, :1] - x[None, :]), axis=1)
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        ab = b - a
        ab2 = np.einsum("ij,ij->i", ab, ab)
        out = np.empty(len(points))
        chunk = max(1, 2_000_000 // max(len(a), 1))
        for start in range(0, len(points), chunk):
            q = points[start:start + chunk, None, :]
            t = np.clip(np.einsum("pij,ij->pi", q - a[None], ab) / ab2, 0.0, 1.0)
            proj = a[None] + t[..., None] * ab[None]
            out[start:start + chunk] = np.sqrt(((q - proj) ** 2).sum(axis=2)).min(axis=1)
        return out

    @cached_property
    def vertex_boundary_distance(self) -> np.ndarray:
        return self.distance_to_boundary(self.vertices)

    @cached_property
    def centroid_boundary_distance(self) -> np.ndarray:
        return self.distance_to_boundary(self.centroids)

    def check(self) -> None:
        """Raise InvalidMesh unless the topology invariants hold."""
        if self.dim == 2 and np.any(self.signed_areas <= 0):
            raise InvalidMesh("cells must have positive signed area")
        if self.dim == 2:
            boundary_loops(self.boundary_edges)

    def to_json(self) -> str:
        doc = {
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "boundary_edges": self.boundary_edges.tolist(),
            "cell_tags": self.cell_tags.tolist(),
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "MeshTopology":
        doc = json.loads(text)
        cells = np.asarray(doc["cells"], dtype=np.int64)
        be = np.asarray(doc["boundary_edges"], dtype=np.int64).reshape(-1, 2)
        return cls(
            vertices=np.asarray(doc["vertices"], dtype=float).reshape(-1, 2),
            cells=cells,
            boundary_edges=be,
            cell_tags=np.asarray(doc["cell_tags"], dtype=np.int64),
        )


def _boundary_from_cells(cells: np.ndarray) -> np.ndarray:
    directed = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inverse.ravel()] == 1
    return directed[once]


def boundary_loops(boundary_edges: np.ndarray) -> list[list[int]]:
    """Order the oriented boundary edges into one closed loop of edge indices.

    Raises InvalidMesh if the boundary is not a single closed loop.
    """
    if len(boundary_edges) == 0:
        raise InvalidMesh("mesh has no boundary edges")
    start_of = {}
    for k, (a, _) in enumerate(boundary_edges):
        if int(a) in start_of:
            raise InvalidMesh("boundary is not a simple loop")
        start_of[int(a)] = k
    loop = [0]
    seen = {0}
    while True:
        nxt = start_of.get(int(boundary_edges[loop[-1], 1]))
        if nxt is None:
            raise InvalidMesh("boundary loop is open")
        if nxt == loop[0]:
            break
        if nxt in seen:
            raise InvalidMesh("boundary is not a simple loop")
        seen.add(nxt)
        loop.append(nxt)
    if len(loop) != len(boundary_edges):
        raise InvalidMesh("boundary is disconnected")
    return [loop]


def _square_mesh(n: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(t, t)
    vertices = np.stack([x.ravel(), y.ravel()], axis=1)
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return vertices, cells


def _disc_mesh(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Ring k carries 6k equispaced vertices at radius k/n.
    vertices = [(0.0, 0.0)]
    ring_start = [0]
    for k in range(1, n + 1):
        ring_start.append(len(vertices))
        m = 6 * k
        for j in range(m):
            a = 2.0 * math.pi * j / m
            vertices.append(((k / n) * math.cos(a), (k / n) * math.sin(a)))
    cells = []
    for k in range(1, n + 1):
        n_in = max(6 * (k - 1), 1)
        n_out = 6 * k
        inner = [ring_start[k - 1] + (i % n_in) for i in range(n_in + 1)] if k > 1 else [0] * 7
        outer = [ring_start[k] + (o % n_out) for o in range(n_out + 1)]
        i = o = 0
        while i < n_in or o < n_out:
            if k == 1:
                cells.append((0, outer[o], outer[o + 1]))
                o += 1
                if o == n_out:
                    break
                continue
            next_in = (i + 1) / n_in if i < n_in else math.inf
            next_out = (o + 1) / n_out if o < n_out else math.inf
            if next_out <= next_in:
                cells.append((inner[i], outer[o], outer[o + 1]))
                o += 1
            else:
                cells.append((inner[i], outer[o], inner[i + 1]))
                i += 1
    return np.asarray(vertices, dtype=float), np.asarray(cells, dtype=np.int64)


def generate_mesh(domain_kind: str, resolution: int) -> MeshTopology:
    """Structured mesh of a reference domain.

    ``unit_square`` at resolution n is an n x n grid split into 2n^2 triangles;
    ``unit_disc`` uses n concentric rings of 6k vertices; ``interval`` is a
    uniform 1D mesh of (-1, 1) with n cells.
    """
    if not isinstance(resolution, (int, np.integer)) or resolution < 1:
        raise InvalidArgument(f"resolution must be a positive integer, got {resolution!r}")
    resolution = int(resolution)
    if domain_kind == "unit_square":
        vertices, cells = _square_mesh(resolution)
    elif domain_kind == "unit_disc":
        vertices, cells = _disc_mesh(resolution)
    elif domain_kind == "interval":
        x = np.linspace(-1.0, 1.0, resolution + 1)
        vertices = np.stack([x, np.zeros_like(x)], axis=1)
        cells = np.stack([np.arange(resolution), np.arange(1, resolution + 1)], axis=1)
        return MeshTopology(
            vertices=vertices,
            cells=cells,
            boundary_edges=np.zeros((0, 2), dtype=np.int64),
            cell_tags=np.zeros(resolution, dtype=np.int64),
            kind=domain_kind,
            resolution=resolution,
            metadata=dict(NOMINAL_CONSTANTS[domain_kind]),
        )
    else:
        raise InvalidArgument(f"unknown domain kind {domain_kind!r}; expected one of {DOMAIN_KINDS}")
    mesh = MeshTopology(
        vertices=vertices,
        cells=cells.astype(np.int64),
        boundary_edges=_boundary_from_cells(cells).astype(np.int64),
        cell_tags=np.zeros(len(cells), dtype=np.int64),
        kind=domain_kind,
        resolution=resolution,
        metadata=dict(NOMINAL_CONSTANTS[domain_kind]),
    )
    mesh.check()
    return mesh


def mesh_from_arrays(vertices, cells, cell_tags=None, kind="custom") -> MeshTopology:
    """Build a 2D mesh from raw arrays, deriving the oriented boundary."""
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    if cell_tags is None:
        cell_tags = np.zeros(len(cells), dtype=np.int64)
    mesh = MeshTopology(
        vertices=vertices,
        cells=cells,
        boundary_edges=_boundary_from_cells(cells).astype(np.int64),
        cell_tags=np.asarray(cell_tags, dtype=np.int64),
        kind=kind,
    )
    mesh.check()
    return mesh


@dataclass(frozen=True, eq=False)
class InclusionMask:
    """A union of mesh cells."""

    mesh: MeshTopology
    cells: np.ndarray
    area: float
    dist_to_boundary: float

    @classmethod
    def from_cells(cls, mesh: MeshTopology, cells) -> "InclusionMask":
        cells = np.unique(np.asarray(cells, dtype=np.int64))
        area = float(mesh.cell_areas[cells].sum()) if len(cells) else 0.0
        if len(cells):
            verts = np.unique(mesh.cells[cells])
            dist = float(mesh.vertex_boundary_distance[verts].min())
        else:
            dist = math.inf
        return cls(mesh=mesh, cells=cells, area=area, dist_to_boundary=dist)

    @property
    def indicator(self) -> np.ndarray:
        flags = np.zeros(self.mesh.n_cells, dtype=bool)
        flags[self.cells] = True
        return flags

    @property
    def is_empty(self) -> bool:
        return len(self.cells) == 0

    def __len__(self) -> int:
        return len(self.cells)

    def __or__(self, other: "InclusionMask") -> "InclusionMask":
        return InclusionMask.from_cells(self.mesh, np.union1d(self.cells, other.cells))

    def __and__(self, other: "InclusionMask") -> "InclusionMask":
        return InclusionMask.from_cells(self.mesh, np.intersect1d(self.cells, other.cells))

    def issubset(self, other: "InclusionMask") -> bool:
        return bool(np.all(np.isin(self.cells, other.cells)))


Shape = Callable[[np.ndarray, np.ndarray], np.ndarray]


def inclusion_mask(mesh: MeshTopology, shape: Shape) -> InclusionMask:
    """Cells whose centroid satisfies ``shape(x, y)`` (vectorised predicate)."""
    c = mesh.centroids
    inside = np.broadcast_to(np.asarray(shape(c[:, 0], c[:, 1]), dtype=bool), (mesh.n_cells,))
    return InclusionMask.from_cells(mesh, np.flatnonzero(inside))


def full_mask(mesh: MeshTopology) -> InclusionMask:
    return InclusionMask.from_cells(mesh, np.arange(mesh.n_cells))


def interior_offset(mesh: MeshTopology, r: float) -> InclusionMask:
    """Cells whose centroid lies farther than r from the boundary."""
    if r < 0:
        raise InvalidArgument("offset radius must be nonnegative")
    if r == 0:
        return full_mask(mesh)
    return InclusionMask.from_cells(mesh, np.flatnonzero(mesh.centroid_boundary_distance > r))


# Shape predicates used by experiments.

def disc(center, radius) -> Shape:
    cx, cy = center
    return lambda x, y: (x - cx) ** 2 + (y - cy) ** 2 < radius ** 2


def strip(x0, x1) -> Shape:
    return lambda x, y: (x > x0) & (x < x1)


def rectangle(x0, x1, y0, y1) -> Shape:
    return lambda x, y: (x > x0) & (x < x1) & (y > y0) & (y < y1)


def annulus(center, r_in, r_out) -> Shape:
    cx, cy = center
    return lambda x, y: ((x - cx) ** 2 + (y - cy) ** 2 >= r_in ** 2) & ((x - cx) ** 2 + (y - cy) ** 2 < r_out ** 2)


@dataclass(frozen=True, eq=False)
class BoundaryChart:
    """Arclength parameterisation of the boundary loop, counterclockwise."""

    mesh: MeshTopology
    vertex_order: np.ndarray   # boundary vertices in traversal order
    edge_order: np.ndarray     # boundary edge indices in traversal order
    arclength: np.ndarray      # arclength of vertex_order[k]
    total_length: float

    @property
    def arclength_of_vertex(self) -> dict[int, float]:
        return {int(v): float(s) for v, s in zip(self.vertex_order, self.arclength)}

    @cached_property
    def edge_start(self) -> np.ndarray:
        """Arclength of the start of each boundary edge, indexed like mesh.boundary_edges."""
        out = np.empty(len(self.edge_order))
        out[self.edge_order] = self.arclength
        return out

    @cached_property
    def edge_midpoint_arclength(self) -> np.ndarray:
        return self.edge_start + 0.5 * self.mesh.boundary_lengths

    def point_at(self, s) -> np.ndarray:
        """Boundary point at arclength s (wrapped)."""
        s = np.mod(np.asarray(s, dtype=float), self.total_length)
        k = np.clip(np.searchsorted(self.arclength, s, side="right") - 1, 0, len(self.arclength) - 1)
        e = self.edge_order[k]
        a = self.mesh.vertices[self.mesh.boundary_edges[e, 0]]
        b = self.mesh.vertices[self.mesh.boundary_edges[e, 1]]
        t = (s - self.arclength[k]) / self.mesh.boundary_lengths[e]
        return a + t[..., None] * (b - a)

    def edge_at(self, s) -> np.ndarray:
        """Boundary edge index containing arclength s (wrapped)."""
        s = np.mod(np.asarray(s, dtype=float), self.total_length)
        k = np.clip(np.searchsorted(self.arclength, s, side="right") - 1, 0, len(self.arclength) - 1)
        return self.edge_order[k]


def boundary_chart(mesh: MeshTopology) -> BoundaryChart:
    """Arclength chart starting at the lexicographically smallest boundary vertex."""
    if mesh.dim != 2:
        raise InvalidArgument("boundary charts are defined for 2D meshes")
    (loop,) = boundary_loops(mesh.boundary_edges)
    loop = np.asarray(loop)
    starts = mesh.boundary_edges[loop, 0]
    pts = mesh.vertices[starts]
    anchor = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    loop = np.roll(loop, -anchor)
    lengths = mesh.boundary_lengths[loop]
    arclength = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    return BoundaryChart(
        mesh=mesh,
        vertex_order=mesh.boundary_edges[loop, 0],
        edge_order=loop,
        arclength=arclength,
        total_length=float(lengths.sum()),
    )
