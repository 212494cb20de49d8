"""Simplicial meshes (intervals in 1D, triangles in 2D) with facet topology.

A :class:`Mesh` is immutable. Facets are stored once; an interior facet
records its two elements with the lower element id first, and its normal
``n_e`` is the outward normal of that first element. Boundary facets carry
the outward normal of the domain. In 1D facets are points, with the
conventions h_e = |e| = 1.
"""
from __future__ import annotations

import dataclasses
import io
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import (DegenerateElement, MixedSignFacet, NonConformingMesh,
                     ParseError, UnassignedBoundary)
from .quadrature import facet_rule, map_to_simplex

if TYPE_CHECKING:
    from .problem import ProblemSpec

INTERIOR, DIRICHLET, NEUMANN, BOUNDARY = 0, 1, 2, 3
KIND_NAMES = {INTERIOR: "interior", DIRICHLET: "dirichlet",
              NEUMANN: "neumann", BOUNDARY: "boundary"}
_LABELS = {"D": DIRICHLET, "N": NEUMANN}


@dataclass(frozen=True)
class Element:
    index: int
    vertices: tuple[int, ...]
    barycentre: np.ndarray
    diameter: float
    measure: float
    inradius: float
    facets: tuple[int, ...]
    normals: np.ndarray  # outward normal per local facet


@dataclass(frozen=True)
class Facet:
    index: int
    vertices: tuple[int, ...]
    kind: str
    elements: tuple[int, ...]
    normal: np.ndarray
    diameter: float
    measure: float


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh.

    Array attributes (all read-only):

    ``vertices`` (V, d); ``elements`` (E, d+1) vertex ids, counter-clockwise
    in 2D; ``facet_vertices`` (F, d); ``facet_elements`` (F, 2) with -1 in
    the second slot for boundary facets; ``facet_normals`` (F, d);
    ``facet_kind`` (F,) with codes INTERIOR/DIRICHLET/NEUMANN/BOUNDARY;
    ``element_facets`` (E, d+1).
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    facet_vertices: np.ndarray
    facet_elements: np.ndarray
    facet_normals: np.ndarray
    facet_kind: np.ndarray
    element_facets: np.ndarray
    facet_labels: tuple = ()
    h_nominal: float | None = None
    # derived geometry, filled in __post_init__
    barycentres: np.ndarray = field(init=False, repr=False)
    diameters: np.ndarray = field(init=False, repr=False)
    measures: np.ndarray = field(init=False, repr=False)
    inradii: np.ndarray = field(init=False, repr=False)
    facet_diameters: np.ndarray = field(init=False, repr=False)
    facet_measures: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = self.vertices[self.elements]  # (E, d+1, d)
        bary = verts.mean(axis=1)
        diff = verts[:, :, None, :] - verts[:, None, :, :]
        diam = np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))
        if self.dim == 1:
            meas = np.abs(verts[:, 1, 0] - verts[:, 0, 0])
            inr = meas / 2.0
            fdiam = np.ones(len(self.facet_vertices))
            fmeas = np.ones(len(self.facet_vertices))
        else:
            e1, e2 = verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]
            meas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
            fv = self.vertices[self.facet_vertices]
            flen = np.linalg.norm(fv[:, 1] - fv[:, 0], axis=1)
            fdiam, fmeas = flen, flen
            perim = flen[self.element_facets].sum(axis=1)
            inr = 2.0 * meas / perim
        if np.any(meas <= 0):
            raise DegenerateElement("element with zero measure")
        for name, val in [("barycentres", bary), ("diameters", diam), ("measures", meas),
                          ("inradii", inr), ("facet_diameters", fdiam),
                          ("facet_measures", fmeas)]:
            object.__setattr__(self, name, val)
        _freeze(self.vertices, self.elements, self.facet_vertices, self.facet_elements,
                self.facet_normals, self.facet_kind, self.element_facets, bary, diam, meas,
                inr, fdiam, fmeas)

    # sizes -----------------------------------------------------------------
    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_facets(self) -> int:
        return len(self.facet_vertices)

    @property
    def h(self) -> float:
        """Actual meshsize max h_T."""
        return float(self.diameters.max())

    @property
    def n_partial(self) -> int:
        """N_partial, the maximum number of facets per element."""
        return self.element_facets.shape[1]

    @property
    def interior_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_kind == INTERIOR)

    @property
    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_kind != INTERIOR)

    def facets_of_kind(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.facet_kind == kind)

    # record views ------------------------------------------------------------
    def element(self, t: int) -> Element:
        normals = np.array([self.facet_normals[f] if self.facet_elements[f, 0] == t
                            else -self.facet_normals[f] for f in self.element_facets[t]])
        return Element(t, tuple(int(v) for v in self.elements[t]), self.barycentres[t],
                       float(self.diameters[t]), float(self.measures[t]),
                       float(self.inradii[t]), tuple(int(f) for f in self.element_facets[t]),
                       normals)

    def facet(self, f: int) -> Facet:
        els = tuple(int(e) for e in self.facet_elements[f] if e >= 0)
        return Facet(f, tuple(int(v) for v in self.facet_vertices[f]),
                     KIND_NAMES[int(self.facet_kind[f])], els, self.facet_normals[f],
                     float(self.facet_diameters[f]), float(self.facet_measures[f]))

    def facet_coordinates(self) -> np.ndarray:
        """Vertex coordinates per facet, shape (F, d, d)."""
        return self.vertices[self.facet_vertices]

    def facet_quadrature(self, n: int, facets=None):
        """Physical nodes (F, Q, d) and weights (F, Q) on the selected facets."""
        facets = np.arange(self.n_facets) if facets is None else np.asarray(facets)
        rule = facet_rule(self.dim, n)
        if len(facets) == 0:
            return np.zeros((0, rule.n_points, self.dim)), np.zeros((0, rule.n_points))
        return map_to_simplex(rule, self.vertices[self.facet_vertices[facets]])

    def with_kinds(self, kinds: np.ndarray) -> "Mesh":
        return dataclasses.replace(self, facet_kind=np.asarray(kinds, dtype=np.int8).copy(),
                                   vertices=self.vertices.copy(), elements=self.elements.copy())

    def flipped(self) -> "Mesh":
        """Same mesh with every interior facet's element order and normal reversed."""
        fe = self.facet_elements.copy()
        fn = self.facet_normals.copy()
        inner = self.facet_kind == INTERIOR
        fe[inner] = fe[inner][:, ::-1]
        fn[inner] = -fn[inner]
        return dataclasses.replace(self, facet_elements=fe, facet_normals=fn,
                                   vertices=self.vertices.copy(),
                                   elements=self.elements.copy(),
                                   facet_kind=self.facet_kind.copy())

    def locate(self, points) -> np.ndarray:
        """Index of an element containing each point (-1 if outside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), -1)
        verts = self.vertices[self.elements]
        tol = 1e-12
        if self.dim == 1:
            lo = verts[:, :, 0].min(1)
            hi = verts[:, :, 0].max(1)
            for t in range(self.n_elements):
                hit = (out < 0) & (pts[:, 0] >= lo[t] - tol) & (pts[:, 0] <= hi[t] + tol)
                out[hit] = t
            return out
        a, b, c = verts[:, 0], verts[:, 1], verts[:, 2]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        for start in range(0, len(pts), 2048):
            chunk = pts[start:start + 2048]
            dx = chunk[:, None, 0] - a[None, :, 0]
            dy = chunk[:, None, 1] - a[None, :, 1]
            l1 = (dx * (c[:, 1] - a[:, 1]) - dy * (c[:, 0] - a[:, 0])) / det
            l2 = (dy * (b[:, 0] - a[:, 0]) - dx * (b[:, 1] - a[:, 1])) / det
            inside = (l1 >= -tol) & (l2 >= -tol) & (l1 + l2 <= 1 + tol)
            found = inside.any(axis=1)
            out[start:start + len(chunk)] = np.where(found, inside.argmax(axis=1), -1)
        return out


# construction ----------------------------------------------------------------

def _build(dim: int, vertices: np.ndarray, elements: np.ndarray,
           labels: dict | None = None, h_nominal: float | None = None) -> Mesh:
    vertices = np.asarray(vertices, dtype=float).reshape(-1, dim)
    elements = np.asarray(elements, dtype=np.int64).reshape(-1, dim + 1).copy()
    if dim == 1:
        order = np.argsort(vertices[elements, 0], axis=1)
        elements = np.take_along_axis(elements, order, axis=1)
        local = [(0,), (1,)]
    else:
        p = vertices[elements]
        signed = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        if np.any(signed == 0):
            raise DegenerateElement("triangle with zero area")
        flip = signed < 0
        elements[flip] = elements[flip][:, [0, 2, 1]]
        local = [(0, 1), (1, 2), (2, 0)]

    lookup: dict[tuple, int] = {}
    fverts, felems, fnormals = [], [], []
    efacets = np.empty((len(elements), dim + 1), dtype=np.int64)
    for t, el in enumerate(elements):
        for k, loc in enumerate(local):
            fv = tuple(int(el[j]) for j in loc)
            key = tuple(sorted(fv))
            f = lookup.get(key)
            if f is None:
                f = len(fverts)
                lookup[key] = f
                fverts.append(fv)
                felems.append([t, -1])
                if dim == 1:
                    fnormals.append([-1.0] if k == 0 else [1.0])
                else:
                    d = vertices[fv[1]] - vertices[fv[0]]
                    fnormals.append([d[1] / np.hypot(*d), -d[0] / np.hypot(*d)])
            elif felems[f][1] == -1 and felems[f][0] != t:
                felems[f][1] = t
            else:
                raise NonConformingMesh(f"facet {key} shared by more than two elements")
            efacets[t, k] = f

    fverts = np.array(fverts, dtype=np.int64).reshape(-1, dim)
    felems = np.array(felems, dtype=np.int64)
    fnormals = np.array(fnormals, dtype=float)
    kinds = np.where(felems[:, 1] >= 0, INTERIOR, BOUNDARY).astype(np.int8)

    if dim == 2:
        _check_hanging(vertices, fverts[kinds == BOUNDARY])

    flabels = [""] * len(fverts)
    for key, lab in (labels or {}).items():
        f = lookup.get(tuple(sorted(key)))
        if f is None or kinds[f] == INTERIOR:
            raise ParseError(f"boundary label on {key}, which is not a boundary facet")
        flabels[f] = lab
    return Mesh(dim, vertices, elements, fverts, felems, fnormals, kinds, efacets,
                tuple(flabels), h_nominal)


def _check_hanging(vertices, edges):
    if len(edges) == 0:
        return
    a, b = vertices[edges[:, 0]], vertices[edges[:, 1]]
    d = b - a
    L2 = (d ** 2).sum(1)
    for v, x in enumerate(vertices):
        t = ((x - a) * d).sum(1) / L2
        dist = np.abs((x[0] - a[:, 0]) * d[:, 1] - (x[1] - a[:, 1]) * d[:, 0]) / np.sqrt(L2)
        hit = (t > 1e-12) & (t < 1 - 1e-12) & (dist < 1e-12 * np.sqrt(L2))
        if hit.any():
            raise NonConformingMesh(f"vertex {v} lies inside edge {tuple(edges[hit][0])}")


def generate_structured(n: int, dim: int = 2) -> Mesh:
    """Uniform mesh of the unit square (n x n squares, each cut along the
    positive-slope diagonal) or of the unit interval (n cells)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if dim == 1:
        return _build(1, np.linspace(0.0, 1.0, n + 1)[:, None],
                      np.column_stack([np.arange(n), np.arange(1, n + 1)]), h_nominal=1.0 / n)
    if dim != 2:
        raise ValueError("structured meshes exist for dim 1 and 2 only")
    g = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(g, g)  # vertex id = j*(n+1) + i
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return _build(2, vertices, np.array(tris), h_nominal=1.0 / n)


# boundary classification -----------------------------------------------------

def classify_boundary(mesh: Mesh, problem: "ProblemSpec", n_quad: int = 3) -> Mesh:
    """Assign Dirichlet/Neumann kinds to the boundary facets.

    Precedence: a label from the mesh file, then the problem's explicit
    region declaration, then the sign of beta . n (inflow -> Dirichlet,
    beta . n >= 0 -> Neumann). beta . n is sampled at the facet quadrature
    nodes; a strict sign change on one boundary facet is an error.
    """
    kinds = mesh.facet_kind.copy()
    bnd = np.flatnonzero(kinds != INTERIOR)
    if len(bnd) == 0:
        return mesh.with_kinds(kinds)
    pts, _ = mesh.facet_quadrature(n_quad, bnd)
    normals = mesh.facet_normals[bnd]
    coeffs = problem.coefficients
    if coeffs.beta_is_zero:
        bn = np.zeros(pts.shape[:2])
    else:
        beta = coeffs.beta_values(pts.reshape(-1, mesh.dim)).reshape(*pts.shape)
        bn = np.einsum("fqd,fd->fq", beta, normals)
    scale = max(np.abs(bn).max(), 1.0)
    tol = 1e-13 * scale
    mixed = (bn > tol).any(axis=1) & (bn < -tol).any(axis=1)
    if mixed.any():
        f = bnd[np.flatnonzero(mixed)[0]]
        raise MixedSignFacet(f"beta.n changes sign on boundary facet {f}")
    inflow = (bn < -tol).all(axis=1)

    region = problem.boundary.region
    mids = pts.mean(axis=1)
    for loc, f in enumerate(bnd):
        label = mesh.facet_labels[f] if mesh.facet_labels else ""
        if label:
            kinds[f] = _LABELS[label]
        elif region is not None:
            lab = region(mids[loc], normals[loc])
            if lab not in _LABELS:
                raise UnassignedBoundary(f"boundary facet {f} at {mids[loc]} matches "
                                         "neither the Dirichlet nor the Neumann declaration")
            kinds[f] = _LABELS[lab]
        else:
            kinds[f] = DIRICHLET if inflow[loc] else NEUMANN
    return mesh.with_kinds(kinds)


# assumption validators ---------------------------------------------------------

@dataclass(frozen=True)
class AssumptionReport:
    shape_regularity: float   # max h_T / rho_T
    grading: float            # max h_T / h_e over T and its facets
    chunkiness: float         # max h_T |dT| / |T|


def validate_assumptions(mesh: Mesh) -> AssumptionReport:
    """Advisory mesh constants; never raises.

    In 1D the facet diameter convention h_e = 1 makes h_T/h_e meaningless, so
    the grading constant there is the largest size ratio of adjacent cells.
    """
    h = mesh.diameters
    shape = float(np.max(h / mesh.inradii))
    if mesh.dim == 1:
        inner = mesh.interior_facets
        t1, t2 = mesh.facet_elements[inner].T
        ratio = np.maximum(h[t1] / h[t2], h[t2] / h[t1]) if len(inner) else np.ones(1)
        grading = float(ratio.max())
        boundary_measure = np.full(mesh.n_elements, 2.0)
    else:
        grading = float(np.max(h[:, None] / mesh.facet_diameters[mesh.element_facets]))
        boundary_measure = mesh.facet_measures[mesh.element_facets].sum(axis=1)
    chunk = float(np.max(h * boundary_measure / mesh.measures))
    return AssumptionReport(shape, grading, chunk)


# text format ---------------------------------------------------------------------

def _tokens(text: str) -> Iterable[list[str]]:
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line.split()


def import_mesh(text: str) -> Mesh:
    """Parse the line-oriented mesh format (see :func:`export_mesh`)."""
    lines = list(_tokens(text))
    pos = 0

    def header(name):
        nonlocal pos
        if pos >= len(lines) or lines[pos][0] != name or len(lines[pos]) != 2:
            raise ParseError(f"expected '{name} <count>' at record {pos + 1}")
        try:
            val = int(lines[pos][1])
        except ValueError:
            raise ParseError(f"bad count in '{' '.join(lines[pos])}'") from None
        pos += 1
        return val

    def block(count, width, conv):
        nonlocal pos
        if pos + count > len(lines):
            raise ParseError("file ended inside a block")
        rows = lines[pos:pos + count]
        pos += count
        try:
            out = [[conv(tok) for tok in r[:width]] + r[width:] for r in rows]
        except ValueError as exc:
            raise ParseError(str(exc)) from None
        return out

    dim = header("dim")
    if dim not in (1, 2):
        raise ParseError(f"unsupported dimension {dim}")
    nv = header("vertices")
    vrows = block(nv, dim, float)
    if any(len(r) != dim for r in vrows):
        raise ParseError("vertex line has wrong number of coordinates")
    ne = header("elements")
    erows = block(ne, dim + 1, int)
    if any(len(r) != dim + 1 for r in erows):
        raise ParseError("element line has wrong number of vertex ids")
    elements = np.array(erows, dtype=np.int64).reshape(-1, dim + 1)
    if elements.size and (elements.min() < 0 or elements.max() >= nv):
        raise ParseError("element references a vertex that does not exist")
    labels = {}
    if pos < len(lines):
        nb = header("boundary")
        for r in block(nb, dim, int):
            if len(r) != dim + 1 or r[dim] not in _LABELS:
                raise ParseError(f"bad boundary line {r}")
            labels[tuple(r[:dim])] = r[dim]
    if pos != len(lines):
        raise ParseError("trailing content after mesh data")
    return _build(dim, np.array(vrows, dtype=float), elements, labels)


def export_mesh(mesh: Mesh) -> str:
    buf = io.StringIO()
    buf.write(f"dim {mesh.dim}\nvertices {len(mesh.vertices)}\n")
    for v in mesh.vertices:
        buf.write(" ".join(repr(float(c)) for c in v) + "\n")
    buf.write(f"elements {mesh.n_elements}\n")
    for el in mesh.elements:
        buf.write(" ".join(str(int(v)) for v in el) + "\n")
    labelled = [(f, lab) for f, lab in enumerate(mesh.facet_labels) if lab]
    if labelled:
        buf.write(f"boundary {len(labelled)}\n")
        for f, lab in labelled:
            buf.write(" ".join(str(int(v)) for v in mesh.facet_vertices[f]) + f" {lab}\n")
    return buf.getvalue()
