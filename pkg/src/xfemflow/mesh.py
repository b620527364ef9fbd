"""Quadrilateral meshes: structured builders for the two benchmark domains,
an ASCII mesh reader/writer, and validation.

Node ids are 0-based array indices.  Plate meshes duplicate the nodes
strictly inside the plate: the original node belongs to the elements above
the plate and its twin to the elements below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .elements import EDGE_NODES, N_NODES, jacobian_transform, shape_from_factors, factors
from .enrichment import Corner
from .errors import (
    ConformityError,
    DomainError,
    GeometryError,
    MeshParseError,
    MeshValidationError,
)
from .quadrature import gauss_rule_2d

TAGS = ("body", "free_surface", "bottom", "matching", "dirichlet", "symmetry")


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    order: int
    edge_element: np.ndarray
    edge_local: np.ndarray
    edge_tag: np.ndarray
    twins: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    corners: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def node_face(self) -> np.ndarray:
        """+1 everywhere except -1 on the lower-face twin of each pair."""
        face = np.ones(self.n_nodes)
        if len(self.twins):
            face[self.twins[:, 1]] = -1.0
        return face

    def twin_of(self) -> np.ndarray:
        out = np.full(self.n_nodes, -1, dtype=np.int64)
        if len(self.twins):
            out[self.twins[:, 0]] = self.twins[:, 1]
            out[self.twins[:, 1]] = self.twins[:, 0]
        return out

    def edges_with_tag(self, tag: str):
        sel = self.edge_tag == tag
        return self.edge_element[sel], self.edge_local[sel]

    def edge_nodes(self, element: int, local: int) -> np.ndarray:
        return self.elements[element, list(EDGE_NODES[self.order][local])]

    def nodes_with_tag(self, tag: str) -> np.ndarray:
        els, locs = self.edges_with_tag(tag)
        if len(els) == 0:
            return np.zeros(0, dtype=np.int64)
        idx = np.array(EDGE_NODES[self.order])[locs]
        return np.unique(self.elements[els[:, None], idx])

    def element_centroids(self) -> np.ndarray:
        return self.nodes[self.elements[:, :4]].mean(axis=1)


# ----------------------------------------------------------------------------
# construction helpers


def _merge_points(points: np.ndarray, tol: float):
    """Merge coincident points; returns (unique_points, index_map)."""
    n = len(points)
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=tol, output_type="ndarray")
    if len(pairs) == 0:
        return points.copy(), np.arange(n)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # number components by first appearance
    first = np.full(labels.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n))
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    index = rank[labels]
    return points[np.sort(first)], index


def _block(corners, s, t):
    """Corner-node grid of a straight-sided block via bilinear interpolation.

    ``corners`` are the logical (0,0), (1,0), (1,1), (0,1) vertices; ``s``
    and ``t`` the monotone parameter values in [0, 1].
    """
    p00, p10, p11, p01 = (np.asarray(c, dtype=float) for c in corners)
    S, T = np.meshgrid(s, t, indexing="ij")
    S = S[..., None]
    T = T[..., None]
    pts = (1 - S) * (1 - T) * p00 + S * (1 - T) * p10 + S * T * p11 + (1 - S) * T * p01
    nx, ny = len(s) - 1, len(t) - 1
    ids = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    quads = np.stack(
        [ids[:-1, :-1], ids[1:, :-1], ids[1:, 1:], ids[:-1, 1:]], axis=-1
    ).reshape(-1, 4)
    return pts.reshape(-1, 2), quads


def _assemble_blocks(blocks, tol):
    pts, quads, off = [], [], 0
    for p, q in blocks:
        pts.append(p)
        quads.append(q + off)
        off += len(p)
    pts = np.concatenate(pts)
    quads = np.concatenate(quads)
    nodes, index = _merge_points(pts, tol)
    return nodes, index[quads]


def _unique_edges(quads):
    """Unique undirected corner edges and, per element/local edge, the edge id."""
    loc = np.array([(0, 1), (1, 2), (2, 3), (3, 0)])
    e = quads[:, loc]  # (E, 4, 2)
    pair = np.sort(e, axis=-1).reshape(-1, 2).astype(np.int64)
    n = int(pair.max()) + 1 if len(pair) else 1
    # scalar keys sort much faster than row-wise unique
    keys, inv, counts = np.unique(pair[:, 0] * n + pair[:, 1], return_inverse=True, return_counts=True)
    uniq = np.stack([keys // n, keys % n], axis=1)
    return uniq, inv.reshape(-1, 4), counts


def _add_midnodes(nodes, quads):
    uniq, inv, _ = _unique_edges(quads)
    mids = 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])
    elements = np.concatenate([quads, len(nodes) + inv], axis=1)
    return np.concatenate([nodes, mids]), elements


def _boundary_edges(elements):
    """(element, local edge) pairs of edges that belong to a single element."""
    uniq, inv, counts = _unique_edges(elements[:, :4])
    if np.any(counts > 2):
        raise ConformityError("an edge is shared by more than two elements")
    single = counts[inv] == 1
    el, loc = np.nonzero(single)
    return el, loc


def _edge_midpoints(nodes, elements, el, loc):
    loc_pairs = np.array([(0, 1), (1, 2), (2, 3), (3, 0)])[loc]
    a = nodes[elements[el, loc_pairs[:, 0]]]
    b = nodes[elements[el, loc_pairs[:, 1]]]
    return 0.5 * (a + b)


def _check_order(order):
    if isinstance(order, str):
        order = {"linear": 1, "quadratic": 2}.get(order.lower(), order)
    if order not in (1, 2):
        raise DomainError(f"order must be linear/1 or quadratic/2, got {order!r}")
    return order


def _ratio_int(value, step, what):
    n = value / step
    if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)) or round(n) < 1:
        raise GeometryError(f"{what}={value} is not an integer multiple of delta_h={step}")
    return int(round(n))


# ----------------------------------------------------------------------------
# flat plate


def build_plate_domain(half_width: float = 1.0, domain_half_size: float = 2.0,
                       delta_h: float = 0.5, order=1) -> Mesh:
    """Uniform square mesh of [-L, L]^2 around a plate on y = 0, |x| <= a.

    Outer edges are tagged ``dirichlet``, plate faces ``body``.  Nodes
    strictly inside the plate are doubled; the tips stay single-valued.
    """
    order = _check_order(order)
    a, L = float(half_width), float(domain_half_size)
    if not (a > 0 and delta_h > 0):
        raise DomainError("half_width and delta_h must be positive")
    if not L > a:
        raise DomainError("domain_half_size must exceed the plate half-width")
    na = _ratio_int(a, delta_h, "half_width")
    nl = _ratio_int(L, delta_h, "domain_half_size")
    s = np.linspace(0.0, 1.0, 2 * nl + 1)
    pts, quads = _block([(-L, -L), (L, -L), (L, L), (-L, L)], s, s)
    # snap plate-line coordinates exactly
    pts[np.abs(pts[:, 1]) < 1e-12 * L, 1] = 0.0
    nodes, elements = pts, quads
    if order == 2:
        nodes, elements = _add_midnodes(nodes, elements)
    tol = 1e-9 * delta_h
    on_plate = (np.abs(nodes[:, 1]) <= tol) & (np.abs(nodes[:, 0]) < a - tol)
    plate_ids = np.nonzero(on_plate)[0]
    twin_ids = len(nodes) + np.arange(len(plate_ids))
    remap = np.full(len(nodes), -1, dtype=np.int64)
    remap[plate_ids] = twin_ids
    centroid_y = nodes[elements[:, :4]].mean(axis=1)[:, 1]
    below = centroid_y < 0
    sub = elements[below]
    swap = remap[sub] >= 0
    sub[swap] = remap[sub][swap]
    elements = elements.copy()
    elements[below] = sub
    nodes = np.concatenate([nodes, nodes[plate_ids]])
    twins = np.column_stack([plate_ids, twin_ids])

    el, loc = _boundary_edges(elements)
    mid = _edge_midpoints(nodes, elements, el, loc)
    outer = (np.abs(np.abs(mid[:, 0]) - L) <= tol) | (np.abs(np.abs(mid[:, 1]) - L) <= tol)
    plate = (np.abs(mid[:, 1]) <= tol) & (np.abs(mid[:, 0]) <= a + tol)
    if np.any(outer == plate):
        raise MeshValidationError("could not classify every plate-domain boundary edge")
    tags = np.where(outer, "dirichlet", "body").astype(object)

    tips = []
    for xt, wall in ((-a, 0.0), (a, math.pi)):
        nid = int(np.argmin(np.hypot(nodes[:, 0] - xt, nodes[:, 1])))
        tips.append(Corner((xt, 0.0), 0.0, wall, node=nid))
    mesh = Mesh(nodes, elements, order, el, loc, tags, twins, tuple(tips),
                {"case": "flat_plate", "a": a, "L": L, "delta_h": delta_h})
    validate_mesh(mesh)
    return mesh


# ----------------------------------------------------------------------------
# heaving rectangle (half domain, symmetry at x = 0)


def _graded(n, ratio, toward_start=False):
    """Parameters in [0, 1] with element sizes growing geometrically by ``ratio``.

    Sizes grow from t = 1 toward t = 0 unless ``toward_start``.
    """
    if n < 1:
        raise DomainError("block element count must be positive")
    if abs(ratio - 1.0) < 1e-14:
        return np.linspace(0.0, 1.0, n + 1)
    sizes = ratio ** np.arange(n, dtype=float)
    d = np.concatenate([[0.0], np.cumsum(sizes)])
    d /= d[-1]
    return d if toward_start else 1.0 - d[::-1]


def build_rectangle_domain(beam: float = 2.0, draft: float = 1.0, depth: float | None = None,
                           lx: float = 20.0, n_rx: int = 15, n_ox: int = 120, n_oy: int = 20,
                           order=1, stretch: float = 1.1, inner_size: float | None = None,
                           n_ix: int | None = None, n_ry: int | None = None,
                           n_iy: int | None = None) -> Mesh:
    """Five-block mesh of the half domain x >= 0 around a floating rectangle.

    Blocks I (below the hull bottom) and II (beside the side wall) share the
    diagonal through the submerged corner and span ``inner_size`` (default:
    the draft) beyond the hull.  Block III lies under the free surface out to
    the matching boundary at ``x = beam/2 + lx``; blocks IV and V fill the
    water column down to ``y = -depth`` with element sizes growing by
    ``stretch`` toward the sea bottom.
    """
    order = _check_order(order)
    b2, d = beam / 2.0, float(draft)
    h = 40.0 * d if depth is None else float(depth)
    c = d if inner_size is None else float(inner_size)
    n = int(n_rx)
    for name, val in (("n_ix", n_ix), ("n_ry", n_ry), ("n_iy", n_iy)):
        if val is not None and int(val) != n:
            raise ConformityError(f"{name}={val} must equal n_rx={n} for blocks I and II to match")
    if not (beam > 0 and d > 0 and c > 0):
        raise DomainError("beam, draft and inner_size must be positive")
    if not h > d + c:
        raise DomainError("depth must exceed draft + inner_size")
    if not lx > c:
        raise DomainError("matching distance lx must exceed inner_size")
    if min(n, n_ox, n_oy) < 1:
        raise DomainError("element counts must be positive")
    xm, yi = b2 + lx, -(d + c)
    u = np.linspace(0.0, 1.0, n + 1)
    uo = np.linspace(0.0, 1.0, n_ox + 1)
    tv = _graded(n_oy, stretch)  # sizes grow toward t = 0 (the sea bottom)
    blocks = [
        _block([(0.0, yi), (b2 + c, yi), (b2, -d), (0.0, -d)], u, u),  # I
        _block([(b2, -d), (b2 + c, yi), (b2 + c, 0.0), (b2, 0.0)], u, u),  # II
        _block([(b2 + c, yi), (xm, yi), (xm, 0.0), (b2 + c, 0.0)], uo, u),  # III
        _block([(0.0, -h), (b2 + c, -h), (b2 + c, yi), (0.0, yi)], u, tv),  # IV
        _block([(b2 + c, -h), (xm, -h), (xm, yi), (b2 + c, yi)], uo, tv),  # V
    ]
    size = max(xm, h)
    nodes, quads = _assemble_blocks(blocks, 1e-12 * size)
    if order == 2:
        nodes, quads = _add_midnodes(nodes, quads)
    el, loc = _boundary_edges(quads)
    mid = _edge_midpoints(nodes, quads, el, loc)
    tol = 1e-9 * size
    tags = np.empty(len(el), dtype=object)
    tags[np.abs(mid[:, 0]) <= tol] = "symmetry"
    tags[np.abs(mid[:, 1]) <= tol] = "free_surface"
    tags[np.abs(mid[:, 1] + h) <= tol] = "bottom"
    tags[np.abs(mid[:, 0] - xm) <= tol] = "matching"
    hull = ((np.abs(mid[:, 0] - b2) <= tol) & (mid[:, 1] > -d - tol)) | (
        (np.abs(mid[:, 1] + d) <= tol) & (mid[:, 0] < b2 + tol))
    tags[hull] = "body"
    if any(t is None for t in tags):
        raise MeshValidationError("unclassified boundary edge in rectangle mesh")
    cid = int(np.argmin(np.hypot(nodes[:, 0] - b2, nodes[:, 1] + d)))
    corner = Corner((b2, -d), math.pi / 2.0, math.pi, node=cid)
    meta = {"case": "heaving_rectangle", "beam": beam, "draft": d, "depth": h, "lx": lx,
            "n_rx": n, "n_ox": n_ox, "n_oy": n_oy, "stretch": stretch, "inner_size": c}
    mesh = Mesh(nodes, quads, order, el, loc, tags, np.zeros((0, 2), dtype=np.int64),
                (corner,), meta)
    validate_mesh(mesh)
    return mesh


# ----------------------------------------------------------------------------
# validation


def element_jacobians(mesh: Mesh, n_gauss: int = 3) -> np.ndarray:
    rule = gauss_rule_2d(n_gauss)
    _, dN = shape_from_factors(mesh.order, *factors(rule.points[:, 0], rule.points[:, 1]))
    coords = mesh.nodes[mesh.elements]  # (E, n, 2)
    J = np.einsum("qni,enj->eqij", dN, coords)
    return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]


def validate_mesh(mesh: Mesh) -> None:
    """Raise MeshValidationError/ConformityError if the mesh is unusable."""
    if mesh.elements.ndim != 2 or mesh.elements.shape[1] != N_NODES[mesh.order]:
        raise MeshValidationError("element connectivity does not match the element order")
    if mesh.elements.size and (mesh.elements.min() < 0 or mesh.elements.max() >= mesh.n_nodes):
        raise MeshValidationError("element references an unknown node")
    det = element_jacobians(mesh)
    bad = np.nonzero(np.any(det <= 0.0, axis=1))[0]
    if len(bad):
        raise MeshValidationError(f"non-positive Jacobian in element {int(bad[0])}")
    el, loc = _boundary_edges(mesh.elements)
    have = set(zip(mesh.edge_element.tolist(), mesh.edge_local.tolist()))
    want = set(zip(el.tolist(), loc.tolist()))
    if len(have) != len(mesh.edge_element):
        raise MeshValidationError("boundary edge listed more than once")
    if want - have:
        e, l = sorted(want - have)[0]
        raise MeshValidationError(f"boundary edge (element {e}, local edge {l}) has no tag")
    if have - want:
        e, l = sorted(have - want)[0]
        raise MeshValidationError(f"tagged edge (element {e}, local edge {l}) is not on the boundary")
    bad_tags = set(mesh.edge_tag.tolist()) - set(TAGS)
    if bad_tags:
        raise MeshValidationError(f"unknown boundary tags {sorted(bad_tags)}")
    # every boundary vertex must have even degree in the boundary graph
    pairs = np.array([(0, 1), (1, 2), (2, 3), (3, 0)])[mesh.edge_local]
    ends = np.concatenate([mesh.elements[mesh.edge_element, pairs[:, 0]],
                           mesh.elements[mesh.edge_element, pairs[:, 1]]])
    deg = np.bincount(ends, minlength=mesh.n_nodes)
    if np.any(deg % 2):
        raise MeshValidationError("boundary is not closed")
    if len(mesh.twins):
        t = mesh.twins
        if np.any(np.abs(mesh.nodes[t[:, 0]] - mesh.nodes[t[:, 1]]) > 0):
            raise MeshValidationError("twin nodes must share coordinates")
        if len(np.unique(t)) != t.size:
            raise MeshValidationError("a node appears in more than one twin pair")
        for row in mesh.elements:
            s = set(row.tolist())
            if any(a in s and b in s for a, b in t.tolist()):
                raise MeshValidationError("twin nodes appear in the same element")


# ----------------------------------------------------------------------------
# mesh file


_ORDER_WORDS = {"1": 1, "linear": 1, "4": 1, "2": 2, "quadratic": 2, "8": 2}


def read_mesh_file(path) -> Mesh:
    """Read the ASCII mesh format.

    Sections ``NODES`` (id x y), ``ELEMENTS`` (id order n1..n4|n1..n8),
    ``EDGES`` (element localEdge tag; localEdge 1..4 runs from corner k to
    corner k+1) and optional ``TWINS`` (upperId lowerId).  ``#`` starts a
    comment.
    """
    path = Path(path)
    section = None
    node_ids, coords = {}, []
    elem_ids, elems, orders = {}, [], set()
    edges, twins = [], []
    seen = set()
    with path.open() as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head = line.upper()
            if head in ("NODES", "ELEMENTS", "EDGES", "TWINS"):
                section = head
                seen.add(head)
                continue
            parts = line.split()
            if section is None:
                raise MeshParseError(f"data before any section header: {line!r}", lineno)
            try:
                if section == "NODES":
                    if len(parts) != 3:
                        raise MeshParseError("expected 'id x y'", lineno)
                    nid = int(parts[0])
                    if nid in node_ids:
                        raise MeshParseError(f"duplicate node id {nid}", lineno)
                    node_ids[nid] = len(coords)
                    coords.append((float(parts[1]), float(parts[2])))
                elif section == "ELEMENTS":
                    if len(parts) < 2 or parts[1].lower() not in _ORDER_WORDS:
                        raise MeshParseError(f"unknown element type {parts[1] if len(parts) > 1 else ''!r}", lineno)
                    order = _ORDER_WORDS[parts[1].lower()]
                    conn = parts[2:]
                    if len(conn) != N_NODES[order]:
                        raise MeshParseError(
                            f"element of order {order} needs {N_NODES[order]} nodes, got {len(conn)}", lineno)
                    eid = int(parts[0])
                    if eid in elem_ids:
                        raise MeshParseError(f"duplicate element id {eid}", lineno)
                    try:
                        row = [node_ids[int(v)] for v in conn]
                    except KeyError as exc:
                        raise MeshParseError(f"unknown node id {exc.args[0]}", lineno) from None
                    elem_ids[eid] = len(elems)
                    elems.append(row)
                    orders.add(order)
                elif section == "EDGES":
                    if len(parts) != 3:
                        raise MeshParseError("expected 'element localEdge tag'", lineno)
                    eid, k, tag = int(parts[0]), int(parts[1]), parts[2].lower()
                    if eid not in elem_ids:
                        raise MeshParseError(f"unknown element id {eid}", lineno)
                    if k not in (1, 2, 3, 4):
                        raise MeshParseError(f"local edge must be 1..4, got {k}", lineno)
                    if tag not in TAGS:
                        raise MeshParseError(f"unknown boundary tag {tag!r}", lineno)
                    edges.append((elem_ids[eid], k - 1, tag))
                elif section == "TWINS":
                    if len(parts) != 2:
                        raise MeshParseError("expected 'idA idB'", lineno)
                    try:
                        twins.append((node_ids[int(parts[0])], node_ids[int(parts[1])]))
                    except KeyError as exc:
                        raise MeshParseError(f"unknown node id {exc.args[0]}", lineno) from None
            except ValueError as exc:
                raise MeshParseError(f"malformed number ({exc})", lineno) from None
    for need in ("NODES", "ELEMENTS", "EDGES"):
        if need not in seen:
            raise MeshParseError(f"missing {need} section")
    if not elems:
        raise MeshParseError("no elements")
    if len(orders) != 1:
        raise MeshValidationError("all elements must have the same order")
    order = orders.pop()
    el = np.array([e[0] for e in edges], dtype=np.int64)
    loc = np.array([e[1] for e in edges], dtype=np.int64)
    tags = np.array([e[2] for e in edges], dtype=object)
    mesh = Mesh(np.array(coords, dtype=float), np.array(elems, dtype=np.int64), order,
                el, loc, tags, np.array(twins, dtype=np.int64).reshape(-1, 2), (),
                {"source": str(path)})
    validate_mesh(mesh)
    return mesh


def write_mesh_file(mesh: Mesh, path) -> None:
    """Write ``mesh`` in the format read by :func:`read_mesh_file` (1-based ids)."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("NODES\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i + 1} {float(x)!r} {float(y)!r}\n")
        fh.write("ELEMENTS\n")
        for i, row in enumerate(mesh.elements):
            fh.write(f"{i + 1} {mesh.order} " + " ".join(str(v + 1) for v in row) + "\n")
        fh.write("EDGES\n")
        for e, k, t in zip(mesh.edge_element, mesh.edge_local, mesh.edge_tag):
            fh.write(f"{e + 1} {k + 1} {t}\n")
        if len(mesh.twins):
            fh.write("TWINS\n")
            for a, b in mesh.twins:
                fh.write(f"{a + 1} {b + 1}\n")
