"""Triangulated fundamental octagon with side identifications.

Every triangle corner is a *point* in the disk chart of the octagon.  Points on
paired sides (and the eight octagon corners) are copies of one *logical*
vertex: ``points[p] == deck[p] . points[rep[logical[p]]]`` for a group element
``deck[p]``.  Fields on the closed surface live on logical vertices; geometric
quantities are always computed from the chart positions of the corners.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .. import geometry as geo
from .group import FuchsianGroup, _element_key, build_genus2_octagon, octagon_geometry

BASE_SUBDIVISIONS = 12
MESH_FORMAT = "hitchlab-mesh/1"


@dataclass(eq=False)
class SurfaceMesh:
    group: FuchsianGroup
    level: int
    subdivisions: int
    points: np.ndarray  # (P,) complex chart positions
    logical: np.ndarray  # (P,) logical vertex of each point
    deck: np.ndarray  # (P,) index into deck_words
    deck_words: list
    rep: np.ndarray  # (V,) representative point of each logical vertex
    triangles: np.ndarray  # (T, 3) point indices, counter-clockwise
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self):
        return len(self.rep)

    @property
    def n_points(self):
        return len(self.points)

    @property
    def rep_points(self):
        return self.points[self.rep]

    @cached_property
    def deck_matrices(self):
        return np.array([self.group.element(w) for w in self.deck_words])

    @cached_property
    def boundary_points(self):
        counts = np.bincount(self.logical, minlength=self.n_vertices)
        return counts[self.logical] > 1

    @cached_property
    def euclidean_areas(self):
        z = self.points[self.triangles]
        e1 = z[:, 1] - z[:, 0]
        e2 = z[:, 2] - z[:, 0]
        return 0.5 * (np.conj(e1) * e2).imag

    @cached_property
    def vertex_areas(self):
        """Lumped hyperbolic area per logical vertex (1/3 rule, density at corners)."""
        lam = geo.conformal_factor(self.points[self.triangles])
        contrib = lam * (self.euclidean_areas[:, None] / 3.0)
        return np.bincount(self.logical[self.triangles].ravel(), contrib.ravel(), self.n_vertices)

    @cached_property
    def corner_areas(self):
        """Per-point share of the hyperbolic area, for integrating chart-sampled data."""
        lam = geo.conformal_factor(self.points[self.triangles])
        contrib = lam * (self.euclidean_areas[:, None] / 3.0)
        return np.bincount(self.triangles.ravel(), contrib.ravel(), self.n_points)

    @cached_property
    def mesh_size(self):
        z = self.points[self.triangles]
        return np.abs(np.roll(z, -1, axis=1) - z).max()

    def relative_elements(self, pa, pb):
        """Indices of deck elements and matrices ``G_a^-1 G_b`` for point pairs."""
        m = self.deck_matrices
        return np.linalg.inv(m[self.deck[pa]]) @ m[self.deck[pb]]

    def logical_edges(self):
        """Distinct edges of the identified complex as ``(a, b, relative element)`` keys."""
        tri = self.triangles
        pa = tri[:, [1, 2, 0]].ravel()
        pb = tri[:, [2, 0, 1]].ravel()
        rel = self.relative_elements(pa, pb)
        keys = set()
        for a, b, m in zip(self.logical[pa], self.logical[pb], rel):
            fwd = (a, b, _element_key(m))
            bwd = (b, a, _element_key(np.linalg.inv(m)))
            keys.add(min(fwd, bwd))
        return keys

    def euler_characteristic(self):
        return self.n_vertices - len(self.logical_edges()) + len(self.triangles)

    def save(self, path):
        words = np.full((len(self.deck_words), 8), -1, dtype=np.int64)
        for i, w in enumerate(self.deck_words):
            words[i, : len(w)] = w
        np.savez(
            path,
            format=MESH_FORMAT,
            level=self.level,
            subdivisions=self.subdivisions,
            points=self.points,
            logical=self.logical,
            deck=self.deck,
            deck_words=words,
            rep=self.rep,
            triangles=self.triangles,
        )

    @classmethod
    def load(cls, path, group=None):
        data = np.load(path)
        if str(data["format"]) != MESH_FORMAT:
            raise ValueError("unsupported mesh file format %r" % str(data["format"]))
        words = [tuple(int(g) for g in row if g >= 0) for row in data["deck_words"]]
        return cls(
            group=group or build_genus2_octagon(),
            level=int(data["level"]),
            subdivisions=int(data["subdivisions"]),
            points=data["points"],
            logical=data["logical"],
            deck=data["deck"],
            deck_words=words,
            rep=data["rep"],
            triangles=data["triangles"],
        )


def _geodesic_point(z0, z1, t):
    """Point at fraction ``t`` of hyperbolic arclength on the geodesic z0 -> z1."""
    w = (z1 - z0) / (1 - np.conj(z0) * z1)
    length = 2 * np.arctanh(np.abs(w))
    u = np.tanh(t * length / 2) * w / np.abs(w)
    return (u + z0) / (1 + np.conj(z0) * u)


def triangulate(group=None, level=0):
    """Structured triangulation of the fundamental octagon.

    The octagon is cut into 8 kites (centre, side midpoint, corner, next side
    midpoint); each kite is a Coons patch on an ``N x N`` grid,
    ``N = 12 * 2**level``, and every grid cell is split along the diagonal
    that avoids the 45 degree corners.  Points on half-sides are equally
    spaced in hyperbolic arclength from the side midpoint, so paired sides
    match point for point.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    group = group or build_genus2_octagon()
    n = BASE_SUBDIVISIONS * 2**level
    verts = group.vertices
    _, inradius = octagon_geometry()
    mids = np.tanh(inradius / 2) * np.exp(1j * (2 * np.arange(8) + 1) * np.pi / 8)

    def key(k, i, j):
        if i == 0 and j == 0:
            return ("O",)
        if i == n and j == n:
            return ("v", k)
        if i == n and j == 0:
            return ("m", k)
        if i == 0 and j == n:
            return ("m", (k - 1) % 8)
        if j == 0:
            return ("ray", k, i)
        if i == 0:
            return ("ray", (k - 1) % 8, j)
        if i == n:
            return ("side", k, "lo", j)  # side k, from m_k towards v_k
        if j == n:
            return ("side", (k - 1) % 8, "hi", i)  # side k-1, from m_{k-1} towards v_k
        return ("in", k, i, j)

    t = np.arange(n + 1) / n
    index = {}
    positions = []
    for k in range(8):
        mk, mp, vk = mids[k], mids[(k - 1) % 8], verts[k]
        bottom = t * mk
        left = t * mp
        right = _geodesic_point(mk, vk, t)
        top = _geodesic_point(mp, vk, t)
        u = t[:, None]
        v = t[None, :]
        coons = (
            (1 - v) * bottom[:, None]
            + v * top[:, None]
            + (1 - u) * left[None, :]
            + u * right[None, :]
            - (u * (1 - v) * mk + (1 - u) * v * mp + u * v * vk)
        )
        coons[n, :] = right
        coons[:, n] = top
        for i in range(n + 1):
            for j in range(n + 1):
                kk = key(k, i, j)
                if kk not in index:
                    index[kk] = len(positions)
                    positions.append(coons[i, j])
    points = np.array(positions, dtype=complex)

    tris = []
    for k in range(8):
        for i in range(n):
            for j in range(n):
                a, b = index[key(k, i, j)], index[key(k, i + 1, j)]
                c, d = index[key(k, i + 1, j + 1)], index[key(k, i, j + 1)]
                tris.append((a, b, d))
                tris.append((b, c, d))
    tris = np.array(tris, dtype=np.int64)
    z = points[tris]
    orient = (np.conj(z[:, 1] - z[:, 0]) * (z[:, 2] - z[:, 0])).imag
    flip = orient < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    P = len(points)
    logical = np.full(P, -1, dtype=np.int64)
    deck = np.zeros(P, dtype=np.int64)
    deck_words = [()]
    word_index = {(): 0}

    def word_id(w):
        if w not in word_index:
            word_index[w] = len(deck_words)
            deck_words.append(w)
        return word_index[w]

    partner_of = {partner: (side, gen) for side, partner, gen in group.side_pairs}

    def is_copy(kk):
        if kk[0] == "v":
            return kk[1] != 0
        if kk[0] in ("m", "side"):
            return kk[1] in partner_of
        return False

    next_id = 0
    for kk, p in index.items():
        if not is_copy(kk):
            logical[p] = next_id
            next_id += 1

    corner0 = index[("v", 0)]
    for k in range(1, 8):
        p = index[("v", k)]
        logical[p] = logical[corner0]
        deck[p] = word_id(group.find_element(verts[0], verts[k]))

    for partner, (side, gen) in partner_of.items():
        g = group.generators[gen]
        wid = word_id((gen,))
        pairs = [(("m", side), ("m", partner))]
        for s in range(1, n):
            pairs.append((("side", side, "lo", s), ("side", partner, "hi", s)))
            pairs.append((("side", side, "hi", s), ("side", partner, "lo", s)))
        for src_key, dst_key in pairs:
            src, dst = index[src_key], index[dst_key]
            if abs(geo.mobius(g, points[src]) - points[dst]) > 1e-9:
                raise RuntimeError("side identification mismatch on sides %d/%d" % (side, partner))
            logical[dst] = logical[src]
            deck[dst] = wid

    if (logical < 0).any():
        raise RuntimeError("unassigned mesh points")
    rep = np.full(next_id, -1, dtype=np.int64)
    ident = deck == 0
    rep[logical[ident]] = np.nonzero(ident)[0]
    if (rep < 0).any():
        raise RuntimeError("logical vertex without representative point")

    return SurfaceMesh(
        group=group,
        level=level,
        subdivisions=n,
        points=points,
        logical=logical,
        deck=deck,
        deck_words=deck_words,
        rep=rep,
        triangles=tris,
    )


def _shear(z, mu):
    return z + mu * np.conj(z)


def triangle_beltrami(mesh, mu):
    """Per-triangle Beltrami coefficient (corner average of point samples)."""
    if mu is None:
        return None
    mu = np.asarray(mu, dtype=complex)
    if mu.shape == ():
        return np.full(len(mesh.triangles), complex(mu))
    return mu[mesh.triangles].mean(axis=1)


def cotan_weights(mesh, mu=None):
    """Half-edge cotangent weights in the conformal structure ``|dz + mu dz_bar|^2``.

    Returns ``(weights, vertex_areas)``; ``weights[t, c]`` belongs to the edge
    of triangle ``t`` opposite corner ``c`` and equals half the cotangent of
    the angle at ``c`` after shearing the triangle by ``z -> z + mu_t z_bar``.
    ``mu`` is a per-point sample, a scalar, or None.
    """
    z = mesh.points[mesh.triangles]
    if mu is not None:
        mu_t = triangle_beltrami(mesh, mu)
        if np.abs(mu_t).max(initial=0.0) >= 1.0 or (
            np.ndim(mu) and np.abs(mu).max(initial=0.0) >= 1.0
        ):
            raise ValueError("Beltrami coefficient must satisfy |mu| < 1")
        z = _shear(z, mu_t[:, None])
    e_next = np.roll(z, -1, axis=1) - z  # corner c -> c+1
    e_prev = np.roll(z, 1, axis=1) - z  # corner c -> c-1
    prod = np.conj(e_next) * e_prev
    weights = 0.5 * prod.real / prod.imag
    return weights, mesh.vertex_areas


def half_edges(mesh):
    """Point indices ``(pa, pb)`` of the edge opposite each corner, shape (T, 3)."""
    tri = mesh.triangles
    return tri[:, [1, 2, 0]], tri[:, [2, 0, 1]]


def stiffness_matrix(mesh, mu=None):
    """Cotangent stiffness on logical vertices (positive semidefinite)."""
    w, _ = cotan_weights(mesh, mu)
    pa, pb = half_edges(mesh)
    a = mesh.logical[pa].ravel()
    b = mesh.logical[pb].ravel()
    w = w.ravel()
    V = mesh.n_vertices
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([b, a, a, b])
    vals = np.concatenate([-w, -w, w, w])
    return sp.csr_matrix((vals, (rows, cols)), shape=(V, V))


def integrate(mesh, density):
    """Integral over the surface of a per-logical-vertex (or per-point) density."""
    density = np.asarray(density, dtype=float)
    if density.shape == (mesh.n_vertices,):
        return float(density @ mesh.vertex_areas)
    if density.shape == (mesh.n_points,):
        return float(density @ mesh.corner_areas)
    raise ValueError("density must be sampled on logical vertices or on chart points")
