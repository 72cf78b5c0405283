"""The genus-2 surface group generated by the side pairings of a regular octagon."""
from dataclasses import dataclass, field

import numpy as np

from .. import geometry as geo

# generator order: a, b, c, d, a^-1, b^-1, c^-1, d^-1
GENERATOR_NAMES = ("a", "b", "c", "d", "A", "B", "C", "D")
RELATION = (0, 1, 4, 5, 2, 3, 6, 7)  # a b a^-1 b^-1 c d c^-1 d^-1


def inverse_index(i):
    return (i + 4) % 8


@dataclass(frozen=True)
class FuchsianGroup:
    """Side pairings of the regular octagon with interior angles pi/4.

    ``generators[i]`` is an SU(1,1) matrix acting on the Poincare disk.
    ``side_pairs`` lists ``(side, partner, gen)`` with ``generators[gen]``
    carrying ``side`` onto ``partner`` (boundary orientation reversed).
    """

    generators: np.ndarray
    vertices: np.ndarray
    side_pairs: tuple
    relation_word: tuple = RELATION
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def element(self, word):
        m = np.eye(2, dtype=complex)
        for g in word:
            m = m @ self.generators[g]
        return m

    def relation_defect(self):
        m = self.element(self.relation_word)
        return min(np.abs(m - np.eye(2)).max(), np.abs(m + np.eye(2)).max())

    def ball(self, radius):
        """Distinct elements of word length <= radius, shortest words first.

        Returns ``(words, matrices)``; elements are identified up to sign.
        """
        key = ("ball", radius)
        if key in self._cache:
            return self._cache[key]
        words = [()]
        mats = [np.eye(2, dtype=complex)]
        seen = {_element_key(mats[0])}
        frontier = [((), mats[0])]
        for _ in range(radius):
            nxt = []
            for word, m in frontier:
                for g in range(8):
                    if word and g == inverse_index(word[-1]):
                        continue
                    mm = m @ self.generators[g]
                    k = _element_key(mm)
                    if k in seen:
                        continue
                    seen.add(k)
                    w = word + (g,)
                    words.append(w)
                    mats.append(mm)
                    nxt.append((w, mm))
            frontier = nxt
        out = (words, np.array(mats))
        self._cache[key] = out
        return out

    def find_element(self, z_from, z_to, radius=4, tol=1e-9):
        """Shortest word whose Moebius action sends ``z_from`` to ``z_to``."""
        words, mats = self.ball(radius)
        img = geo.mobius(mats, z_from)
        hits = np.nonzero(np.abs(img - z_to) < tol)[0]
        if len(hits) == 0:
            raise ValueError("no group element of length <= %d maps the points" % radius)
        return words[hits[0]]


def _element_key(m):
    # PSL: fix the sign by making the first nonzero real part positive
    flat = np.concatenate([m.real.ravel(), m.imag.ravel()])
    s = np.sign(flat[np.nonzero(np.abs(flat) > 1e-9)[0][0]])
    return tuple(np.round(s * flat, 7))


def octagon_geometry():
    """Circumradius and inradius (hyperbolic) of the regular octagon with angle pi/4."""
    cot = 1.0 / np.tan(np.pi / 8)
    circum = np.arccosh(cot * cot)
    inradius = np.arccosh(np.cos(np.pi / 8) / np.sin(np.pi / 8))
    return circum, inradius


def build_genus2_octagon():
    """Regular octagon centred at 0 and its side-pairing surface group.

    Vertices sit at angles k*pi/4; side k joins vertex k to vertex k+1.
    Sides (0,2), (1,3), (4,6), (5,7) are paired so that the generators
    satisfy a b a^-1 b^-1 c d c^-1 d^-1 = 1.
    """
    circum, inradius = octagon_geometry()
    vertices = np.tanh(circum / 2) * np.exp(1j * np.pi / 4 * np.arange(8))
    mid_angle = (2 * np.arange(8) + 1) * np.pi / 8

    def pairing(j, k):
        # rotate side j to the left, translate by twice the inradius, rotate onto side k
        return geo.rotation(mid_angle[k]) @ geo.translation(2 * inradius) @ geo.rotation(np.pi - mid_angle[j])

    a = pairing(6, 4)
    b = pairing(5, 7)
    c = pairing(2, 0)
    d = pairing(1, 3)
    gens = [a, b, c, d]
    gens = np.array(gens + [np.linalg.inv(g) for g in gens])
    side_pairs = (
        (0, 2, 6),  # c^-1 : side 0 -> side 2
        (1, 3, 3),  # d    : side 1 -> side 3
        (4, 6, 4),  # a^-1 : side 4 -> side 6
        (5, 7, 1),  # b    : side 5 -> side 7
    )
    return FuchsianGroup(generators=gens, vertices=vertices, side_pairs=side_pairs)
