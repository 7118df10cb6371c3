"""Concrete field pairs used across the test-suite.

Hyperbolic-pair fixtures: one linear field per kind, ``f`` centred at the
origin and ``g`` at (2, 0.7).  The off-axis shift keeps ``g(x*)`` away from
the saddle's eigen-directions, so every pair routes to the hyperbolic-pairs
table.

Collinear-saddle fixtures: ``f = (x, -y)`` so the unstable manifold is the
x-axis and the stable manifold the y-axis (exact axes).  ``g`` is chosen per
sub-row.  The focus overlap rows need a nonlinear ``g``: a linear focus has
no straight invariant line to lie on a manifold.
"""

from __future__ import annotations

import numpy as np

from branchlab.branching import EulerBranching, construct_loop
from branchlab.fields import PlanarField, Rect, linear_field

KIND_MATRICES = {
    "unstable node": [[2, 1], [1, 2]],
    "stable node": [[-2, 1], [1, -2]],
    "unstable focus": [[1, -2], [2, 1]],
    "stable focus": [[-1, -2], [2, -1]],
    "unstable saddle": [[0.5, 1.5], [1.5, -0.5]],
}
_ORDER = list(KIND_MATRICES)
TABLE1_DOMAIN = Rect(-5, -5, 7, 5)
TABLE1_G_CENTER = (2.0, 0.7)


def table1_cases():
    """``(row label, EulerBranching)`` for every unordered pair of kinds."""
    out = []
    for i, a in enumerate(_ORDER):
        for b in _ORDER[i:]:
            eb = EulerBranching(
                linear_field(KIND_MATRICES[a], name=a),
                linear_field(KIND_MATRICES[b], TABLE1_G_CENTER, name=b),
                TABLE1_DOMAIN,
            )
            out.append((f"{a} - {b}", eb))
    return out


def _focus_overlap(stable: bool) -> PlanarField:
    # focus at (2, 0); the x-axis is invariant, so the trajectory through the
    # saddle lies on its unstable manifold
    s = 1.0 if stable else -1.0

    def func(x, y):
        return s * (x / 2) * (2 - x - y), s * ((x - 2) - 0.5 * y)

    return PlanarField("focus-overlap", func)


_V = np.array([[0.0, 1.0], [1.0, -1.0]])
_SADDLE_OBLIQUE = _V @ np.diag([1.0, -1.0]) @ np.linalg.inv(_V)
_D = Rect(-3, -3, 4, 4)
_P = "unstable saddle - "

TABLE2_SPECS = [
    (_P + "unstable node: node lies outside manifolds", [[1, -1], [0, 2]], (1, 1), _D),
    (_P + "unstable node: node lies on unstable manifold", [[1, 0], [0, 2]], (1, 0), _D),
    (_P + "unstable node: node lies on stable manifold", [[2, 0], [0, 1]], (0, 1), _D),
    (_P + "stable node: node lies outside manifolds", [[-1, 1], [0, -2]], (1, 1), _D),
    (_P + "stable node: node lies on stable manifold", [[-2, 0], [0, -1]], (0, 1), _D),
    (_P + "stable node: node lies on unstable manifold", [[-1, 0], [0, -2]], (1, 0), _D),
    (_P + "unstable focus: trajectory crosses manifolds", [[1, -2], [2, 1]], (1, -2), Rect(-3, -4, 4, 3)),
    (_P + "unstable focus: trajectory overlaps manifold", "focus-unstable", None, Rect(-3, -3, 5, 3)),
    (_P + "stable focus: trajectory crosses manifolds", [[-1, -2], [2, -1]], (1, 2), _D),
    (_P + "stable focus: trajectory overlaps manifold", "focus-stable", None, Rect(-3, -3, 5, 3)),
    (_P + "unstable saddle: manifolds are not overlapped", [[0.5, 1.5], [1.5, -0.5]], (1, 3), Rect(-4, -4, 5, 5)),
    (
        _P + "unstable saddle: stable manifold overlaps unstable manifold and second manifolds intersect each other",
        _SADDLE_OBLIQUE.tolist(),
        (0, 2),
        _D,
    ),
    (
        _P + "unstable saddle: stable manifold overlaps unstable manifold and second manifolds do not intersect",
        [[-1, 0], [0, 1]],
        (0, 2),
        _D,
    ),
    (_P + "unstable saddle: stable manifolds are overlapped", [[1, 0], [0, -1]], (0, 2), _D),
    (_P + "unstable saddle: unstable manifolds are overlapped", [[1, 0], [0, -1]], (2, 0), _D),
]


def table2_cases():
    f = linear_field([[1, 0], [0, -1]], name="axis-saddle")
    out = []
    for row, A, center, dom in TABLE2_SPECS:
        if A == "focus-unstable":
            g = _focus_overlap(False)
        elif A == "focus-stable":
            g = _focus_overlap(True)
        else:
            g = linear_field(A, center, name="g")
        out.append((row, EulerBranching(f, g, dom)))
    return out


# two-stable-node pair used for the switched-solution constructions
NODE_PAIR_DOMAIN = Rect(-4, -4, 6, 4)


def node_pair() -> EulerBranching:
    f = linear_field([[-2, 1], [1, -2]], name="f")
    g = linear_field([[-1, 0], [0, -1]], (2, 0), name="g")
    return EulerBranching(f, g, NODE_PAIR_DOMAIN)


def node_pair_loop(eb: EulerBranching):
    return construct_loop(eb, (0.0, 0.1), (1.0, 0.3), exclude=[(0.0, 0.0), (2.0, 0.0)])


# pair from the radial-node family, f = -p and g = (2, 0) - p
def star_pair() -> EulerBranching:
    f = linear_field([[-1, 0], [0, -1]], name="f")
    g = linear_field([[-1, 0], [0, -1]], (2, 0), name="g")
    return EulerBranching(f, g, NODE_PAIR_DOMAIN)
