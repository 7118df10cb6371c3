"""Decision tables mapping pairs of hyperbolic singular points to chaotic-set constructions.

Two tables are encoded.  ``HYPERBOLIC_PAIRS`` covers every unordered pair of
hyperbolic kinds when the other branch is transversal to the saddle's
eigen-directions (or no saddle is involved).  ``COLLINEAR_SADDLE`` covers a
saddle whose other-branch vector at the singular point is parallel to one of
its eigenvectors; it is split by where the second singular point sits
relative to the saddle's manifolds.

Theorem identifiers are descriptive slugs:

``sink-source``
    a node or focus of one branch with an unbounded solution of the other
    nearby admits a chaotic set;
``saddle-transversal``
    same for a saddle whose other-branch vector is not an eigen-direction;
``collinear-crossing`` / ``collinear-overlap``
    the two cases for a saddle with a collinear other-branch vector
    (trajectory crossing the manifolds vs. overlapping one of them);
``overlap-interior``
    the refinement that restores a region with interior in overlap cases;
``devaney``, ``interior-ly-dc``, ``arc-ly-dc``
    chaotic set implies Devaney chaos; non-empty interior implies Li-Yorke and
    distributional chaos; an arc with anti-parallel branches does too.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

from .fields import EquilibriumKind as K

__all__ = ["TableRow", "HYPERBOLIC_PAIRS", "COLLINEAR_SADDLE", "KIND_ORDER", "pair_label", "hyperbolic_row", "collinear_row"]

REGION = "Region"
ARC = "Arc"

# column order used by the overview table
KIND_ORDER = (K.UNSTABLE_NODE, K.STABLE_NODE, K.UNSTABLE_FOCUS, K.STABLE_FOCUS, K.SADDLE)


@dataclass(frozen=True)
class TableRow:
    table: str
    row: str
    variants: Tuple[str, ...]
    theorems: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {"table": self.table, "row": self.row, "variants": list(self.variants), "theorems": list(self.theorems)}


def pair_label(a: K, b: K) -> str:
    """``"stable node - unstable saddle"`` style label in table order."""
    ia, ib = KIND_ORDER.index(a), KIND_ORDER.index(b)
    lo, hi = (a, b) if ia <= ib else (b, a)
    return f"{lo.label} - {hi.label}"


def _overview() -> Dict[str, TableRow]:
    rows = {}
    for i, a in enumerate(KIND_ORDER):
        for b in KIND_ORDER[i:]:
            label = pair_label(a, b)
            with_saddle = K.SADDLE in (a, b)
            both_saddle = a is K.SADDLE and b is K.SADDLE
            if both_saddle:
                thms = ("saddle-transversal",)
            elif with_saddle:
                thms = ("sink-source", "saddle-transversal")
            else:
                thms = ("sink-source",)
            # an anti-parallel invariant segment is possible only when both are nodes or node-saddle
            arc_ok = all(k.is_node or k is K.SADDLE for k in (a, b)) and not both_saddle
            variants = (REGION, ARC) if arc_ok else (REGION,)
            extra = ("interior-ly-dc", "arc-ly-dc") if arc_ok else ("interior-ly-dc",)
            rows[label] = TableRow("hyperbolic-pairs", label, variants, thms + ("devaney",) + extra)
    return rows


HYPERBOLIC_PAIRS: Dict[str, TableRow] = _overview()


def _collinear() -> Dict[str, TableRow]:
    crossing = ("collinear-crossing", "devaney", "interior-ly-dc")
    both = ("overlap-interior", "collinear-overlap", "devaney", "interior-ly-dc", "arc-ly-dc")
    arc_only = ("collinear-overlap", "devaney", "arc-ly-dc")
    spec = [
        ("unstable saddle - unstable node: node lies outside manifolds", (REGION,), crossing),
        ("unstable saddle - unstable node: node lies on unstable manifold", (ARC, REGION), both),
        ("unstable saddle - unstable node: node lies on stable manifold", (ARC,), arc_only),
        ("unstable saddle - stable node: node lies outside manifolds", (REGION,), crossing),
        ("unstable saddle - stable node: node lies on stable manifold", (ARC, REGION), both),
        ("unstable saddle - stable node: node lies on unstable manifold", (ARC,), arc_only),
        ("unstable saddle - unstable focus: trajectory crosses manifolds", (REGION,), crossing),
        ("unstable saddle - unstable focus: trajectory overlaps manifold", (ARC, REGION), both),
        ("unstable saddle - stable focus: trajectory crosses manifolds", (REGION,), crossing),
        ("unstable saddle - stable focus: trajectory overlaps manifold", (ARC, REGION), both),
        ("unstable saddle - unstable saddle: manifolds are not overlapped", (REGION,), crossing),
        (
            "unstable saddle - unstable saddle: stable manifold overlaps unstable manifold"
            " and second manifolds intersect each other",
            (ARC, REGION),
            both,
        ),
        (
            "unstable saddle - unstable saddle: stable manifold overlaps unstable manifold"
            " and second manifolds do not intersect",
            (ARC,),
            arc_only,
        ),
        ("unstable saddle - unstable saddle: stable manifolds are overlapped", (ARC,), arc_only),
        ("unstable saddle - unstable saddle: unstable manifolds are overlapped", (ARC,), arc_only),
    ]
    return {label: TableRow("collinear-saddle", label, v, t) for label, v, t in spec}


COLLINEAR_SADDLE: Dict[str, TableRow] = _collinear()


def hyperbolic_row(a: K, b: K) -> TableRow:
    return HYPERBOLIC_PAIRS[pair_label(a, b)]


def collinear_row(other: K, qualifier: str) -> TableRow:
    """Row for a collinear saddle paired with ``other``; ``qualifier`` is the sub-row text."""
    return COLLINEAR_SADDLE[f"unstable saddle - {other.label}: {qualifier}"]
