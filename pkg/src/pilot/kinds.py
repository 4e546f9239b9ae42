"""Node model kinds and their complexity charges."""

from __future__ import annotations

import enum


class ModelKind(enum.Enum):
    """The five univariate regression models a node can fit.

    CON   constant
    LIN   simple linear regression
    PCON  piecewise constant (one split, a constant per side)
    BLIN  broken linear (continuous hinge, two linear pieces)
    PLIN  two-piece linear (one split, a free line per side)
    """

    CON = "con"
    LIN = "lin"
    PCON = "pcon"
    BLIN = "blin"
    PLIN = "plin"

    @property
    def dof(self) -> int:
        """Degrees of freedom charged in the BIC.

        Coefficient counts are 1, 2, 2, 3, 4; a discontinuous split point is
        charged 3 extra and a continuous knot 2 extra, giving 1, 2, 5, 5, 7.
        """
        return _DOF[self]

    @property
    def is_split(self) -> bool:
        """True for models that partition the node into two children."""
        return self in (ModelKind.PCON, ModelKind.BLIN, ModelKind.PLIN)


_DOF = {
    ModelKind.CON: 1,
    ModelKind.LIN: 2,
    ModelKind.PCON: 5,
    ModelKind.BLIN: 5,
    ModelKind.PLIN: 7,
}

ALL_KINDS = frozenset(ModelKind)

# Deterministic ordering used as the last resort when breaking ties.
KIND_ORDER = {k: i for i, k in enumerate(ModelKind)}
