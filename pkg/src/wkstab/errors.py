"""Exception types shared across the toolkit.

Every error carries a short machine-readable ``code`` so the CLI can emit
structured verdicts without string matching on messages.
"""


class WkstabError(Exception):
    code = "error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class EmptyInterior(WkstabError):
    code = "empty-interior"


class NotSimple(WkstabError):
    """A vertex has more active facets than the ambient dimension."""

    code = "not-simple"


class NonPrimitiveNormal(WkstabError):
    code = "non-primitive-normal"


class NotInteriorDirection(WkstabError):
    """Truncation direction does not lie in the interior of the dual cone."""

    code = "not-interior-direction"


class PoleOnDomain(WkstabError):
    """A factor with negative exponent vanishes somewhere on the domain."""

    code = "pole-on-domain"


class FactorNotPositive(WkstabError):
    """Fibration data requires affine factors positive on the polyhedron."""

    code = "factor-not-positive"


class DivergentIntegral(WkstabError):
    code = "divergent-integral"


class ToleranceNotMet(WkstabError):
    """Cell budget exhausted before the error budget was met.

    The partial quadrature result is attached as ``.partial``.
    """

    code = "tolerance-not-met"

    def __init__(self, message, partial=None, **context):
        super().__init__(message, **context)
        self.partial = partial


class NotConvexHere(WkstabError):
    code = "not-convex-here"


class NotConvexGrid(WkstabError):
    code = "not-convex-grid"


class NotAdmissible(WkstabError):
    code = "not-admissible"


class RTooSmall(WkstabError):
    code = "r-too-small"


class AffineFutakiNonzero(WkstabError):
    code = "affine-futaki-nonzero"


class ZeroDenominator(WkstabError):
    code = "zero-denominator"


class EmptyFamily(WkstabError):
    code = "empty-family"


class NotASolution(WkstabError):
    """Potential fails the generalized Abreu equation spot check."""

    code = "not-a-solution"


class FixedPointDiverged(WkstabError):
    code = "fixed-point-diverged"


class SchemaError(WkstabError):
    code = "schema-error"


class RegressionMismatch(WkstabError):
    code = "regression-mismatch"
