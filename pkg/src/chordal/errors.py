"""Exception types shared across the package."""


class ChordalError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(ChordalError):
    """A run configuration violates the documented schema.

    ``field`` carries the dotted path of the offending entry.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class EscapeError(ChordalError):
    """A trajectory left the configured phase-space box."""

    def __init__(self, time, n_escaped=1, message=""):
        self.time = time
        self.n_escaped = n_escaped
        detail = message or f"{n_escaped} trajectory(ies) escaped at t = {time:g}"
        super().__init__(detail)


class SampleBudgetError(ChordalError):
    """Adaptive manifold refinement exceeded its sample budget."""

    def __init__(self, time, n_samples, budget):
        self.time = time
        super().__init__(
            f"resampling needs more than {budget} samples at t = {time:g} "
            f"(reached {n_samples})"
        )


class DegenerateCenterError(ChordalError):
    """A continuum of chords passes through the requested center."""


class NearManifoldError(ChordalError):
    """The chord expansion is invalid this close to the manifold; use the
    transverse-delta form instead."""


class CausticEndpointError(ChordalError):
    """A chord endpoint sits on (or too close to) a caustic."""


class AmbiguousCausticError(ChordalError):
    """A caustic lies within one sample spacing of an evaluation endpoint;
    the caller must perturb the interval."""


class MultiSheetClusterError(ChordalError):
    """Three or more sheets are mutually close; pairwise treatment does not
    apply to this geometry."""


class NonConvergedError(ChordalError):
    """Grid refinement changed a quadrature result by more than the allowed
    relative amount; both estimates are attached."""

    def __init__(self, coarse, fine, rel_diff, tol):
        self.coarse = coarse
        self.fine = fine
        self.rel_diff = rel_diff
        super().__init__(
            f"quadrature not converged: coarse={coarse!r}, fine={fine!r}, "
            f"relative difference {rel_diff:.3e} > {tol:.3e}"
        )


class BoundaryBreachError(ChordalError):
    """Probability density reached the grid boundary during propagation."""

    def __init__(self, time, density):
        self.time = time
        super().__init__(
            f"boundary density {density:.3e} exceeded threshold at t = {time:g}; "
            "enlarge the grid box"
        )


class BranchRepresentationError(ChordalError):
    """A manifold branch is monotone in neither q nor p on some interval."""

    def __init__(self, s_lo, s_hi):
        self.s_lo = s_lo
        self.s_hi = s_hi
        super().__init__(
            f"branch on s in [{s_lo:g}, {s_hi:g}] is monotone in neither q nor p; "
            "refine the sampling or shrink the caustic windows"
        )


class NyquistError(ChordalError):
    """A phase-space grid is too coarse to resolve the fastest oscillation."""
