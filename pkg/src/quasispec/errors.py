"""Exception types raised across the package."""

from __future__ import annotations

from fractions import Fraction


class QuasispecError(Exception):
    """Base class for all package errors."""


class WindowTooShortError(QuasispecError, ValueError):
    def __init__(self, length: int, min_length: int, what: str = ""):
        self.length = length
        self.min_length = min_length
        msg = f"window of length {length} is too short"
        if what:
            msg += f" for {what}"
        msg += f"; need at least {min_length} symbols"
        super().__init__(msg)


class TooFewOccurrencesError(QuasispecError, ValueError):
    def __init__(self, word, count: int):
        self.word = word
        self.count = count
        super().__init__(f"word {word!r} occurs {count} time(s); at least 2 needed")


class RationalThetaError(QuasispecError, ValueError):
    def __init__(self, value: Fraction, depth: int):
        self.value = value
        self.depth = depth
        super().__init__(f"theta is rational ({value}); expansion terminated at depth {depth}")


class PartitionError(QuasispecError, ValueError):
    def __init__(self, index: int, k: int):
        self.index = index
        self.k = k
        super().__init__(f"no consistent {k}-partition covers index {index}")


class RepetitionError(QuasispecError, ValueError):
    def __init__(self, index: int, p: int):
        self.index = index
        self.p = p
        super().__init__(f"potential repetition with period {p} fails at index {index}")


class SubstitutionError(QuasispecError, ValueError):
    pass


class SamplingError(QuasispecError, ValueError):
    pass


class EdgeDecayError(QuasispecError, RuntimeError):
    def __init__(self, edge_mass: float, size: int):
        self.edge_mass = edge_mass
        self.suggested_size = 2 * size
        super().__init__(
            f"resolvent row has relative edge weight {edge_mass:.2e}; "
            f"enlarge the lattice (try half-width {self.suggested_size})"
        )


class QuadratureError(QuasispecError, RuntimeError):
    pass


class ArtifactKindError(QuasispecError, ValueError):
    pass


class ConfigError(QuasispecError, ValueError):
    pass
