"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for every error the simulator raises on purpose."""


class ConfigError(SimulationError):
    """Invalid configuration value; carries the offending field path."""

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class DegenerateGeometry(SimulationError):
    """The scattering ring of a cluster engulfs a base station."""


class InvalidSpread(SimulationError):
    """Angle spread outside the valid range [0, pi/2)."""


class NumericalFailure(SimulationError):
    """An underlying linear-algebra routine did not converge."""


class InfeasibleNullSpace(SimulationError):
    """Too few antenna dimensions remain after nulling the interference space."""


class RankDeficient(SimulationError):
    """The effective channel is numerically rank deficient."""


class NoFeasibleBS(SimulationError):
    """A cluster has no feasible candidate base station."""


class EnumerationTooLarge(SimulationError):
    """Exhaustive search would exceed the enumeration guard."""


class EmptyInput(SimulationError):
    """Aggregation was asked to summarise zero records."""


class UnknownDrop(SimulationError):
    """A replay request references a drop outside the experiment plan."""


class UnknownSuite(SimulationError):
    """Unknown check-suite name."""
