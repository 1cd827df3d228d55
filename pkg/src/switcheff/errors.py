"""Exception types shared across the package."""


class SwitchEffError(Exception):
    """Base class for all errors raised by this package."""


class ConstructionError(SwitchEffError):
    """Topology parameters cannot be realized."""


class MappingError(SwitchEffError):
    """A parallel group cannot be mapped onto the requested physical dimension."""


class PlacementError(SwitchEffError):
    """A workload cannot be placed on the given topology."""


class ScheduleError(SwitchEffError):
    """Workload and layout disagree while building the phase schedule."""


class RoutingError(SwitchEffError):
    """A flow endpoint is missing or unreachable."""


class InconsistentLedgerError(SwitchEffError):
    """Byte accounting violates a conservation or feasibility constraint."""


class ConfigError(SwitchEffError):
    """Invalid experiment configuration."""
