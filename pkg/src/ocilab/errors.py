"""Exception hierarchy shared across the package.

CLI exit codes map onto these: ConfigError -> 1, DataError -> 2,
DivergenceError -> 3.
"""


class OcilabError(Exception):
    """Base class for all package errors."""


class ConfigError(OcilabError):
    """Invalid or infeasible configuration."""


class ScenarioError(OcilabError):
    """Scenario generation failed (pool exhaustion, infeasible allocation)."""


class DataError(OcilabError):
    """Dataset missing, malformed, or too small for the requested run."""


class LearnerError(OcilabError):
    """Classifier misuse: shape mismatch, stepping a frozen clone."""


class DivergenceError(OcilabError):
    """Training produced NaN/Inf parameters or gradients."""


class GateError(OcilabError):
    """Update-gate protocol violation (e.g. setting the threshold twice)."""
