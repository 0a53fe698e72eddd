"""Exception hierarchy.

Every error carries the name of the module that raised it so the command
line front end can report where a pipeline failed.
"""


class PeierlsError(Exception):
    module = "peierls"


class ModelError(PeierlsError):
    """The model itself is unusable at some point (singular, degenerate)."""


class NumericalFailure(PeierlsError):
    """A numerical procedure failed or an invariant was breached."""


# lagrangian-core
class NonFiniteDerivative(ModelError):
    module = "lagrangian"


class SupportOutOfRange(PeierlsError):
    module = "lagrangian"


class GridMismatch(PeierlsError):
    module = "lagrangian"


# el-solver
class SingularLvv(ModelError):
    module = "elsolver"


class BlowUp(NumericalFailure):
    module = "elsolver"


class ConjugatePoint(NumericalFailure):
    module = "elsolver"


class NoConvergence(NumericalFailure):
    module = "elsolver"


# jacobi
class NotASolution(NumericalFailure):
    module = "jacobi"


class MissingMetric(ModelError):
    module = "jacobi"


# green-kernel
class ConjugateEndpoints(NumericalFailure):
    module = "green"


class DegenerateWronskian(NumericalFailure):
    module = "green"


class SupportTouchesBoundary(PeierlsError):
    module = "green"


# qm-model
class NonHermitian(ModelError):
    module = "qm"


class UnboundedWindow(PeierlsError):
    module = "qm"


# kg-field
class ResonantInterval(NumericalFailure):
    module = "kg"

    def __init__(self, message, modes=()):
        super().__init__(message)
        self.modes = list(modes)


class MasslessZeroMode(ModelError):
    module = "kg"


# cli-report
class ConfigError(PeierlsError):
    module = "cli"
