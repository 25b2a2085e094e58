"""
Exception hierarchy for fp-reach

Every error carries the CLI exit code it maps to, so commands can translate
failures into process status without inspecting messages.
"""

from typing import Optional


class FpReachError(Exception):
    """Base exception for toolkit errors"""
    exit_code = 1


class ConfigurationError(FpReachError):
    """Raised when a configuration document, argument or file fails validation"""
    exit_code = 2


class UnitConversionError(ConfigurationError):
    """Raised for unknown units or incompatible unit pairs"""
    pass


class SolverError(FpReachError):
    """Base class for numerical failures"""
    exit_code = 3


class SingularityError(SolverError):
    """Raised when the state comes within the floor distance of a primary"""
    pass


class PropagationError(SolverError):
    """Raised when an integration fails"""
    pass


class StepSizeUnderflowError(PropagationError):
    """Raised when the adaptive step collapses below the configured minimum"""
    pass


class ControlEvaluationError(PropagationError):
    """Raised when a control history cannot be evaluated"""
    pass


class CorrectionError(SolverError):
    """Raised when differential correction does not converge"""
    pass


class DivergenceError(CorrectionError):
    """Raised when the closure residual keeps growing"""
    pass


class ConditioningError(SolverError):
    """Raised when a matrix that must be inverted is too ill-conditioned"""

    def __init__(self, message: str, condition_number: Optional[float] = None):
        super().__init__(message)
        self.condition_number = condition_number


class NullSpaceError(SolverError):
    """Raised when a direction has no finite reachable extent"""
    pass


class DegenerateProjectionError(SolverError):
    """Raised when a planar projection of the ellipsoid is not defined"""
    pass


class TranscriptionError(SolverError):
    """Raised when a guess does not fit the requested mesh"""
    pass


class NlpConvergenceError(SolverError):
    """Raised when the interior-point solver stops without a KKT point"""

    def __init__(self, message: str, report: Optional[object] = None):
        super().__init__(message)
        self.report = report


class RestorationError(NlpConvergenceError):
    """Raised when feasibility restoration fails"""
    pass


class MeshRefinementError(SolverError):
    """Raised when mesh refinement stops improving the segment error"""

    def __init__(self, message: str, best: Optional[object] = None):
        super().__init__(message)
        self.best = best


class DirectionFailedError(SolverError):
    """Raised when a swarm run cannot find any feasible particle"""
    pass


class VerificationError(FpReachError):
    """Raised when reintegration rejects a solution"""
    exit_code = 4

    def __init__(self, message: str, report: Optional[object] = None):
        super().__init__(message)
        self.report = report


class StageError(FpReachError):
    """Wraps a failure with the pipeline stage it happened in"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        return getattr(self.cause, "exit_code", SolverError.exit_code)
