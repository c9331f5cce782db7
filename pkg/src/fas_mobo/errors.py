"""Exception types. Each carries a short machine-readable ``code``."""


class FasMoboError(Exception):
    code = "fas-mobo-error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


class InfeasibleConfigError(FasMoboError):
    code = "encode-infeasible"


class EmptyTrustRegionError(FasMoboError):
    code = "empty-trust-region"


class EmptyArchiveError(FasMoboError):
    code = "restart-empty-archive"


class SpaceTooLargeError(FasMoboError):
    code = "space-too-large"

    def __init__(self, count: int, cap: int):
        super().__init__(
            f"search space has {count} feasible configurations, cap is {cap}; "
            "use a smaller grid or fewer beams/orientations",
            count=count,
            cap=cap,
        )
        self.count = count
        self.cap = cap


class PhysicsError(FasMoboError):
    code = "physics-error"


class ZeroDistanceError(PhysicsError):
    code = "si-zero-distance"


class ZeroRangeError(PhysicsError):
    code = "los-zero-range"


class CovarianceDegenerateError(PhysicsError):
    code = "covariance-degenerate"


class KernelIllConditionedError(FasMoboError):
    code = "kernel-ill-conditioned"


class SpecValidationError(FasMoboError):
    code = "spec-invalid"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}", field=field)
        self.field = field
