class NumericsError(RuntimeError):
    """Raised when a computation fails numerically despite valid inputs.

    Covers non-convergence, degenerate covariances, singular Jacobians, and
    pathological sample configurations. Distinct from ValueError so callers
    (notably the CLI exit-code contract) can separate numeric failures from
    usage errors.
    """
