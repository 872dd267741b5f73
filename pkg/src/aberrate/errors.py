"""Package exception types."""


class AberrateError(Exception):
    """Base for pipeline-level failures."""


class DegenerateKernelError(AberrateError):
    """All-zero or otherwise unusable kernel."""


class BankBuildError(AberrateError):
    """Severity-bank build failed; carries the offending entries."""

    def __init__(self, message: str, offenders: list | None = None):
        super().__init__(message)
        self.offenders = offenders or []


class LensIngestError(AberrateError):
    """Lens bundle missing data or containing unusable PSFs."""
