"""Exception hierarchy shared by the numerical library and the commands."""


class PcpdError(Exception):
    """Base class for every error raised by the pcpd app"""


class TensorShapeError(PcpdError, ValueError):
    """Non-conformable tensor or factor shapes"""


class ModeError(PcpdError, IndexError):
    """Tensor mode outside 0..N-1"""


class DomainError(PcpdError, ValueError):
    """Argument outside the domain of a special function or density"""


class ConfigurationError(PcpdError, ValueError):
    """Invalid fit options or hyper-parameters"""


class TensorFormatError(PcpdError):
    """Malformed tensor file"""


class NumericalError(PcpdError):
    """Fatal numerical breakdown inside an update.

    `diagnostics` holds the quantities that explain the failure; `iteration`
    is filled in by the fit loop when the error escapes a sweep.
    """

    def __init__(self, message, diagnostics=None, iteration=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
        self.iteration = iteration

    def __str__(self):
        text = super().__str__()
        if self.iteration is not None:
            text = f'{text} (iteration {self.iteration})'
        if self.diagnostics:
            details = ', '.join(f'{k}={v!r}' for k, v in sorted(self.diagnostics.items()))
            text = f'{text} [{details}]'
        return text
