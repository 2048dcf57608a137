import warnings


class SotNeuronError(Exception):
    "Base class for the errors of this package"


class InvalidGeometryError(SotNeuronError, ValueError):
    """Raised when magnet geometry is invalid
    
    Also raised if the demagnetization quadrature
    does not produce a finite result.
    """


class InvalidParameterError(SotNeuronError, ValueError):
    "Raised when a device parameter is degenerate"


class CalibrationError(SotNeuronError, ValueError):
    """Raised when the anisotropy cannot be calibrated

    Typically the requested barrier cannot be reached
    with a perpendicular easy axis.
    """


class IntegrationDivergedError(SotNeuronError, ArithmeticError):
    """Raised when the magnetization becomes non-finite

    Parameters
    ----------
    step : int
        Index of the integration step that diverged.
    trial : int, optional
        Index of the trial in an ensemble.
    """

    def __init__(self, message:str, step:int=None, trial:int=None):
        super().__init__(message)
        self.step = step
        self.trial = trial


class FormatError(SotNeuronError, ValueError):
    "Raised when a file does not follow its expected format"


class DatasetError(SotNeuronError, ValueError):
    "Raised when a dataset does not contain enough qualifying samples"


class TrainingFailedError(SotNeuronError, RuntimeError):
    """Raised when offline training does not reach the required accuracy

    Parameters
    ----------
    diagnostics : dict
        Training history and the final accuracies.
    """

    def __init__(self, message:str, diagnostics:dict=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateScaleError(SotNeuronError, ValueError):
    "Raised when weights cannot be scaled to conductances (all zero)"


class ConfigError(SotNeuronError, ValueError):
    """Raised when an experiment configuration is invalid

    Parameters
    ----------
    diagnostics : list of str
        One line per problem, with the location
        (line or dotted key) of the problem.
    """

    def __init__(self, message:str, diagnostics:list=None):
        self.diagnostics = list(diagnostics or [])
        if self.diagnostics:
            message = message + "\n" + "\n".join(f"  {line}" for line in self.diagnostics)
        super().__init__(message)


class KeyFoundError(SotNeuronError):
    """Raised in insertion to a store

    Raised when an item for given key
    is found when it was not expected.
    """


class DataToItemError(ValueError):
    "Raise when converting stored data to an item failed"


class ConversionWarning(UserWarning):
    "Converting stored data to an item failed non-fatally"


class LookupClampWarning(UserWarning):
    "Probability lookup was queried outside the phase diagram"


def _handle_conversion_error(store, data):
    errors_query = store.errors_query
    if errors_query == "raise":
        raise
    elif errors_query == "warn":
        warnings.warn(f'Converting data to item failed: \n{data}', ConversionWarning)
