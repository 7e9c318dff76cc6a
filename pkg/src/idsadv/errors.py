"""Exception hierarchy shared by every module.

The three top-level families map onto CLI exit codes: configuration and
usage problems (1), bad or inconsistent data (2), and numerical divergence
during training (3).
"""


class IdsAdvError(Exception):
    """Base class for all package errors."""


class ConfigError(IdsAdvError):
    """Invalid configuration, arguments or call order."""


class DataError(IdsAdvError):
    """Input data is missing, malformed or inconsistent."""


class DivergenceDetected(IdsAdvError):
    """Training loss became non-finite."""


# -- configuration ---------------------------------------------------------

class InvalidConfig(ConfigError):
    pass


class InvalidRate(ConfigError):
    pass


class ConfigInvalid(ConfigError):
    """Attack configuration violates its invariants."""


class UntrainedModel(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class FractionOutOfRange(ConfigError):
    pass


class MissingCell(ConfigError):
    pass


# -- data ------------------------------------------------------------------

class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing column {name!r}")
        self.name = name


class EmptyDataset(DataError):
    pass


class LabelOutOfVocabulary(DataError):
    def __init__(self, value, row):
        super().__init__(f"unknown label {value!r} at row {row}")
        self.value = value
        self.row = row


class LabelOutOfRange(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class InputOutOfBounds(DataError):
    pass


class ConstantFeatureWarning(UserWarning):
    """A feature has zero range in the training data."""
