from rest_framework.exceptions import APIException
from rest_framework import status


class InputError(APIException):
    """Usage-level problem: bad input data, flags or documents."""

    status_code = status.HTTP_400_BAD_REQUEST
    default_detail = 'Invalid input.'
    default_code = 'invalid_input'

    def __init__(self, detail=None, code=None):
        if detail is not None:
            self.detail = detail
        else:
            self.detail = self.default_detail
        if code is not None:
            self.code = code
        else:
            self.code = self.default_code

    def __str__(self):
        return str(self.detail)


class DatasetParseError(InputError):
    default_detail = 'Malformed dataset.'
    default_code = 'dataset_parse_error'

    def __init__(self, detail=None, line_number=None):
        if line_number is not None:
            detail = f"line {line_number}: {detail}"
        super().__init__(detail)
        self.line_number = line_number


class DegenerateDatasetError(InputError):
    default_detail = 'Dataset is degenerate.'
    default_code = 'degenerate_dataset'


class DimensionMismatchError(InputError):
    default_detail = 'Feature dimension does not match.'
    default_code = 'dimension_mismatch'


class HashMismatchError(InputError):
    default_detail = 'Ensemble was not trained on this dataset.'
    default_code = 'hash_mismatch'


class UnsupportedTaskError(InputError):
    default_detail = 'This bound is only defined for binary classification.'
    default_code = 'unsupported_task'


class InvalidPosteriorError(InputError):
    default_detail = 'Invalid posterior or prior.'
    default_code = 'invalid_posterior'


class InvalidConfigError(InputError):
    default_detail = 'Invalid configuration.'
    default_code = 'invalid_config'


class EnsembleDocumentError(InputError):
    default_detail = 'Ensemble document does not match the schema.'
    default_code = 'invalid_ensemble_document'


class ComputationError(APIException):
    """Computation-level failure on otherwise valid input."""

    status_code = status.HTTP_422_UNPROCESSABLE_ENTITY
    default_detail = 'Computation failed.'
    default_code = 'computation_failed'

    def __str__(self):
        return str(self.detail)


class EmptyOverlapError(ComputationError):
    default_detail = 'Empty out-of-bag validation set.'
    default_code = 'empty_overlap'

    def __init__(self, pair):
        h, h_prime = pair
        if h == h_prime:
            where = f"tree {h} has no out-of-bag samples"
        else:
            where = f"trees {h} and {h_prime} have no common out-of-bag samples"
        super().__init__(
            f"{where}; use reduced bagging or a larger dataset to enlarge the validation sets"
        )
        self.pair = pair


class TreeSizeError(ComputationError):
    default_detail = 'Tree exceeded the node cap.'
    default_code = 'tree_too_large'


class SerializerValidationError(Exception):
    """Exception raised for serializer validation errors."""

    def __init__(self, errors):
        """Initialize the serializer validation error with the provided errors.

        Args:
            errors: The errors returned by the serializer.

        """
        super().__init__(str(errors))
        self.errors = errors

    def __str__(self):
        """Return a string representation of the error."""
        return f"{self.errors}"
