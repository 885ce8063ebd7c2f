class SurvScreenError(Exception):
    """Base class for all survscreen errors."""


class InputError(SurvScreenError):
    """Malformed user input: bad CSV schema, invalid option values, etc.

    Maps to CLI exit code 2.
    """


class DegeneracyError(SurvScreenError):
    """Numerical degeneracy: a variance or survival-weight floor was hit.

    Raised instead of silently truncating, because truncation would bias the
    estimates.  Maps to CLI exit code 3.
    """
