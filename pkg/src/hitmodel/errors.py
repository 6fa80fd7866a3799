"""Exception hierarchy.

Every error carries a short ``code`` (the class name) so the command line
can print a machine-parsable line.
"""


class HitModelError(Exception):
    @property
    def code(self):
        return type(self).__name__


class DimensionMismatch(HitModelError, ValueError):
    pass


class BlowupDetected(HitModelError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InvalidWindow(HitModelError, ValueError):
    pass


class EmptyBounds(HitModelError, ValueError):
    pass


class ScheduleOutOfRange(HitModelError, ValueError):
    pass


class UnsortedSchedule(HitModelError, ValueError):
    pass


class ParseError(HitModelError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonMonotonicDates(ParseError):
    pass


class NegativeCount(ParseError):
    pass


class MissingData(HitModelError, ValueError):
    pass


class DuplicateChannelDate(ParseError):
    pass


class NoOverlap(HitModelError, ValueError):
    pass


class GridTooLarge(HitModelError, ValueError):
    pass
