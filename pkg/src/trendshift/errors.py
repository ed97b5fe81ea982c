class TrendshiftError(Exception):
    pass


class ConfigurationError(TrendshiftError, ValueError):
    """Invalid configuration; the CLI maps this to exit code 2."""


class ParseError(TrendshiftError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        self.lineno: int | None = None
        super().__init__(f"{field}: {message}")


class RangeError(ParseError):
    """A well-formed value outside its legal range (e.g. month 13)."""


class TrainingError(TrendshiftError, RuntimeError):
    pass


class LateTupleError(TrendshiftError, RuntimeError):
    pass


class AdaptationAborted(TrendshiftError, RuntimeError):
    pass


class SwapRefused(TrendshiftError, RuntimeError):
    pass
