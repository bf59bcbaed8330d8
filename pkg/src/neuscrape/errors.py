"""Exception types raised across the package."""


class NeuScrapeError(Exception):
    """Base class for all package errors."""


class InvalidEncoding(NeuScrapeError):
    pass


class EmptyDocument(NeuScrapeError):
    pass


class ShapeMismatch(NeuScrapeError):
    pass


class SequenceTooLong(NeuScrapeError):
    pass


class LengthMismatch(NeuScrapeError):
    pass


class KeyMismatch(NeuScrapeError):
    pass


class CorruptCheckpoint(NeuScrapeError):
    pass


class VersionMismatch(NeuScrapeError):
    pass


class EmptyCorpus(NeuScrapeError):
    pass


class NonFiniteLoss(NeuScrapeError):
    pass
