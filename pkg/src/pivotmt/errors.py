"""Exception hierarchy.

The CLI maps the three top-level families onto exit codes: configuration
problems exit 1, data problems exit 2, numerical divergence exits 3.
"""


class PivotMTError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(PivotMTError):
    pass


class ConfigParse(ConfigError):
    pass


class DataError(PivotMTError):
    pass


class DivergenceError(PivotMTError):
    pass


# corpus
class LineCountMismatch(DataError):
    def __init__(self, src_lines, tgt_lines):
        super().__init__(f"source has {src_lines} lines, target has {tgt_lines}")
        self.src_lines = src_lines
        self.tgt_lines = tgt_lines


class EncodingError(DataError):
    def __init__(self, line_no, path=None):
        where = f" in {path}" if path else ""
        super().__init__(f"invalid UTF-8 at line {line_no}{where}")
        self.line_no = line_no
        self.path = path


class LanguageCollision(DataError):
    pass


class TargetMismatch(DataError):
    pass


# subword
class EmptyCorpus(DataError):
    pass


class TargetTooSmall(DataError):
    def __init__(self, alphabet_size):
        super().__init__(f"target vocab size must exceed the alphabet size ({alphabet_size})")
        self.alphabet_size = alphabet_size


# synth
class LanguageMismatch(DataError):
    pass


class TranslatorFailure(DataError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class UnknownToken(TranslatorFailure):
    def __init__(self, token):
        super().__init__(f"token not in lexicon: {token!r}")
        self.token = token


class LexiconDomainMismatch(DataError):
    pass


class InsufficientSynthetic(DataError):
    pass


# nmt
class DimensionMismatch(DataError):
    pass


class AllPositionsMasked(DataError):
    pass


class EmptyTargetError(DataError):
    pass


class NoSourceProvided(DataError):
    pass


class NonFiniteLoss(DivergenceError):
    def __init__(self, message, epoch=None, step=None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


# eval
class LengthMismatch(DataError):
    pass
