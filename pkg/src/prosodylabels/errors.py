"""Exception types shared across the pipeline.

Everything derives from :class:`ProsodyError` (a ``ValueError``) so callers,
and the CLI in particular, can treat bad input uniformly.
"""


class ProsodyError(ValueError):
    pass


class MalformedLine(ProsodyError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        msg = f"malformed line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class NonMonotonicTimes(ProsodyError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        msg = f"non-monotonic times at line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class WindowTooShort(ProsodyError):
    pass


class AudioTooShort(ProsodyError):
    pass


class NoVoicedFrames(ProsodyError):
    pass


class EvenWindow(ProsodyError):
    pass


class EmptyTrack(ProsodyError):
    pass


class TooFewPoints(ProsodyError):
    pass


class RangeTooNarrow(ProsodyError):
    pass


class NonPositiveF0(ProsodyError):
    pass


class NegativeSemitone(ProsodyError):
    pass


class NonPositiveScale(ProsodyError):
    pass


class NonFiniteInput(ProsodyError):
    pass


class DimensionMismatch(ProsodyError):
    pass


class EmptyCorpus(ProsodyError):
    pass
