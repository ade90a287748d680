"""Error types shared by every package.

Everything raised on purpose derives from `FreqGcnError`, so the CLI can tell
data problems (exit 1) apart from bugs.
"""
from typing import Iterable, List, Optional, Sequence


class FreqGcnError(Exception):
    """Base class for all expected failures."""


class ParameterError(FreqGcnError, ValueError):
    """A parameter is outside its documented range."""


class PoseParseError(FreqGcnError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class PoseFormatError(FreqGcnError, ValueError):
    """Keypoint payload parsed but has the wrong shape."""


class PreprocessError(FreqGcnError, ValueError):
    """A preprocessing precondition does not hold."""


class DegenerateFrameError(PreprocessError):
    def __init__(self, frames: Iterable[int]):
        self.frames: List[int] = list(frames)
        shown = ", ".join(str(f) for f in self.frames[:20])
        more = f" (+{len(self.frames) - 20} more)" if len(self.frames) > 20 else ""
        super().__init__(f"neck coincides with the body origin in frame(s) {shown}{more}")


class DimensionError(FreqGcnError, ValueError):
    def __init__(self, op: str, left: Sequence[int], right: Optional[Sequence[int]] = None):
        self.left = tuple(left)
        self.right = tuple(right) if right is not None else None
        if self.right is None:
            msg = f"{op}: unsupported shape {self.left}"
        else:
            msg = f"{op}: incompatible shapes {self.left} and {self.right}"
        super().__init__(msg)


class ContractError(FreqGcnError, RuntimeError):
    """An API contract was violated by the caller."""


class ProtocolError(FreqGcnError, ValueError):
    """The evaluation protocol cannot run on this data."""


class DataError(FreqGcnError, ValueError):
    """Input files are missing or incomplete."""
