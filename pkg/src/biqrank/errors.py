"""Exception hierarchy shared by every biqrank module."""


class BiqrankError(Exception):
    """Base class for all library errors."""


class InvalidMatrix(BiqrankError, ValueError):
    pass


class InvalidRank(BiqrankError, ValueError):
    pass


class InvalidIndex(BiqrankError, ValueError):
    pass


class DimensionMismatch(BiqrankError, ValueError):
    pass


class NotPsd(BiqrankError, ValueError):
    pass


class SizeLimit(BiqrankError, ValueError):
    pass


class NotC4Free(BiqrankError, ValueError):
    """The graph contains a 4-cycle, so the exact-rank theorem does not apply."""


class NotSimpleForm(BiqrankError, ValueError):
    pass


class NotCertified(BiqrankError, ValueError):
    """Rank search was requested for a form that was not certified SOS."""


class InvalidDecomposition(BiqrankError, ValueError):
    pass


class RankSearchFailed(BiqrankError, RuntimeError):
    pass
