class PenningError(Exception):
    pass


class ConfigInvalid(PenningError, ValueError):
    pass


class NonconfiningRotation(ConfigInvalid):
    pass


class CoincidentIons(PenningError, ValueError):
    pass


class OriginUndefined(PenningError, ValueError):
    pass


class NoRoot(PenningError, RuntimeError):
    pass


class DivergedOutsideSeparatrix(PenningError, RuntimeError):
    def __init__(self, msg, ion_index=None, rho=None, limit=None):
        super().__init__(msg)
        self.ion_index = ion_index
        self.rho = rho
        self.limit = limit


class DegenerateGeometry(PenningError, ValueError):
    pass


class UnstableCrystal(PenningError, RuntimeError):
    pass


class ResonantDrive(PenningError, ValueError):
    pass


class InsufficientPairs(PenningError, ValueError):
    pass


class IndexOutOfRange(PenningError, IndexError):
    pass


class StageFailed(PenningError, RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class MissingUpstream(PenningError, FileNotFoundError):
    pass


class UnknownFigure(PenningError, ValueError):
    pass


class PlanarityWarning(UserWarning):
    pass
