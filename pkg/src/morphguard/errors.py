"""Exception hierarchy. Every library error derives from ``MorphGuardError``."""


class MorphGuardError(ValueError):
    pass


class ZeroVector(MorphGuardError):
    pass


class DimensionMismatch(MorphGuardError):
    pass


class EmptyInput(MorphGuardError):
    pass


class ParseError(MorphGuardError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DuplicateSample(MorphGuardError):
    pass


class InconsistentDimension(MorphGuardError):
    pass


class InvalidParameter(MorphGuardError):
    pass


class InvalidKappa(MorphGuardError):
    pass


class AntipodalPair(MorphGuardError):
    pass


class TooFewSubjects(MorphGuardError):
    pass


class MissingEnrollment(MorphGuardError):
    pass


class MissingSubject(MorphGuardError):
    pass


class EmptyProbeSet(MorphGuardError):
    pass


class EmptyPopulation(MorphGuardError):
    pass


class MalformedAttack(MorphGuardError):
    pass


class AttackIdMismatch(MorphGuardError):
    pass


class InvalidRC(MorphGuardError):
    pass


class InvalidThresholdOrder(MorphGuardError):
    pass


class ThresholdUnattainable(MorphGuardError):
    pass
