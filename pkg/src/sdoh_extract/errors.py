"""Exception hierarchy.

Every error raised by the package derives from :class:`SdohError`. The three
direct subclasses map onto CLI exit codes: usage problems (2), bad input data
(3) and model problems (4).
"""


class SdohError(Exception):
    exit_code = 1


class UsageError(SdohError):
    exit_code = 2


class DataError(SdohError):
    exit_code = 3


class ModelError(SdohError):
    exit_code = 4


# corpus / standoff


class MalformedLine(DataError):
    def __init__(self, line_no, line, reason="unparseable line"):
        self.line_no = line_no
        self.line = line
        super().__init__(f"line {line_no}: {reason}: {line!r}")


class SpanOutOfBounds(DataError):
    pass


class SurfaceMismatch(DataError):
    pass


class UnknownCategory(DataError):
    pass


class DanglingRelation(DataError):
    pass


class DiscontinuousSpanUnsupported(DataError):
    pass


class InvariantViolation(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class DocIdMismatch(DataError):
    pass


class SchemaError(DataError):
    pass


# textproc


class OverlappingEntities(DataError):
    pass


class EntityOutsideText(DataError):
    pass


class AlignmentFailure(DataError):
    pass


# models


class EmptyTrainingSet(ModelError):
    pass


class SchemaMismatch(ModelError):
    pass


class SchemaVersionMismatch(ModelError):
    pass


class UntrainedModel(ModelError):
    pass


class ModelFormatError(ModelError):
    pass


class NoPositiveExamples(UserWarning):
    """Relation training data contained no positive pair; the model predicts NONE."""


# selector / pipeline / synth


class SampleTooLarge(DataError):
    pass


class MissingTargetData(UsageError):
    pass


class UnknownPatient(DataError):
    pass


class EmptyRoster(DataError):
    pass


class TemplateCoverageGap(DataError):
    pass


class PlaceholderMismatch(DataError):
    pass
