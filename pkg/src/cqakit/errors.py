"""Exception types shared across the pipeline stages."""


class PipelineError(Exception):
    """Base class for data/config problems surfaced to the CLI (exit 65)."""


class ConfigError(PipelineError):
    """Invalid or inconsistent configuration."""


class DataFormatError(PipelineError):
    """An input file violates its documented format."""

    def __init__(self, message, path=None, line=None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if line is not None:
            detail = f"{detail} (line {line})"
        super().__init__(detail)
        self.path = path
        self.line = line


class DumpParseError(DataFormatError):
    """The posts XML is not well formed."""

    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class DegenerateEmbeddingError(PipelineError):
    """A projected vector collapsed to (near) zero norm."""


class FingerprintMismatchError(PipelineError):
    """Query encoder does not match the model that built the index."""


class TrainingDivergedError(PipelineError):
    """Loss became non-finite during training."""

    def __init__(self, step, language, loss):
        super().__init__(f"non-finite loss {loss!r} at step {step} (language {language!r})")
        self.step = step
        self.language = language
        self.loss = loss
