"""Exception hierarchy shared by all drsim modules."""


class DrsimError(Exception):
    pass


# trace ingestion

class RecordParseError(DrsimError):
    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class EmptyTraceError(DrsimError):
    pass


# forecasting

class DegenerateRangeError(DrsimError):
    pass


class InsufficientDataError(DrsimError):
    pass


class EmptySplitError(DrsimError):
    pass


class ShapeMismatchError(DrsimError):
    pass


class NonFiniteLossError(DrsimError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


class AllTargetsNearZeroError(DrsimError):
    pass


class ModelLoadError(DrsimError):
    pass


# cluster simulation

class UnknownClusterError(DrsimError):
    pass


class AppNotRunningError(DrsimError):
    pass


class BackupNotFoundError(DrsimError):
    pass


class AlreadyDisconnectedError(DrsimError):
    pass


class TargetDisconnectedError(DrsimError):
    pass


# recovery pipeline

class ReplayExhaustedError(DrsimError):
    pass


# scenario harness

class ConfigParseError(DrsimError):
    def __init__(self, path, key, reason: str):
        super().__init__(f"{path}: key {key!r}: {reason}")
        self.path = path
        self.key = key
        self.reason = reason


class ConfigInvalidError(DrsimError):
    pass
