"""Exception types shared across the pipeline."""


class CountSceneError(Exception):
    """Base class for all package errors."""


class ConfigError(CountSceneError):
    """Invalid configuration document or value.

    ``field`` holds the dotted path of the offending key when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class PlacementError(CountSceneError):
    """A zone holds more objects than it has room for."""


class SceneRejected(CountSceneError):
    """A scene failed visibility or contrast validation for good."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class NotVisibleError(CountSceneError):
    """Object owns no pixels in the inspected view."""


class DegenerateRegionError(CountSceneError):
    """Background ring around an object is empty."""


class RenderIOError(CountSceneError):
    def __init__(self, path, cause):
        self.path = str(path)
        super().__init__(f"cannot write {path}: {cause}")


class ManifestError(CountSceneError):
    """Malformed manifest or predictions file; ``line`` is 1-based."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class SplitError(CountSceneError):
    def __init__(self, message, klass=None):
        self.klass = klass
        super().__init__(message)
