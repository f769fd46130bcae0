"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` used by the CLI to report the failure
category.
"""


class MahedError(Exception):
    exit_code = 1
    module = "mahedkit"


class DatasetParseError(MahedError):
    """A dataset line could not be decoded."""

    exit_code = 4
    module = "corpus"

    def __init__(self, message, line_number=None, path=None):
        self.line_number = line_number
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line_number is not None:
            where += f":{line_number}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(MahedError):
    """A record or dataset violates a schema invariant."""

    exit_code = 4
    module = "corpus"

    def __init__(self, message, record_id=None, line_number=None):
        self.record_id = record_id
        self.line_number = line_number
        prefix = []
        if line_number is not None:
            prefix.append(f"line {line_number}")
        if record_id is not None:
            prefix.append(f"record {record_id!r}")
        super().__init__(f"{', '.join(prefix)}: {message}" if prefix else message)


class InputError(MahedError):
    exit_code = 3


class ContractViolation(MahedError):
    """A component returned or received data of the wrong shape."""

    exit_code = 5


class DegenerateDataError(MahedError):
    exit_code = 4
    module = "svm"


class TransportError(MahedError):
    """Remote call failed; ``retriable`` tells whether a retry may help."""

    exit_code = 5

    def __init__(self, message, retriable=True):
        self.retriable = retriable
        super().__init__(message)


class LabelParseError(MahedError):
    exit_code = 5
    module = "gateway"

    def __init__(self, message, raw_text):
        self.raw_text = raw_text
        super().__init__(f"{message}: {raw_text!r}")


class MissingFixtureError(MahedError):
    exit_code = 3
    module = "gateway"


class TrainingError(MahedError):
    exit_code = 6
    module = "mlp"


class UsageError(MahedError):
    exit_code = 2
    module = "cli"
