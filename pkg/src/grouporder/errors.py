"""Exception hierarchy.

``DataError`` covers anything wrong with the inputs (bad files, too little
data for a pair); ``NumericalError`` covers computations that cannot proceed
on otherwise valid inputs. The CLI maps them to exit codes 2 and 3.
"""


class DataError(ValueError):
    pass


class PanelSchemaError(DataError):
    pass


class DuplicateEntryError(DataError):
    def __init__(self, market_id, agent_id):
        super().__init__(f"agent {agent_id!r} appears more than once in market {market_id!r}")
        self.market_id = market_id
        self.agent_id = agent_id


class PanelParseError(DataError):
    def __init__(self, message, row):
        super().__init__(f"row {row}: {message}")
        self.row = row


class InsufficientDataError(DataError):
    pass


class IncompatibleIndexError(DataError):
    pass


class NumericalError(ArithmeticError):
    pass


class DegenerateSupportError(NumericalError):
    pass


class CannotSplitError(NumericalError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
