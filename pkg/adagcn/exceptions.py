class AdagcnError(Exception):
    """ Base class for everything this package raises on purpose. """


class DatasetError(AdagcnError):
    def __init__(self, reason, path=None, line=None):
        self.reason = reason
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = str(path)
            if line is not None:
                where += ":%d" % line
            where += ": "
        super(DatasetError, self).__init__(where + reason)


class ShapeError(AdagcnError):
    pass


class SplitError(AdagcnError):
    pass


class TrainingError(AdagcnError):
    def __init__(self, message, epoch=None, round_index=None):
        self.epoch = epoch
        self.round_index = round_index
        super(TrainingError, self).__init__(message)


class CheckpointError(AdagcnError):
    pass


class ConfigError(AdagcnError):
    pass
