'''Exceptions raised across the simulator, agents and harness.'''


# CLASS OBJECT -------------------------------------------------------------
class ExplorationError(Exception):
    '''Base class for all errors raised by this package.'''


class ConfigurationError(ExplorationError):
    '''Task or sweep configuration is invalid.'''


class RepeatActionError(ExplorationError):
    '''An object was picked up twice while repeats are disallowed.'''


class ObjectNotFoundError(ExplorationError):
    '''An object id does not exist in the universe.'''


class EpisodeTerminatedError(ExplorationError):
    '''A step was attempted after the episode ended.'''


class InconsistentHistoryError(ExplorationError):
    '''No reward rule explains the observations; the trajectory is corrupted.'''


class ExhaustedUniverseError(ExplorationError):
    '''Every object has been tried but the hypothesis set is not yet sufficient.'''


class TemplateError(ExplorationError):
    '''Prompt template refers to an unknown placeholder.'''


class ParseFailure(ExplorationError):
    '''Model response is missing a required labeled line.'''


class AmbiguousActionError(ParseFailure):
    '''Action phrase matches more than one object.'''


class UnknownObjectError(ParseFailure):
    '''Action phrase matches no object in the universe.'''


class BackendError(ExplorationError):
    '''Model backend failed to return a completion.'''


class DesignError(ExplorationError):
    '''Statistical design cannot be fitted (too few groups, rank deficiency).'''


class SchemaError(ExplorationError):
    '''Persisted trajectory line does not follow the trajectory schema.'''
