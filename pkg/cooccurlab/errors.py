'''Exceptions raised by cooccurlab.

All validation failures derive from CooccurLabError, which is a ValueError,
so callers that only care about "bad input" can catch ValueError.'''


class CooccurLabError(ValueError):
    pass

class DictionaryError(CooccurLabError):
    '''A rule dictionary violates its invariants.'''

class DuplicateScanIdError(CooccurLabError):
    def __init__(self, scan_id):
        super(DuplicateScanIdError, self).__init__(
            'scan id {!r} occurs more than once.'.format(scan_id))
        self.scan_id = scan_id

class MissingSubjectError(CooccurLabError):
    def __init__(self, scan_id):
        super(MissingSubjectError, self).__init__(
            'scan id {!r} has no subject mapping.'.format(scan_id))
        self.scan_id = scan_id

class EmptyManifestError(CooccurLabError):
    pass

class UnknownClassError(CooccurLabError):
    pass

class DegenerateClassError(CooccurLabError):
    '''No positive or no negative scan is left after exclusion.'''

class InsufficientResamplesError(CooccurLabError):
    pass

class InvalidSpecError(CooccurLabError):
    pass

class VolumeFormatError(CooccurLabError):
    pass

class ConfigError(CooccurLabError):
    pass

class UsageError(CooccurLabError):
    pass
