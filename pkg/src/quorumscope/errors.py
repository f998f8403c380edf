"""Exception hierarchy shared by all quorumscope modules."""


class QuorumScopeError(Exception):
    pass


# -- quorum set validation --------------------------------------------------

class QuorumSetError(QuorumScopeError, ValueError):
    """A quorum set violates a structural invariant.

    ``path`` locates the offending level, e.g. ``"inner_sets[1].node_members[0]"``.
    """

    def __init__(self, message, path=""):
        self.path = path
        where = f" at {path}" if path else ""
        super().__init__(f"{message}{where}")


class ThresholdOutOfRange(QuorumSetError):
    pass


class DuplicateMember(QuorumSetError):
    pass


class UnknownNode(QuorumSetError):
    pass


class DepthExceeded(QuorumSetError):
    pass


# -- analysis ---------------------------------------------------------------

class NoActiveNodes(QuorumScopeError):
    pass


class AnalysisTimeout(QuorumScopeError):
    """The search visited more branches than its budget allows."""


class UniverseTooLarge(QuorumScopeError):
    pass


# -- crawling / wire --------------------------------------------------------

class QueryError(QuorumScopeError):
    reason = "error"


class ConnectFailed(QueryError):
    reason = "connect_failed"


class QueryTimeout(QueryError):
    reason = "timeout"


class MalformedResponse(QueryError):
    reason = "malformed_response"


class AllBootstrapUnreachable(QuorumScopeError):
    pass


class BindFailed(QuorumScopeError):
    pass


# -- persistence ------------------------------------------------------------

class StoreUnavailable(QuorumScopeError):
    pass


class DuplicateTimestamp(QuorumScopeError):
    pass


class ParseError(QuorumScopeError):
    pass


class SchemaVersionUnsupported(QuorumScopeError):
    pass


class ValidationError(QuorumScopeError):
    pass


class InvalidIp(QuorumScopeError, ValueError):
    pass
