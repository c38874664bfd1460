"""Exception types raised across the analysis pipeline."""


class ProjectNotFound(Exception):
    """The project root handed to the front end does not exist."""


class UnknownHandler(Exception):
    """A tool handler is not a node of the call graph."""


class InconsistentInput(Exception):
    """Checks or sensitive operations reference functions outside the tool context."""


class SpawnFailure(Exception):
    """The stdio server process could not be started."""


class HandshakeTimeout(Exception):
    """The server did not answer the initialize request within the deadline."""


class ProtocolMismatch(Exception):
    """The initialize response was not a usable JSON-RPC result."""


class TransportFailure(Exception):
    """The transport failed outside of a tool invocation (connect, write, read)."""


class ProbeSafetyError(Exception):
    """Refused to probe an endpoint that is neither harness-launched nor allow-listed."""


class SessionStateError(Exception):
    """A protocol request was attempted before the session was initialized."""
