"""Typed errors raised by the codec, the privacy functions and the simulator."""


class SpgError(Exception):
    """Base class of every error raised by this package."""


class CodecError(SpgError):
    pass


class MalformedStartLine(CodecError):

    def __init__(self, line=''):
        super().__init__('malformed start line: {!r}'.format(line))
        self.line = line


class MissingMandatoryHeader(CodecError):

    def __init__(self, header):
        super().__init__('missing mandatory header: {}'.format(header))
        self.header = header


class BodyLengthMismatch(CodecError):

    def __init__(self, declared, actual):
        super().__init__(
            'Content-Length {} does not match body length {}'.format(declared, actual))
        self.declared = declared
        self.actual = actual


class InvariantViolation(CodecError):
    pass


class MalformedUri(CodecError):
    pass


class MalformedSdpLine(CodecError):

    def __init__(self, line_no, line=''):
        super().__init__('malformed SDP line {}: {!r}'.format(line_no, line))
        self.line_no = line_no
        self.line = line


class TruncatedItem(CodecError):
    pass


class PrivacyError(SpgError):
    pass


class VaultKeyMissing(PrivacyError):
    pass


class DialogCollision(PrivacyError):
    pass


class UnknownDialog(PrivacyError):
    pass


class TokenDecryptFailed(PrivacyError):
    pass


class TokenTampered(TokenDecryptFailed):
    pass


class TokenExpired(TokenDecryptFailed):
    pass


class PrivacyRejected(PrivacyError):
    """A critical Privacy request names a level the service cannot perform."""

    status_code = 500
    reason = 'Privacy Disagreement'

    def __init__(self, missing):
        self.missing = frozenset(missing)
        super().__init__('cannot accommodate privacy levels: {}'.format(
            ', '.join(sorted(level.value for level in self.missing))))


class NoSdpBody(PrivacyError):
    pass


class IdentityConflict(PrivacyError):
    pass


class RelayPortsExhausted(PrivacyError):
    pass


class SimulationError(SpgError):
    pass


class DisconnectedGraph(SimulationError):
    pass


class UnknownNextHop(SimulationError):
    pass


class RoutingLoop(SimulationError):
    pass


class UnknownPreset(SimulationError):
    pass


class InvalidTopology(SimulationError):
    pass
