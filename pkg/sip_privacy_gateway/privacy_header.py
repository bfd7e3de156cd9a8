"""Privacy header levels and their consumption by privacy services."""

from __future__ import annotations

import enum
import logging

from .errors import PrivacyRejected

logger = logging.getLogger(__name__)


class PrivacyLevel(enum.Enum):
    USER = 'user'
    HEADER = 'header'
    SESSION = 'session'
    NONE = 'none'
    CRITICAL = 'critical'
    ID = 'id'
    SERVICE_PROVIDER = 'service-provider'

    @classmethod
    def parse(cls, text):
        return cls(text.strip().lower())


class PrivacyRole(enum.Enum):
    VSP_SERVICE = 'vsp'
    VPP_SERVICE = 'vpp'


ALL_LEVELS = frozenset(PrivacyLevel)
FUNCTION_LEVELS = frozenset(ALL_LEVELS - {PrivacyLevel.CRITICAL})


def parse_levels(text):
    """Parse a Privacy header value into (levels, unknown tokens).

    Values repeat at most once; repeats collapse.
    """
    levels = []
    unknown = []
    for token in text.replace(',', ';').split(';'):
        token = token.strip()
        if not token:
            continue
        try:
            level = PrivacyLevel.parse(token)
        except ValueError:
            unknown.append(token)
            continue
        if level not in levels:
            levels.append(level)
    return levels, unknown


def format_levels(levels, unknown=()):
    return ';'.join([level.value for level in levels] + list(unknown))


def levels_from_names(names):
    return frozenset(PrivacyLevel.parse(name) for name in names)


def requested_levels(message):
    value = message.value('Privacy')
    if value is None:
        return frozenset()
    return frozenset(parse_levels(value)[0])


def process_privacy_header(message, capabilities, role=PrivacyRole.VPP_SERVICE,
                           default_levels=frozenset(), trusted_out=False):
    """Perform the requested levels this service is capable of.

    Returns the performed set and the message with its Privacy header
    updated. A VPP service drops the values it performed and drops the
    whole header once only ``critical`` (or nothing) is left. A VSP service
    that hands the message on to a third-party service leaves the header as
    it is. `default_levels` apply when the message carries no Privacy header.
    Over a trusted outgoing link the id level is left for the next hop.

    Raises PrivacyRejected if ``critical`` is requested alongside a level the
    service cannot perform.
    """
    capabilities = frozenset(capabilities)
    header = message.value('Privacy')
    if header is None:
        requested, unknown = [lv for lv in default_levels], []
    else:
        requested, unknown = parse_levels(header)
    requested_set = frozenset(requested)
    wanted = requested_set - {PrivacyLevel.CRITICAL}

    if PrivacyLevel.CRITICAL in requested_set and not wanted <= capabilities:
        missing = wanted - capabilities
        logger.info('rejecting request: cannot perform %s',
                    ', '.join(sorted(level.value for level in missing)))
        raise PrivacyRejected(missing)

    if PrivacyLevel.NONE in requested_set:
        performed = frozenset({PrivacyLevel.NONE}) & capabilities
    else:
        performed = wanted & capabilities
        if trusted_out:
            performed = performed - {PrivacyLevel.ID}

    if PrivacyLevel.ID in performed:
        message = message.without_headers('P-Asserted-Identity', 'P-Preferred-Identity')

    if header is None or role is PrivacyRole.VSP_SERVICE:
        return performed, message

    remaining = [level for level in requested if level not in performed]
    if set(remaining) <= {PrivacyLevel.CRITICAL} and not unknown:
        return performed, message.without_headers('Privacy')
    return performed, message.with_header_value('Privacy', format_levels(remaining, unknown))


def add_privacy_levels(message, levels):
    """Merge `levels` into the message's Privacy header, keeping existing order."""
    if not levels:
        return message
    header = message.value('Privacy')
    existing, unknown = parse_levels(header) if header is not None else ([], [])
    merged = list(existing)
    for level in sorted(levels, key=lambda lv: list(PrivacyLevel).index(lv)):
        if level not in merged:
            merged.append(level)
    if merged == existing and header is not None:
        return message
    return message.with_header_value('Privacy', format_levels(merged, unknown))
