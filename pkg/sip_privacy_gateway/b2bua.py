"""B2BUA dialog identifiers and scrubbing on a user's behalf.

Changing Call-ID or From is not open to a proxy, so a service that does it
keeps two dialogs: the inner one seen by the requesting side and the outer
one seen by everybody else, and translates every message between them.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace

from .errors import DialogCollision
from .privacy_registry import requires_b2bua
from .user_privacy import (
    ANONYMOUS_HOST,
    remove_fields,
    scrub_message,
    scrub_sdp,
)
from .sip_message import parse_address, serialize_address

logger = logging.getLogger(__name__)

CSEQ_PASS_THROUGH = 'pass-through'


def _bare(address):
    return address.without_params('tag')


@dataclass(frozen=True)
class DialogMapping:
    inner_call_id: str
    outer_call_id: str
    caller_tag: str
    inner_caller: object
    outer_caller: object
    inner_callee: object
    outer_callee: object
    inner_side: str = ''
    cseq_policy: str = CSEQ_PASS_THROUGH


def _rewrite_party(message, name, mapping, to_outer):
    value = message.value(name)
    if value is None:
        return message
    address = parse_address(value)
    if address.tag is not None and address.tag == mapping.caller_tag:
        target = mapping.outer_caller if to_outer else mapping.inner_caller
    else:
        target = mapping.outer_callee if to_outer else mapping.inner_callee
    rewritten = serialize_address(replace(target, params=address.params))
    if parse_address(rewritten) == address:
        return message
    return message.with_header_value(name, rewritten)


def translate(message, mapping, to_outer):
    call_id = mapping.outer_call_id if to_outer else mapping.inner_call_id
    result = message.with_header_value('Call-ID', call_id)
    for name in ('From', 'To'):
        result = _rewrite_party(result, name, mapping, to_outer)
    return result


class B2buaDialogMap:
    """Bijection between inner and outer dialog identifiers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._by_inner = {}
        self._by_outer = {}

    def __len__(self):
        with self._lock:
            return len(self._by_inner)

    def open(self, inner, outer, inner_side=''):
        """Record the dialog formed by request `inner`, forwarded as `outer`."""
        caller = parse_address(inner.value('From'))
        mapping = DialogMapping(
            inner_call_id=inner.call_id, outer_call_id=outer.call_id,
            caller_tag=caller.tag or '',
            inner_caller=_bare(caller), outer_caller=_bare(parse_address(outer.value('From'))),
            inner_callee=_bare(parse_address(inner.value('To'))),
            outer_callee=_bare(parse_address(outer.value('To'))),
            inner_side=inner_side)
        with self._lock:
            known = self._by_outer.get(mapping.outer_call_id)
            if known is not None and known.inner_call_id != mapping.inner_call_id:
                raise DialogCollision('outer Call-ID already maps another dialog')
            self._by_inner[mapping.inner_call_id] = mapping
            self._by_outer[mapping.outer_call_id] = mapping
        logger.info('opened B2BUA dialog mapping for side %s', inner_side or '-')
        return mapping

    def by_inner(self, call_id):
        with self._lock:
            return self._by_inner.get(call_id)

    def by_outer(self, call_id):
        with self._lock:
            return self._by_outer.get(call_id)

    def is_outer(self, call_id):
        with self._lock:
            mapping = self._by_outer.get(call_id)
            return mapping is not None and mapping.outer_call_id != mapping.inner_call_id

    def to_outer(self, message):
        mapping = self.by_inner(message.call_id)
        return translate(message, mapping, True) if mapping is not None else message

    def to_inner(self, message):
        mapping = self.by_outer(message.call_id)
        return translate(message, mapping, False) if mapping is not None else message

    def close(self, call_id):
        with self._lock:
            mapping = self._by_inner.pop(call_id, None) or self._by_outer.get(call_id)
            if mapping is not None:
                self._by_inner.pop(mapping.inner_call_id, None)
                self._by_outer.pop(mapping.outer_call_id, None)


def is_dialog_initial(message):
    if not message.is_request or message.method in ('ACK', 'CANCEL'):
        return False
    to = message.value('To')
    return to is not None and parse_address(to).tag is None


def _hide_callee_provider(message):
    to = parse_address(message.value('To'))
    if to.uri.is_tel or to.uri.host == ANONYMOUS_HOST:
        return message
    hidden = replace(to, uri=replace(to.uri, host=ANONYMOUS_HOST, port=None))
    return message.with_header_value('To', serialize_address(hidden))


def proxy_forbidden_changes(before, after):
    """Headers changed from `before` to `after` in a way a proxy may not make."""
    forbidden = []
    for header in before.headers:
        name = header.canonical
        if name in forbidden:
            continue
        if not after.has(name):
            operation = 'delete'
        elif after.value(name) != before.value(name):
            operation = 'modify'
        else:
            continue
        if requires_b2bua(name, operation):
            forbidden.append(name)
    return forbidden


def scrub_on_behalf(message, scope, dialog_map, policy, inner_side='', toward_outer=True):
    """Run the user-side functions for the sender at `scope`.

    A dialog-initial request is fully scrubbed and, if any header was removed
    or changed in a way a proxy may not, opens a mapping in `dialog_map`; it
    comes back in outer form. Later messages lose their removable fields and
    SDP lines and, when `toward_outer`, get their identifiers translated
    through the mapping.
    """
    policy = replace(policy, scope=scope)
    if dialog_map.by_inner(message.call_id) is None and is_dialog_initial(message):
        scrubbed, _report = scrub_message(message, policy)
        if scope.includes_provider:
            scrubbed = _hide_callee_provider(scrubbed)
        forbidden = proxy_forbidden_changes(message, scrubbed)
        if forbidden:
            logger.debug('B2BUA handling for %s', ', '.join(forbidden))
            dialog_map.open(message, scrubbed, inner_side)
        return scrubbed
    scrubbed, _removed = remove_fields(message, scope)
    if scrubbed.sdp is not None:
        sdp = scrub_sdp(scrubbed.sdp, policy)
        if sdp != scrubbed.sdp:
            scrubbed = scrubbed.with_sdp(sdp)
    return dialog_map.to_outer(scrubbed) if toward_outer else scrubbed
