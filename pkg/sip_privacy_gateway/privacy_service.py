"""A network privacy service: the net-privacy functions composed for one node."""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .b2bua import B2buaDialogMap, scrub_on_behalf
from .errors import IdentityConflict
from .header_privacy import ProtectedNetwork, apply_header_privacy, restore_headers
from .privacy_header import (
    PrivacyLevel,
    PrivacyRole,
    levels_from_names,
    process_privacy_header,
    requested_levels,
)
from .privacy_registry import PrivacyScope, removable_fields
from .route_vault import DEFAULT_MAX_AGE, ConcealMode, RouteVault
from .session_privacy import MediaRelay, apply_session_privacy
from .sip_message import make_response
from .user_privacy import ScrubPolicy

logger = logging.getLogger(__name__)

DEFAULT_CAPABILITIES = frozenset(PrivacyLevel) - {PrivacyLevel.CRITICAL}


class Distinctness(enum.Enum):
    OK = 'ok'
    CONFLICT = 'conflict'


def check_identity_distinctness(service_identity, protected_domains):
    """CONFLICT iff the service host equals or lies under a protected domain."""
    host = service_identity.split(':')[0].lower().rstrip('.')
    for domain in protected_domains:
        domain = domain.lower().rstrip('.')
        if host == domain or host.endswith('.' + domain):
            return Distinctness.CONFLICT
    return Distinctness.OK


def guard_added_headers(message, scope):
    """Drop removable headers the service may have added, per the scope markings."""
    return message.without_headers(*sorted(removable_fields(scope)))


def scope_for(levels):
    user = PrivacyLevel.USER in levels
    provider = PrivacyLevel.SERVICE_PROVIDER in levels
    if user and provider:
        return PrivacyScope.BOTH
    if user:
        return PrivacyScope.USER
    if provider:
        return PrivacyScope.PROVIDER
    return None


@dataclass(frozen=True)
class SideConfig:
    name: str
    protected: ProtectedNetwork = ProtectedNetwork()
    prearranged: frozenset = frozenset()


@dataclass(frozen=True)
class ServiceConfig:
    identity: str
    mode: ConcealMode = ConcealMode.STRIP
    key: Optional[bytes] = None
    capabilities: frozenset = DEFAULT_CAPABILITIES
    role: PrivacyRole = PrivacyRole.VPP_SERVICE
    sides: tuple = ()
    port: Optional[int] = None
    freshness: float = DEFAULT_MAX_AGE
    relay_address: Optional[str] = None
    server: Optional[str] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, data):
        sides = []
        if data.get('protected_domains') or data.get('protected_networks'):
            sides.append(SideConfig('', ProtectedNetwork.from_lists(
                data.get('protected_domains', ()), data.get('protected_networks', ()))))
        for name, side in sorted(data.get('sides', {}).items()):
            sides.append(SideConfig(
                name,
                ProtectedNetwork.from_lists(side.get('domains', ()), side.get('networks', ())),
                levels_from_names(side.get('prearranged', ()))))
        capabilities = data.get('capabilities')
        key = data.get('key')
        return cls(
            identity=data['identity'],
            mode=ConcealMode(data.get('mode', 'strip')),
            key=bytes.fromhex(key) if key else None,
            capabilities=(levels_from_names(capabilities) if capabilities is not None
                          else DEFAULT_CAPABILITIES),
            role=PrivacyRole(data.get('role', 'vpp')),
            sides=tuple(sides),
            port=data.get('port'),
            freshness=float(data.get('freshness_seconds', DEFAULT_MAX_AGE)),
            relay_address=data.get('relay'),
            server=data.get('server'),
            seed=int(data.get('seed', 0)),
        )

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def side(self, name):
        for side in self.sides:
            if side.name == name:
                return side
        return None

    @property
    def protected_domains(self):
        return [d for side in self.sides for d in side.protected.domains]


class PrivacyService:
    """Privacy functions of one node, with the state they share across dialogs.

    ``inbound`` runs on every message the node receives, ``outbound`` on
    every message it forwards; ``handle`` does both.
    """

    def __init__(self, config, clock=None, rng=None, relay=None):
        self.config = config
        self._rng = rng if rng is not None else np.random.default_rng(config.seed)
        self._rng_lock = threading.Lock()
        self.vault = RouteVault(config.mode, config.identity.split(':')[0], config.key,
                                clock=clock or time.monotonic, max_age=config.freshness,
                                random_bytes=self._random_bytes)
        self.dialogs = B2buaDialogMap()
        if relay is None and config.relay_address:
            relay = MediaRelay(config.relay_address)
        self.relay = relay
        self.policy = ScrubPolicy(PrivacyScope.BOTH, seed=config.seed)
        self._session_dialogs = set()
        self._lock = threading.Lock()
        if config.role is PrivacyRole.VPP_SERVICE and check_identity_distinctness(
                config.identity, config.protected_domains) is Distinctness.CONFLICT:
            raise IdentityConflict(
                'service identity {} lies inside a protected domain'.format(config.identity))

    def _random_bytes(self, size):
        with self._rng_lock:
            return self._rng.bytes(size)

    def _protects(self, side):
        if not self.config.sides:
            return ProtectedNetwork()
        config = self.config.side(side)
        return config.protected if config is not None else None

    def inbound(self, message, from_side=None):
        """Translate outer identifiers back and reinstate concealed routing."""
        mapping = self.dialogs.by_outer(message.call_id)
        if mapping is not None and from_side != mapping.inner_side:
            message = self.dialogs.to_inner(message)
        return restore_headers(message, self.vault, arriving_from=from_side)

    def outbound(self, message, from_side=None, to_side=None, trusted_out=False):
        """Apply the privacy levels requested for `message` as it leaves toward `to_side`.

        Raises PrivacyRejected when a critical request cannot be met.
        """
        self.vault.expire()
        side = self.config.side(from_side or '')
        prearranged = side.prearranged if side is not None else frozenset()
        call_id = message.call_id
        actions, message = process_privacy_header(
            message, self.config.capabilities, self.config.role,
            default_levels=prearranged, trusted_out=trusted_out)
        if actions - {PrivacyLevel.NONE}:
            logger.info('%s: performing privacy levels %s', message.cseq_method,
                        ', '.join(sorted(a.value for a in actions)))

        if PrivacyLevel.SESSION in actions:
            with self._lock:
                self._session_dialogs.add(call_id)
        protected = self._protects(from_side or '')
        if PrivacyLevel.HEADER in actions and protected is not None:
            message = apply_header_privacy(message, self.vault, side=from_side or '',
                                           protected=protected, service_port=self.config.port)
        with self._lock:
            session_active = call_id in self._session_dialogs
        if session_active and message.sdp is not None and self.relay is not None:
            message = apply_session_privacy(message, self.relay, private=True)

        mapping = self.dialogs.by_inner(call_id)
        toward_outer = mapping is None or to_side != mapping.inner_side
        scope = scope_for(actions)
        if scope is not None:
            message = scrub_on_behalf(message, scope, self.dialogs, self.policy,
                                      inner_side=from_side or '', toward_outer=toward_outer)
            message = guard_added_headers(message, scope)
        elif mapping is not None and toward_outer:
            message = self.dialogs.to_outer(message)
        self._track_dialog_end(message, call_id)
        return message

    def handle(self, message, from_side=None, to_side=None, trusted_out=False):
        return self.outbound(self.inbound(message, from_side), from_side, to_side, trusted_out)

    def _track_dialog_end(self, message, inner_call_id):
        if message.is_response and message.cseq_method == 'BYE' and message.status_code < 300:
            self.vault.close_dialog(inner_call_id)
            self.dialogs.close(inner_call_id)
            if self.relay is not None:
                self.relay.release(inner_call_id)
            with self._lock:
                self._session_dialogs.discard(inner_call_id)

    def reject(self, request, error, to_tag):
        """The response a rejected request gets: 500 Privacy Disagreement."""
        extra = [('Server', self.config.server)] if self.config.server else []
        response = make_response(request, error.status_code, error.reason, to_tag=to_tag,
                                 extra=extra)
        scope = scope_for(requested_levels(request))
        if scope is not None:
            response = guard_added_headers(response, scope)
        logger.info('rejected %s with %d %s', request.method, error.status_code, error.reason)
        return response
