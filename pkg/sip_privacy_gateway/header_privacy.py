"""Topology hiding of Via, Route, Record-Route and Contact.

Outgoing messages get their routing entries replaced by entries naming the
privacy service and carrying a ``pvt`` parameter (the cache index or the
encrypted originals; a bare marker in strip mode). Messages routed back
through the service get the originals reinstated.
"""

from __future__ import annotations

import hashlib
import ipaddress
import logging
from dataclasses import dataclass

from .errors import CodecError, UnknownDialog
from .route_vault import ConcealedSet, ConcealMode
from .sip_message import (
    Address,
    SipUri,
    Via,
    entry_host,
    parse_address,
    parse_via,
    serialize_address,
    serialize_uri,
    serialize_via,
)

logger = logging.getLogger(__name__)

PVT_PARAM = 'pvt'
BRANCH_MAGIC = 'z9hG4bK'
KEPT_CONTACT_PARAMS = ('expires', 'q')


@dataclass(frozen=True)
class ProtectedNetwork:
    """Domains and address ranges whose hosts are concealed."""

    domains: tuple = ()
    networks: tuple = ()

    @classmethod
    def from_lists(cls, domains=(), networks=()):
        return cls(domains=tuple(d.lower().rstrip('.') for d in domains),
                   networks=tuple(ipaddress.ip_network(n, strict=False) for n in networks))

    @property
    def empty(self):
        return not self.domains and not self.networks

    def __contains__(self, host):
        if not host:
            return False
        host = host.strip('[]').lower().rstrip('.')
        try:
            address = ipaddress.ip_address(host)
        except ValueError:
            return any(host == d or host.endswith('.' + d) for d in self.domains)
        return any(address in network for network in self.networks)


def _service_uri(host, port, params):
    return SipUri(scheme='sip', user=None, host=host, port=port, params=tuple(params))


def _correlation(call_id):
    return 'c' + hashlib.sha256(call_id.encode('utf-8')).hexdigest()[:16]


def _transaction(message):
    number, method = message.cseq
    if message.is_response:
        return '{} {} {}'.format(number, method, message.status_code)
    return '{} {}'.format(number, method)


def _request_transaction(message):
    number, method = message.cseq
    return '{} {}'.format(number, method)


def _hull(entries, name, protected):
    """Index range spanning the protected entries, or None if there are none."""
    hits = [i for i, entry in enumerate(entries)
            if protected.empty or entry_host(entry, name) in protected]
    if not hits:
        return None
    return hits[0], hits[-1] + 1


def is_service_entry(entry, name, host):
    """True for a replacement entry this service produced."""
    try:
        if name == 'Via':
            via = parse_via(entry)
            return via.host == host and via.param(PVT_PARAM) is not None
        uri = parse_address(entry).uri
    except CodecError:
        return False
    return uri.host == host and uri.param(PVT_PARAM) is not None


def _entry_token(entry, name):
    if name == 'Via':
        return parse_via(entry).param(PVT_PARAM)
    return parse_address(entry).uri.param(PVT_PARAM)


def apply_header_privacy(message, vault, side='', protected=None, service_port=None):
    """Conceal the routing headers of `message` behind the service identity.

    Requests lose their whole Via list to a single service Via. The span of
    Route and Record-Route entries whose hosts are protected (all entries when
    no protected network is given) collapses into one service entry, and a
    protected Contact becomes a service URI. Responses keep their Via list.
    """
    host = vault.service_host
    protected = protected if protected is not None else ProtectedNetwork()
    call_id = message.call_id

    vias = tuple(message.entries('Via')) if message.is_request else ()
    routes = message.entries('Route') if message.is_request else []
    record_routes = message.entries('Record-Route')
    route_span = _hull(routes, 'Route', protected)
    rr_span = _hull(record_routes, 'Record-Route', protected)
    contacts = message.entries('Contact')
    contact = None
    if contacts and contacts[0].strip() != '*':
        if protected.empty or entry_host(contacts[0], 'Contact') in protected:
            contact = contacts[0]
    if not vias and route_span is None and rr_span is None and contact is None:
        return message

    concealed = ConcealedSet(
        call_id=call_id, transaction=_transaction(message), side=side,
        from_response=message.is_response, vias=vias,
        routes=tuple(routes[slice(*route_span)]) if route_span else (),
        record_routes=tuple(record_routes[slice(*rr_span)]) if rr_span else (),
        contact=contact, created=vault.now())
    with vault.locks.hold(call_id):
        token = vault.conceal(concealed)
    token_param = (PVT_PARAM, token)

    result = message
    if vias:
        top = parse_via(vias[0])
        seed = '{}|{}|{}'.format(host, top.branch or '', call_id)
        branch = BRANCH_MAGIC + hashlib.sha256(seed.encode('utf-8')).hexdigest()[:20]
        via = Via(protocol=top.protocol, host=host, port=service_port,
                  params=(('branch', branch), token_param))
        result = result.with_entries('Via', [serialize_via(via)])
    entry = serialize_address(Address(uri=_service_uri(host, service_port,
                                                       [('lr', None), token_param])))
    if route_span:
        start, stop = route_span
        result = result.with_entries('Route', routes[:start] + [entry] + routes[stop:])
    if rr_span:
        start, stop = rr_span
        result = result.with_entries(
            'Record-Route', record_routes[:start] + [entry] + record_routes[stop:])
    if contact is not None:
        original = parse_address(contact)
        pvt = token if token is not None else _correlation(call_id)
        replacement = Address(
            uri=_service_uri(host, service_port, [(PVT_PARAM, pvt)]),
            params=tuple((k, v) for k, v in original.params
                         if k.strip().lower() in KEPT_CONTACT_PARAMS))
        result = result.with_entries('Contact', [serialize_address(replacement)])
    logger.info('concealed %s %s from side %s (%s mode)',
                'response' if message.is_response else 'request',
                concealed.transaction, side or '-', vault.mode.value)
    return result


def _recover(vault, token, lookup):
    if vault.mode is ConcealMode.STRIP:
        return lookup()
    if not token:
        raise UnknownDialog('replacement entry carries no token')
    return vault.recover(token)


def _splice(entries, name, host, originals):
    """Put `originals` where the first service entry was; drop other service entries."""
    out = []
    done = False
    for entry in entries:
        if is_service_entry(entry, name, host):
            if not done:
                out.extend(originals)
                done = True
            continue
        out.append(entry)
    return out


def restore_headers(message, vault, arriving_from=None):
    """Reinstate the originals behind the service entries of `message`.

    Responses get their Via list (and a concealed Record-Route span, behind
    a plain entry for the service) back from the set of the request they
    answer. In-dialog requests get the route set and the remote target of
    the far side back. Sets concealed for `arriving_from` are never used.
    Messages naming no service entry are returned unchanged.
    """
    host = vault.service_host
    call_id = message.call_id
    if message.is_response:
        vias = message.entries('Via')
        service_vias = [v for v in vias if is_service_entry(v, 'Via', host)]
        if not service_vias:
            return message
        concealed = _recover(vault, _entry_token(service_vias[0], 'Via'), lambda: vault.lookup(
            call_id, arriving_from, False, _request_transaction(message)))
        result = message.with_entries('Via', _splice(vias, 'Via', host, concealed.vias))
        record_routes = result.entries('Record-Route')
        if any(is_service_entry(e, 'Record-Route', host) for e in record_routes):
            # the service entry also stood for the service's own hop
            own = serialize_address(Address(uri=_service_uri(host, None, [('lr', None)])))
            result = result.with_entries('Record-Route', _splice(
                record_routes, 'Record-Route', host, (own,) + concealed.record_routes))
        logger.info('restored response %s for %s', concealed.transaction, call_id)
        return result

    routes = message.entries('Route')
    service_routes = [r for r in routes if is_service_entry(r, 'Route', host)]
    uri = message.uri
    target_concealed = uri is not None and not uri.is_tel and uri.host == host \
        and uri.param(PVT_PARAM) is not None
    if not service_routes and not target_concealed:
        return message
    if service_routes:
        token = _entry_token(service_routes[0], 'Route')
    else:
        token = uri.param(PVT_PARAM)
    concealed = _recover(vault, token, lambda: vault.dialog_record(call_id, arriving_from))
    result = message
    if service_routes:
        originals = concealed.record_routes
        if concealed.from_response:
            originals = tuple(reversed(originals))
        result = result.with_entries('Route', _splice(routes, 'Route', host, originals))
    if target_concealed and concealed.contact is not None:
        result = result.with_request_uri(serialize_uri(parse_address(concealed.contact).uri))
    logger.info('restored %s routing for %s', message.method, call_id)
    return result
