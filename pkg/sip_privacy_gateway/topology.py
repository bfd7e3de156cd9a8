"""Peering topologies: VSP deployment models, nodes, links and their validation."""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field

from .errors import DisconnectedGraph, InvalidTopology, UnknownNextHop
from .privacy_header import PrivacyLevel, levels_from_names

logger = logging.getLogger(__name__)

VPP = 'vpp'


class DeploymentModel(enum.Enum):
    COMPOSED = 'composed'
    QUASI_DECOMPOSED = 'quasi-decomposed'
    FULLY_DECOMPOSED = 'fully-decomposed'


class ConnectionMethod(enum.Enum):
    COLLOCATED_VSP_IAP = 'collocated'
    SEPARATE_SHARED = 'separate-shared'
    SEPARATE_DEDICATED = 'separate-dedicated'

    @property
    def collocated(self):
        return self is ConnectionMethod.COLLOCATED_VSP_IAP


class NodeRole(enum.Enum):
    UA = 'UA'
    SF = 'SF'
    MF = 'MF'
    VPP_SF = 'VPP-SF'
    VPP_MF = 'VPP-MF'

    @property
    def signaling(self):
        return self in (NodeRole.SF, NodeRole.VPP_SF)

    @property
    def media(self):
        return self in (NodeRole.MF, NodeRole.VPP_MF)


def derive_privacy_request(model, method, relax_session=False):
    """Levels a VSP asks the VPP for, given how it is deployed and connected.

    A VSP that also carries the media (it is the access provider, or it runs
    its own media function) needs session privacy as well; a fully
    decomposed VSP only handles signaling. `relax_session` drops session for
    a VSP that accepts the risk of its identity being guessed from media.
    """
    model = DeploymentModel(model)
    method = ConnectionMethod(method)
    levels = {PrivacyLevel.HEADER, PrivacyLevel.SERVICE_PROVIDER}
    if method.collocated or model is not DeploymentModel.FULLY_DECOMPOSED:
        levels.add(PrivacyLevel.SESSION)
    if relax_session:
        levels.discard(PrivacyLevel.SESSION)
    return frozenset(levels)


@dataclass(frozen=True)
class VspSpec:
    name: str
    domain: str
    model: DeploymentModel = DeploymentModel.COMPOSED
    connection: ConnectionMethod = ConnectionMethod.SEPARATE_SHARED
    networks: tuple = ()
    privacy: frozenset = frozenset()
    critical: bool = False

    @classmethod
    def from_dict(cls, name, data, enabled=True):
        model = DeploymentModel(data.get('model', 'composed'))
        connection = ConnectionMethod(data.get('connection', 'separate-shared'))
        if not enabled:
            privacy = frozenset()
        elif 'privacy' in data:
            privacy = levels_from_names(data['privacy'])
        else:
            privacy = derive_privacy_request(model, connection,
                                             data.get('relax_session', False))
        return cls(name=name, domain=data['domain'].lower(), model=model,
                   connection=connection, networks=tuple(data.get('networks', ())),
                   privacy=privacy, critical=bool(data.get('critical', False)) and enabled)


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    role: NodeRole
    vsp: str
    host: str
    domain: str = ''
    routes: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    trusted: bool = False

    @property
    def key(self):
        return link_key(self.a, self.b)


def link_key(a, b):
    return tuple(sorted((a, b)))


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    links: tuple
    vsps: dict
    vpp_domain: str = ''
    seed: int = 0

    def node(self, node_id):
        for node in self.nodes:
            if node.node_id == node_id:
                return node
        raise UnknownNextHop('no node {!r}'.format(node_id))

    def has_node(self, node_id):
        return any(node.node_id == node_id for node in self.nodes)

    def link(self, a, b):
        key = link_key(a, b)
        for link in self.links:
            if link.key == key:
                return link
        return None

    def neighbors(self, node_id):
        out = []
        for link in self.links:
            if link.a == node_id:
                out.append(link.b)
            elif link.b == node_id:
                out.append(link.a)
        return out

    def nodes_of(self, vsp):
        return [node for node in self.nodes if node.vsp == vsp]

    def nodes_with_role(self, role):
        return [node for node in self.nodes if node.role is role]

    def node_for_host(self, host):
        host = (host or '').strip('[]').lower()
        for node in self.nodes:
            if node.host.lower() == host:
                return node
        return None

    @property
    def has_vpp(self):
        return bool(self.nodes_with_role(NodeRole.VPP_SF))

    def boundary(self, vsp):
        """Links a VSP's identity may appear on: its own and those into the VPP."""
        inside = {node.node_id for node in self.nodes if node.vsp in (vsp, VPP)}
        return {link.key for link in self.links if link.a in inside and link.b in inside}

    def protected_tokens(self, vsp):
        """Domain, hosts and extra identifying strings of a VSP's nodes."""
        tokens = {self.vsps[vsp].domain}
        for node in self.nodes_of(vsp):
            tokens.add(node.host)
            tokens.update(node.parameters.get('tokens', ()))
        return sorted(tokens)


def _parse_link(item):
    if isinstance(item, dict):
        return LinkSpec(item['a'], item['b'], bool(item.get('trusted', False)))
    a, b = item[0], item[1]
    trusted = bool(item[2]) if len(item) > 2 else False
    return LinkSpec(a, b, trusted)


def _check_connected(topology):
    if not topology.nodes:
        raise DisconnectedGraph('topology has no nodes')
    start = topology.nodes[0].node_id
    seen = {start}
    queue = deque([start])
    while queue:
        for neighbor in topology.neighbors(queue.popleft()):
            if neighbor not in seen:
                seen.add(neighbor)
                queue.append(neighbor)
    missing = sorted(node.node_id for node in topology.nodes if node.node_id not in seen)
    if missing:
        raise DisconnectedGraph('unreachable nodes: {}'.format(', '.join(missing)))


def _check_routes(topology):
    for node in topology.nodes:
        neighbors = set(topology.neighbors(node.node_id))
        for domain, next_hop in sorted(node.routes.items()):
            if not topology.has_node(next_hop) or next_hop not in neighbors:
                raise UnknownNextHop('{} routes {} to {!r}, which is not a neighbor'.format(
                    node.node_id, domain, next_hop))
        for user, target in sorted(node.parameters.get('locations', {}).items()):
            if not topology.has_node(target) or topology.node(target).role is not NodeRole.UA:
                raise UnknownNextHop('{} locates {} at unknown UA {!r}'.format(
                    node.node_id, user, target))
        media_function = node.parameters.get('media_function')
        if media_function and (not topology.has_node(media_function)
                               or not topology.node(media_function).role.media):
            raise UnknownNextHop('{} names unknown media function {!r}'.format(
                node.node_id, media_function))
        proxy = node.parameters.get('proxy')
        if proxy and proxy not in neighbors:
            raise UnknownNextHop('{} uses proxy {!r}, which is not a neighbor'.format(
                node.node_id, proxy))


def _check_deployment(topology):
    for name, vsp in sorted(topology.vsps.items()):
        media = [n for n in topology.nodes_of(name) if n.role is NodeRole.MF]
        if vsp.model is DeploymentModel.FULLY_DECOMPOSED and media:
            raise InvalidTopology('fully decomposed VSP {} has a media function'.format(name))
    vpp_sf = topology.nodes_with_role(NodeRole.VPP_SF)
    if len(vpp_sf) > 1:
        raise InvalidTopology('only one VPP signaling function is supported')
    if vpp_sf:
        for link in topology.links:
            a, b = topology.node(link.a), topology.node(link.b)
            if a.role.signaling and b.role.signaling and a.vsp != b.vsp \
                    and VPP not in (a.vsp, b.vsp):
                raise InvalidTopology('{} and {} peer directly next to a VPP'.format(a.node_id,
                                                                                     b.node_id))


def build_topology(config):
    """Build and validate the topology described by a scenario config dict.

    Raises DisconnectedGraph when the graph falls apart or the script's
    caller or callee is missing, UnknownNextHop for routes to nowhere and
    InvalidTopology for structural errors.
    """
    enabled = config.get('privacy', True)
    vsps = {name: VspSpec.from_dict(name, data, enabled)
            for name, data in sorted(config.get('vsps', {}).items())}
    vpp_domain = config.get('vpp', {}).get('domain', '')
    nodes = []
    for item in config.get('nodes', ()):
        try:
            role = NodeRole(item['role'])
        except ValueError:
            raise InvalidTopology('unknown role {!r}'.format(item['role']))
        vsp = item.get('vsp', VPP if role in (NodeRole.VPP_SF, NodeRole.VPP_MF) else '')
        if vsp != VPP and vsp not in vsps:
            raise InvalidTopology('node {} belongs to unknown VSP {!r}'.format(item['id'], vsp))
        domain = vpp_domain if vsp == VPP else vsps[vsp].domain
        parameters = dict(item.get('parameters', {}))
        if role is NodeRole.VPP_SF:
            parameters.setdefault('mode', config.get('mode', 'strip'))
            if config.get('key'):
                parameters.setdefault('key', config['key'])
        nodes.append(NodeSpec(node_id=item['id'], role=role, vsp=vsp,
                              host=item['host'].lower(), domain=domain,
                              routes=dict(item.get('routes', {})), parameters=parameters))
    ids = [node.node_id for node in nodes]
    if len(set(ids)) != len(ids):
        raise InvalidTopology('duplicate node ids')
    hosts = [node.host for node in nodes]
    if len(set(hosts)) != len(hosts):
        raise InvalidTopology('duplicate node hosts')
    links = tuple(_parse_link(item) for item in config.get('links', ()))
    for link in links:
        if link.a not in ids or link.b not in ids:
            raise InvalidTopology('link {}-{} names an unknown node'.format(link.a, link.b))

    topology = Topology(nodes=tuple(nodes), links=links, vsps=vsps, vpp_domain=vpp_domain,
                        seed=int(config.get('seed', 0)))
    script = config.get('script') or {}
    for party in ('caller', 'callee'):
        if party in script and script[party] not in ids:
            raise DisconnectedGraph('script {} {!r} is not in the topology'.format(
                party, script[party]))
    _check_connected(topology)
    _check_routes(topology)
    _check_deployment(topology)
    logger.debug('built topology with %d nodes and %d links', len(nodes), len(links))
    return topology
