"""Base class of the simulated peering nodes and the network they share."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Optional

from .errors import UnknownNextHop

BRANCH_MAGIC = 'z9hG4bK'


@dataclass(frozen=True)
class Parameter:
    name: str
    value: object


@dataclass(frozen=True)
class Send:
    """A message a node hands to the network.

    SIP goes to a neighbor node; RTCP goes to an (address, port) the network
    resolves to whichever node owns the address.
    """

    destination: str
    payload: object
    kind: str = 'sip'
    address: Optional[str] = None
    port: Optional[int] = None


class Network:
    """Nodes of one simulation, indexed by id and by host, plus its virtual clock."""

    def __init__(self, topology):
        self.topology = topology
        self.nodes = {}
        self._time = 0
        self._lock = threading.Lock()

    def add(self, node):
        self.nodes[node.node_id] = node

    def node(self, node_id):
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNextHop('no node {!r}'.format(node_id))

    def node_for_host(self, host):
        spec = self.topology.node_for_host(host)
        return self.nodes[spec.node_id] if spec is not None else None

    def tick(self):
        with self._lock:
            self._time += 1
            return self._time

    def now(self):
        with self._lock:
            return float(self._time)


class SimNode:
    """One simulated node.

    Parameters come from the node's ``parameters`` in the scenario config;
    subclasses declare them with defaults and read them back, as nodes do
    in a robot middleware.
    """

    def __init__(self, spec, network, rng):
        self.spec = spec
        self.node_id = spec.node_id
        self.host = spec.host
        self.domain = spec.domain
        self.vsp = spec.vsp
        self.network = network
        self.rng = rng
        self._rng_lock = threading.Lock()
        self._overrides = dict(spec.parameters)
        self._parameters = {}
        self._logger = logging.getLogger('spg.node.' + spec.node_id)

    def get_name(self):
        return self.node_id

    def get_logger(self):
        return self._logger

    def declare_parameter(self, name, default=None):
        parameter = Parameter(name, self._overrides.get(name, default))
        self._parameters[name] = parameter
        return parameter

    def get_parameter(self, name):
        try:
            return self._parameters[name]
        except KeyError:
            raise KeyError('parameter {!r} was not declared on {}'.format(name, self.node_id))

    def random_bytes(self, size):
        with self._rng_lock:
            return self.rng.bytes(size)

    def random_int(self, low, high):
        with self._rng_lock:
            return int(self.rng.integers(low, high))

    def random_hex(self, size=8):
        return self.random_bytes(size).hex()

    def new_branch(self):
        return BRANCH_MAGIC + self.random_hex(8)

    def side_of(self, node_id):
        """Side name of a neighbor: the VSP (or VPP) operating it."""
        if node_id is None:
            return None
        return self.network.topology.node(node_id).vsp

    def trusted_link(self, node_id):
        link = self.network.topology.link(self.node_id, node_id)
        return link is not None and link.trusted

    def receive_sip(self, message, source):
        """Handle a SIP message from node `source`; returns a list of Send."""
        raise NotImplementedError

    def receive_media(self, data, port, source):
        """Handle an RTCP packet sent to this node's `port`; returns a list of Send."""
        self.get_logger().debug('dropped media for port %d from %s', port, source)
        return []
