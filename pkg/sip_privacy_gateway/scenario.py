"""Scenario runner: replays a call over a simulated peering topology and records every hop.

Delivery is event ordered and single threaded; virtual time moves one tick
per delivered message, so equal configs give byte-identical transcripts.
"""

from __future__ import annotations

import base64
import copy
import json
import logging
import os
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvariantViolation, RoutingLoop, UnknownNextHop, UnknownPreset
from .media_function import MediaFunction
from .signaling_function import SignalingFunction
from .sim_node import Network
from .sip_message import parse_sip, serialize_sip
from .topology import NodeRole, build_topology, link_key
from .user_agent import UserAgent

logger = logging.getLogger(__name__)

MAX_HOPS = 20
DEFAULT_STEPS = ('INVITE', '180', '200', 'ACK', 'SDES', 'BYE')
TRANSCRIPT_FILE = 'transcript.jsonl'
RAW_DIR = 'raw'

_NODE_CLASSES = {
    NodeRole.UA: UserAgent,
    NodeRole.SF: SignalingFunction,
    NodeRole.VPP_SF: SignalingFunction,
    NodeRole.MF: MediaFunction,
    NodeRole.VPP_MF: MediaFunction,
}
# media functions first: signaling functions pick up their relays
_BUILD_ORDER = (NodeRole.MF, NodeRole.VPP_MF, NodeRole.UA, NodeRole.SF, NodeRole.VPP_SF)


@dataclass(frozen=True)
class TranscriptEntry:
    index: int
    source: str
    destination: str
    kind: str
    data: bytes
    time: int

    @property
    def link(self):
        return link_key(self.source, self.destination)

    @property
    def direction(self):
        return '{}->{}'.format(self.source, self.destination)

    def to_dict(self):
        return {
            'index': self.index,
            'source': self.source,
            'destination': self.destination,
            'link': '|'.join(self.link),
            'kind': self.kind,
            'time': self.time,
            'data': base64.b64encode(self.data).decode('ascii'),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(index=int(data['index']), source=data['source'],
                   destination=data['destination'], kind=data['kind'],
                   data=base64.b64decode(data['data']), time=int(data['time']))


@dataclass
class CallOutcome:
    caller: str
    callee: str
    caller_call_id: Optional[str] = None
    callee_call_id: Optional[str] = None
    final_status: Optional[int] = None
    final_reason: str = ''
    invites_at_callee: int = 0
    oks_at_caller: int = 0
    bye_status: Optional[int] = None
    sdes_at_caller: int = 0
    sdes_at_callee: int = 0

    @property
    def failed(self):
        return self.final_status is not None and self.final_status >= 300

    @property
    def rejected(self):
        return self.final_status == 500 and self.final_reason == 'Privacy Disagreement'

    @property
    def completed(self):
        return self.final_status == 200 and self.bye_status == 200

    def to_dict(self):
        return dict(self.__dict__, completed=self.completed, rejected=self.rejected)


class Transcript:
    """Append-only record of every message on every link."""

    def __init__(self, entries=()):
        self._entries = list(entries)
        self._lock = threading.Lock()
        self.outcomes = []

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(list(self._entries))

    def __getitem__(self, index):
        return self._entries[index]

    @property
    def entries(self):
        return tuple(self._entries)

    def record(self, source, destination, kind, data, clock):
        with self._lock:
            time = clock.tick()
            if self._entries and time <= self._entries[-1].time:
                raise InvariantViolation('virtual time went backwards')
            entry = TranscriptEntry(len(self._entries), source, destination, kind,
                                    bytes(data), time)
            self._entries.append(entry)
            return entry

    def messages(self, kind='sip'):
        """(entry, parsed message) pairs for the SIP entries."""
        return [(entry, parse_sip(entry.data)) for entry in self._entries if entry.kind == kind]

    def dumps(self):
        return b''.join(entry.data for entry in self._entries)


def build_network(topology, seed=None):
    """Instantiate the nodes of `topology`, each with its own seeded generator."""
    seed = topology.seed if seed is None else seed
    network = Network(topology)
    index = {node.node_id: i for i, node in enumerate(topology.nodes)}
    for role in _BUILD_ORDER:
        for spec in topology.nodes_with_role(role):
            rng = np.random.default_rng([seed, index[spec.node_id]])
            network.add(_NODE_CLASSES[role](spec, network, rng))
    return network


class _Delivery:
    """Event queue of one call script."""

    def __init__(self, network, transcript):
        self.network = network
        self.transcript = transcript
        self.queue = deque()

    def push(self, source, sends, hops=0):
        for send in sends:
            self.queue.append((source, send, hops))

    def drain(self):
        while self.queue:
            source, send, hops = self.queue.popleft()
            if hops > MAX_HOPS:
                raise RoutingLoop('message from {} exceeded {} hops'.format(source, MAX_HOPS))
            node, out = self._deliver(source, send)
            self.push(node.node_id, out, 0 if isinstance(node, UserAgent) else hops + 1)

    def _deliver(self, source, send):
        topology = self.network.topology
        if send.kind == 'sip':
            node = self.network.node(send.destination)
            if topology.link(source, node.node_id) is None:
                raise UnknownNextHop('no link from {} to {}'.format(source, node.node_id))
            data = serialize_sip(send.payload)
            self.transcript.record(source, node.node_id, 'sip', data, self.network)
            return node, node.receive_sip(parse_sip(data), source)
        node = self.network.node_for_host(send.address)
        if node is None:
            raise UnknownNextHop('no node owns media address {}'.format(send.address))
        self.transcript.record(source, node.node_id, 'rtcp', send.payload, self.network)
        return node, node.receive_media(send.payload, send.port, source)


def _run_script(network, transcript, script):
    steps = script.get('steps', DEFAULT_STEPS)
    if not steps or 'caller' not in script:
        return None
    caller = network.node(script['caller'])
    callee = network.node(script['callee'])
    bye_by = caller if script.get('bye_by', 'caller') == 'caller' else callee
    outcome = CallOutcome(caller.node_id, callee.node_id)
    delivery = _Delivery(network, transcript)

    known = set()

    def callee_leg():
        if outcome.callee_call_id is not None:
            return callee.leg(outcome.callee_call_id)
        if outcome.caller_call_id is None:
            return None
        leg = callee.leg_with_remote_tag(caller.leg(outcome.caller_call_id).local_tag)
        if leg is None:
            # a B2BUA in the path renames tags and Call-ID
            fresh = [call_id for call_id in list(callee.calls) if call_id not in known]
            leg = callee.leg(fresh[0]) if len(fresh) == 1 else None
        return leg

    for step in steps:
        if outcome.failed:
            logger.info('call failed with %d, skipping %s', outcome.final_status, step)
            break
        if step == 'INVITE':
            known.update(callee.calls)
            outcome.caller_call_id, sends = caller.place_call(script['target'])
            delivery.push(caller.node_id, sends)
        elif step.isdigit():
            leg = callee_leg()
            if leg is not None:
                delivery.push(callee.node_id, callee.respond(leg.call_id, int(step)))
        elif step == 'ACK':
            delivery.push(caller.node_id, caller.acknowledge(outcome.caller_call_id))
        elif step == 'SDES':
            delivery.push(caller.node_id, caller.send_sdes(outcome.caller_call_id))
            leg = callee_leg()
            if leg is not None:
                delivery.push(callee.node_id, callee.send_sdes(leg.call_id))
        elif step == 'BYE':
            leg = caller.leg(outcome.caller_call_id) if bye_by is caller else callee_leg()
            if leg is not None:
                delivery.push(bye_by.node_id, bye_by.hang_up(leg.call_id))
        else:
            raise ValueError('unknown script step {!r}'.format(step))
        delivery.drain()
        _update_outcome(outcome, caller, callee_leg())
    return outcome


def _update_outcome(outcome, caller, callee_leg):
    if outcome.caller_call_id is None:
        return
    leg = caller.leg(outcome.caller_call_id)
    if leg.final_status is not None:
        outcome.final_status = leg.final_status
        outcome.final_reason = leg.final_reason
    outcome.oks_at_caller = leg.ok_for_invite
    outcome.sdes_at_caller = len(leg.sdes_received)
    if callee_leg is not None:
        outcome.callee_call_id = callee_leg.call_id
        outcome.invites_at_callee = callee_leg.invites_received
        outcome.sdes_at_callee = len(callee_leg.sdes_received)
    if leg.state == 'terminated' and (callee_leg is None or callee_leg.state == 'terminated'):
        outcome.bye_status = 200


def run_scenario(topology, script, seed=None):
    """Run one call script over `topology` and return its transcript.

    The transcript's ``outcomes`` hold the call result. An empty script
    gives an empty transcript.
    """
    transcript = Transcript()
    if not script or not script.get('steps', DEFAULT_STEPS):
        return transcript
    network = build_network(topology, seed)
    outcome = _run_script(network, transcript, script)
    if outcome is not None:
        transcript.outcomes.append(outcome)
        logger.info('scenario finished: status %s, BYE %s, %d messages', outcome.final_status,
                    outcome.bye_status, len(transcript))
    return transcript


def run_config(config):
    """Build the topology of a scenario config and run its script."""
    topology = build_topology(config)
    return run_scenario(topology, config.get('script') or {})


def run_concurrent(config, scripts, max_workers=4):
    """Run independent call scripts from a thread pool against shared nodes.

    Privacy services, relays and user agents are shared between the calls;
    transcript order then depends on scheduling.
    """
    topology = build_topology(config)
    network = build_network(topology)
    transcript = Transcript()
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(_run_script, network, transcript, script) for script in scripts]
        transcript.outcomes = [future.result() for future in futures]
    return transcript


def export_transcript(transcript, out_dir):
    """Write line-delimited JSON entries and one raw file per message into `out_dir`."""
    raw_dir = os.path.join(out_dir, RAW_DIR)
    os.makedirs(raw_dir, exist_ok=True)
    path = os.path.join(out_dir, TRANSCRIPT_FILE)
    with open(path, 'w') as f:
        for entry in transcript:
            f.write(json.dumps(entry.to_dict(), sort_keys=True) + '\n')
            name = '{:04d}-{}-{}.{}'.format(entry.index, entry.source, entry.destination,
                                            entry.kind)
            with open(os.path.join(raw_dir, name), 'wb') as raw:
                raw.write(entry.data)
    return path


def load_transcript(path):
    if os.path.isdir(path):
        path = os.path.join(path, TRANSCRIPT_FILE)
    with open(path) as f:
        return Transcript(TranscriptEntry.from_dict(json.loads(line)) for line in f
                          if line.strip())


# presets

E2E_KEY = '000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f'
CALLEE_NUMBER = '+15550100'


def _peering_config(name, seed=7):
    """Two VSPs peering through a VPP.

    VSPa is a cable provider (access and voice from one operator) that runs
    its own media function; VSPb reaches its customers over a dedicated
    connection and handles signaling only.
    """
    return {
        'name': name,
        'seed': seed,
        'mode': 'strip',
        'vsps': {
            'vspa': {'domain': 'vspa.example.com', 'model': 'quasi-decomposed',
                     'connection': 'collocated', 'networks': ['192.0.2.0/24']},
            'vspb': {'domain': 'vspb.example.com', 'model': 'fully-decomposed',
                     'connection': 'separate-dedicated', 'networks': ['198.51.100.0/24']},
        },
        'vpp': {'domain': 'vpp.example.com'},
        'nodes': [
            {'id': 'ua-a', 'role': 'UA', 'vsp': 'vspa', 'host': '192.0.2.10',
             'parameters': {
                 'user': 'alice', 'display_name': 'Alice', 'proxy': 'sf-a',
                 'location': 'Springfield',
                 'headers': [['Subject', 'Quarterly review'],
                             ['Organization', 'Example Cable Co'],
                             ['User-Agent', 'spg-phone/1.0'],
                             ['Call-Info', '<http://www.vspa.example.com/alice.png>'
                                           ';purpose=icon']]}},
            {'id': 'sf-a', 'role': 'SF', 'vsp': 'vspa', 'host': 'sf.vspa.example.com',
             'routes': {'*': 'vpp-sf'},
             'parameters': {'locations': {'alice': 'ua-a', '+15550199': 'ua-a'},
                            'media_function': 'mf-a'}},
            {'id': 'mf-a', 'role': 'MF', 'vsp': 'vspa', 'host': '192.0.2.20'},
            {'id': 'vpp-sf', 'role': 'VPP-SF', 'host': 'vpp.example.com',
             'routes': {'vspa.example.com': 'sf-a', 'vspb.example.com': 'sf-b'},
             'parameters': {'enum': {'+1555010': 'vspb.example.com',
                                     '+1555019': 'vspa.example.com'},
                            'media_function': 'vpp-mf'}},
            {'id': 'vpp-mf', 'role': 'VPP-MF', 'host': '203.0.113.9'},
            {'id': 'sf-b', 'role': 'SF', 'vsp': 'vspb', 'host': 'sf.vspb.example.com',
             'routes': {'*': 'vpp-sf'},
             'parameters': {'locations': {'bob': 'ua-b', CALLEE_NUMBER: 'ua-b'}}},
            {'id': 'ua-b', 'role': 'UA', 'vsp': 'vspb', 'host': '198.51.100.20',
             'parameters': {'user': 'bob', 'display_name': 'Bob', 'proxy': 'sf-b'}},
        ],
        'links': [
            ['ua-a', 'sf-a', True],
            ['sf-a', 'mf-a', True],
            ['ua-a', 'mf-a', True],
            ['sf-a', 'vpp-sf', False],
            ['mf-a', 'vpp-mf', False],
            ['vpp-sf', 'vpp-mf', True],
            ['vpp-sf', 'sf-b', False],
            ['vpp-mf', 'ua-b', False],
            ['sf-b', 'ua-b', True],
        ],
        'script': {'caller': 'ua-a', 'callee': 'ua-b', 'target': 'tel:' + CALLEE_NUMBER,
                   'steps': list(DEFAULT_STEPS), 'bye_by': 'caller'},
    }


def _node(config, node_id):
    for node in config['nodes']:
        if node['id'] == node_id:
            return node
    raise KeyError(node_id)


def _user_boundary(config, *pairs):
    return {'alice': [list(pair) for pair in pairs]}


def preset_case(n):
    """Scenario config of one of the three common privacy cases.

    1. The caller hides from intermediaries and from the callee.
    2. The caller hides from intermediaries only and talks end to end.
    3. Both providers hide behind the VPP in both directions.
    """
    if n == 1:
        config = _peering_config('preset-1-user-hides-from-all')
        for vsp in config['vsps'].values():
            vsp['privacy'] = []
        _node(config, 'ua-a')['parameters'].update(
            user_privacy='u', privacy=['user', 'header', 'session'],
            headers=[['Subject', 'Quarterly review'], ['User-Agent', 'spg-phone/1.0']])
        inside = [link[:2] for link in config['links']
                  if {link[0], link[1]} <= {'ua-a', 'sf-a', 'mf-a', 'vpp-sf', 'vpp-mf'}]
        config['audit'] = {
            'protected': {'alice': ['alice', 'Alice', '192.0.2.10', 'Springfield']},
            'boundary': _user_boundary(config, *inside),
        }
        return config
    if n == 2:
        config = _peering_config('preset-2-user-hides-from-intermediaries')
        for vsp in config['vsps'].values():
            vsp['privacy'] = []
        caller = _node(config, 'ua-a')['parameters']
        caller.update(user_privacy='u', privacy=['header'], e2e_key=E2E_KEY,
                      headers=[['Subject', 'Quarterly review'],
                               ['User-Agent', 'spg-phone/1.0']])
        _node(config, 'ua-b')['parameters']['e2e_key'] = E2E_KEY
        config['links'].append(['ua-a', 'ua-b', False])
        config['audit'] = {
            'protected': {'alice': ['alice', 'Alice', 'Springfield']},
            'boundary': _user_boundary(config, ('ua-a', 'ua-b')),
        }
        return config
    if n == 3:
        return _peering_config('preset-3-provider-hiding')
    raise UnknownPreset('no preset case {!r}'.format(n))


def default_scenario():
    """Both VSPs ask the VPP for header and service-provider privacy; strip mode."""
    config = _peering_config('default-bidirectional')
    for vsp in config['vsps'].values():
        vsp['privacy'] = ['header', 'service-provider']
    return config


def negative_control(direct=False):
    """Preset 3 with privacy disabled; `direct` also removes the VPP."""
    config = copy.deepcopy(preset_case(3))
    config['name'] = 'negative-control' + ('-direct' if direct else '')
    config['privacy'] = False
    if not direct:
        return config
    vpp_nodes = {'vpp-sf', 'vpp-mf'}
    config['nodes'] = [node for node in config['nodes'] if node['id'] not in vpp_nodes]
    config['links'] = [link for link in config['links']
                       if link[0] not in vpp_nodes and link[1] not in vpp_nodes]
    config['links'] += [['sf-a', 'sf-b', False], ['mf-a', 'ua-b', False]]
    del config['vpp']
    sf_a = _node(config, 'sf-a')
    sf_a['routes'] = {'vspb.example.com': 'sf-b'}
    sf_a['parameters']['enum'] = {'+1555010': 'vspb.example.com'}
    _node(config, 'sf-b')['routes'] = {'*': 'sf-a'}
    return config
