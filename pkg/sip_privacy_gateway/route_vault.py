"""Storage of concealed routing headers for the strip, encrypt and cache modes.

Encrypt tokens are ``timestamp(8) | nonce(12) | AES-GCM(ciphertext)``,
base64url without padding, with the timestamp bytes as associated data so
that neither part can be swapped without the tag failing.
"""

from __future__ import annotations

import base64
import binascii
import enum
import hashlib
import json
import logging
import os
import struct
import threading
import time
import zlib
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import (
    DialogCollision,
    TokenExpired,
    TokenTampered,
    UnknownDialog,
    VaultKeyMissing,
)

logger = logging.getLogger(__name__)

NONCE_SIZE = 12
TIMESTAMP_SIZE = 8
DEFAULT_MAX_AGE = 8 * 3600
CACHE_GRACE = 300


class ConcealMode(enum.Enum):
    STRIP = 'strip'
    ENCRYPT = 'encrypt'
    CACHE = 'cache'


@dataclass(frozen=True)
class ConcealedSet:
    """Original routing headers replaced by the privacy service.

    ``side`` names the protected network the originals came from;
    ``from_response`` marks sets taken from a response, whose Record-Route
    list the far end reverses into its route set.
    """

    call_id: str
    transaction: str
    side: str = ''
    from_response: bool = False
    vias: tuple = ()
    routes: tuple = ()
    record_routes: tuple = ()
    contact: str = None
    created: float = 0.0
    token: str = field(default=None, compare=False)

    @property
    def key(self):
        return (self.side, 'response' if self.from_response else 'request', self.transaction)

    def originals(self):
        return (self.vias, self.routes, self.record_routes, self.contact)

    def to_json(self):
        data = asdict(self)
        data.pop('token')
        return json.dumps(data, separators=(',', ':'), sort_keys=True)

    @classmethod
    def from_json(cls, text, token=None):
        data = json.loads(text)
        for name in ('vias', 'routes', 'record_routes'):
            data[name] = tuple(data[name])
        return cls(token=token, **data)


def _normalize_key(key):
    if key is None or len(key) < 16:
        raise VaultKeyMissing('encrypt mode needs a key of at least 16 bytes')
    if len(key) in (16, 24, 32):
        return bytes(key)
    return hashlib.sha256(key).digest()


def _b64encode(data):
    return base64.urlsafe_b64encode(data).rstrip(b'=').decode('ascii')


def _b64decode(text):
    padded = text + '=' * (-len(text) % 4)
    return base64.b64decode(padded, altchars=b'-_', validate=True)


def encrypt_headers(concealed, key, timestamp, nonce=None):
    """Seal a concealed set into a URI-parameter-safe token."""
    aesgcm = AESGCM(_normalize_key(key))
    nonce = nonce if nonce is not None else os.urandom(NONCE_SIZE)
    stamp = struct.pack('!Q', int(round(timestamp * 1000)))
    plaintext = zlib.compress(concealed.to_json().encode('utf-8'))
    return _b64encode(stamp + nonce + aesgcm.encrypt(nonce, plaintext, stamp))


def decrypt_token(token, key, now, max_age=DEFAULT_MAX_AGE):
    aesgcm = AESGCM(_normalize_key(key))
    try:
        raw = _b64decode(token)
    except (binascii.Error, ValueError):
        raise TokenTampered('token is not base64url')
    if len(raw) < TIMESTAMP_SIZE + NONCE_SIZE + 16:
        raise TokenTampered('token too short')
    stamp = raw[:TIMESTAMP_SIZE]
    nonce = raw[TIMESTAMP_SIZE:TIMESTAMP_SIZE + NONCE_SIZE]
    try:
        plaintext = aesgcm.decrypt(nonce, raw[TIMESTAMP_SIZE + NONCE_SIZE:], stamp)
        concealed = ConcealedSet.from_json(zlib.decompress(plaintext).decode('utf-8'), token)
    except (InvalidTag, zlib.error, ValueError, TypeError, KeyError):
        raise TokenTampered('token failed the integrity check')
    created = struct.unpack('!Q', stamp)[0] / 1000.0
    if now - created > max_age:
        raise TokenExpired('token is {:.0f}s old'.format(now - created))
    return concealed


class _DialogLocks:
    """One lock per Call-ID; distinct dialogs never wait on each other."""

    def __init__(self):
        self._guard = threading.Lock()
        self._locks = {}

    @contextmanager
    def hold(self, call_id):
        with self._guard:
            lock = self._locks.setdefault(call_id, threading.RLock())
        with lock:
            yield

    def discard(self, call_id):
        with self._guard:
            self._locks.pop(call_id, None)


@dataclass
class _DialogEntry:
    sets: dict = field(default_factory=dict)
    closed_at: float = None


class RouteVault:
    """Concealed header sets of one privacy service.

    Strip and cache modes keep the originals here, keyed by Call-ID and
    (side, direction, transaction); encrypt mode keeps nothing but the key.
    """

    def __init__(self, mode, service_host, key=None, clock=time.monotonic,
                 max_age=DEFAULT_MAX_AGE, grace=CACHE_GRACE, random_bytes=os.urandom):
        self.mode = ConcealMode(mode)
        self.service_host = service_host
        self._key = key
        self._clock = clock
        self.max_age = max_age
        self.grace = grace
        self._random_bytes = random_bytes
        self._lock = threading.RLock()
        self._dialogs = {}
        self._index = {}
        self.locks = _DialogLocks()
        if self.mode is ConcealMode.ENCRYPT:
            _normalize_key(key)

    def now(self):
        return self._clock()

    def __len__(self):
        with self._lock:
            return sum(len(entry.sets) for entry in self._dialogs.values())

    @property
    def entries(self):
        with self._lock:
            return {call_id: dict(entry.sets) for call_id, entry in self._dialogs.items()}

    def conceal(self, concealed):
        """Record `concealed` and return the token carried by the replacement entries.

        Strip mode returns None. Re-concealing identical originals for the same
        key returns the existing token; different originals raise DialogCollision.
        """
        if self.mode is ConcealMode.ENCRYPT:
            nonce = self._random_bytes(NONCE_SIZE)
            return encrypt_headers(concealed, self._key, concealed.created, nonce)
        with self.locks.hold(concealed.call_id), self._lock:
            entry = self._dialogs.setdefault(concealed.call_id, _DialogEntry())
            existing = entry.sets.get(concealed.key)
            if existing is not None:
                if existing.originals() != concealed.originals():
                    raise DialogCollision(
                        'different originals for {} {}'.format(concealed.call_id, concealed.key))
                return existing.token
            token = None
            if self.mode is ConcealMode.CACHE:
                token = self._random_bytes(16).hex()
                while token in self._index:
                    token = self._random_bytes(16).hex()
                self._index[token] = (concealed.call_id, concealed.key)
            stored = replace(concealed, token=token)
            entry.sets[concealed.key] = stored
            logger.debug('stored %s set for %s', self.mode.value, concealed.key)
            return token

    def recover(self, token):
        """Concealed set named by a cache index or an encrypt token."""
        if self.mode is ConcealMode.ENCRYPT:
            return decrypt_token(token, self._key, self.now(), self.max_age)
        with self._lock:
            location = self._index.get(token)
            if location is None:
                raise UnknownDialog('no cache entry for index')
            call_id, key = location
            return self._dialogs[call_id].sets[key]

    def lookup(self, call_id, side_not, from_response, transaction):
        """Strip/cache lookup of a transaction set from a side other than `side_not`."""
        with self._lock:
            entry = self._dialogs.get(call_id)
            if entry is not None:
                direction = 'response' if from_response else 'request'
                for (side, kind, txn), concealed in entry.sets.items():
                    if (side_not is None or side != side_not) and kind == direction \
                            and txn == transaction:
                        return concealed
        raise UnknownDialog('no concealed {} set for {}'.format(transaction, call_id))

    def dialog_record(self, call_id, side_not):
        """First stored set of the dialog, from another side, that carries dialog routing."""
        with self._lock:
            entry = self._dialogs.get(call_id)
            if entry is not None:
                for (side, _kind, _txn), concealed in entry.sets.items():
                    if (side_not is None or side != side_not) \
                            and (concealed.contact is not None or concealed.record_routes):
                        return concealed
        raise UnknownDialog('no dialog record for {}'.format(call_id))

    def close_dialog(self, call_id, now=None):
        with self._lock:
            entry = self._dialogs.get(call_id)
            if entry is not None and entry.closed_at is None:
                entry.closed_at = self.now() if now is None else now

    def expire(self, now=None):
        """Drop dialogs closed more than `grace` seconds ago; returns how many went."""
        now = self.now() if now is None else now
        dropped = []
        with self._lock:
            for call_id, entry in list(self._dialogs.items()):
                if entry.closed_at is not None and now - entry.closed_at > self.grace:
                    for concealed in entry.sets.values():
                        self._index.pop(concealed.token, None)
                    del self._dialogs[call_id]
                    dropped.append(call_id)
        for call_id in dropped:
            self.locks.discard(call_id)
        return len(dropped)
