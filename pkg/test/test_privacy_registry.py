import json

import pytest

from sip_privacy_gateway.privacy_registry import (
    Disposition,
    FieldClass,
    NotSensitive,
    PrivacyScope,
    Protocol,
    classify,
    fields,
    header_presence,
    is_auth_exempt,
    registry_dump,
    removable_fields,
    requires_b2bua,
    routing_critical_fields,
)

SIP_HEADERS = (
    'Alert-Info', 'Authorization', 'Call-ID', 'Call-Info', 'Contact', 'Error-Info', 'From',
    'In-Reply-To', 'Organization', 'Proxy-Authenticate', 'Record-Route', 'Reply-To', 'Route',
    'Server', 'Subject', 'To', 'User-Agent', 'Via', 'Warning', 'WWW-Authenticate',
)


def test_row_counts():
    assert len(fields(Protocol.SIP)) == 20
    assert len(fields(Protocol.SDP)) == 7
    assert len(fields(Protocol.SDES)) == 5
    assert len(fields()) == 32
    assert {f.field_name for f in fields(Protocol.SIP)} == set(SIP_HEADERS)


@pytest.mark.parametrize('name', SIP_HEADERS)
def test_every_header_classified(name):
    entry = classify(Protocol.SIP, name)
    assert isinstance(entry, FieldClass)
    assert classify('SIP', name.lower()) == entry


def test_via():
    entry = classify(Protocol.SIP, 'v')
    assert entry.field_name == 'Via'
    assert entry.scope is PrivacyScope.PROVIDER
    assert entry.disposition is Disposition.ROUTING_CRITICAL
    assert entry.mutability.may_add and entry.mutability.may_modify


def test_not_sensitive():
    entry = classify(Protocol.SIP, 'CSeq')
    assert isinstance(entry, NotSensitive)
    assert entry.to_dict() == {'protocol': 'SIP', 'field': 'CSeq', 'sensitive': False}


def test_sdp_by_letter():
    assert classify(Protocol.SDP, 'e').field_name == 'Email'
    assert classify(Protocol.SDP, 'o=').disposition is Disposition.ANONYMIZABLE
    assert classify(Protocol.SDES, 'cname').scope is PrivacyScope.BOTH


def test_removable_sets():
    assert removable_fields(PrivacyScope.USER) == {
        'In-Reply-To', 'Organization', 'Reply-To', 'Subject'}
    assert removable_fields(PrivacyScope.PROVIDER) == {
        'Alert-Info', 'Call-Info', 'Error-Info', 'In-Reply-To', 'Organization', 'Reply-To',
        'Server', 'User-Agent', 'Warning'}
    assert removable_fields(PrivacyScope.USER, Protocol.SDES) == {'NAME', 'EMAIL', 'LOC'}
    assert removable_fields(PrivacyScope.USER, Protocol.SDP) == {
        'Information', 'URI', 'Email', 'Phone'}
    both = removable_fields(PrivacyScope.BOTH)
    assert both == removable_fields(PrivacyScope.USER) | removable_fields(PrivacyScope.PROVIDER)


def test_routing_critical():
    assert set(routing_critical_fields()) == {'Contact', 'Record-Route', 'Route', 'Via'}
    assert set(routing_critical_fields(Protocol.SDP)) == {'Connection'}


def test_auth_exempt():
    assert is_auth_exempt('Authorization')
    assert is_auth_exempt('WWW-Authenticate')
    assert is_auth_exempt('Proxy-Authorization')
    assert not is_auth_exempt('From')


def test_header_presence():
    assert header_presence('Via', 'INVITE') == 'm'
    assert header_presence('Alert-Info', 'invite') == 'o'
    assert header_presence('Alert-Info', 'BYE') == '-'
    assert header_presence('Route', 'ACK') == 'c'
    assert header_presence('Via', 'SUBSCRIBE') is None
    assert header_presence('X-Custom', 'INVITE') is None


def test_requires_b2bua():
    assert requires_b2bua('Via', 'modify')
    assert requires_b2bua('Record-Route', 'delete')
    assert requires_b2bua('From', 'modify')
    assert not requires_b2bua('Record-Route', 'add')
    assert not requires_b2bua('Route', 'delete')
    assert not requires_b2bua('X-Custom', 'add')


def test_scope_parse():
    assert PrivacyScope.parse('service-provider') is PrivacyScope.PROVIDER
    assert PrivacyScope.parse(' UP ') is PrivacyScope.BOTH
    with pytest.raises(ValueError):
        PrivacyScope.parse('everyone')


def test_dump_is_json():
    dump = json.loads(json.dumps(registry_dump()))
    assert len(dump['fields']) == 32
    assert dump['uri_parameters'][0]['parameter'] == 'phone-context'
