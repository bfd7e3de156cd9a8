from conftest import corpus_names, read_corpus
from hypothesis import given, strategies as st
import pytest

from sip_privacy_gateway.errors import (
    BodyLengthMismatch,
    InvariantViolation,
    MalformedStartLine,
    MalformedUri,
    MissingMandatoryHeader,
)
from sip_privacy_gateway.sip_message import (
    canonical_name,
    dialog_key,
    entry_host,
    make_response,
    parse_address,
    parse_sip,
    parse_uri,
    parse_via,
    serialize_address,
    serialize_sip,
    serialize_uri,
    split_entries,
)

MINIMAL = (b'OPTIONS sip:carol@chicago.example.com SIP/2.0\r\n'
           b'Via: SIP/2.0/UDP pc33.atlanta.example.com;branch=z9hG4bKhjhs8ass877\r\n'
           b'Max-Forwards: 70\r\n'
           b'To: <sip:carol@chicago.example.com>\r\n'
           b'From: Alice <sip:alice@atlanta.example.com>;tag=1928301774\r\n'
           b'Call-ID: a84b4c76e66710\r\n'
           b'CSeq: 63104 OPTIONS\r\n'
           b'\r\n')


@pytest.mark.parametrize('name', [n for n in corpus_names() if n != 'invite_folded.sip'])
def test_corpus_round_trip_is_byte_exact(name):
    data = read_corpus(name)
    assert serialize_sip(parse_sip(data)) == data


def test_folded_header_is_unfolded():
    message = parse_sip(read_corpus('invite_folded.sip'))
    assert message.value('Subject') == 'a subject that is folded onto a second line'


def test_request_fields(invite_bytes):
    message = parse_sip(invite_bytes)
    assert message.is_request
    assert message.method == 'INVITE'
    assert message.uri.user == 'bob'
    assert message.cseq == (314159, 'INVITE')
    assert message.call_id == 'a84b4c76e66710@pc33.atlanta.example.com'
    assert [via.host for via in message.vias()] == ['proxy.atlanta.example.com',
                                                    'pc33.atlanta.example.com']
    assert message.address('From').tag == '1928301774'
    assert message.address('From').display_name == 'Alice Liddell'
    assert message.sdp is not None
    assert message.sdp.connection.address == '192.0.2.101'


def test_comma_separated_entries_are_split():
    message = parse_sip(read_corpus('response_180.sip'))
    assert message.status_code == 180
    assert message.reason == 'Ringing'
    assert message.entries('Record-Route') == ['<sip:edge.biloxi.example.com;lr>',
                                               '<sip:proxy.atlanta.example.com;lr>']


def test_compact_forms():
    assert canonical_name('v') == 'Via'
    assert canonical_name('i') == 'Call-ID'
    assert canonical_name('WWW-authenticate') == 'WWW-Authenticate'
    assert canonical_name('X-Custom') == 'X-Custom'
    compact = MINIMAL.replace(b'Via:', b'v:').replace(b'Call-ID:', b'i:')
    message = parse_sip(compact)
    assert message.call_id == 'a84b4c76e66710'
    assert serialize_sip(message) == compact


@pytest.mark.parametrize('data', [b'', b'\r\n\r\n', b'HELLO\r\n\r\n', b'SIP/2.0 2000 OK\r\n\r\n'])
def test_malformed_start_line(data):
    with pytest.raises(MalformedStartLine):
        parse_sip(data)


def test_missing_mandatory_header():
    with pytest.raises(MissingMandatoryHeader) as info:
        parse_sip(MINIMAL.replace(b'Max-Forwards: 70\r\n', b''))
    assert info.value.header == 'Max-Forwards'


def test_content_length_mismatch():
    data = MINIMAL.replace(b'\r\n\r\n', b'\r\nContent-Length: 5\r\n\r\nab')
    with pytest.raises(BodyLengthMismatch) as info:
        parse_sip(data)
    assert info.value.actual == 2


def test_content_length_follows_body_changes(invite_bytes):
    message = parse_sip(invite_bytes)
    sdp = message.sdp.without('i', 'u', 'e', 'p')
    out = serialize_sip(message.with_sdp(sdp))
    reparsed = parse_sip(out)
    assert int(reparsed.value('Content-Length')) == len(reparsed.body)
    assert reparsed.sdp == sdp


def test_serialize_refuses_missing_mandatory(invite_bytes):
    message = parse_sip(invite_bytes).without_headers('Call-ID')
    with pytest.raises(InvariantViolation):
        serialize_sip(message)


def test_with_entries_keeps_position(invite_bytes):
    message = parse_sip(invite_bytes)
    names = [h.canonical for h in message.headers]
    rewritten = message.with_entries('Via', ['SIP/2.0/UDP vpp.example.com;branch=z9hG4bKx'])
    assert [h.canonical for h in rewritten.headers][:2] == ['Via', 'Max-Forwards']
    assert len(rewritten.headers) == len(names) - 1
    assert rewritten.with_entries('Via', rewritten.entries('Via')) is rewritten


def test_with_entries_inserts_after_last_via():
    message = parse_sip(MINIMAL).with_entries('Record-Route', ['<sip:p1.example.com;lr>'])
    assert [h.canonical for h in message.headers][:2] == ['Via', 'Record-Route']


def test_make_response_copies_dialog_headers(invite_bytes):
    request = parse_sip(invite_bytes)
    response = make_response(request, 180, 'Ringing', to_tag='abc')
    assert response.entries('Via') == request.entries('Via')
    assert response.address('To').tag == 'abc'
    assert response.entries('Record-Route') == request.entries('Record-Route')
    failure = make_response(request, 486, 'Busy Here', to_tag='abc')
    assert not failure.has('Record-Route')
    assert parse_sip(serialize_sip(response)) == response


def test_dialog_key_matches_both_directions():
    request = parse_sip(read_corpus('invite_full.sip'))
    ok = parse_sip(read_corpus('response_200_sdp.sip'))
    bye = parse_sip(read_corpus('bye.sip'))
    assert dialog_key(request).to_tag is None
    assert dialog_key(request).same_dialog(dialog_key(ok))
    assert dialog_key(ok).same_dialog(dialog_key(bye))


@pytest.mark.parametrize('text', [
    'sip:alice@atlanta.example.com',
    'sip:alice@192.0.2.10:5060;transport=tcp',
    'sips:[2001:db8::1]:5061',
    'sip:edge.biloxi.example.com;lr',
    'tel:+15550100;phone-context=example.com',
    'sip:bob@biloxi.example.com?subject=hi',
])
def test_uri_round_trip(text):
    assert serialize_uri(parse_uri(text)) == text


def test_uri_parts():
    uri = parse_uri('sip:alice@192.0.2.10:5060;transport=tcp')
    assert (uri.user, uri.host, uri.port) == ('alice', '192.0.2.10', 5060)
    assert uri.param('transport') == 'tcp'
    tel = parse_uri('tel:+15550100')
    assert tel.is_tel and tel.user == '+15550100'


@pytest.mark.parametrize('text', [
    'http://example.com', 'sip:', 'sip:host:port', 'tel:', 'sip:bob@h.example.com:\u00b2',
    'sip:[2001:db8::1]:\u0665060',
])
def test_bad_uri(text):
    with pytest.raises(MalformedUri):
        parse_uri(text)


def test_non_ascii_port_is_malformed():
    with pytest.raises(MalformedUri):
        parse_address('<sip:bob@h.example.com:\u00b2>')
    message = parse_sip(MINIMAL.replace(
        b'atlanta.example.com>', 'atlanta.example.com:\u00b2>'.encode('utf-8')))
    with pytest.raises(MalformedUri):
        dialog_key(message)


def test_entry_host():
    via = 'SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK1'
    assert entry_host(via, 'Via') == '192.0.2.10'
    assert entry_host('<sip:sf.vspa.example.com;lr>', 'Record-Route') == 'sf.vspa.example.com'
    assert entry_host('garbage', 'Via') is None
    assert parse_via(via).port == 5060
    assert parse_via(via).branch == 'z9hG4bK1'


def test_split_entries_respects_quotes():
    value = '"Smith, John" <sip:john@example.com>, <sip:jane@example.com>'
    assert split_entries(value) == ['"Smith, John" <sip:john@example.com>',
                                    '<sip:jane@example.com>']


@given(display=st.text(alphabet='abcdefghijklmnopqrstuvwxyz ABC', min_size=1, max_size=20)
       .map(str.strip).filter(bool),
       user=st.from_regex(r'[a-z][a-z0-9]{0,10}', fullmatch=True),
       tag=st.from_regex(r'[0-9a-f]{4,16}', fullmatch=True))
def test_address_round_trip(display, user, tag):
    text = '"{}" <sip:{}@example.com>;tag={}'.format(display, user, tag)
    address = parse_address(text)
    assert address.tag == tag
    assert address.uri.user == user
    assert serialize_address(address) == text


@given(subject=st.text(alphabet='abcdefghijklmnopqrstuvwxyz0123456789 .,-', max_size=40)
       .map(str.strip).filter(bool))
def test_header_value_survives_serialization(subject):
    message = parse_sip(MINIMAL).with_header_value('Subject', subject)
    assert parse_sip(serialize_sip(message)).value('Subject') == subject
