from conftest import read_corpus, read_sdes_vectors

from sip_privacy_gateway.leak_audit import (
    LeakFinding,
    audit_report,
    audit_scenario,
    config_audit,
    leak_audit,
)
from sip_privacy_gateway.scenario import (
    Transcript,
    TranscriptEntry,
    negative_control,
    preset_case,
    run_config,
)

INSIDE = {('sf-a', 'ua-a')}


def transcript_of(*items):
    return Transcript(TranscriptEntry(i, source, destination, kind, data, i + 1)
                      for i, (source, destination, kind, data) in enumerate(items))


def test_planted_tokens_are_named_by_field():
    data = read_corpus('invite_full.sip')
    transcript = transcript_of(('ua-a', 'sf-a', 'sip', data), ('sf-a', 'vpp-sf', 'sip', data))
    findings = leak_audit(transcript, {'vspa': ['pc33.atlanta.example.com']}, INSIDE)
    assert findings
    assert all(f.index == 1 and f.link == ('sf-a', 'vpp-sf') for f in findings)
    fields = [f.field for f in findings]
    assert fields == ['Via', 'Call-ID', 'Contact', 'sdp:o']
    assert all(data[f.offset:].startswith(b'pc33.atlanta.example.com') for f in findings)


def test_start_line_and_body_fields():
    data = read_corpus('invite_full.sip')
    transcript = transcript_of(('ua-a', 'ua-b', 'sip', data))
    fields = {f.field for f in leak_audit(transcript, {'bob': ['bob@biloxi', '192.0.2.101']},
                                          set())}
    assert fields == {'start-line', 'To', 'Via', 'sdp:c'}


def test_folded_header_reported_under_its_name():
    data = read_corpus('invite_folded.sip')
    transcript = transcript_of(('ua-a', 'ua-b', 'sip', data))
    findings = leak_audit(transcript, {'x': ['second line']}, set())
    assert [f.field for f in findings] == ['Subject']


def test_sdes_item_named():
    name, ssrc, cname, packet = read_sdes_vectors()[0]
    transcript = transcript_of(('ua-a', 'mf-a', 'rtcp', packet))
    findings = leak_audit(transcript, {'alice': [cname.split('@')[1]]}, set())
    assert [f.field for f in findings] == ['sdes:CNAME']


def test_match_is_case_sensitive():
    transcript = transcript_of(('ua-a', 'ua-b', 'sip', read_corpus('invite_full.sip')))
    assert leak_audit(transcript, {'x': ['ATLANTA.EXAMPLE.COM']}, set()) == []


def test_boundary_per_domain():
    data = read_corpus('invite_full.sip')
    transcript = transcript_of(('ua-a', 'sf-a', 'sip', data))
    boundary = {'alice': [('sf-a', 'ua-a')], 'bob': []}
    findings = leak_audit(transcript, {'alice': ['Alice'], 'bob': ['Bob']}, boundary)
    assert {f.domain for f in findings} == {'bob'}


def test_empty_inputs():
    assert leak_audit(Transcript(), {'vspa': ['vspa.example.com']}, set()) == []
    transcript = transcript_of(('ua-a', 'ua-b', 'sip', read_corpus('bye.sip')))
    assert leak_audit(transcript, {}, set()) == []
    assert leak_audit(transcript, {'x': ['']}, set()) == []


def test_config_audit_derives_from_topology():
    protected, boundary = config_audit(preset_case(3))
    assert sorted(protected) == ['vspa', 'vspb']
    assert 'vspb.example.com' in protected['vspb']
    assert ('sf-a', 'vpp-sf') in boundary['vspa']
    assert ('sf-a', 'vpp-sf') not in boundary['vspb']


def test_config_audit_explicit_section():
    protected, boundary = config_audit(preset_case(2))
    assert protected == {'alice': ['alice', 'Alice', 'Springfield']}
    assert boundary == {'alice': [('ua-a', 'ua-b')]}


def test_negative_controls_leak_both_ways():
    for config in (negative_control(), negative_control(direct=True)):
        findings = audit_scenario(config, run_config(config))
        domains = {f.domain for f in findings}
        assert domains == {'vspa', 'vspb'}
        assert any('sf-b' in f.link for f in findings if f.domain == 'vspa')
        assert any('sf-a' in f.link for f in findings if f.domain == 'vspb')


def test_provider_hiding_is_clean():
    config = preset_case(3)
    assert audit_scenario(config, run_config(config)) == []


def test_report():
    findings = [LeakFinding(3, ('a', 'b'), 'tok', 'Via', 'vspa', 7),
                LeakFinding(4, ('a', 'b'), 'tok', 'sdes:CNAME', 'vspb')]
    report = audit_report(findings)
    assert report['clean'] is False
    assert report['count'] == 2
    assert report['by_domain'] == {'vspa': 1, 'vspb': 1}
    assert report['findings'][0] == {'index': 3, 'link': ['a', 'b'], 'token': 'tok',
                                     'field': 'Via', 'domain': 'vspa', 'offset': 7}
    assert audit_report([]) == {'clean': True, 'count': 0, 'by_domain': {}, 'findings': []}
