import os

import hypothesis
import pytest

hypothesis.settings.register_profile('fast', max_examples=20, deadline=None)
hypothesis.settings.register_profile('ci', max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.environ.get('HYPOTHESIS_PROFILE', 'fast'))

RESOURCE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                            'resource')
CORPUS_DIR = os.path.join(RESOURCE_DIR, 'corpus')
SCENARIO_DIR = os.path.join(RESOURCE_DIR, 'scenarios')


def read_corpus(name):
    with open(os.path.join(CORPUS_DIR, name), 'rb') as f:
        return f.read()


def corpus_names():
    return sorted(name for name in os.listdir(CORPUS_DIR) if name.endswith('.sip'))


def read_sdes_vectors():
    vectors = []
    with open(os.path.join(CORPUS_DIR, 'sdes_vectors.hex')) as f:
        for line in f:
            if not line.strip() or line.startswith('#'):
                continue
            name, ssrc, cname, packet = line.split()
            vectors.append((name, int(ssrc, 16), cname, bytes.fromhex(packet)))
    return vectors


@pytest.fixture
def corpus():
    return {name: read_corpus(name) for name in corpus_names()}


@pytest.fixture
def invite_bytes():
    return read_corpus('invite_full.sip')


@pytest.fixture
def scenario_path():
    def path(name):
        return os.path.join(SCENARIO_DIR, name)
    return path
