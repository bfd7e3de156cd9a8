import os

from flake8.api import legacy as flake8
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.mark.flake8
@pytest.mark.linter
def test_flake8():
    style = flake8.get_style_guide(max_line_length=99, exclude=['examples', 'build', '.eggs'])
    report = style.check_files([os.path.join(ROOT, 'sip_privacy_gateway'),
                                os.path.join(ROOT, 'test'), os.path.join(ROOT, 'setup.py')])
    assert report.total_errors == 0, \
        'Found %d code style errors / warnings' % report.total_errors
