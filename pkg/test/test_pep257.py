import glob
import os

from pydocstyle import check
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# pep257 convention; missing docstrings and summary mood are not enforced
IGNORE = [
    'D100', 'D101', 'D102', 'D103', 'D104', 'D105', 'D106', 'D107',
    'D203', 'D212', 'D213', 'D214', 'D215', 'D401', 'D404', 'D405', 'D406', 'D407',
    'D408', 'D409', 'D410', 'D411', 'D413', 'D415', 'D416', 'D417', 'D418',
]


@pytest.mark.linter
@pytest.mark.pep257
def test_pep257():
    files = sorted(glob.glob(os.path.join(ROOT, 'sip_privacy_gateway', '*.py'))
                   + glob.glob(os.path.join(ROOT, 'test', '*.py')))
    files.append(os.path.join(ROOT, 'setup.py'))
    errors = [str(error) for error in check(files, ignore=IGNORE)]
    assert not errors, 'Found code style errors / warnings:\n' + '\n'.join(errors)
