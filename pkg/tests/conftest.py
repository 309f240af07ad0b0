import pathlib

import numpy as np
import pytest

from pbrwp import errors

CONFIGS = pathlib.Path(__file__).parent.parent / 'configs'


@pytest.fixture(autouse=True)
def strict_mode():
    errors.set_strict_mode(True)
    yield
    errors.set_strict_mode(True)
    errors.error_code = 0


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def configs_dir():
    return CONFIGS


@pytest.fixture
def write_config(tmp_path):
    """Write an INI file into tmp_path, with [output] dir pointing inside it."""
    def write(text, name='run.ini', out='out'):
        path = tmp_path / name
        if '[output]' not in text:
            text += '\n[output]\ndir = %s\nsnapshot_every = 5\n' % (tmp_path / out)
        path.write_text(text, encoding='utf8')
        return path
    return write
