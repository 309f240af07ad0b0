"""INI run configurations.

>>> cfg = Parser().parse_string('''
... [potential]
... name = annulus
...
... [sampler]
... name = pbrwp
... T = 0.05
... preconditioner = diag: 4, 1
... z_method = laplace
...
... [init]
... mean = 2, 2
... ''')
>>> cfg.sampler_config.preconditioner.describe(), cfg.init_mean, cfg.sampler_config.T
('diag: 4.0, 1.0', (2.0, 2.0), 0.05)
"""
import configparser
import logging
import pathlib

import numpy as np

from pbrwp import errors
from pbrwp.exceptions import ConfigError, PbrwpError
from pbrwp.experiment import RunConfig
from pbrwp.experiment.input import BaseParser
from pbrwp.kernel import ZMethod
from pbrwp.linalg import PreconditionerSpec, SpdMatrix
from pbrwp.metrics import KlEstimateConfig
from pbrwp.samplers import SamplerConfig

log = logging.getLogger(__name__)

KNOWN_KEYS = {
    'potential': {'name', 'sigma', 'dim'},
    'sampler': {'name', 'eta', 't', 'beta', 'preconditioner', 'z_method', 'z_samples', 'iters',
                'seed', 'tau', 'theta', 'lambda'},
    'init': {'n_particles', 'mean', 'cov'},
    'output': {'dir', 'snapshot_every'},
    'metrics': {'kl', 'grid_min', 'grid_max', 'resolution', 'bandwidth'},
}


def parse_vector(text):
    """
    >>> parse_vector('2, 2.5')
    (2.0, 2.5)
    """
    return tuple(float(v) for v in text.split(','))


class Parser(BaseParser):
    default_suffix = '.ini'

    def __init__(self, encoding=None, base_dir=None, **kwargs):
        BaseParser.__init__(self, encoding, **kwargs)
        self.base_dir = base_dir

    def parse_file(self, filename):
        try:
            return BaseParser.parse_file(self, filename)
        except ConfigError:
            raise
        except PbrwpError as error:
            raise ConfigError(str(error), filename=error.get_filename())

    def _base_dir(self):
        if self.base_dir is not None:
            return pathlib.Path(self.base_dir)
        if self.filename != '<INPUT>':
            return pathlib.Path(str(self.filename)).parent
        return pathlib.Path('.')

    def _error(self, message, section=None, key=None):
        return ConfigError(message, filename=self._filename(), section=section, key=key)

    def _filename(self):
        return None if self.filename == '<INPUT>' else str(self.filename)

    def _get(self, section, key, convert, default=None):
        if not self.config.has_option(section, key):
            return default
        text = self.config.get(section, key).strip()
        try:
            return convert(text)
        except ConfigError:
            raise
        except (PbrwpError, ValueError, OSError) as error:
            raise self._error(str(error), section, key)

    def parse_matrix(self, text, dim=None):
        """``identity`` (needs ``dim``), ``diag: a, b, ...`` or ``file: path.csv``."""
        kind, _, rest = text.partition(':')
        kind = kind.strip().lower()
        if kind == 'identity':
            if dim is None:
                raise ValueError('identity needs an explicit dimension')
            return SpdMatrix.identity(dim)
        if kind == 'diag':
            return SpdMatrix.from_diagonal(parse_vector(rest))
        if kind == 'file':
            path = self._base_dir() / rest.strip()
            return SpdMatrix(np.loadtxt(path, delimiter=',', ndmin=2))
        raise ValueError('expected identity, diag: ... or file: ..., got %r' % text)

    def parse_preconditioner(self, text):
        kind = text.partition(':')[0].strip().lower()
        if kind == 'identity':
            return PreconditionerSpec.identity()
        m = self.parse_matrix(text)
        if kind == 'diag':
            return PreconditionerSpec.diagonal(m.diagonal)
        return PreconditionerSpec.from_matrix(m)

    def _check_keys(self):
        for section in self.config.sections():
            known = KNOWN_KEYS.get(section)
            if known is None:
                errors.report_error(self._error('unknown section [%s]' % section))
                continue
            for key in self.config.options(section):
                if key not in known:
                    errors.report_error(self._error('unknown key', section, key))

    def _beta(self, text):
        return 'auto' if text.lower() == 'auto' else float(text)

    def _kl(self, text):
        text = text.lower()
        if text == 'auto':
            return None
        try:
            return self.config.BOOLEAN_STATES[text]
        except KeyError:
            raise ValueError('expected a boolean or auto, got %r' % text)

    def _potential_section(self):
        if not self.config.has_option('potential', 'name'):
            raise self._error('missing potential name', 'potential', 'name')
        name = self._get('potential', 'name', str)
        dim = self._get('potential', 'dim', int)
        sigma = None
        if name == 'quadratic':
            sigma = self._get('potential', 'sigma', lambda t: self.parse_matrix(t, dim),
                              default=None)
            if sigma is None:
                if dim is None:
                    raise self._error('needs sigma or dim', 'potential', 'sigma')
                sigma = SpdMatrix.identity(dim)
        return name, sigma

    def _sampler_config(self):
        get = self._get
        z_method = get('sampler', 'z_method', str, 'mc')
        z_samples = get('sampler', 'z_samples', int, ZMethod().n_samples)
        try:
            z = ZMethod.from_name(z_method, z_samples)
        except ValueError as error:
            raise self._error(str(error), 'sampler', 'z_method')
        defaults = SamplerConfig()
        try:
            return SamplerConfig(
                eta=get('sampler', 'eta', float, defaults.eta),
                T=get('sampler', 't', float, defaults.T),
                beta=get('sampler', 'beta', self._beta, defaults.beta),
                preconditioner=get('sampler', 'preconditioner', self.parse_preconditioner,
                                   defaults.preconditioner),
                z_method=z,
                iters=get('sampler', 'iters', int, defaults.iters),
                seed=get('sampler', 'seed', int, defaults.seed),
            )
        except ValueError as error:
            raise self._error(str(error), 'sampler')

    def _kl_config(self):
        get = self._get
        try:
            return KlEstimateConfig(
                grid_min=get('metrics', 'grid_min', parse_vector),
                grid_max=get('metrics', 'grid_max', parse_vector),
                resolution=get('metrics', 'resolution', int, 200),
                bandwidth=get('metrics', 'bandwidth',
                              lambda t: None if t.lower() == 'auto' else float(t)),
            )
        except (PbrwpError, ValueError) as error:
            if isinstance(error, ConfigError):
                raise
            raise self._error(str(error), 'metrics')

    def parse_stream(self, stream):
        self.config = configparser.ConfigParser(interpolation=None)
        try:
            self.config.read_file(stream, source=str(self.filename))
        except configparser.Error as error:
            raise self._error(str(error))
        self._check_keys()

        name, sigma = self._potential_section()
        dim = sigma.dim if sigma is not None else None
        get = self._get
        result = RunConfig(
            potential=name,
            sigma=sigma,
            sampler=get('sampler', 'name', str, 'pbrwp'),
            sampler_config=self._sampler_config(),
            tau=get('sampler', 'tau', float),
            theta=get('sampler', 'theta', float, 1.0),
            lam=get('sampler', 'lambda', float, 0.0),
            n_particles=get('init', 'n_particles', int, 100),
            init_mean=get('init', 'mean', lambda t: None if t.lower() == 'zeros'
                          else parse_vector(t)),
            init_cov=get('init', 'cov', lambda t: None if t.lower() == 'identity'
                         else self.parse_matrix(t, dim)),
            output_dir=get('output', 'dir', str, 'out'),
            snapshot_every=get('output', 'snapshot_every', int, 10),
            kl=get('metrics', 'kl', self._kl),
            kl_config=self._kl_config(),
            filename=self._filename(),
        )
        log.debug('parsed run configuration from %s', self.filename)
        return result
