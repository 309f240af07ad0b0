"""Experiment records: the run configuration and the manifest of a finished run.

Configurations are read by :mod:`pbrwp.experiment.input` and results are
written by :mod:`pbrwp.experiment.output`; :mod:`pbrwp.experiment.runner`
connects the two.
"""
import dataclasses
from typing import Optional, Tuple

import numpy as np

from pbrwp.exceptions import ConfigError, PbrwpError
from pbrwp.kernel import ZMethod
from pbrwp.linalg import GaussianDist, PreconditionerSpec, RandomStreams, SpdMatrix, \
    sample_gaussian
from pbrwp.metrics import KlEstimateConfig
from pbrwp.potentials import POTENTIALS, QuadraticPotential, get_potential
from pbrwp.samplers import SAMPLERS, SamplerConfig, get_sampler

__all__ = [
    'RunConfig', 'RunManifest', 'matrix_to_dict', 'matrix_from_dict',
    'parse_file', 'parse_string', 'read_snapshot', 'read_metrics', 'read_manifest',
]

LANGEVIN_SAMPLERS = ('ula', 'mala', 'mla', 'myula')
# samplers that estimate Z(y) with the configured z_method
PROXIMAL_SAMPLERS = ('pbrwp', 'brwp')


def matrix_to_dict(m: Optional[SpdMatrix]):
    """
    >>> matrix_to_dict(SpdMatrix.from_diagonal([4, 1]))
    {'diag': [4.0, 1.0]}
    """
    if m is None:
        return None
    if m.is_diagonal:
        return {'diag': m.diagonal.tolist()}
    return {'dense': m.entries.tolist()}


def matrix_from_dict(value) -> Optional[SpdMatrix]:
    if value is None:
        return None
    if 'diag' in value:
        return SpdMatrix.from_diagonal(value['diag'])
    return SpdMatrix(value['dense'])


def _preconditioner_to_dict(spec: PreconditionerSpec):
    if spec.variant == 'identity':
        return {'variant': 'identity'}
    if spec.variant == 'diagonal':
        return {'variant': 'diagonal', 'values': list(spec.values)}
    return {'variant': 'dense', 'matrix': spec.dense.entries.tolist()}


def _preconditioner_from_dict(value) -> PreconditionerSpec:
    if value['variant'] == 'identity':
        return PreconditionerSpec.identity()
    if value['variant'] == 'diagonal':
        return PreconditionerSpec.diagonal(value['values'])
    return PreconditionerSpec.from_matrix(value['matrix'])


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    Everything needed to reproduce one run, with all defaults materialized.

    >>> cfg = RunConfig(potential='two_moons', n_particles=4)
    >>> cfg.dimension, cfg.kl_enabled
    (2, True)
    >>> RunConfig.from_dict(cfg.to_dict()) == cfg
    True
    """
    potential: str = 'two_moons'
    sigma: Optional[SpdMatrix] = None
    sampler: str = 'pbrwp'
    sampler_config: SamplerConfig = dataclasses.field(default_factory=SamplerConfig)
    tau: Optional[float] = None
    theta: float = 1.0
    lam: float = 0.0
    n_particles: int = 100
    init_mean: Optional[Tuple[float, ...]] = None
    init_cov: Optional[SpdMatrix] = None
    output_dir: str = 'out'
    snapshot_every: int = 10
    kl: Optional[bool] = None
    kl_config: KlEstimateConfig = dataclasses.field(default_factory=KlEstimateConfig)
    filename: Optional[str] = dataclasses.field(default=None, compare=False)

    def __post_init__(self):
        if self.init_mean is not None:
            object.__setattr__(self, 'init_mean', tuple(float(v) for v in self.init_mean))
        self.validate()

    def _error(self, message, section=None, key=None):
        return ConfigError(message, filename=self.filename, section=section, key=key)

    def validate(self):
        if self.potential not in POTENTIALS:
            raise self._error('unknown potential %r, expected one of %s'
                              % (self.potential, sorted(POTENTIALS)), 'potential', 'name')
        if self.potential == 'quadratic' and self.sigma is None:
            raise self._error('the quadratic potential needs sigma', 'potential', 'sigma')
        if self.sampler not in SAMPLERS:
            raise self._error('unknown sampler %r, expected one of %s'
                              % (self.sampler, sorted(SAMPLERS)), 'sampler', 'name')
        if self.sampler in PROXIMAL_SAMPLERS \
                and self.sampler_config.z_method.kind == 'exact_quadratic' \
                and POTENTIALS[self.potential] is not QuadraticPotential:
            raise self._error('the exact normalizing constant needs the quadratic potential, '
                              'got %r' % self.potential, 'sampler', 'z_method')
        if self.n_particles < 1:
            raise self._error('n_particles must be at least 1', 'init', 'n_particles')
        if self.snapshot_every < 1:
            raise self._error('snapshot_every must be at least 1', 'output', 'snapshot_every')
        if self.tau is not None and not self.tau > 0:
            raise self._error('tau must be positive', 'sampler', 'tau')
        if not self.theta > 0:
            raise self._error('theta must be positive', 'sampler', 'theta')
        if self.lam < 0:
            raise self._error('lambda must be non-negative', 'sampler', 'lambda')
        d = self.dimension
        if self.init_mean is not None and len(self.init_mean) != d:
            raise self._error('mean has %d entries, expected %d' % (len(self.init_mean), d),
                              'init', 'mean')
        if self.init_cov is not None and self.init_cov.dim != d:
            raise self._error('cov has dimension %d, expected %d' % (self.init_cov.dim, d),
                              'init', 'cov')
        try:
            self.sampler_config.preconditioner.matrix(d)
        except PbrwpError as error:
            raise self._error(str(error), 'sampler', 'preconditioner')
        if self.kl and d != 2:
            raise self._error('the KL estimate needs a two-dimensional potential', 'metrics', 'kl')

    @property
    def dimension(self) -> int:
        if self.sigma is not None:
            return self.sigma.dim
        return POTENTIALS[self.potential].dim

    @property
    def kl_enabled(self) -> bool:
        return self.dimension == 2 if self.kl is None else bool(self.kl)

    @property
    def seed(self) -> int:
        return self.sampler_config.seed

    def build_potential(self):
        return get_potential(self.potential, sigma=self.sigma)

    def build_sampler(self, workers=1):
        config = dataclasses.replace(self.sampler_config, workers=workers)
        options = {}
        if self.sampler in LANGEVIN_SAMPLERS:
            options['tau'] = self.tau
        if self.sampler == 'myula':
            options.update(theta=self.theta, lam=self.lam)
        return get_sampler(self.sampler, self.build_potential(), config, **options)

    def initial_distribution(self) -> GaussianDist:
        d = self.dimension
        mean = np.zeros(d) if self.init_mean is None else np.array(self.init_mean)
        cov = SpdMatrix.identity(d) if self.init_cov is None else self.init_cov
        return GaussianDist(mean, cov)

    def initial_ensemble(self):
        rng = RandomStreams(self.seed).for_init()
        return sample_gaussian(self.initial_distribution(), rng, size=self.n_particles)

    def resolved(self) -> 'RunConfig':
        """
        This configuration with beta and tau replaced by the values a run uses.

        >>> cfg = RunConfig(sampler_config=SamplerConfig(eta=0.2, beta='auto')).resolved()
        >>> round(cfg.sampler_config.beta, 6), cfg.tau
        (0.707107, 0.2)
        """
        tau = self.sampler_config.eta if self.tau is None else self.tau
        return dataclasses.replace(
            self, sampler_config=self.sampler_config.resolve(self.dimension), tau=tau)

    def with_overrides(self, seed=None, output_dir=None) -> 'RunConfig':
        cfg = self
        if seed is not None:
            sampler_config = dataclasses.replace(self.sampler_config, seed=int(seed))
            cfg = dataclasses.replace(cfg, sampler_config=sampler_config)
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(output_dir))
        return cfg

    def to_dict(self) -> dict:
        sc = self.sampler_config
        kl = self.kl_config
        return {
            'potential': {'name': self.potential, 'sigma': matrix_to_dict(self.sigma)},
            'sampler': {
                'name': self.sampler, 'eta': sc.eta, 'T': sc.T, 'beta': sc.beta,
                'preconditioner': _preconditioner_to_dict(sc.preconditioner),
                'z_method': sc.z_method.name, 'z_samples': sc.z_method.n_samples,
                'iters': sc.iters, 'seed': sc.seed,
                'tau': self.tau, 'theta': self.theta, 'lambda': self.lam,
            },
            'init': {
                'n_particles': self.n_particles,
                'mean': None if self.init_mean is None else list(self.init_mean),
                'cov': matrix_to_dict(self.init_cov),
            },
            'output': {'dir': self.output_dir, 'snapshot_every': self.snapshot_every},
            'metrics': {
                'kl': self.kl,
                'grid_min': None if kl.grid_min is None else list(kl.grid_min),
                'grid_max': None if kl.grid_max is None else list(kl.grid_max),
                'resolution': kl.resolution, 'bandwidth': kl.bandwidth,
            },
        }

    @classmethod
    def from_dict(cls, value, filename=None) -> 'RunConfig':
        s, m = value['sampler'], value['metrics']
        sampler_config = SamplerConfig(
            eta=s['eta'], T=s['T'], beta=s['beta'],
            preconditioner=_preconditioner_from_dict(s['preconditioner']),
            z_method=ZMethod.from_name(s['z_method'], s['z_samples']),
            iters=s['iters'], seed=s['seed'],
        )
        return cls(
            potential=value['potential']['name'],
            sigma=matrix_from_dict(value['potential']['sigma']),
            sampler=s['name'], sampler_config=sampler_config,
            tau=s['tau'], theta=s['theta'], lam=s['lambda'],
            n_particles=value['init']['n_particles'],
            init_mean=value['init']['mean'],
            init_cov=matrix_from_dict(value['init']['cov']),
            output_dir=value['output']['dir'],
            snapshot_every=value['output']['snapshot_every'],
            kl=m['kl'],
            kl_config=KlEstimateConfig(m['grid_min'], m['grid_max'], m['resolution'],
                                       m['bandwidth']),
            filename=filename,
        )


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """
    >>> m = RunManifest(RunConfig().to_dict(), '0.1.0', 0, '2024-01-01T00:00:00+00:00', 1.5,
    ...                 {'mean': 0.25, 'min': 0.125, 'max': 0.5})
    >>> RunManifest.from_dict(m.to_dict()) == m
    True
    """
    config: dict
    version: str
    seed: int
    started: str
    wall_clock: float
    timing: dict
    status: str = 'completed'
    kl_estimator: Optional[dict] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, value) -> 'RunManifest':
        return cls(**value)

    def run_config(self) -> RunConfig:
        return RunConfig.from_dict(self.config)


def parse_file(file, **kwargs) -> RunConfig:
    """Read a run configuration from an INI file name or file object."""
    from pbrwp.experiment.input.ini import Parser
    return Parser(**kwargs).parse_file(file)


def parse_string(value, **kwargs) -> RunConfig:
    from pbrwp.experiment.input.ini import Parser
    return Parser(**kwargs).parse_string(value)


def read_snapshot(file):
    """The d x N ensemble stored in a snapshot CSV."""
    from pbrwp.experiment.input.csv import SnapshotParser
    return SnapshotParser().parse_file(file)


def read_metrics(file):
    from pbrwp.experiment.input.csv import MetricsParser
    return MetricsParser().parse_file(file)


def read_manifest(file) -> RunManifest:
    from pbrwp.experiment.input.manifest import Parser
    return Parser().parse_file(file)
