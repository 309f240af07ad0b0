"""Run one configured experiment end to end.

Writes ``particles_<k>.csv`` for k = 0 and every ``snapshot_every``-th
iteration, ``metrics.csv`` with one row per written snapshot after the
initial one, and ``manifest.json``.
"""
import datetime
import logging
import time

import numpy as np
from tqdm import tqdm

import pbrwp
from pbrwp.exceptions import DivergenceError
from pbrwp.experiment import RunConfig, RunManifest
from pbrwp.experiment.output.csv import MetricsWriter, SnapshotWriter
from pbrwp.experiment.output.manifest import Writer as ManifestWriter
from pbrwp.io import ensure_dir
from pbrwp.metrics import cov_trace, kl_estimate_kde, max_particle_norm, mean_norm

__all__ = ['run_experiment', 'snapshot_name', 'metrics_columns', 'metrics_row']

log = logging.getLogger(__name__)

METRICS_FILE = 'metrics.csv'
MANIFEST_FILE = 'manifest.json'


def snapshot_name(iteration):
    """
    >>> snapshot_name(20)
    'particles_20.csv'
    """
    return 'particles_%d.csv' % iteration


def metrics_columns(with_kl):
    return ['iter'] + (['kl_estimate'] if with_kl else []) + \
        ['mean_norm', 'cov_trace', 'max_particle_norm']


def metrics_row(iteration, X, config: RunConfig, potential, beta):
    row = [iteration]
    if config.kl_enabled:
        row.append(kl_estimate_kde(X, lambda G: -beta * potential.values(G),
                                   config.kl_config, vectorized=True))
    row += [mean_norm(X), cov_trace(X), max_particle_norm(X)]
    return tuple(row)


def _timing(durations):
    if not durations:
        return {'mean': 0.0, 'min': 0.0, 'max': 0.0}
    d = np.asarray(durations)
    return {'mean': float(d.mean()), 'min': float(d.min()), 'max': float(d.max())}


def run_experiment(config: RunConfig, workers=1, progress=False) -> RunManifest:
    """
    Run ``config`` and write its outputs; returns the manifest.

    On divergence the snapshots and metrics written so far are kept, the
    manifest records ``status = 'diverged'`` and the error is re-raised.
    """
    out = ensure_dir(config.output_dir)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    clock = time.perf_counter()
    log.info('running %s on %s: %s', config.sampler, config.potential, config.to_dict())

    sampler = config.build_sampler(workers=workers)
    potential, beta = sampler.potential, sampler.beta
    X = config.initial_ensemble()
    snapshots = SnapshotWriter()
    snapshots.write_file(X, out / snapshot_name(0))

    rows, durations, status = [], [], 'completed'
    iters = config.sampler_config.iters
    bar = tqdm(total=iters, disable=not progress, unit='it')
    try:
        tick = time.perf_counter()
        for k, X in sampler.iterate(X, iters):
            now = time.perf_counter()
            durations.append(now - tick)
            bar.update(1)
            if k % config.snapshot_every == 0:
                snapshots.write_file(X, out / snapshot_name(k))
                rows.append(metrics_row(k, X, config, potential, beta))
                log.debug('iteration %d: %s', k, rows[-1][1:])
            tick = time.perf_counter()
    except DivergenceError:
        status = 'diverged'
        raise
    except Exception:
        status = 'failed'
        raise
    finally:
        bar.close()
        MetricsWriter(metrics_columns(config.kl_enabled)).write_file(rows, out / METRICS_FILE)
        manifest = RunManifest(
            config=config.resolved().to_dict(),
            version=pbrwp.__version__,
            seed=config.seed,
            started=started,
            wall_clock=time.perf_counter() - clock,
            timing=_timing(durations),
            status=status,
            kl_estimator=config.kl_config.describe() if config.kl_enabled else None,
        )
        ManifestWriter().write_file(manifest, out / MANIFEST_FILE)
    log.info('finished %d iterations in %.3f s', iters, manifest.wall_clock)
    return manifest
