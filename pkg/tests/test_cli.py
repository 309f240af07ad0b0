import pytest

from pbrwp import __version__
from pbrwp.__main__ import main
from pbrwp.experiment import read_manifest, read_metrics

RUN = '''
[potential]
name = quadratic
sigma = identity
dim = 2

[sampler]
eta = 0.1
T = 0.2
z_method = exact_quadratic
iters = 10
'''


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(['--version'])
    assert capsys.readouterr().out.strip() == __version__


def test_run(write_config, tmp_path, capsys):
    assert main(['run', '--config', str(write_config(RUN))]) == 0
    assert 'wrote' in capsys.readouterr().out
    assert read_metrics(tmp_path / 'out' / 'metrics.csv')['iter'].tolist() == [5, 10]


def test_run_overrides(write_config, tmp_path):
    out = tmp_path / 'elsewhere'
    assert main(['run', '--config', str(write_config(RUN)), '--seed', '3', '--out', str(out)]) == 0
    manifest = read_manifest(out / 'manifest.json')
    assert manifest.seed == 3
    assert manifest.config['output']['dir'] == str(out)


def test_unknown_keys_warn_unless_strict(write_config, capsys):
    path = str(write_config(RUN + 'colour = red\n'))
    assert main(['run', '--config', path]) == 0
    assert main(['--strict', 'run', '--config', path]) == 2
    assert '[sampler] colour: unknown key' in capsys.readouterr().err


def test_config_errors(write_config, tmp_path, capsys):
    assert main(['run', '--config', str(write_config(RUN.replace('0.1', '-0.1')))]) == 2
    assert main(['run', '--config', str(tmp_path / 'missing.ini')]) == 2
    err = capsys.readouterr().err
    assert 'eta must be positive' in err
    assert 'unable to open' in err


def test_exact_z_needs_a_quadratic_potential(write_config, tmp_path, capsys):
    text = RUN.replace('name = quadratic\nsigma = identity\ndim = 2', 'name = two_moons')
    assert main(['run', '--config', str(write_config(text))]) == 2
    assert not (tmp_path / 'out').exists()
    assert '[sampler] z_method' in capsys.readouterr().err


def test_divergence_exit_code(write_config, capsys):
    text = RUN.replace('sigma = identity\ndim = 2', 'sigma = diag: 1e-12, 1') \
        .replace('exact_quadratic', 'laplace').replace('eta = 0.1', 'eta = 1')
    assert main(['run', '--config', str(write_config(text))]) == 3
    assert 'diverged at iteration 1' in capsys.readouterr().err


def test_verify(capsys):
    assert main(['verify', '--check', 'pinned_scalars', '--check', 'max_t_boundary']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[:2] for line in lines] == [
        ['pinned_scalars', 'PASS'], ['max_t_boundary', 'PASS']]


def test_verify_catches_a_broken_closed_form(mocker, capsys):
    from pbrwp import gaussian
    original = gaussian.prwpo_gaussian

    def perturbed(*args, **kw):
        mu, sigma = original(*args, **kw)
        return mu, sigma.scaled(1 + 1e-6)

    mocker.patch('pbrwp.verify.prwpo_gaussian', side_effect=perturbed)
    assert main(['verify', '--check', 'stationary_round_trip']) == 1
    assert capsys.readouterr().out.split()[:2] == ['stationary_round_trip', 'FAIL']


def test_verify_unknown_check():
    assert main(['verify', '--check', 'nonsense']) == 1


def test_plot(write_config, tmp_path):
    main(['run', '--config', str(write_config(RUN))])
    out = tmp_path / 'out'
    assert main(['plot', '--metrics', str(out / 'metrics.csv'),
                 '--out', str(tmp_path / 'm.svg')]) == 0
    assert main(['plot', '--particles', str(out / 'particles_10.csv'),
                 '--out', str(tmp_path / 'p.svg')]) == 0
    for name in ['m.svg', 'p.svg']:
        assert '<svg' in (tmp_path / name).read_text(encoding='utf8')
    assert main(['plot', '--out', str(tmp_path / 'x.svg')]) == 1
    assert main(['plot', '--metrics', 'a', '--particles', 'b', '--out', 'x.svg']) == 1
