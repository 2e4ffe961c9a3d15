import json
import os

import numpy as np
import pandas as pd
import pytest
import yaml

from closed_forms import alpha_flux, alpha_star, flat_pair
from experiment import ExperimentConfig
from run_scripts.run_lab import EXIT_AUDIT, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, run
from utils.misc import ConfigValidationError
from weighted_grid import Grid, save_field_raw

DESK = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.path.pardir, 'run_scripts', 'configs', 'desk.yaml')


def _write_config(path, **values):
    path.write_text(yaml.safe_dump(values))
    return str(path)


def test_constants(tmp_path):
    out = tmp_path / 'out'
    assert run(['constants', '--s', '0.5', '--out-dir', str(out)]) == EXIT_OK
    table = pd.read_csv(out / 'constants.csv')
    assert list(table['s']) == [0.5]
    assert table['c0_gamma'][0] == pytest.approx(np.pi / 8., rel=1e-14)
    assert table['c0_flux'][0] == pytest.approx(np.pi / 4., rel=1e-14)
    config = json.loads((out / 'config.json').read_text())
    assert config['subcommand'] == 'constants' and config['s_values'] == [0.5]
    assert json.loads((out / 'summary.json').read_text())['audit_failures'] == []


def test_constants_are_deterministic(tmp_path):
    assert run(['constants', '--out-dir', str(tmp_path / 'a')]) == EXIT_OK
    assert run(['constants', '--out-dir', str(tmp_path / 'b')]) == EXIT_OK
    assert (tmp_path / 'a' / 'constants.csv').read_bytes() == (tmp_path / 'b' / 'constants.csv').read_bytes()


def test_validation_errors(tmp_path):
    assert run(['constants', '--s', '1.5', '--out-dir', str(tmp_path / 'a')]) == EXIT_VALIDATION
    unknown = _write_config(tmp_path / 'unknown.yaml', bogus=1)
    assert run(['constants', '--config', unknown, '--out-dir', str(tmp_path / 'b')]) == EXIT_VALIDATION
    empty = _write_config(tmp_path / 'radii.yaml', radii=[])
    assert run(['weiss', '--config', empty, '--out-dir', str(tmp_path / 'c')]) == EXIT_VALIDATION
    assert not (tmp_path / 'c').exists()


def test_config_collects_every_diagnostic(tmp_path):
    path = _write_config(tmp_path / 'bad.yaml', s=2., eps=-1., lambdas=[0.1, 0.2])
    with pytest.raises(ConfigValidationError) as info:
        ExperimentConfig.from_sources(path).validate()
    keys = sorted(line.split(':')[0] for line in info.value.diagnostics)
    assert keys == ['eps', 'lambdas', 's']


def test_config_layers(tmp_path):
    path = _write_config(tmp_path / 'c.yaml', eps=0.1, residual_tol='1e-9', boundary_amplitude='alpha_star')
    config = ExperimentConfig.from_sources(path, dict(eps=0.02, mass=None)).validate()
    assert config.eps == 0.02
    assert config.mass == 1.
    assert config.residual_tol == 1e-9
    assert config.free_boundary_level == 0.02
    params = config.problem_params(eps=0.2)
    assert params.eps == 0.2
    assert params.boundary.profile.amplitude == pytest.approx(alpha_star(0.5, 1.))


def test_solve_writes_artifacts(tmp_path):
    path = _write_config(tmp_path / 'solve.yaml', nx=17, nz=9, eps=0.2)
    out = tmp_path / 'out'
    assert run(['solve', '--config', path, '--out-dir', str(out)]) == EXIT_OK
    for name in ('field.field', 'field.csv', 'trace.csv', 'summary.json', 'config.json'):
        assert (out / name).exists()
    trace = pd.read_csv(out / 'trace.csv')
    assert list(trace.columns) == ['x1', 'value', 'flux']
    assert len(trace) == 17
    assert json.loads((out / 'summary.json').read_text())['solve_report']['converged']


def _blowup_config(tmp_path, band, floor=0.05):
    grid = Grid(0.5, 1., 1., 65, 33)
    u, _ = flat_pair(grid, 1., alpha_star(0.5, 1.))
    save_field_raw(u, str(tmp_path / 'u.field'))
    return _write_config(tmp_path / 'blowup_{}_{}.yaml'.format(band, floor), nx=65, nz=33,
                         field=str(tmp_path / 'u.field'), center=0., orientation=1, lambdas=[0.8, 0.4],
                         acceptance_band=band, blowup_min_cells=2., blowup_residual_floor=floor)


def test_blowup_audit_and_strict_exit(tmp_path):
    loose = _blowup_config(tmp_path, 0.5)
    assert run(['blowup', '--config', loose, '--out-dir', str(tmp_path / 'a'), '--strict']) == EXIT_OK
    summary = json.loads((tmp_path / 'a' / 'summary.json').read_text())
    assert summary['alpha_fit'] == pytest.approx(summary['alpha_star'], rel=0.1)
    assert len(pd.read_csv(tmp_path / 'a' / 'blowup.csv')) == 2

    tight = _blowup_config(tmp_path, 1e-12)
    assert run(['blowup', '--config', tight, '--out-dir', str(tmp_path / 'b')]) == EXIT_OK
    assert run(['blowup', '--config', tight, '--out-dir', str(tmp_path / 'c'), '--strict']) == EXIT_AUDIT
    assert json.loads((tmp_path / 'c' / 'summary.json').read_text())['audit_failures']


def test_continuation_non_convergence_exit(tmp_path):
    path = _write_config(tmp_path / 'c.yaml', nx=17, nz=9, max_iter=0, eps_ladder=[0.2, 0.1])
    out = tmp_path / 'out'
    assert run(['continuation', '--config', path, '--out-dir', str(out)]) == EXIT_SOLVER
    summary = json.loads((out / 'summary.json').read_text())
    assert summary['failed_step'] == 0
    assert summary['failed_solve_report']['converged'] is False


def test_blowup_residual_growth_is_an_audit_failure(tmp_path):
    # interpolation error on the exact profile grows like (h / lambda)^2
    path = _blowup_config(tmp_path, 0.5, floor=0.)
    out = tmp_path / 'out'
    assert run(['blowup', '--config', path, '--out-dir', str(out)]) == EXIT_OK
    assert run(['blowup', '--config', path, '--out-dir', str(tmp_path / 'strict'), '--strict']) == EXIT_AUDIT
    summary = json.loads((out / 'summary.json').read_text())
    assert summary['blowup_residual_decreasing'] is False
    assert any('grow' in line for line in summary['audit_failures'])
    assert summary['blowup']['residual_floor'] == 0.


def test_report_on_desk_config(tmp_path):
    out = tmp_path / 'out'
    assert run(['report', '--config', DESK, '--out-dir', str(out), '--strict']) in (EXIT_OK, EXIT_AUDIT)
    summary = json.loads((out / 'summary.json').read_text())
    assert abs(summary['center']) < 0.5
    assert 0. < summary['lambda_scale'] <= 1. and summary['fit_lambdas']
    assert summary['blowup']['lambdas']
    assert isinstance(summary['blowup_residual_decreasing'], bool)
    assert summary['holder_ratio'] is None or summary['holder_ratio'] >= 1.
    assert summary['continuation']['holder_ratio'] == summary['holder_ratio']
    for name in ('continuation.csv', 'blowup.csv', 'weiss.csv', 'chi.csv', 'endpoint.field'):
        assert (out / name).exists()


def test_weiss_on_desk_config(tmp_path):
    out = tmp_path / 'out'
    assert run(['weiss', '--config', DESK, '--out-dir', str(out)]) == EXIT_OK
    summary = json.loads((out / 'summary.json').read_text())
    assert summary['solve_report']['converged']
    assert summary['weiss_radii'] and len(pd.read_csv(out / 'weiss.csv')) == len(summary['weiss_radii'])
    assert summary['weiss_class'] in ('below_flat', 'flat', 'gap', 'full_mass')


def test_continuation_on_desk_config(tmp_path):
    out = tmp_path / 'out'
    assert run(['continuation', '--config', DESK, '--out-dir', str(out)]) == EXIT_OK
    table = pd.read_csv(out / 'continuation.csv')
    assert list(table['eps']) == [0.2, 0.1]
    assert (out / 'endpoint.field').exists()


def test_symbol_check(tmp_path):
    out = tmp_path / 'out'
    assert run(['symbol-check', '--config', DESK, '--out-dir', str(out)]) == EXIT_OK
    table = pd.read_csv(out / 'symbol_check.csv')
    assert len(table) == 3 * 2
    half = table[table['s'] == 0.5]
    np.testing.assert_allclose(half['rho'], 1., rtol=5e-2)
    spreads = json.loads((out / 'summary.json').read_text())['rho_spread']
    assert sorted(spreads) == ['0.25', '0.5', '0.75']


def test_alpha_flux_amplitude_key(tmp_path):
    path = _write_config(tmp_path / 'flux.yaml', boundary_amplitude='alpha_flux', cold_start='harmonic')
    params = ExperimentConfig.from_sources(path).validate().problem_params()
    assert params.boundary.profile.amplitude == pytest.approx(alpha_flux(0.5, 1.))
    assert params.cold_start == 'harmonic'
    bad = _write_config(tmp_path / 'bad.yaml', boundary_amplitude='alpha_max', cold_start='warm')
    with pytest.raises(ConfigValidationError) as info:
        ExperimentConfig.from_sources(bad).validate()
    assert sorted(line.split(':')[0] for line in info.value.diagnostics) == ['boundary_amplitude', 'cold_start']
