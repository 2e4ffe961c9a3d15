import os

import numpy as np
import pytest

from utils.misc import (InvalidParameterError, PhaseTimer, SolverBreakdownError, check_finite, check_open_unit,
                        require)
from utils.monitor import SummaryMonitor
from utils.task_pool import parallel_map


def _scaled_square(x, scale):
    return scale * x * x


def test_phase_timer():
    timer = PhaseTimer('linear_solve')
    assert timer.mean == 0.
    for _ in range(3):
        with timer:
            pass
    timer.add(1.)
    assert timer.count == 4
    assert timer.total >= 1. and timer.longest >= 1.
    assert 0.25 <= timer.mean <= 0.5
    assert set(timer.stats()) == {'linear_solve_mean', 'linear_solve_count', 'linear_solve_total',
                                  'linear_solve_longest'}
    with pytest.raises(RuntimeError):
        with timer:
            with timer:
                pass


def test_require_and_checks():
    require(True, 'unused')
    with pytest.raises(InvalidParameterError, match='bad'):
        require(False, 'bad')
    with pytest.raises(KeyError):
        require(False, 'bad', KeyError)
    check_open_unit(0.3)
    for s in (0., 1., np.nan):
        with pytest.raises(InvalidParameterError):
            check_open_unit(s)


def test_check_finite_carries_report():
    check_finite([np.zeros(3)], 'zeros')
    with pytest.raises(SolverBreakdownError) as info:
        check_finite([np.ones(2), np.array([1., np.inf])], 'residual', report='partial')
    assert info.value.report == 'partial'


def test_disabled_monitor_is_a_no_op():
    monitor = SummaryMonitor(None)
    assert not monitor.enabled
    monitor.write(dict(residual=1.), 0)
    child = monitor.child('solve')
    assert child.prefix == 'lab/solve' and not child.enabled


def test_monitor_writes_event_files(tmp_path):
    pytest.importorskip('tensorflow')
    log_dir = str(tmp_path / 'summary')
    monitor = SummaryMonitor(log_dir, prefix='solve')
    monitor.write(dict(residual=1e-3, energy=2., skipped=None), 1)
    monitor.child('ladder').write(dict(cauchy=0.1), 0)
    assert monitor.enabled
    assert any(name.startswith('events') for name in os.listdir(log_dir))


def test_parallel_map_inline():
    assert parallel_map(_scaled_square, [1., 2., 3.], shared=(2.,)) == [2., 8., 18.]
    assert parallel_map(_scaled_square, [], num_workers=4, shared=(1.,)) == []


def test_parallel_map_with_ray_keeps_order():
    ray = pytest.importorskip('ray')
    try:
        # a lambda pickles by value, so workers need not import this module
        out = parallel_map(lambda x, scale: scale * x * x, list(range(6)), num_workers=2, shared=(3,))
    finally:
        ray.shutdown()
    assert out == [3 * i * i for i in range(6)]
