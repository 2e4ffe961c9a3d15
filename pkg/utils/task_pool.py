#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: task_pool.py
# =====================================

import logging
import os

logger = logging.getLogger(__name__)

# workers import the lab modules by name
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), os.path.pardir))


class TaskPool(object):
    """Helper class for tracking the status of many in-flight remote tasks."""

    def __init__(self):
        self._tasks = {}

    def add(self, index, obj_ref):
        self._tasks[obj_ref] = index

    def completed(self, blocking_wait=False):
        import ray
        pending = list(self._tasks)
        if pending:
            ready, _ = ray.wait(pending, num_returns=len(pending), timeout=0)
            if not ready and blocking_wait:
                ready, _ = ray.wait(pending, num_returns=1, timeout=10.0)
            for obj_ref in ready:
                yield self._tasks.pop(obj_ref), obj_ref

    @property
    def count(self):
        return len(self._tasks)


def parallel_map(fn, items, num_workers=1, shared=None):
    """Apply fn(item, *shared) to every item; results come back in input order.

    num_workers <= 1 runs inline. Otherwise every item becomes a ray remote task and
    the shared arguments are put into the object store once.
    """
    items = list(items)
    shared = tuple(shared or ())
    if num_workers <= 1 or len(items) <= 1:
        return [fn(item, *shared) for item in items]

    import ray
    if not ray.is_initialized():
        ray.init(num_cpus=num_workers, include_dashboard=False, log_to_driver=False,
                 runtime_env=dict(env_vars=dict(PYTHONPATH=PROJECT_ROOT)))
    remote_fn = ray.remote(num_cpus=1)(fn)
    shared_refs = [ray.put(obj) for obj in shared]
    pool = TaskPool()
    for index, item in enumerate(items):
        pool.add(index, remote_fn.remote(item, *shared_refs))
    results = [None] * len(items)
    while pool.count > 0:
        for index, obj_ref in pool.completed(blocking_wait=True):
            results[index] = ray.get(obj_ref)
    logger.info('parallel map finished {} tasks on {} workers'.format(len(items), num_workers))
    return results
