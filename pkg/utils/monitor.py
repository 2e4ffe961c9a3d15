#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: monitor.py
# =====================================

import logging
import os

logger = logging.getLogger(__name__)


class SummaryMonitor(object):
    """Scalar progress summaries (tensorboard event files) for solves and ladders.

    With log_dir None every call is a no-op and tensorflow is never imported.
    """

    def __init__(self, log_dir=None, prefix='lab'):
        self.log_dir = log_dir
        self.prefix = prefix
        self.writer = None
        self.tf = None
        if log_dir is not None:
            import tensorflow as tf
            logging.getLogger("tensorflow").setLevel(logging.ERROR)
            if not os.path.exists(log_dir):
                os.makedirs(log_dir)
            self.tf = tf
            self.writer = tf.summary.create_file_writer(log_dir)

    @property
    def enabled(self):
        return self.writer is not None

    def write(self, stats, step):
        if self.writer is None:
            return
        with self.writer.as_default():
            for key, val in stats.items():
                if val is None:
                    continue
                self.tf.summary.scalar('{}/{}'.format(self.prefix, key), float(val), step=int(step))
            self.writer.flush()

    def child(self, prefix):
        monitor = SummaryMonitor.__new__(SummaryMonitor)
        monitor.log_dir = self.log_dir
        monitor.prefix = '{}/{}'.format(self.prefix, prefix)
        monitor.writer = self.writer
        monitor.tf = self.tf
        return monitor
