#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: conftest.py
# =====================================

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
