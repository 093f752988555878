# -*- coding: utf-8 -*-
"""
命令行包
=======

包含 click 命令组、实验运行器与结果表。
"""
