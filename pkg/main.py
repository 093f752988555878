#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tempest Lab - 时间维度去匿名化攻击模拟实验室
==========================================

在 AS 级路由模型上模拟针对 Tor、Counter-RAPTOR、DeNASA、TAPS 以及
网络层匿名协议（Dovetail、PHI、HORNET）的时间维度攻击，输出整洁的结果表。

版本: 0.1.0
"""

import logging

from src.cli.main_command import cli


def main():
    """
    应用程序主函数
    配置根日志记录器并交给 click 命令组
    """
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    cli()


if __name__ == "__main__":
    main()
