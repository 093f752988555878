# -*- coding: utf-8 -*-
"""
异常定义模块
===========

实验室内所有可预期错误的统一层级。根类继承 ValueError，
调用方既可以精确捕获，也可以按 ValueError 统一处理。
"""


class TempestError(ValueError):
    """所有领域错误的基类"""


class ParseError(TempestError):
    """
    输入文件解析错误

    Args:
        source (str): 文件名或来源描述
        line (int): 出错的行号（从 1 开始）
        message (str): 错误说明
    """

    def __init__(self, source, line, message):
        self.source = source
        self.line = line
        self.message = message
        super().__init__(f"{source}:{line}: {message}")


class TopologyValidationError(TempestError):
    """拓扑不合法：provider 环路、关系冲突等"""


class UnknownAsError(TempestError):
    """引用了图中不存在的 AS"""

    def __init__(self, asn):
        self.asn = asn
        super().__init__(f"AS{asn} 不在拓扑中")


class NoEligibleGuardError(TempestError):
    """没有带宽为正的 guard 可供选择"""


class EmptySuspectFreeSetError(NoEligibleGuardError):
    """所有 guard 都被嫌疑 AS 排除"""


class InconsistentObservationError(TempestError):
    """观测序列在所有候选位置下的似然均为零"""


class UnmappedCountryError(TempestError):
    """国家代码没有对应的 AS"""

    def __init__(self, country):
        self.country = country
        super().__init__(f"国家 {country} 没有映射到任何 AS")


class ConfigError(TempestError):
    """
    配置错误

    Args:
        field (str): 出错的字段名
        message (str): 错误说明
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"配置字段 '{field}': {message}")


class OracleGuardError(TempestError):
    """穷举 oracle 的规模保护被触发"""
