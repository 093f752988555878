# -*- coding: utf-8 -*-
"""
设置管理器模块
=============

负责管理实验室的运行设置，包括：
- 日志级别
- 并行试验的工作进程数
- 结果输出目录
- CSV 中浮点数的输出格式
- 是否显示进度条

设置数据以 JSON 格式存储在配置文件中。
"""

import json
import logging

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class SettingsManager:
    """
    运行设置管理器

    负责加载、保存和校验各项运行设置。
    所有设置都会持久化保存到 JSON 配置文件中。
    """

    # 配置项键名常量
    KEY_LOG_LEVEL = "log_level"          # 日志级别
    KEY_WORKERS = "workers"              # 并行试验的进程数，1 表示串行
    KEY_OUTPUT_DIR = "output_dir"        # 结果 CSV 与元数据的输出目录
    KEY_FLOAT_FORMAT = "float_format"    # 写 CSV 时的浮点格式
    KEY_SHOW_PROGRESS = "show_progress"  # 是否显示 tqdm 进度条

    def __init__(self, filepath):
        """
        初始化设置管理器

        Args:
            filepath (str): 配置文件的路径，通常是 config.json
        """
        self.filepath = filepath

        # 默认设置值
        self.defaults = {
            self.KEY_LOG_LEVEL: "INFO",
            self.KEY_WORKERS: 1,
            self.KEY_OUTPUT_DIR: "results",
            self.KEY_FLOAT_FORMAT: "%.10g",
            self.KEY_SHOW_PROGRESS: False,
        }

        self.settings = {}
        self.load_settings()

    def load_settings(self):
        """
        从配置文件加载设置

        如果配置文件不存在或格式错误，则使用默认设置。
        用户设置会与默认设置合并，确保所有必要的配置项都存在。

        Raises:
            ConfigError: 配置项取值非法
        """
        try:
            with open(self.filepath, "r", encoding="utf-8") as f:
                user_settings = json.load(f)
            if not isinstance(user_settings, dict):
                raise ValueError("配置文件顶层必须是对象")
            self.settings = {**self.defaults, **user_settings}
        except (FileNotFoundError, ValueError) as e:
            logger.debug("using default settings (%s): %s", self.filepath, e)
            self.settings = self.defaults.copy()

        for key, value in self.settings.items():
            self._validate(key, value)

    def _validate(self, key, value):
        if key == self.KEY_LOG_LEVEL and str(value).upper() not in LOG_LEVELS:
            raise ConfigError(key, f"未知的日志级别 '{value}'")
        if key == self.KEY_WORKERS and (not isinstance(value, int) or isinstance(value, bool) or value < 1):
            raise ConfigError(key, f"必须是不小于 1 的整数: {value!r}")
        if key == self.KEY_FLOAT_FORMAT:
            try:
                value % 1.5
            except (TypeError, ValueError):
                raise ConfigError(key, f"非法的浮点格式 '{value}'") from None
        if key == self.KEY_SHOW_PROGRESS and not isinstance(value, bool):
            raise ConfigError(key, f"必须是布尔值: {value!r}")

    def get_settings(self, key):
        """
        获取指定配置项的值

        Args:
            key (str): 配置项的键名

        Returns:
            配置项的值，如果不存在则返回 None
        """
        return self.settings.get(key)

    def set_settings(self, key, value):
        """
        设置指定配置项的值

        校验通过后立即保存到配置文件。

        Raises:
            ConfigError: 取值非法，此时设置不会改变
        """
        self._validate(key, value)
        self.settings[key] = value
        self._save_to_file()

    @property
    def log_level(self):
        return getattr(logging, str(self.settings[self.KEY_LOG_LEVEL]).upper())

    def _save_to_file(self):
        """将当前设置保存到配置文件，失败时记录错误"""
        try:
            with open(self.filepath, "w", encoding="utf-8") as f:
                json.dump(self.settings, f, indent=4, ensure_ascii=False)
        except OSError as e:
            logger.error("无法写入配置文件 %s: %s", self.filepath, e)
