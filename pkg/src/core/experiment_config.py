# -*- coding: utf-8 -*-
"""
实验配置模块
==========

实验配置是一个 JSON 文档：

    {
        "kind": "dovetail",
        "seed": 7,
        "name": "dovetail-300",
        "inputs": {"topology": "../fixtures/t6.txt"},
        "params": {"min_head_len": 4}
    }

inputs 中的路径相对于配置文件所在目录；任何输入都可以换成
`{"synthetic": {...}}` 生成块。params 会合并到该实验类型的默认值之上，
未知的参数名直接报错，避免拼写错误悄悄变成默认值。
"""

import dataclasses
import hashlib
import json
import logging
from pathlib import Path

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)


class _Required:
    def __repr__(self):
        return "<required>"


REQUIRED = _Required()

# 来自原始实验设定的常量
DEFAULT_SUSPECTS = [1299, 3356]
DEFAULT_ALPHA = 0.5
DEFAULT_THRESHOLDS = [0.5, 0.75, 0.9]

MOBILITY_INPUTS = ("topology", "relays", "checkins", "country_map")

KINDS = {
    "vanilla-mobility": {
        "inputs": MOBILITY_INPUTS,
        "params": {"adversaries": None, "n_adversaries": 50, "max_users": None},
    },
    "cr-mobility": {
        "inputs": MOBILITY_INPUTS,
        "params": {"adversaries": None, "n_adversaries": 50, "max_users": None, "alpha": DEFAULT_ALPHA},
    },
    "denasa-mobility": {
        "inputs": MOBILITY_INPUTS,
        "params": {"suspects": DEFAULT_SUSPECTS, "max_users": None},
    },
    "hornet-mobility": {
        "inputs": ("topology", "checkins", "country_map"),
        "params": {"dst": REQUIRED, "a": 0.1, "thresholds": DEFAULT_THRESHOLDS, "n_trials": None},
    },
    "denasa-inference": {
        "inputs": ("topology", "relays"),
        "params": {
            "suspects": DEFAULT_SUSPECTS,
            "clients": None,
            "candidates": None,
            "n_trials": 100,
            "n_observations": 50,
            "emit_posterior": False,
            "n_leaky": 10,
        },
    },
    "cr-inference": {
        "inputs": ("topology", "relays"),
        "params": {
            "alpha": DEFAULT_ALPHA,
            "clients": None,
            "candidates": None,
            "n_trials": 100,
            "n_observations": 50,
            "emit_posterior": False,
            "n_leaky": 10,
        },
    },
    "dovetail": {
        "inputs": ("topology",),
        "params": {
            "adversary": None,
            "clients": None,
            "n_matchmakers": 500,
            "min_head_len": 6,
            "max_peer_links": 1,
            "max_len": 8,
            "n_trials": 100,
            "n_connections": 50,
            "n_frequency_samples": 1000,
            "percentiles": [5, 25, 50, 75, 95],
        },
    },
    "phi": {
        "inputs": ("topology",),
        "params": {
            "adversary": None,
            "dst": None,
            "candidates": None,
            "n_helpers": 500,
            "n_trials": 100,
            "n_connections": 50,
            "n_frequency_samples": 10000,
            "thresholds": DEFAULT_THRESHOLDS,
        },
    },
    "taps": {
        "inputs": ("topology", "relays"),
        "params": {
            "medoids": None,
            "n_clusters": 200,
            "adversary_ases": None,
            "n_adversaries": 50,
            "top_k_guards": 10,
            "n_formations": 12,
            "rewire_prob": 0.1,
        },
    },
    "hornet-routing": {
        "inputs": ("route_changes",),
        "params": {"dst": None, "n_snapshots": 30, "rewire_prob": 0.05, "n_probes": 100},
    },
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    name: str
    inputs: dict
    params: dict
    base_dir: Path = Path(".")

    @classmethod
    def from_file(cls, filepath):
        """
        读取并校验配置文件

        Raises:
            ConfigError: 文件不是合法 JSON，或字段缺失、取值非法
        """
        path = Path(filepath)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError("<file>", f"配置文件不存在: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"{path}:{e.lineno}: {e.msg}") from None
        config = cls.from_dict(data, base_dir=path.parent, default_name=path.stem)
        logger.info("loaded config %s: kind=%s seed=%d", path, config.kind, config.seed)
        return config

    @classmethod
    def from_dict(cls, data, base_dir=".", default_name="experiment"):
        if not isinstance(data, dict):
            raise ConfigError("<root>", "配置必须是 JSON 对象")
        kind = data.get("kind")
        if kind not in KINDS:
            raise ConfigError("kind", f"未知的实验类型 {kind!r}，可选: {', '.join(KINDS)}")
        if "seed" not in data:
            raise ConfigError("seed", "缺少必填字段")
        seed = data["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed", f"必须是非负整数: {seed!r}")
        unknown_keys = set(data) - {"kind", "seed", "name", "inputs", "params"}
        if unknown_keys:
            raise ConfigError(sorted(unknown_keys)[0], "未知的配置字段")

        inputs = data.get("inputs", {})
        if not isinstance(inputs, dict):
            raise ConfigError("inputs", "必须是对象")
        for key in KINDS[kind]["inputs"]:
            if key not in inputs:
                raise ConfigError(f"inputs.{key}", "缺少必需的输入")
        for key, value in inputs.items():
            _check_input(key, value)

        user_params = data.get("params", {})
        if not isinstance(user_params, dict):
            raise ConfigError("params", "必须是对象")
        defaults = KINDS[kind]["params"]
        unknown = sorted(set(user_params) - set(defaults))
        if unknown:
            raise ConfigError(f"params.{unknown[0]}", f"{kind} 不接受该参数")
        params = {**defaults, **user_params}
        for key, value in params.items():
            if value is REQUIRED:
                raise ConfigError(f"params.{key}", "缺少必填参数")

        name = data.get("name", default_name)
        if not isinstance(name, str) or not name:
            raise ConfigError("name", "必须是非空字符串")
        return cls(kind, seed, name, dict(inputs), params, Path(base_dir))

    def canonical(self):
        return {"kind": self.kind, "seed": self.seed, "inputs": self.inputs, "params": self.params}

    def config_hash(self):
        """kind/seed/inputs/params 规范化 JSON 的 SHA-256"""
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def synthetic(self, key):
        """输入为生成块时返回其参数，否则返回 None"""
        value = self.inputs.get(key)
        if isinstance(value, dict):
            return value["synthetic"]
        return None

    def input_paths(self, key):
        """输入对应的文件路径列表（相对于配置文件目录解析）"""
        value = self.inputs.get(key)
        if value is None or isinstance(value, dict):
            return []
        values = value if isinstance(value, list) else [value]
        return [self.base_dir / v for v in values]


def _check_input(key, value):
    if isinstance(value, str) and value:
        return
    if isinstance(value, list) and value and all(isinstance(v, str) and v for v in value):
        return
    if isinstance(value, dict) and set(value) == {"synthetic"} and isinstance(value["synthetic"], dict):
        return
    raise ConfigError(f"inputs.{key}", "必须是文件路径、路径列表或 {\"synthetic\": {...}} 生成块")
