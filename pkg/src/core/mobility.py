# -*- coding: utf-8 -*-
"""
移动轨迹模块
==========

负责用户签到轨迹的读取与位置映射，包括：
- 签到 CSV（`user,date,country`）的解析，按用户分组并按日期排序
- 国家 → AS 映射表（`country,asn`）的解析
- 按首次出现顺序提取到访国家序列，以及映射后的 AS 序列
- 按天取位置（同一天多次签到取最后一次）

日期统一换算为整数天序号（date.toordinal），同一天内保持输入顺序。
"""

import csv
import dataclasses
import datetime
import io
import logging
from collections import defaultdict

from src.core.errors import ParseError, UnmappedCountryError

logger = logging.getLogger(__name__)

CHECKIN_HEADER = ["user", "date", "country"]
COUNTRY_MAP_HEADER = ["country", "asn"]


@dataclasses.dataclass(frozen=True)
class CheckIn:
    user: str
    day: int
    country: str

    def __post_init__(self):
        if not self.country:
            raise ValueError("国家代码不能为空")


@dataclasses.dataclass(frozen=True)
class MobilityTrace:
    """
    一个用户的签到轨迹

    checkins 按天升序排列；同一天的多次签到保持原始顺序。
    """

    user: str
    checkins: tuple

    def __post_init__(self):
        days = [c.day for c in self.checkins]
        if days != sorted(days):
            raise ValueError(f"用户 {self.user} 的签到未按日期排序")

    @property
    def n_points(self):
        return len(self.checkins)

    def days(self):
        """有签到的天，升序去重"""
        return sorted({c.day for c in self.checkins})


@dataclasses.dataclass(frozen=True)
class CountryAsMap:
    mapping: dict

    def __contains__(self, country):
        return country in self.mapping

    def lookup(self, country):
        """
        Raises:
            UnmappedCountryError: 国家不在映射表中
        """
        try:
            return self.mapping[country]
        except KeyError:
            raise UnmappedCountryError(country) from None

    def countries(self):
        return sorted(self.mapping)


def _read_rows(text, source, header):
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1:
            if [c.strip() for c in row] != header:
                raise ParseError(source, lineno, f"表头应为 {','.join(header)}")
            continue
        if not row or not "".join(row).strip():
            continue
        if len(row) != len(header):
            raise ParseError(source, lineno, f"应有 {len(header)} 列，实际 {len(row)} 列")
        yield lineno, [c.strip() for c in row]


def parse_checkins(text, source="<string>"):
    """
    解析签到 CSV

    Args:
        text (str): 文件内容，表头为 `user,date,country`，日期为 ISO-8601
        source (str): 出错时报告的来源名称

    Returns:
        list[MobilityTrace]: 每个用户一条轨迹，按用户 id 排序；空文件返回空列表

    Raises:
        ParseError: 日期非法或行格式错误，包含行号
    """
    if not text.strip():
        return []
    grouped = defaultdict(list)
    n_rows = 0
    for lineno, (user, raw_date, country) in _read_rows(text, source, CHECKIN_HEADER):
        if not user or not country:
            raise ParseError(source, lineno, "用户或国家为空")
        try:
            day = datetime.date.fromisoformat(raw_date).toordinal()
        except ValueError:
            raise ParseError(source, lineno, f"非法日期 '{raw_date}'") from None
        grouped[user].append(CheckIn(user, day, country))
        n_rows += 1

    # sorted 是稳定排序，同一天内保持输入顺序
    traces = [
        MobilityTrace(user, tuple(sorted(rows, key=lambda c: c.day)))
        for user, rows in sorted(grouped.items())
    ]
    logger.info("read %s: %d check-ins, %d users", source, n_rows, len(traces))
    return traces


def parse_country_map(text, source="<string>"):
    """
    解析国家 → AS 映射 CSV（表头 `country,asn`）

    Raises:
        ParseError: AS 号非法或国家重复
    """
    mapping = {}
    for lineno, (country, raw_asn) in _read_rows(text, source, COUNTRY_MAP_HEADER):
        try:
            asn = int(raw_asn)
        except ValueError:
            raise ParseError(source, lineno, f"无法解析的 AS 号 '{raw_asn}'") from None
        if asn < 1 or not country:
            raise ParseError(source, lineno, "国家为空或 AS 号非正")
        if country in mapping:
            raise ParseError(source, lineno, f"国家重复: {country}")
        mapping[country] = asn
    logger.info("read %s: %d countries", source, len(mapping))
    return CountryAsMap(mapping)


def country_sequence(trace):
    """按首次出现顺序列出到访过的国家，重复到访不再计数"""
    return list(dict.fromkeys(c.country for c in trace.checkins))


def as_sequence(trace, country_map, n_countries=None):
    """
    国家序列映射到 AS，相邻重复的 AS 合并

    n_countries 给定时只取前 n_countries 个到访国家。

    Raises:
        UnmappedCountryError: 轨迹中出现映射表里没有的国家
    """
    result = []
    for country in country_sequence(trace)[:n_countries]:
        asn = country_map.lookup(country)
        if not result or result[-1] != asn:
            result.append(asn)
    return result


def daily_locations(trace, country_map):
    """
    每天一个位置：当天最后一次签到所在国家映射到的 AS

    Returns:
        dict: 天序号 → AS，按天升序
    """
    last = {}
    for checkin in trace.checkins:
        last[checkin.day] = checkin.country
    return {day: country_map.lookup(country) for day, country in sorted(last.items())}


def write_checkins_csv(traces, fd):
    """把轨迹写回签到 CSV，供合成数据落盘"""
    writer = csv.writer(fd, lineterminator="\n")
    writer.writerow(CHECKIN_HEADER)
    for trace in traces:
        for checkin in trace.checkins:
            writer.writerow(
                [checkin.user, datetime.date.fromordinal(checkin.day).isoformat(), checkin.country]
            )
