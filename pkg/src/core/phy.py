"""LoRa PHY mathematics for LoRa_EnergyKits.

Symbol duration, time-on-air and the EU868 data-rate table. Every energy
figure in the tool is derived from these durations.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from utils.errors import ParameterError, PayloadTooLargeError

logger = logging.getLogger(__name__)

# EU868 区域参数：DR -> (SF, BW)
EU868_DATARATES: Dict[int, Tuple[int, int]] = {
    0: (12, 125000),
    1: (11, 125000),
    2: (10, 125000),
    3: (9, 125000),
    4: (8, 125000),
    5: (7, 125000),
}

# EU868 区域最大负载 (B)
EU868_MAX_PAYLOAD: Dict[int, int] = {
    0: 51,
    1: 51,
    2: 51,
    3: 115,
    4: 222,
    5: 222,
}

MIN_DR = 0
MAX_DR = 5
PHY_MAX_PAYLOAD = 255
PREAMBLE_EXTRA_SYMBOLS = 4.25


@dataclass(frozen=True, order=True)
class DataRate:
    """EU868 数据速率索引

    Attributes:
        index: 0..5，DR0 最慢 (SF12)，DR5 最快 (SF7)
    """

    index: int = 0

    def __post_init__(self):
        if not isinstance(self.index, int) or isinstance(self.index, bool):
            raise ParameterError(f"DR 索引必须为整数: {self.index!r}")
        if not MIN_DR <= self.index <= MAX_DR:
            raise ParameterError(
                f"DR 索引超出范围: {self.index}",
                suggestions=[f"DR 取值范围为 {MIN_DR}..{MAX_DR}"]
            )

    @property
    def sf(self) -> int:
        return EU868_DATARATES[self.index][0]

    @property
    def bw(self) -> int:
        return EU868_DATARATES[self.index][1]

    def __str__(self) -> str:
        return f"DR{self.index}"


@dataclass(frozen=True)
class LoRaParams:
    """LoRa PHY 参数

    low_dr_optimize 为 None 时自动推导：sf >= 11 且 bw = 125 kHz 时开启。
    显式传入 True/False 即为配置覆盖。

    Attributes:
        sf: 扩频因子 7..12
        bw: 带宽 (Hz)
        cr: 编码率偏移 1..4 (4/5 .. 4/8)
        preamble_syms: 前导码符号数
        explicit_header: 是否显式报头
        crc_on: 是否启用 CRC
        low_dr_optimize: 低速率优化 (DE)
    """

    sf: int = 7
    bw: int = 125000
    cr: int = 1
    preamble_syms: int = 8
    explicit_header: bool = True
    crc_on: bool = True
    low_dr_optimize: Optional[bool] = field(default=None)

    def __post_init__(self):
        _check_sf_bw(self.sf, self.bw)
        if self.cr not in (1, 2, 3, 4):
            raise ParameterError(
                f"编码率偏移超出范围: {self.cr}",
                suggestions=["cr 取值 1..4，对应 4/5..4/8"]
            )
        if self.preamble_syms < 1:
            raise ParameterError(f"前导码符号数必须 >= 1: {self.preamble_syms}")
        if self.low_dr_optimize is None:
            object.__setattr__(
                self, "low_dr_optimize", self.sf >= 11 and self.bw == 125000
            )

    def to_dict(self) -> dict:
        """转换为字典

        Returns:
            参数字典
        """
        return {
            "sf": self.sf,
            "bw": self.bw,
            "cr": self.cr,
            "preamble_syms": self.preamble_syms,
            "explicit_header": self.explicit_header,
            "crc_on": self.crc_on,
            "low_dr_optimize": self.low_dr_optimize,
        }


def _check_sf_bw(sf: int, bw: float) -> None:
    if not isinstance(sf, int) or not 7 <= sf <= 12:
        raise ParameterError(
            f"扩频因子超出范围: {sf}",
            suggestions=["SF 取值范围为 7..12"]
        )
    if bw <= 0:
        raise ParameterError(f"带宽必须为正: {bw}")


def symbol_duration(sf: int, bw: float) -> float:
    """计算 LoRa 符号时长 T_sym = 2^sf / bw

    Args:
        sf: 扩频因子 7..12
        bw: 带宽 (Hz)

    Returns:
        符号时长 (s)

    Raises:
        ParameterError: sf 超出范围或 bw 非正

    Examples:
        >>> symbol_duration(7, 125000)
        0.001024
    """
    _check_sf_bw(sf, bw)
    return (2 ** sf) / bw


def datarate_params(dr: DataRate, cr: int = 1) -> LoRaParams:
    """查表返回 DR 对应的 PHY 参数

    Args:
        dr: 数据速率
        cr: 编码率偏移（默认 4/5）

    Returns:
        LoRaParams，低速率优化按规则自动推导
    """
    sf, bw = EU868_DATARATES[dr.index]
    return LoRaParams(sf=sf, bw=bw, cr=cr)


def datarate_for(params: LoRaParams) -> Optional[DataRate]:
    """反查 PHY 参数对应的 EU868 DR，不在表中返回 None"""
    for index, (sf, bw) in EU868_DATARATES.items():
        if sf == params.sf and bw == params.bw:
            return DataRate(index)
    return None


def max_payload(dr: DataRate) -> int:
    return EU868_MAX_PAYLOAD[dr.index]


def downlink_params(params: LoRaParams) -> LoRaParams:
    """下行帧参数：与上行相同但关闭 CRC（IQ 反转不影响时长）"""
    return replace(params, crc_on=False)


def payload_symbols(params: LoRaParams, payload_len: int) -> int:
    """负载符号数 8 + max(ceil(...)·(CR+4), 0)

    Args:
        params: PHY 参数
        payload_len: 负载字节数

    Returns:
        负载部分的符号数
    """
    de = 1 if params.low_dr_optimize else 0
    ih = 0 if params.explicit_header else 1
    crc = 1 if params.crc_on else 0
    numerator = 8 * payload_len - 4 * params.sf + 28 + 16 * crc - 20 * ih
    denominator = 4 * (params.sf - 2 * de)
    blocks = math.ceil(numerator / denominator)
    return 8 + max(blocks * (params.cr + 4), 0)


def time_on_air(params: LoRaParams, payload_len: int, enforce_regional_max: bool = True) -> float:
    """计算 LoRa 帧空口时间

    前导码时长 (preamble_syms + 4.25)·T_sym，加上负载符号数·T_sym。

    Args:
        params: PHY 参数
        payload_len: 负载字节数 0..255
        enforce_regional_max: 参数对应 EU868 DR 时是否检查区域最大负载

    Returns:
        空口时间 (s)

    Raises:
        ParameterError: 负载长度为负
        PayloadTooLargeError: 超过 PHY 或区域最大负载
    """
    if payload_len < 0:
        raise ParameterError(f"负载长度不能为负: {payload_len}")
    if payload_len > PHY_MAX_PAYLOAD:
        raise PayloadTooLargeError(payload_len, PHY_MAX_PAYLOAD)
    if enforce_regional_max:
        dr = datarate_for(params)
        if dr is not None and payload_len > max_payload(dr):
            raise PayloadTooLargeError(payload_len, max_payload(dr), dr.index)

    t_sym = symbol_duration(params.sf, params.bw)
    preamble = (params.preamble_syms + PREAMBLE_EXTRA_SYMBOLS) * t_sym
    return preamble + payload_symbols(params, payload_len) * t_sym


def block_aligned_payloads(params: LoRaParams, max_len: int, min_len: int = 1) -> List[int]:
    """返回每个负载符号数对应的最大负载长度

    这些长度恰好填满一个负载符号块，逐字节的每比特能耗在块边界会
    上跳，而块对齐长度上的序列是单调的。

    Args:
        params: PHY 参数
        max_len: 最大负载
        min_len: 最小负载

    Returns:
        升序的块对齐负载长度列表
    """
    return [
        length
        for length in range(min_len, max_len + 1)
        if payload_symbols(params, length + 1) > payload_symbols(params, length)
    ]
