"""Adaptive Data Rate controller for LoRa_EnergyKits.

Network-side max-SNR rule over the last N uplinks plus the simplified
device-side ADR_ACK backoff. All state is value-typed; the simulation
loop owns the only instance.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from core.phy import MAX_DR, MIN_DR, DataRate
from utils.errors import ParameterError

logger = logging.getLogger(__name__)

# 解调门限 SNR (dB)，按 SF
REQUIRED_SNR_DB = {
    7: -7.5,
    8: -10.0,
    9: -12.5,
    10: -15.0,
    11: -17.5,
    12: -20.0,
}

DEFAULT_HISTORY_SIZE = 20
DEFAULT_DEVICE_MARGIN_DB = 10.0
DEFAULT_ADR_ACK_LIMIT = 64
ADR_STEP_DB = 3.0
TX_POWER_STEP_DBM = 3
ADR_MIN_TX_POWER_DBM = 2
ADR_MAX_TX_POWER_DBM = 14

SNR_MODELS = ("normal", "trace")


def required_snr(sf: int) -> float:
    """返回扩频因子的解调门限 SNR (dB)

    Raises:
        ParameterError: sf 不在 7..12
    """
    try:
        return REQUIRED_SNR_DB[sf]
    except KeyError:
        raise ParameterError(f"扩频因子超出范围: {sf}", suggestions=["SF 取值范围为 7..12"])


@dataclass(frozen=True)
class UplinkObservation:
    """网络侧对一次已接收上行的观测"""

    snr: float
    dr: DataRate
    tx_power_dbm: int
    gateway_count: int = 1

    def __post_init__(self):
        if self.gateway_count < 1:
            raise ParameterError(
                f"gateway_count 必须 >= 1: {self.gateway_count}",
                suggestions=["仅对被网关接收的上行创建观测"]
            )


@dataclass(frozen=True)
class AdrState:
    """ADR 状态

    Attributes:
        history: 最近的观测（FIFO，长度 <= history_size）
        history_size: 历史长度 N
        device_margin_db: 设备余量
        adr_ack_limit: 连续未被接收的上行达到该值后降一档 DR
        adr_ack_cnt: 当前连续未被接收的上行计数
    """

    history: Tuple[UplinkObservation, ...] = ()
    history_size: int = DEFAULT_HISTORY_SIZE
    device_margin_db: float = DEFAULT_DEVICE_MARGIN_DB
    adr_ack_limit: int = DEFAULT_ADR_ACK_LIMIT
    adr_ack_cnt: int = 0

    def __post_init__(self):
        if self.history_size < 1:
            raise ParameterError(f"history_size 必须 >= 1: {self.history_size}")
        if self.adr_ack_limit < 1:
            raise ParameterError(f"adr_ack_limit 必须 >= 1: {self.adr_ack_limit}")

    @property
    def snr_max(self) -> Optional[float]:
        if not self.history:
            return None
        return max(obs.snr for obs in self.history)


def record_uplink(state: AdrState, obs: UplinkObservation) -> AdrState:
    """追加观测，超过 N 时淘汰最旧的一条

    Examples:
        >>> s = record_uplink(AdrState(), UplinkObservation(0.0, DataRate(0), 14))
        >>> len(s.history)
        1
    """
    history = (state.history + (obs,))[-state.history_size:]
    return replace(state, history=history)


def adr_decision(state: AdrState, current: Tuple[DataRate, int]) -> Optional[Tuple[DataRate, int]]:
    """按最大 SNR 规则计算新的 (DR, 发射功率)

    margin = snr_max − required_snr(sf) − device_margin，nstep = floor(margin / 3)。
    nstep > 0 先升 DR 至 DR5，再以 3 dB 步长降功率至 2 dBm；
    nstep < 0 以 3 dB 步长升功率至 14 dBm，不降 DR。

    Args:
        state: ADR 状态
        current: 当前 (DR, 发射功率)

    Returns:
        新的 (DR, 发射功率)；历史为空时返回 None（无决策）
    """
    snr_max = state.snr_max
    if snr_max is None:
        return None
    dr, power = current
    margin = snr_max - required_snr(dr.sf) - state.device_margin_db
    nstep = math.floor(margin / ADR_STEP_DB)

    index = dr.index
    while nstep > 0 and index < MAX_DR:
        index += 1
        nstep -= 1
    while nstep > 0 and power > ADR_MIN_TX_POWER_DBM:
        power -= TX_POWER_STEP_DBM
        nstep -= 1
    while nstep < 0 and power < ADR_MAX_TX_POWER_DBM:
        power += TX_POWER_STEP_DBM
        nstep += 1
    power = min(max(power, ADR_MIN_TX_POWER_DBM), ADR_MAX_TX_POWER_DBM)
    return DataRate(index), power


def adr_backoff(
    state: AdrState,
    current: Tuple[DataRate, int],
    received: bool,
) -> Tuple[AdrState, Tuple[DataRate, int]]:
    """设备侧 ADR_ACK 退避

    上行被接收时计数清零；连续 adr_ack_limit 次未被接收后 DR 降一档并清零。

    Returns:
        (新状态, 新的 (DR, 发射功率))
    """
    if received:
        return replace(state, adr_ack_cnt=0), current
    count = state.adr_ack_cnt + 1
    dr, power = current
    if count >= state.adr_ack_limit:
        if dr.index > MIN_DR:
            logger.warning(f"连续 {count} 次上行未被接收，{dr} 降为 DR{dr.index - 1}")
            dr = DataRate(dr.index - 1)
        return replace(state, adr_ack_cnt=0), (dr, power)
    return replace(state, adr_ack_cnt=count), current


@dataclass
class SnrModel:
    """上行 SNR 模型

    Attributes:
        model: "normal" 按种子正态分布 / "trace" 循环回放 values
        mean_db: 正态模型均值
        sigma_db: 正态模型标准差
        values: trace 模型的 SNR 序列
    """

    model: str = "normal"
    mean_db: float = 0.0
    sigma_db: float = 0.0
    values: List[float] = field(default_factory=list)

    def validate(self) -> List[str]:
        problems = []
        if self.model not in SNR_MODELS:
            problems.append(f"未知 SNR 模型: {self.model}")
        if self.model == "normal" and self.sigma_db < 0:
            problems.append("sigma_db 不能为负")
        if self.model == "trace" and not self.values:
            problems.append("trace 模型需要非空 values")
        return problems

    @property
    def stochastic(self) -> bool:
        return self.model == "normal" and self.sigma_db > 0

    def to_dict(self) -> dict:
        if self.model == "trace":
            return {"model": self.model, "values": list(self.values)}
        return {"model": self.model, "mean_db": self.mean_db, "sigma_db": self.sigma_db}

    @classmethod
    def from_dict(cls, data: dict) -> "SnrModel":
        return cls(
            model=data.get("model", "normal"),
            mean_db=float(data.get("mean_db", 0.0)),
            sigma_db=float(data.get("sigma_db", 0.0)),
            values=[float(v) for v in data.get("values", [])],
        )


class SnrSource:
    """按模型逐次产生上行 SNR"""

    def __init__(self, model: SnrModel, rng: Optional[np.random.Generator] = None):
        problems = model.validate()
        if problems:
            raise ParameterError(f"SNR 模型无效: {'; '.join(problems)}")
        if model.stochastic and rng is None:
            raise ParameterError("随机 SNR 模型需要随机数发生器（场景 seed）")
        self.model = model
        self._rng = rng
        self._index = 0

    def next_snr(self) -> float:
        if self.model.model == "trace":
            value = self.model.values[self._index % len(self.model.values)]
            self._index += 1
            return value
        if not self.model.stochastic:
            return self.model.mean_db
        return float(self._rng.normal(self.model.mean_db, self.model.sigma_db))
