"""Node application strategies for LoRa_EnergyKits.

When to sense (poll vs. interrupt), what to keep (relevance filter) and
when to talk (accumulation). The state machines here are advanced only by
the simulation loop.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from core.energy_model import (
    PowerProfile,
    RxWindowCalibration,
    TransactionOutcome,
    transaction_rx_energy,
    tx_energy,
)
from core.phy import DataRate, datarate_params, max_payload
from utils.errors import ParameterError, PayloadTooLargeError

logger = logging.getLogger(__name__)

DEFAULT_OVERHEAD_BYTES = 13
SECONDS_PER_HOUR = 3600.0


class WakeAction(Enum):
    """唤醒动作"""
    SAMPLE = "sample"
    INTERRUPT = "interrupt"
    NONE = "none"


@dataclass(frozen=True)
class PollMode:
    """轮询采样：每 period_s 唤醒并采样 sample_duration_s"""

    period_s: float = 60.0
    sample_duration_s: float = 0.01

    def __post_init__(self):
        if self.period_s <= 0:
            raise ParameterError(f"轮询周期必须为正: {self.period_s}")
        if self.sample_duration_s <= 0:
            raise ParameterError(f"采样时长必须为正: {self.sample_duration_s}")


@dataclass(frozen=True)
class InterruptMode:
    """中断驱动：传感器阈值中断唤醒 MCU

    事件间隔为 min_interarrival_s 加上均值 3600/event_rate_per_hour 的指数分布。
    """

    event_rate_per_hour: float = 1.0
    wake_duration_s: float = 0.01
    min_interarrival_s: float = 0.0

    def __post_init__(self):
        if self.event_rate_per_hour < 0:
            raise ParameterError(f"事件率不能为负: {self.event_rate_per_hour}")
        if self.wake_duration_s <= 0:
            raise ParameterError(f"唤醒时长必须为正: {self.wake_duration_s}")
        if self.min_interarrival_s < 0:
            raise ParameterError(f"最小事件间隔不能为负: {self.min_interarrival_s}")


SensingMode = Union[PollMode, InterruptMode]


class EventStream:
    """按种子生成的指数间隔事件流

    Args:
        rate_per_hour: 事件率，0 表示永不发生
        rng: numpy 随机数发生器
        min_interarrival_s: 相邻事件的最小间隔（死区）
    """

    def __init__(self, rate_per_hour: float, rng: np.random.Generator, min_interarrival_s: float = 0.0):
        if rate_per_hour < 0:
            raise ParameterError(f"事件率不能为负: {rate_per_hour}")
        self.rate_per_hour = rate_per_hour
        self.min_interarrival_s = min_interarrival_s
        self._rng = rng
        self._last = 0.0

    def next_event(self) -> float:
        """返回下一个事件时刻 (s)，事件率为 0 时返回 inf"""
        if self.rate_per_hour == 0:
            return math.inf
        mean = SECONDS_PER_HOUR / self.rate_per_hour
        self._last += self.min_interarrival_s + float(self._rng.exponential(mean))
        return self._last

    def events_until(self, horizon: float) -> List[float]:
        """生成 horizon 之前的全部事件（消耗事件流）"""
        times = []
        while True:
            t = self.next_event()
            if t >= horizon:
                return times
            times.append(t)


@dataclass(frozen=True)
class SignalModel:
    """被观测的物理量：事件发生后保持 peak 值 hold_s，其余时间为 baseline"""

    event_rate_per_hour: float = 1.0
    hold_s: float = 10.0
    baseline: float = 20.0
    peak: float = 60.0
    min_interarrival_s: float = 0.0

    def __post_init__(self):
        if self.hold_s <= 0:
            raise ParameterError(f"hold_s 必须为正: {self.hold_s}")
        if self.event_rate_per_hour < 0:
            raise ParameterError(f"事件率不能为负: {self.event_rate_per_hour}")


class SignalTrace:
    """按非递减时刻查询的信号值"""

    def __init__(self, model: SignalModel, stream: EventStream):
        self.model = model
        self._stream = stream
        self._current = -math.inf
        self._upcoming = stream.next_event()

    def value_at(self, t: float) -> float:
        while self._upcoming <= t:
            self._current = self._upcoming
            self._upcoming = self._stream.next_event()
        if self._current <= t <= self._current + self.model.hold_s:
            return self.model.peak
        return self.model.baseline


def next_wake(
    mode: SensingMode,
    now: float,
    event_stream: Optional[EventStream] = None,
) -> Tuple[float, WakeAction]:
    """下一次唤醒时刻与动作，两次唤醒之间节点处于睡眠

    Args:
        mode: 采样模式
        now: 当前（或上一次计划的）唤醒时刻
        event_stream: 中断模式的事件流

    Returns:
        (时刻, 动作)；事件率为 0 时返回 (inf, NONE)

    Examples:
        >>> next_wake(PollMode(60.0), 0.0)
        (60.0, <WakeAction.SAMPLE: 'sample'>)
    """
    if isinstance(mode, PollMode):
        return now + mode.period_s, WakeAction.SAMPLE
    if event_stream is None:
        raise ParameterError("中断模式需要事件流")
    t = event_stream.next_event()
    if math.isinf(t):
        return math.inf, WakeAction.NONE
    return t, WakeAction.INTERRUPT


@dataclass(frozen=True)
class Sample:
    time: float
    value: float


@dataclass(frozen=True)
class UplinkRequest:
    """累积策略发出的上行请求"""

    created_at: float
    sample_count: int
    payload_len: int


@dataclass(frozen=True)
class AccumulationPolicy:
    """累积非实时数据后再发送

    负载 = ceil(k·sample_bytes·compression_ratio) + overhead_bytes。

    Attributes:
        batch_size: 每次上行的样本数 k
        sample_bytes: 单个样本字节数
        overhead_bytes: LoRaWAN MAC 头 + MIC 等固定开销
        deadline_s: 最旧样本的最长等待时间，None 表示不限
        compression_ratio: 压缩比（输出/输入字节）
    """

    batch_size: int = 1
    sample_bytes: int = 2
    overhead_bytes: int = DEFAULT_OVERHEAD_BYTES
    deadline_s: Optional[float] = None
    compression_ratio: float = 1.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError(f"batch_size 必须 >= 1: {self.batch_size}")
        if self.sample_bytes < 1:
            raise ParameterError(f"sample_bytes 必须 >= 1: {self.sample_bytes}")
        if self.overhead_bytes < 0:
            raise ParameterError(f"overhead_bytes 不能为负: {self.overhead_bytes}")
        if self.deadline_s is not None and self.deadline_s <= 0:
            raise ParameterError(f"deadline_s 必须为正: {self.deadline_s}")
        if not 0 < self.compression_ratio <= 1:
            raise ParameterError(f"compression_ratio 必须在 (0, 1]: {self.compression_ratio}")

    def payload_len(self, sample_count: Optional[int] = None) -> int:
        count = self.batch_size if sample_count is None else sample_count
        return math.ceil(count * self.sample_bytes * self.compression_ratio) + self.overhead_bytes

    def validate_for(self, dr: DataRate) -> None:
        """配置期检查满批负载是否超过 DR 最大值

        Raises:
            PayloadTooLargeError: 满批负载过大
        """
        payload = self.payload_len()
        if payload > max_payload(dr):
            raise PayloadTooLargeError(payload, max_payload(dr), dr.index)


def _request(policy: AccumulationPolicy, samples: Tuple[Sample, ...], now: float) -> UplinkRequest:
    return UplinkRequest(created_at=now, sample_count=len(samples), payload_len=policy.payload_len(len(samples)))


def offer_sample(
    policy: AccumulationPolicy,
    buffer: Tuple[Sample, ...],
    sample: Sample,
) -> Tuple[Tuple[Sample, ...], Optional[UplinkRequest]]:
    """向缓冲区提交一个样本

    缓冲区达到 batch_size，或最旧样本达到 deadline 时发出上行请求并清空缓冲区。

    Args:
        policy: 累积策略
        buffer: 当前缓冲区（长度 < batch_size）
        sample: 新样本

    Returns:
        (新缓冲区, 上行请求或 None)
    """
    if len(buffer) >= policy.batch_size:
        raise ParameterError(f"缓冲区已满: {len(buffer)} >= {policy.batch_size}")
    pending = buffer + (sample,)
    if len(pending) >= policy.batch_size:
        return (), _request(policy, pending, sample.time)
    if policy.deadline_s is not None and sample.time - pending[0].time >= policy.deadline_s:
        return (), _request(policy, pending, sample.time)
    return pending, None


def flush_due(
    policy: AccumulationPolicy,
    buffer: Tuple[Sample, ...],
    now: float,
) -> Tuple[Tuple[Sample, ...], Optional[UplinkRequest]]:
    """截止时间到达时强制发送缓冲区"""
    if not buffer or policy.deadline_s is None:
        return buffer, None
    if now - buffer[0].time >= policy.deadline_s:
        return (), _request(policy, buffer, now)
    return buffer, None


@dataclass(frozen=True)
class RelevanceFilter:
    """阈值 + 迟滞的相关性过滤器"""

    threshold: float = 40.0
    hysteresis: float = 0.0

    def __post_init__(self):
        if self.hysteresis < 0:
            raise ParameterError(f"hysteresis 不能为负: {self.hysteresis}")


@dataclass(frozen=True)
class FilterState:
    armed: bool = True


def filter_sample(
    relevance: RelevanceFilter,
    state: FilterState,
    sample: Sample,
) -> Tuple[FilterState, bool]:
    """仅在向上穿越阈值时发送

    发送后过滤器解除武装，直到值回落到 threshold − hysteresis 以下。

    Returns:
        (新状态, 是否发送)
    """
    if state.armed and sample.value > relevance.threshold:
        return FilterState(armed=False), True
    if not state.armed and sample.value < relevance.threshold - relevance.hysteresis:
        return FilterState(armed=True), False
    return state, False


def batch_energy_per_sample(
    profile: PowerProfile,
    cal: RxWindowCalibration,
    dr: DataRate,
    policy: AccumulationPolicy,
    tx_power_dbm: Optional[int] = None,
    outcome: TransactionOutcome = TransactionOutcome.UNCONFIRMED,
) -> float:
    """满批上行的每样本事务能耗 (J)：(Tx + Rx 窗口) / batch_size"""
    power = profile.default_tx_power_dbm if tx_power_dbm is None else tx_power_dbm
    tx = tx_energy(profile, datarate_params(dr), power, policy.payload_len())
    rx = transaction_rx_energy(cal, dr, outcome, profile) * 1e-3
    return (tx + rx) / policy.batch_size
