"""LoRaWAN Class A transaction planner for LoRa_EnergyKits.

Turns an uplink request into a timed state sequence: radio start-up, Tx,
the RX1/RX2 receive windows and the ACK outcome; tracks the EU868 duty
cycle and decides retransmissions.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from core.energy_model import (
    PowerProfile,
    PowerState,
    RxWindowCalibration,
    TransactionOutcome,
    as_outcome,
    rx_window_breakdown,
    rx_window_duration,
    state_energy,
)
from core.phy import DataRate, datarate_params, max_payload, time_on_air
from utils.errors import ParameterError, PayloadTooLargeError

logger = logging.getLogger(__name__)

RECEIVE_DELAY1_S = 1.0
RX2_OFFSET_S = 1.0
DEFAULT_DUTY_CYCLE_LIMIT = 0.01
DEFAULT_DUTY_CYCLE_WINDOW_S = 3600.0
DEFAULT_MAX_RETRIES = 3
DEFAULT_RETRY_BACKOFF_S = 5.0
DEFAULT_BAND = "g1"

DUTY_CYCLE_POLICIES = ("off_time", "sliding_window")


@dataclass
class AckPlan:
    """ACK 结果指令（场景输入，不模拟信道）

    Attributes:
        mode: "fixed" 固定结果 / "probabilistic" 按种子随机
        outcome: fixed 模式下的结果 ack_rx1 | ack_rx2 | no_ack
        p_ack_rx1: probabilistic 模式下 RX1 收到 ACK 的概率
        p_ack_rx2: probabilistic 模式下 RX2 收到 ACK 的概率
    """

    mode: str = "fixed"
    outcome: str = "ack_rx2"
    p_ack_rx1: float = 0.0
    p_ack_rx2: float = 0.0

    def validate(self) -> List[str]:
        problems = []
        if self.mode not in ("fixed", "probabilistic"):
            problems.append(f"未知 ack_plan.mode: {self.mode}")
        if self.mode == "fixed" and self.outcome not in ("ack_rx1", "ack_rx2", "no_ack"):
            problems.append(f"ack_plan.outcome 无效: {self.outcome}")
        if self.mode == "probabilistic":
            if min(self.p_ack_rx1, self.p_ack_rx2) < 0 or self.p_ack_rx1 + self.p_ack_rx2 > 1:
                problems.append("ack_plan 概率必须非负且和不超过 1")
        return problems

    @property
    def stochastic(self) -> bool:
        return self.mode == "probabilistic"

    def resolve(self, rng: Optional[np.random.Generator] = None) -> TransactionOutcome:
        """确定本次尝试的 ACK 结果

        Args:
            rng: probabilistic 模式所需的随机数发生器

        Returns:
            ACK_RX1 / ACK_RX2 / NO_ACK
        """
        if self.mode == "fixed":
            return TransactionOutcome(self.outcome)
        if rng is None:
            raise ParameterError("probabilistic ack_plan 需要随机数发生器（场景 seed）")
        draw = float(rng.random())
        if draw < self.p_ack_rx1:
            return TransactionOutcome.ACK_RX1
        if draw < self.p_ack_rx1 + self.p_ack_rx2:
            return TransactionOutcome.ACK_RX2
        return TransactionOutcome.NO_ACK

    def to_dict(self) -> dict:
        if self.mode == "fixed":
            return {"mode": self.mode, "outcome": self.outcome}
        return {"mode": self.mode, "p_ack_rx1": self.p_ack_rx1, "p_ack_rx2": self.p_ack_rx2}

    @classmethod
    def from_dict(cls, data: dict) -> "AckPlan":
        return cls(
            mode=data.get("mode", "fixed"),
            outcome=data.get("outcome", "ack_rx2"),
            p_ack_rx1=float(data.get("p_ack_rx1", 0.0)),
            p_ack_rx2=float(data.get("p_ack_rx2", 0.0)),
        )


@dataclass
class Segment:
    """时间轴上的一段状态

    energy 为 None 表示由调用方按睡眠电流计算（窗口之间的等待）。
    """

    state: PowerState
    start: float
    duration: float
    energy: Optional[float]
    detail: str = ""


@dataclass
class ClassATransaction:
    """一次上行的 Class A 事务

    不变量:
        rx1_open = uplink_start + uplink_duration + RECEIVE_DELAY1
        rx2_open = rx1_open + 1 s，且仅在 outcome = ack_rx1 时缺省
    """

    uplink_start: float
    uplink_duration: float
    confirmed: bool
    rx1_open: float
    rx2_open: Optional[float]
    outcome: TransactionOutcome
    retries_used: int = 0
    dr: int = 0
    tx_power_dbm: int = 14
    payload_len: int = 0
    received: bool = True
    tx_energy_j: float = 0.0
    rx1_duration: float = 0.0
    rx1_energy_j: float = 0.0
    rx2_duration: Optional[float] = None
    rx2_energy_j: Optional[float] = None
    rx_source: str = "table"
    startup_duration: float = 0.0
    startup_energy_j: float = 0.0

    @property
    def start_time(self) -> float:
        return self.uplink_start - self.startup_duration

    @property
    def end_time(self) -> float:
        if self.rx2_open is None:
            return self.rx1_open + self.rx1_duration
        return self.rx2_open + self.rx2_duration

    @property
    def rx_energy_j(self) -> float:
        return self.rx1_energy_j + (self.rx2_energy_j or 0.0)

    @property
    def total_energy_j(self) -> float:
        """启动 + Tx + Rx 窗口能耗（不含窗口间睡眠）"""
        return self.startup_energy_j + self.tx_energy_j + self.rx_energy_j

    @property
    def delivered(self) -> bool:
        if self.confirmed:
            return self.outcome in (TransactionOutcome.ACK_RX1, TransactionOutcome.ACK_RX2)
        return self.received

    @property
    def downlink_received(self) -> bool:
        return self.outcome in (TransactionOutcome.ACK_RX1, TransactionOutcome.ACK_RX2)

    def segments(self) -> List[Segment]:
        """按时间顺序展开为状态段

        Returns:
            启动、Tx、等待、RX1、等待、RX2 段（不存在的段省略）
        """
        segments = []
        label = f"DR{self.dr} {self.tx_power_dbm}dBm {self.payload_len}B attempt={self.retries_used + 1}"
        if self.startup_duration > 0:
            segments.append(Segment(PowerState.PROCESS, self.start_time, self.startup_duration,
                                    self.startup_energy_j, f"radio startup {label}"))
        segments.append(Segment(PowerState.TX, self.uplink_start, self.uplink_duration,
                                self.tx_energy_j, f"uplink {label}"))
        tx_end = self.uplink_start + self.uplink_duration
        segments.append(Segment(PowerState.SLEEP, tx_end, self.rx1_open - tx_end, None, "wait rx1"))
        rx1_label = "ack" if self.outcome is TransactionOutcome.ACK_RX1 else "no_ack"
        segments.append(Segment(PowerState.RX, self.rx1_open, self.rx1_duration,
                                self.rx1_energy_j, f"rx1 {rx1_label} ({self.rx_source})"))
        if self.rx2_open is not None:
            rx1_end = self.rx1_open + self.rx1_duration
            segments.append(Segment(PowerState.SLEEP, rx1_end, max(self.rx2_open - rx1_end, 0.0),
                                    None, "wait rx2"))
            rx2_label = "ack" if self.outcome is TransactionOutcome.ACK_RX2 else "no_ack"
            segments.append(Segment(PowerState.RX, self.rx2_open, self.rx2_duration,
                                    self.rx2_energy_j, f"rx2 {rx2_label}"))
        return segments

    def to_dict(self) -> dict:
        return {
            "uplink_start_s": self.uplink_start,
            "uplink_duration_s": self.uplink_duration,
            "confirmed": self.confirmed,
            "rx1_open_s": self.rx1_open,
            "rx2_open_s": self.rx2_open,
            "outcome": self.outcome.value,
            "retries_used": self.retries_used,
            "dr": self.dr,
            "tx_power_dbm": self.tx_power_dbm,
            "payload_len": self.payload_len,
            "received": self.received,
            "tx_energy_j": self.tx_energy_j,
            "rx_energy_j": self.rx_energy_j,
            "rx_source": self.rx_source,
            "total_energy_j": self.total_energy_j,
        }


@dataclass
class DutyCycleState:
    """按子频段的占空比状态

    off_time 策略：每次发射后子频段关闭 toa·(1/limit − 1)。
    sliding_window 策略：任意 window_s 窗口内空口时间不超过 limit·window_s。
    """

    limit: float = DEFAULT_DUTY_CYCLE_LIMIT
    policy: str = "off_time"
    window_s: float = DEFAULT_DUTY_CYCLE_WINDOW_S
    band_ready_at: Dict[str, float] = field(default_factory=dict)
    history: Dict[str, List[Tuple[float, float]]] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.limit <= 1:
            raise ParameterError(f"占空比限制必须在 (0, 1]: {self.limit}")
        if self.policy not in DUTY_CYCLE_POLICIES:
            raise ParameterError(f"未知占空比策略: {self.policy}")
        if self.window_s <= 0:
            raise ParameterError(f"占空比窗口必须为正: {self.window_s}")


def next_permitted_time(state: DutyCycleState, now: float, toa: float, band: str = DEFAULT_BAND) -> float:
    """下一个允许发射的时刻

    Args:
        state: 占空比状态
        now: 当前时刻 (s)
        toa: 待发帧的空口时间 (s)，必须 > 0
        band: 子频段

    Returns:
        >= now 的时刻，此时发射不会使空口占比超过限制

    Raises:
        ParameterError: toa 非正，或单帧即超过滑动窗口配额
    """
    if toa <= 0:
        raise ParameterError(f"空口时间必须为正: {toa}")
    if state.limit >= 1.0:
        return now
    if state.policy == "off_time":
        return max(now, state.band_ready_at.get(band, now))

    budget = state.limit * state.window_s
    if toa > budget:
        raise ParameterError(
            f"单帧空口时间 {toa:.3f} s 超过窗口配额 {budget:.3f} s",
            suggestions=["提高 DR 或减小负载", "增大 duty_cycle_window_s"]
        )
    entries = state.history.get(band, [])
    candidates = [now] + sorted(s + state.window_s - toa for s, _ in entries if s + state.window_s - toa > now)
    for t in candidates:
        horizon = t + toa - state.window_s
        used = sum(d for s, d in entries if s > horizon)
        if used + toa <= budget + 1e-12:
            return t
    return candidates[-1]


def record_transmission(state: DutyCycleState, start: float, toa: float, band: str = DEFAULT_BAND) -> None:
    """记录一次发射（仅在单线程仿真循环内修改状态）"""
    state.band_ready_at[band] = start + toa / state.limit
    entries = state.history.setdefault(band, [])
    entries.append((start, toa))
    horizon = start - state.window_s
    while entries and entries[0][0] + entries[0][1] < horizon:
        entries.pop(0)


def on_air_fraction(transmissions: List[Tuple[float, float]], start: float, end: float) -> float:
    """[start, end) 内的空口时间占比

    Args:
        transmissions: (开始时刻, 空口时间) 列表
    """
    if end <= start:
        raise ParameterError("统计区间必须为正")
    busy = 0.0
    for tx_start, toa in transmissions:
        overlap = min(end, tx_start + toa) - max(start, tx_start)
        if overlap > 0:
            busy += overlap
    return busy / (end - start)


def plan_uplink(
    now: float,
    dr: DataRate,
    tx_power_dbm: int,
    payload_len: int,
    confirmed: bool,
    ack_plan: Union[AckPlan, TransactionOutcome, str],
    *,
    profile: PowerProfile,
    cal: RxWindowCalibration,
    duty_cycle: Optional[DutyCycleState] = None,
    rng: Optional[np.random.Generator] = None,
    retries_used: int = 0,
    receive_delay1: float = RECEIVE_DELAY1_S,
    rx2_offset: float = RX2_OFFSET_S,
    startup_s: float = 0.0,
    coding_rate: int = 1,
    band: str = DEFAULT_BAND,
) -> ClassATransaction:
    """规划一次上行事务

    占空比不允许在 now 发射时，事务顺延到下一个允许时刻（不修改占空比状态，
    由调用方在执行后调用 record_transmission）。

    Args:
        now: 请求时刻 (s)
        dr: 数据速率
        tx_power_dbm: 发射功率
        payload_len: PHY 负载字节数
        confirmed: 是否确认帧
        ack_plan: ACK 指令或直接给出的结果
        profile: 功率模型
        cal: Rx 窗口校准
        duty_cycle: 占空比状态
        rng: probabilistic ACK 所需随机数发生器
        retries_used: 已用重传次数
        startup_s: 射频启动时长（按 MCU 运行电流计）
        coding_rate: 编码率偏移 1..4

    Returns:
        ClassATransaction

    Raises:
        PayloadTooLargeError: 负载超过 DR 最大值
        CalibrationMissingError: 功率档位或 rx1_ack 无校准
    """
    if payload_len > max_payload(dr):
        raise PayloadTooLargeError(payload_len, max_payload(dr), dr.index)
    params = datarate_params(dr, coding_rate)
    toa = time_on_air(params, payload_len)
    tx_energy = state_energy(profile, PowerState.TX, toa, tx_power_dbm)

    start = now
    if duty_cycle is not None:
        start = next_permitted_time(duty_cycle, now, toa, band)
    uplink_start = start + startup_s
    startup_energy = state_energy(profile, PowerState.PROCESS, startup_s) if startup_s > 0 else 0.0

    if isinstance(ack_plan, AckPlan):
        directive = ack_plan.resolve(rng)
    else:
        directive = as_outcome(ack_plan)
    if confirmed:
        outcome = directive
        received = outcome is not TransactionOutcome.NO_ACK
    else:
        outcome = TransactionOutcome.UNCONFIRMED
        received = directive is not TransactionOutcome.NO_ACK

    rx1_mj, rx2_mj, source = rx_window_breakdown(cal, dr, outcome, profile)
    rx1_open = uplink_start + toa + receive_delay1
    rx1_duration = rx_window_duration(cal, dr, ack=outcome is TransactionOutcome.ACK_RX1)
    rx2_open = None
    rx2_duration = None
    if rx2_mj is not None:
        rx2_open = rx1_open + rx2_offset
        rx2_duration = rx_window_duration(cal, DataRate(cal.rx2_dr), ack=outcome is TransactionOutcome.ACK_RX2)

    transaction = ClassATransaction(
        uplink_start=uplink_start,
        uplink_duration=toa,
        confirmed=confirmed,
        rx1_open=rx1_open,
        rx2_open=rx2_open,
        outcome=outcome,
        retries_used=retries_used,
        dr=dr.index,
        tx_power_dbm=tx_power_dbm,
        payload_len=payload_len,
        received=received,
        tx_energy_j=tx_energy,
        rx1_duration=rx1_duration,
        rx1_energy_j=rx1_mj * 1e-3,
        rx2_duration=rx2_duration,
        rx2_energy_j=None if rx2_mj is None else rx2_mj * 1e-3,
        rx_source=source,
        startup_duration=startup_s,
        startup_energy_j=startup_energy,
    )
    logger.debug(
        f"事务 {dr} {payload_len}B {outcome.value}: Tx {tx_energy * 1e3:.3f} mJ, "
        f"Rx {transaction.rx_energy_j * 1e3:.3f} mJ"
    )
    return transaction


@dataclass
class RetransmitDecision:
    """重传决策

    Attributes:
        retry: 是否安排下一次尝试
        next_attempt_at: 下一次尝试时刻
        failed: 重传耗尽，投递失败
        attempt: 下一次尝试的序号（从 1 开始）
    """

    retry: bool = False
    next_attempt_at: Optional[float] = None
    failed: bool = False
    attempt: int = 0


def retransmit_policy(
    transaction: ClassATransaction,
    max_retries: int = DEFAULT_MAX_RETRIES,
    backoff: float = DEFAULT_RETRY_BACKOFF_S,
) -> RetransmitDecision:
    """确认帧无 ACK 时的重传策略（同 DR 重传）

    Args:
        transaction: 刚结束的事务
        max_retries: 最大重传次数
        backoff: 事务结束后的退避时长 (s)

    Returns:
        RetransmitDecision
    """
    if not transaction.confirmed or transaction.outcome is not TransactionOutcome.NO_ACK:
        return RetransmitDecision()
    if transaction.retries_used < max_retries:
        return RetransmitDecision(
            retry=True,
            next_attempt_at=transaction.end_time + backoff,
            attempt=transaction.retries_used + 2,
        )
    logger.info(f"重传耗尽 ({max_retries} 次)，投递失败")
    return RetransmitDecision(failed=True)
