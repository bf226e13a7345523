"""Energy model for LoRa_EnergyKits.

Per-state power profile, energy integration (E = V·I·t), energy per bit,
the Rx-window calibration table and the per-state energy ledger used for
Tx/Rx/sensing breakdowns.
"""

import logging
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from core.phy import (
    DataRate,
    LoRaParams,
    datarate_params,
    downlink_params,
    symbol_duration,
    time_on_air,
)
from utils.errors import CalibrationMissingError, ParameterError, PayloadTooLargeError

logger = logging.getLogger(__name__)

MCU_CURRENT_PER_MHZ = 150e-6
# Cortex-M0+ 最深睡眠模式 EM4 的电流 (A)
DEFAULT_SLEEP_MODES: Dict[str, float] = {"em4": 20e-9}
TX_POWER_MIN_DBM = 2
TX_POWER_MAX_DBM = 14

# SX1272 量级的 Tx 电流 (A)，按 10 mA + 10 mA·10^((P-14)/10) 取整
DEFAULT_TX_CURRENT_BY_POWER: Dict[int, float] = {
    2: 0.01063,
    3: 0.01079,
    4: 0.01100,
    5: 0.01126,
    6: 0.01158,
    7: 0.01200,
    8: 0.01251,
    9: 0.01316,
    10: 0.01398,
    11: 0.01501,
    12: 0.01631,
    13: 0.01794,
    14: 0.02000,
}

TABLE_TOLERANCE_MJ = 0.05


class PowerState(Enum):
    """节点功率状态

    Attributes:
        SLEEP: 深度睡眠（MCU 低功耗模式 + 传感器待机）
        SENSE: 传感器采样
        PROCESS: MCU 运行（本地处理、射频启动）
        TX: 发射
        RX: 接收窗口
    """
    SLEEP = "sleep"
    SENSE = "sense"
    PROCESS = "process"
    TX = "tx"
    RX = "rx"


class TransactionOutcome(Enum):
    """Class A 事务结果"""
    ACK_RX1 = "ack_rx1"
    ACK_RX2 = "ack_rx2"
    NO_ACK = "no_ack"
    UNCONFIRMED = "unconfirmed"


def as_state(state: Union[PowerState, str]) -> PowerState:
    if isinstance(state, PowerState):
        return state
    try:
        return PowerState(state)
    except ValueError:
        raise ParameterError(f"未知功率状态: {state}")


def as_outcome(outcome: Union[TransactionOutcome, str]) -> TransactionOutcome:
    if isinstance(outcome, TransactionOutcome):
        return outcome
    try:
        return TransactionOutcome(outcome)
    except ValueError:
        raise ParameterError(
            f"未知事务结果: {outcome}",
            suggestions=["取值: ack_rx1, ack_rx2, no_ack, unconfirmed"]
        )


@dataclass
class PowerProfile:
    """节点功率模型（校准面）

    所有电流单位为 A，电压单位为 V。mcu_active_current 为 None 时
    按 150 µA/MHz × mcu_clock_mhz 推导。

    睡眠电流：sleep_mode 为 None 时取 sleep_current（整节点值）；
    否则取 sleep_modes[sleep_mode]（MCU 低功耗模式）加传感器待机电流，
    sensor_power_cut 为 True 时传感器断电，不计待机电流。
    """

    supply_voltage: float = 3.3
    sleep_current: float = 1e-6
    mcu_clock_mhz: float = 1.0
    mcu_active_current: Optional[float] = None
    sense_current: float = 10e-3
    rx_current: float = 10.7e-3
    tx_current_by_power: Dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_TX_CURRENT_BY_POWER)
    )
    default_tx_power_dbm: int = TX_POWER_MAX_DBM
    sleep_modes: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_SLEEP_MODES))
    sleep_mode: Optional[str] = None
    sensor_standby_current: float = 0.0
    sensor_power_cut: bool = False

    def __post_init__(self):
        if self.mcu_active_current is None:
            self.mcu_active_current = MCU_CURRENT_PER_MHZ * self.mcu_clock_mhz
        self.tx_current_by_power = {
            int(k): float(v) for k, v in self.tx_current_by_power.items()
        }
        self.sleep_modes = {str(k): float(v) for k, v in self.sleep_modes.items()}
        problems = self.validate()
        if problems:
            raise ParameterError(
                f"功率模型无效: {'; '.join(problems)}",
                suggestions=["所有电流与电压必须为正", "最大功率档的 Tx 电流应不小于 Rx 电流"]
            )

    def validate(self) -> List[str]:
        """验证功率模型

        Returns:
            问题列表，空列表表示验证通过
        """
        problems = []
        if self.supply_voltage <= 0:
            problems.append("supply_voltage 必须为正")
        for name in ("sleep_current", "mcu_active_current", "sense_current", "rx_current"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} 必须为正")
        if not self.tx_current_by_power:
            problems.append("tx_current_by_power 不能为空")
        else:
            for power, current in self.tx_current_by_power.items():
                if current <= 0:
                    problems.append(f"tx_current_by_power[{power}] 必须为正")
            top = max(self.tx_current_by_power)
            if self.tx_current_by_power[top] < self.rx_current:
                problems.append(f"{top} dBm 的 Tx 电流小于 Rx 电流")
        for mode, current in self.sleep_modes.items():
            if current <= 0:
                problems.append(f"sleep_modes[{mode}] 必须为正")
        if self.sleep_mode is not None and self.sleep_mode not in self.sleep_modes:
            problems.append(f"未知睡眠模式 {self.sleep_mode}（可选: {', '.join(sorted(self.sleep_modes))}）")
        if self.sensor_standby_current < 0:
            problems.append("sensor_standby_current 不能为负")
        return problems

    @property
    def effective_sleep_current(self) -> float:
        """睡眠状态的实际电流 (A)"""
        if self.sleep_mode is None:
            base = self.sleep_current
        else:
            base = self.sleep_modes[self.sleep_mode]
        if self.sensor_power_cut:
            return base
        return base + self.sensor_standby_current

    def tx_current(self, tx_power_dbm: int) -> float:
        try:
            return self.tx_current_by_power[int(tx_power_dbm)]
        except KeyError:
            raise CalibrationMissingError(f"缺少 {tx_power_dbm} dBm 的 Tx 电流校准")

    def current(self, state: Union[PowerState, str], tx_power_dbm: Optional[int] = None) -> float:
        """返回某状态的电流 (A)

        Args:
            state: 功率状态
            tx_power_dbm: TX 状态下的发射功率，缺省为 default_tx_power_dbm

        Raises:
            CalibrationMissingError: 功率档位无校准
        """
        state = as_state(state)
        if state is PowerState.TX:
            power = self.default_tx_power_dbm if tx_power_dbm is None else tx_power_dbm
            return self.tx_current(power)
        return {
            PowerState.SLEEP: self.effective_sleep_current,
            PowerState.SENSE: self.sense_current,
            PowerState.PROCESS: self.mcu_active_current,
            PowerState.RX: self.rx_current,
        }[state]

    def to_dict(self) -> dict:
        """转换为校准文件格式的字典"""
        return {
            "supply_voltage": self.supply_voltage,
            "sleep_current_a": self.sleep_current,
            "mcu_clock_mhz": self.mcu_clock_mhz,
            "mcu_active_current_a": self.mcu_active_current,
            "sense_current_a": self.sense_current,
            "rx_current_a": self.rx_current,
            "tx_current_by_power": {str(k): v for k, v in sorted(self.tx_current_by_power.items())},
            "default_tx_power_dbm": self.default_tx_power_dbm,
            "sleep_modes_a": dict(sorted(self.sleep_modes.items())),
            "sleep_mode": self.sleep_mode,
            "sensor_standby_current_a": self.sensor_standby_current,
            "sensor_power_cut": self.sensor_power_cut,
        }

    @classmethod
    def from_dict(cls, data: dict, base: Optional["PowerProfile"] = None) -> "PowerProfile":
        """从字典创建功率模型

        Args:
            data: 校准文件或场景中的 profile 字典
            base: 未给出的键沿用该模型的值（场景覆盖校准）

        Returns:
            PowerProfile 实例
        """
        key_map = {
            "supply_voltage": "supply_voltage",
            "sleep_current_a": "sleep_current",
            "mcu_clock_mhz": "mcu_clock_mhz",
            "mcu_active_current_a": "mcu_active_current",
            "sense_current_a": "sense_current",
            "rx_current_a": "rx_current",
            "tx_current_by_power": "tx_current_by_power",
            "default_tx_power_dbm": "default_tx_power_dbm",
            "sleep_modes_a": "sleep_modes",
            "sleep_mode": "sleep_mode",
            "sensor_standby_current_a": "sensor_standby_current",
            "sensor_power_cut": "sensor_power_cut",
        }
        values = {}
        if base is not None:
            values = {f.name: getattr(base, f.name) for f in fields(cls)}
            values["tx_current_by_power"] = dict(base.tx_current_by_power)
            values["sleep_modes"] = dict(base.sleep_modes)
            # 时钟改了而电流未显式给出时重新推导
            if "mcu_clock_mhz" in data and "mcu_active_current_a" not in data:
                values["mcu_active_current"] = None
        for key, attr in key_map.items():
            if key in data:
                values[attr] = data[key]
        if base is not None and "sleep_modes_a" in data:
            # 场景只补充或覆盖个别模式
            values["sleep_modes"] = {**base.sleep_modes, **data["sleep_modes_a"]}
        return cls(**values)


def state_energy(
    profile: PowerProfile,
    state: Union[PowerState, str],
    duration: float,
    tx_power_dbm: Optional[int] = None,
) -> float:
    """计算某状态持续 duration 的能耗 E = V·I·t

    Args:
        profile: 功率模型
        state: 功率状态
        duration: 时长 (s)，必须 >= 0
        tx_power_dbm: TX 状态的发射功率

    Returns:
        能耗 (J)

    Raises:
        ParameterError: 时长为负
        CalibrationMissingError: Tx 功率档位无校准

    Examples:
        >>> state_energy(PowerProfile(), PowerState.SLEEP, 1.0)
        3.3e-06
    """
    if duration < 0:
        raise ParameterError(f"时长不能为负: {duration}")
    return profile.supply_voltage * profile.current(state, tx_power_dbm) * duration


def tx_energy(profile: PowerProfile, params: LoRaParams, tx_power_dbm: int, payload_len: int) -> float:
    """一次上行发射的能耗 (J)"""
    return state_energy(profile, PowerState.TX, time_on_air(params, payload_len), tx_power_dbm)


def energy_per_bit(profile: PowerProfile, params: LoRaParams, tx_power_dbm: int, payload_len: int) -> float:
    """每比特发射能耗 (J/bit)

    Args:
        profile: 功率模型
        params: PHY 参数
        tx_power_dbm: 发射功率
        payload_len: 负载字节数 >= 1

    Returns:
        Tx 能耗 / (8·payload_len)

    Raises:
        ParameterError: 负载为 0
        PayloadTooLargeError: 超过区域最大负载
    """
    if payload_len < 1:
        raise ParameterError(f"负载长度必须 >= 1: {payload_len}")
    return tx_energy(profile, params, tx_power_dbm, payload_len) / (8 * payload_len)


def energy_per_bit_curve(
    profile: PowerProfile,
    datarates: List[DataRate],
    payloads: List[int],
    tx_power_dbm: Optional[int] = None,
) -> List[dict]:
    """生成每比特能耗曲线的整洁数据行

    超过区域最大负载或小于 1 B 的组合被跳过。

    Returns:
        行列表，每行包含 dr, sf, payload_bytes, toa_ms, tx_energy_mj, energy_per_bit_nj
    """
    power = profile.default_tx_power_dbm if tx_power_dbm is None else tx_power_dbm
    rows = []
    for dr in datarates:
        params = datarate_params(dr)
        for payload in payloads:
            if payload < 1:
                continue
            try:
                toa = time_on_air(params, payload)
            except PayloadTooLargeError:
                continue
            energy = state_energy(profile, PowerState.TX, toa, power)
            rows.append({
                "dr": dr.index,
                "sf": params.sf,
                "tx_power_dbm": power,
                "payload_bytes": payload,
                "toa_ms": round(toa * 1e3, 3),
                "tx_energy_mj": energy * 1e3,
                "energy_per_bit_nj": energy / (8 * payload) * 1e9,
            })
    return rows


@dataclass
class EnergyLedger:
    """按状态累计的能耗账本

    不变量: total 与各状态之和相对误差 < 1e-9；条目只增不减。
    """

    entries: Dict[str, float] = field(default_factory=dict)
    total: float = 0.0

    def add(self, state: Union[PowerState, str], joules: float) -> None:
        """原地累加（仅在独占访问时使用，例如仿真循环内部）

        Raises:
            ParameterError: 能量为负
        """
        if joules < 0:
            raise ParameterError(f"能量不能为负: {joules}")
        key = as_state(state).value
        self.entries[key] = self.entries.get(key, 0.0) + joules
        self.total += joules

    def get(self, state: Union[PowerState, str]) -> float:
        return self.entries.get(as_state(state).value, 0.0)

    def copy(self) -> "EnergyLedger":
        return EnergyLedger(entries=dict(self.entries), total=self.total)

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        """合并两个账本（多种子汇总），返回新账本"""
        merged = self.copy()
        for state, joules in other.entries.items():
            merged.add(state, joules)
        return merged

    def conservation_error(self) -> float:
        """total 与各状态之和的相对误差"""
        summed = sum(self.entries.values())
        if self.total == 0:
            return abs(summed)
        return abs(self.total - summed) / abs(self.total)

    def shares(self) -> Dict[str, float]:
        """各状态能耗占比（Tx/Rx/感知/睡眠分解）"""
        if self.total <= 0:
            return {state.value: 0.0 for state in PowerState}
        return {state.value: self.entries.get(state.value, 0.0) / self.total for state in PowerState}

    def to_dict(self) -> dict:
        return {
            "entries_j": {k: self.entries[k] for k in sorted(self.entries)},
            "total_j": self.total,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnergyLedger":
        return cls(entries=dict(data.get("entries_j", {})), total=data.get("total_j", 0.0))


def ledger_add(ledger: EnergyLedger, state: Union[PowerState, str], joules: float) -> EnergyLedger:
    """返回累加后的新账本，原账本不变

    Raises:
        ParameterError: 能量为负
    """
    updated = ledger.copy()
    updated.add(state, joules)
    return updated


@dataclass
class Table1Row:
    """Rx 窗口能耗表的一行（单位 mJ）"""

    dr: int
    rx1_ack: Optional[float]
    rx1_noack: float
    rx2_ack: float
    rx2_noack: float
    ack_worst: float
    ack_best: Optional[float]
    noack: float
    printed_ack_worst: Optional[float] = None
    printed_ack_best: Optional[float] = None
    printed_noack: Optional[float] = None
    mismatches: List[str] = field(default_factory=list)


@dataclass
class RxWindowCalibration:
    """Rx 窗口校准（按上行 DR 的能耗，单位 mJ）

    rx2_ack / rx2_noack 与 DR 无关（单一 RX2 配置）。
    symbol_timeout、window_overhead_s、ack_frame_bytes、rx2_dr 描述
    由功率模型推导窗口时长所用的模型参数。
    """

    rx1_ack: Dict[int, Optional[float]] = field(default_factory=dict)
    rx1_noack: Dict[int, float] = field(default_factory=dict)
    rx2_ack: float = 5.6
    rx2_noack: float = 1.3
    printed_totals: Dict[int, Dict[str, Optional[float]]] = field(default_factory=dict)
    symbol_timeout: int = 5
    window_overhead_s: float = 0.011
    ack_frame_bytes: int = 12
    rx2_dr: int = 3

    def __post_init__(self):
        self.rx1_ack = {int(k): v for k, v in self.rx1_ack.items()}
        self.rx1_noack = {int(k): v for k, v in self.rx1_noack.items()}
        self.printed_totals = {int(k): v for k, v in self.printed_totals.items()}
        problems = self.validate()
        if problems:
            raise ParameterError(f"Rx 窗口校准无效: {'; '.join(problems)}")

    def validate(self) -> List[str]:
        problems = []
        if self.rx2_ack < self.rx2_noack:
            problems.append("rx2_ack 小于 rx2_noack")
        for dr, ack in self.rx1_ack.items():
            noack = self.rx1_noack.get(dr)
            if ack is not None and noack is not None and ack < noack:
                problems.append(f"DR{dr} rx1_ack 小于 rx1_noack")
        if self.symbol_timeout < 1:
            problems.append("symbol_timeout 必须 >= 1")
        if self.window_overhead_s < 0:
            problems.append("window_overhead_s 不能为负")
        DataRate(self.rx2_dr)
        return problems

    def datarates(self) -> List[int]:
        return sorted(self.rx1_noack)

    def rx1_noack_mj(self, dr: DataRate) -> float:
        try:
            return self.rx1_noack[dr.index]
        except KeyError:
            raise CalibrationMissingError(f"缺少 {dr} 的 rx1_noack 校准")

    def to_dict(self) -> dict:
        rows = []
        for dr in self.datarates():
            printed = self.printed_totals.get(dr, {})
            rows.append({
                "dr": dr,
                "rx1_ack_mj": self.rx1_ack.get(dr),
                "rx1_noack_mj": self.rx1_noack[dr],
                "total_ack_worst_mj": printed.get("ack_worst"),
                "total_ack_best_mj": printed.get("ack_best"),
                "total_noack_mj": printed.get("noack"),
            })
        return {
            "rx2_ack_mj": self.rx2_ack,
            "rx2_noack_mj": self.rx2_noack,
            "rows": rows,
        }

    @classmethod
    def from_dict(cls, table: dict, rx_model: Optional[dict] = None) -> "RxWindowCalibration":
        """从校准文件的 table 与 rx_model 段创建

        Args:
            table: 包含 rx2_ack_mj, rx2_noack_mj, rows 的字典
            rx_model: 包含 symbol_timeout 等模型参数的字典

        Returns:
            RxWindowCalibration 实例
        """
        rx1_ack, rx1_noack, printed = {}, {}, {}
        for row in table.get("rows", []):
            dr = int(row["dr"])
            rx1_ack[dr] = row.get("rx1_ack_mj")
            rx1_noack[dr] = row["rx1_noack_mj"]
            printed[dr] = {
                "ack_worst": row.get("total_ack_worst_mj"),
                "ack_best": row.get("total_ack_best_mj"),
                "noack": row.get("total_noack_mj"),
            }
        model = rx_model or {}
        valid = {f.name for f in fields(cls)}
        extra = {k: v for k, v in model.items() if k in valid}
        return cls(
            rx1_ack=rx1_ack,
            rx1_noack=rx1_noack,
            rx2_ack=table.get("rx2_ack_mj", 5.6),
            rx2_noack=table.get("rx2_noack_mj", 1.3),
            printed_totals=printed,
            **extra,
        )


def rx_window_duration(cal: RxWindowCalibration, window_dr: DataRate, ack: bool) -> float:
    """由模型参数推导 Rx 窗口开启时长 (s)

    无 ACK：symbol_timeout 个符号超时 + 固定开销 window_overhead_s；
    有 ACK：ACK 帧（0 字节 FRMPayload）的下行空口时间，不加开销。
    """
    params = datarate_params(window_dr)
    if ack:
        return time_on_air(downlink_params(params), cal.ack_frame_bytes, enforce_regional_max=False)
    return cal.symbol_timeout * symbol_duration(params.sf, params.bw) + cal.window_overhead_s


def profile_rx_energy_mj(profile: PowerProfile, cal: RxWindowCalibration, window_dr: DataRate, ack: bool) -> float:
    """由功率模型推导的 Rx 窗口能耗 (mJ)"""
    duration = rx_window_duration(cal, window_dr, ack)
    return state_energy(profile, PowerState.RX, duration) * 1e3


def rx_window_breakdown(
    cal: RxWindowCalibration,
    tx_dr: DataRate,
    outcome: Union[TransactionOutcome, str],
    profile: Optional[PowerProfile] = None,
) -> Tuple[float, Optional[float], str]:
    """按窗口拆分事务的 Rx 能耗

    Args:
        cal: Rx 窗口校准
        tx_dr: 上行 DR（RX1 与上行同 DR）
        outcome: 事务结果
        profile: 缺少 rx1_ack 时用于推导的功率模型

    Returns:
        (rx1_mj, rx2_mj 或 None, 来源 "table" | "profile-derived")

    Raises:
        CalibrationMissingError: rx1_ack 缺失且未提供 profile
    """
    outcome = as_outcome(outcome)
    source = rx_energy_source(cal, tx_dr, outcome)
    if outcome is TransactionOutcome.ACK_RX1:
        if source == "table":
            return cal.rx1_ack[tx_dr.index], None, source
        if profile is None:
            raise CalibrationMissingError(
                f"{tx_dr} 无 rx1_ack 校准且未提供功率模型回退",
                suggestions=["在场景中提供 profile，或在校准表中补充 rx1_ack_mj"]
            )
        derived = profile_rx_energy_mj(profile, cal, tx_dr, ack=True)
        logger.debug(f"{tx_dr} rx1_ack 使用 profile-derived 值 {derived:.3f} mJ")
        return derived, None, source
    rx1 = cal.rx1_noack_mj(tx_dr)
    if outcome is TransactionOutcome.ACK_RX2:
        return rx1, cal.rx2_ack, source
    return rx1, cal.rx2_noack, source


def transaction_rx_energy(
    cal: RxWindowCalibration,
    tx_dr: DataRate,
    outcome: Union[TransactionOutcome, str],
    profile: Optional[PowerProfile] = None,
) -> float:
    """一次 Class A 事务的 Rx 窗口总能耗 (mJ)

    ack_rx1 → rx1_ack(dr)；ack_rx2 → rx1_noack(dr) + rx2_ack；
    no_ack / unconfirmed → rx1_noack(dr) + rx2_noack。

    Examples:
        DR0 no_ack → 6.4 + 1.3 = 7.7 mJ
    """
    rx1, rx2, _ = rx_window_breakdown(cal, tx_dr, outcome, profile)
    return rx1 + (rx2 or 0.0)


def rx_energy_source(
    cal: RxWindowCalibration,
    tx_dr: DataRate,
    outcome: Union[TransactionOutcome, str],
) -> str:
    """报告中标注 Rx 能耗来源"""
    outcome = as_outcome(outcome)
    if outcome is TransactionOutcome.ACK_RX1 and cal.rx1_ack.get(tx_dr.index) is None:
        return "profile-derived"
    return "table"


def _mismatch(computed: Optional[float], printed: Optional[float]) -> bool:
    if printed is None or computed is None:
        return (printed is None) != (computed is None)
    return abs(computed - printed) > TABLE_TOLERANCE_MJ + 1e-9


def table1_rows(cal: RxWindowCalibration) -> List[Table1Row]:
    """由分量重建 Rx 窗口能耗表，并与文件中打印的合计比对

    Returns:
        每个 DR 一行，mismatches 列出与打印值不符的列
    """
    rows = []
    for dr in cal.datarates():
        rate = DataRate(dr)
        rx1_ack = cal.rx1_ack.get(dr)
        ack_worst = transaction_rx_energy(cal, rate, TransactionOutcome.ACK_RX2)
        noack = transaction_rx_energy(cal, rate, TransactionOutcome.NO_ACK)
        ack_best = rx1_ack
        printed = cal.printed_totals.get(dr, {})
        row = Table1Row(
            dr=dr,
            rx1_ack=rx1_ack,
            rx1_noack=cal.rx1_noack[dr],
            rx2_ack=cal.rx2_ack,
            rx2_noack=cal.rx2_noack,
            ack_worst=ack_worst,
            ack_best=ack_best,
            noack=noack,
            printed_ack_worst=printed.get("ack_worst"),
            printed_ack_best=printed.get("ack_best"),
            printed_noack=printed.get("noack"),
        )
        if printed:
            if _mismatch(ack_worst, row.printed_ack_worst):
                row.mismatches.append("ack_worst")
            if _mismatch(ack_best, row.printed_ack_best):
                row.mismatches.append("ack_best")
            if _mismatch(noack, row.printed_noack):
                row.mismatches.append("noack")
        rows.append(row)
    return rows


def tx_rx_dominance(
    profile: PowerProfile,
    cal: RxWindowCalibration,
    payload_len: int = 12,
    tx_power_dbm: Optional[int] = None,
) -> float:
    """DR0 上行 Tx 能耗与同事务 NO-ACK Rx 能耗之比"""
    dr0 = DataRate(0)
    power = max(profile.tx_current_by_power) if tx_power_dbm is None else tx_power_dbm
    tx_mj = tx_energy(profile, datarate_params(dr0), power, payload_len) * 1e3
    return tx_mj / transaction_rx_energy(cal, dr0, TransactionOutcome.NO_ACK)


@dataclass
class CalibrationCheck:
    """单项校准检查结果"""

    name: str
    ok: bool
    detail: str


def check_calibration(
    profile: PowerProfile,
    cal: RxWindowCalibration,
    tolerance: float = 0.15,
    dominance_range: Tuple[float, float] = (5.0, 15.0),
) -> List[CalibrationCheck]:
    """校验校准文件内部算术与功率模型一致性

    1. 各行合计与分量一致（0.1 mJ）
    2. profile-derived 的无 ACK 窗口能耗与表值相差在 tolerance 内
    3. DR0 Tx/Rx 能耗比位于 dominance_range

    Returns:
        检查结果列表
    """
    checks = []
    for row in table1_rows(cal):
        checks.append(CalibrationCheck(
            name=f"table DR{row.dr}",
            ok=not row.mismatches,
            detail="ok" if not row.mismatches else f"合计不符: {', '.join(row.mismatches)}",
        ))
        derived = profile_rx_energy_mj(profile, cal, DataRate(row.dr), ack=False)
        error = derived / row.rx1_noack - 1.0
        checks.append(CalibrationCheck(
            name=f"rx1 no-ack DR{row.dr}",
            ok=abs(error) <= tolerance,
            detail=f"derived {derived:.3f} mJ vs table {row.rx1_noack:.1f} mJ ({error:+.1%})",
        ))
    rx2_dr = DataRate(cal.rx2_dr)
    for ack, table_value, label in ((False, cal.rx2_noack, "no-ack"), (True, cal.rx2_ack, "ack")):
        derived = profile_rx_energy_mj(profile, cal, rx2_dr, ack=ack)
        error = derived / table_value - 1.0
        checks.append(CalibrationCheck(
            name=f"rx2 {label} {rx2_dr}",
            ok=abs(error) <= tolerance,
            detail=f"derived {derived:.3f} mJ vs table {table_value:.1f} mJ ({error:+.1%})",
        ))
    ratio = tx_rx_dominance(profile, cal)
    low, high = dominance_range
    checks.append(CalibrationCheck(
        name="tx/rx dominance DR0",
        ok=low <= ratio <= high,
        detail=f"ratio {ratio:.2f} (expected {low:g}..{high:g})",
    ))
    return checks
