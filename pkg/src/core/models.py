"""Core data models for LoRa_EnergyKits.

This module defines dataclass-based models for settings, calibration and
scenario documents, plus the validation result containers shared by the
config loaders and the CLI.
"""

from dataclasses import dataclass, field, fields
from dataclasses import field as dataclass_field
from enum import Enum
from typing import List, Optional, Union

from core.adr import (
    DEFAULT_ADR_ACK_LIMIT,
    DEFAULT_DEVICE_MARGIN_DB,
    DEFAULT_HISTORY_SIZE,
    SnrModel,
)
from core.energy_model import PowerProfile, RxWindowCalibration
from core.mac_class_a import (
    DEFAULT_DUTY_CYCLE_LIMIT,
    DEFAULT_DUTY_CYCLE_WINDOW_S,
    DEFAULT_MAX_RETRIES,
    DEFAULT_RETRY_BACKOFF_S,
    RECEIVE_DELAY1_S,
    RX2_OFFSET_S,
    AckPlan,
)
from core.strategy import (
    DEFAULT_OVERHEAD_BYTES,
    AccumulationPolicy,
    InterruptMode,
    PollMode,
    RelevanceFilter,
    SignalModel,
)

SCENARIO_SCHEMA_VERSION = "1.0"


class ValidationSeverity(Enum):
    """验证严重级别

    用于分类验证错误的严重程度。

    Attributes:
        ERROR: 阻止执行
        WARNING: 警告，可执行
        INFO: 信息，可执行
    """
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class ValidationError:
    """验证错误

    表示场景验证过程中发现的单个问题。

    Attributes:
        field: 出错的键路径（如 strategy.accumulation.batch_size）
        message: 错误消息
        severity: 严重级别
        suggestions: 修复建议列表
    """
    field: str = ""
    message: str = ""
    severity: ValidationSeverity = ValidationSeverity.ERROR
    suggestions: list = dataclass_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "field": self.field,
            "message": self.message,
            "severity": self.severity.value,
            "suggestions": self.suggestions,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationError":
        valid_fields = {f.name for f in fields(cls)}
        filtered_data = {k: v for k, v in data.items() if k in valid_fields}

        # 处理 severity 字符串到枚举的转换
        if "severity" in filtered_data and isinstance(filtered_data["severity"], str):
            filtered_data["severity"] = ValidationSeverity(filtered_data["severity"])

        return cls(**filtered_data)


@dataclass
class ValidationResult:
    """验证结果

    Attributes:
        is_valid: 是否通过验证
        errors: 错误与警告列表
        warning_count: 警告数量
        error_count: 错误数量
    """
    is_valid: bool = True
    errors: List[ValidationError] = field(default_factory=list)
    warning_count: int = 0
    error_count: int = 0

    def to_dict(self) -> dict:
        return {
            "is_valid": self.is_valid,
            "errors": [error.to_dict() for error in self.errors],
            "warning_count": self.warning_count,
            "error_count": self.error_count
        }

    def add_error(self, error: ValidationError) -> None:
        """添加一个验证错误

        Args:
            error: 验证错误对象
        """
        self.errors.append(error)
        if error.severity == ValidationSeverity.ERROR:
            self.error_count += 1
        elif error.severity == ValidationSeverity.WARNING:
            self.warning_count += 1
        self.is_valid = (self.error_count == 0)

    def get_errors_by_severity(self, severity: ValidationSeverity) -> List[ValidationError]:
        """按严重级别获取错误列表"""
        return [e for e in self.errors if e.severity == severity]


@dataclass
class AppSettings:
    """用户设置（TOML）

    所有字段提供默认值，空字符串表示未设置。
    """

    calibration_path: str = ""
    log_level: str = "WARNING"
    output_dir: str = "reports"
    workers: int = 1

    def to_dict(self) -> dict:
        """转换为字典（排除空字符串，便于 TOML 序列化）"""
        return {k: v for k, v in self.__dict__.items() if v is not None and v != ""}

    @classmethod
    def from_dict(cls, data: dict) -> "AppSettings":
        """从字典创建设置对象，过滤未知字段"""
        valid_fields = {f.name for f in fields(cls)}
        filtered_data = {k: v for k, v in data.items() if k in valid_fields}
        return cls(**filtered_data)


@dataclass
class Calibration:
    """校准文件：功率模型 + Rx 窗口能耗表 + 时序参数"""

    profile: PowerProfile = field(default_factory=PowerProfile)
    rx: RxWindowCalibration = field(default_factory=RxWindowCalibration)
    receive_delay1_s: float = RECEIVE_DELAY1_S
    rx2_offset_s: float = RX2_OFFSET_S
    coding_rate: int = 1
    source: str = ""

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "table": self.rx.to_dict(),
            "rx_model": {
                "rx_symbol_timeout": self.rx.symbol_timeout,
                "rx_window_overhead_s": self.rx.window_overhead_s,
                "ack_frame_bytes": self.rx.ack_frame_bytes,
                "rx2_dr": self.rx.rx2_dr,
                "receive_delay1_s": self.receive_delay1_s,
                "rx2_offset_s": self.rx2_offset_s,
                "coding_rate": self.coding_rate,
            },
        }

    @classmethod
    def from_dict(cls, data: dict, source: str = "") -> "Calibration":
        """从校准文件字典创建

        Args:
            data: 包含 profile、table、rx_model 段的字典
            source: 文件路径（用于报告）
        """
        model = data.get("rx_model", {})
        rx_model = {
            "symbol_timeout": model.get("rx_symbol_timeout", 5),
            "window_overhead_s": model.get("rx_window_overhead_s", 0.011),
            "ack_frame_bytes": model.get("ack_frame_bytes", 12),
            "rx2_dr": model.get("rx2_dr", 3),
        }
        return cls(
            profile=PowerProfile.from_dict(data.get("profile", {})),
            rx=RxWindowCalibration.from_dict(data.get("table", {}), rx_model),
            receive_delay1_s=float(model.get("receive_delay1_s", RECEIVE_DELAY1_S)),
            rx2_offset_s=float(model.get("rx2_offset_s", RX2_OFFSET_S)),
            coding_rate=int(model.get("coding_rate", 1)),
            source=source,
        )


@dataclass
class BatteryConfig:
    """理想线性电池"""

    capacity_mah: float = 1000.0
    voltage: float = 3.3
    self_discharge_a: float = 0.0

    def to_dict(self) -> dict:
        return {
            "capacity_mah": self.capacity_mah,
            "voltage": self.voltage,
            "self_discharge_a": self.self_discharge_a,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BatteryConfig":
        valid_fields = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in valid_fields})


@dataclass
class RadioConfig:
    """初始射频设置"""

    dr: int = 0
    tx_power_dbm: int = 14
    coding_rate: Optional[int] = None

    def to_dict(self) -> dict:
        data = {"dr": self.dr, "tx_power_dbm": self.tx_power_dbm}
        if self.coding_rate is not None:
            data["coding_rate"] = self.coding_rate
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RadioConfig":
        valid_fields = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in valid_fields})


@dataclass
class MacConfig:
    """Class A MAC 设置"""

    confirmed: bool = False
    ack_plan: AckPlan = field(default_factory=AckPlan)
    max_retries: int = DEFAULT_MAX_RETRIES
    retry_backoff_s: float = DEFAULT_RETRY_BACKOFF_S
    duty_cycle_limit: float = DEFAULT_DUTY_CYCLE_LIMIT
    duty_cycle_policy: str = "off_time"
    duty_cycle_window_s: float = DEFAULT_DUTY_CYCLE_WINDOW_S
    tx_startup_s: float = 0.0

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["ack_plan"] = self.ack_plan.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "MacConfig":
        valid_fields = {f.name for f in fields(cls)}
        filtered_data = {k: v for k, v in data.items() if k in valid_fields}
        if isinstance(filtered_data.get("ack_plan"), dict):
            filtered_data["ack_plan"] = AckPlan.from_dict(filtered_data["ack_plan"])
        return cls(**filtered_data)


@dataclass
class AdrConfig:
    """ADR 设置"""

    enabled: bool = False
    history_size: int = DEFAULT_HISTORY_SIZE
    device_margin_db: float = DEFAULT_DEVICE_MARGIN_DB
    adr_ack_limit: int = DEFAULT_ADR_ACK_LIMIT
    gateway_count: int = 1
    snr: SnrModel = field(default_factory=SnrModel)

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["snr"] = self.snr.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "AdrConfig":
        valid_fields = {f.name for f in fields(cls)}
        filtered_data = {k: v for k, v in data.items() if k in valid_fields}
        if isinstance(filtered_data.get("snr"), dict):
            filtered_data["snr"] = SnrModel.from_dict(filtered_data["snr"])
        return cls(**filtered_data)


def sensing_from_dict(data: dict) -> Union[PollMode, InterruptMode]:
    """sensing 段 → PollMode / InterruptMode"""
    if data.get("mode", "poll") == "interrupt":
        return InterruptMode(
            event_rate_per_hour=float(data.get("event_rate_per_hour", 1.0)),
            wake_duration_s=float(data.get("wake_duration_s", 0.01)),
            min_interarrival_s=float(data.get("min_interarrival_s", 0.0)),
        )
    return PollMode(
        period_s=float(data.get("period_s", 60.0)),
        sample_duration_s=float(data.get("sample_duration_s", 0.01)),
    )


def sensing_to_dict(mode: Union[PollMode, InterruptMode]) -> dict:
    if isinstance(mode, PollMode):
        return {"mode": "poll", "period_s": mode.period_s, "sample_duration_s": mode.sample_duration_s}
    return {
        "mode": "interrupt",
        "event_rate_per_hour": mode.event_rate_per_hour,
        "wake_duration_s": mode.wake_duration_s,
        "min_interarrival_s": mode.min_interarrival_s,
    }


@dataclass
class Scenario:
    """仿真场景

    calibration_path 为场景文件中给出的校准路径；calibration 为加载后
    的校准对象（None 时由仿真器按默认路径解析）。profile 为覆盖校准
    功率模型的键。
    """

    version: str = SCENARIO_SCHEMA_VERSION
    name: str = ""
    description: str = ""
    seed: Optional[int] = None
    duration_s: Optional[float] = None
    run_to_death: bool = False
    calibration_path: str = ""
    calibration: Optional[Calibration] = None
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    profile: dict = field(default_factory=dict)
    radio: RadioConfig = field(default_factory=RadioConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    sensing: Union[PollMode, InterruptMode] = field(default_factory=PollMode)
    signal: SignalModel = field(default_factory=SignalModel)
    processing_s: float = 0.0
    accumulation: AccumulationPolicy = field(default_factory=AccumulationPolicy)
    relevance: Optional[RelevanceFilter] = None
    adr: AdrConfig = field(default_factory=AdrConfig)

    @property
    def stochastic(self) -> bool:
        """是否包含随机元素（需要 seed）"""
        if isinstance(self.sensing, InterruptMode) and self.sensing.event_rate_per_hour > 0:
            return True
        if isinstance(self.sensing, PollMode) and self.relevance is not None and self.signal.event_rate_per_hour > 0:
            return True
        if self.mac.ack_plan.stochastic:
            return True
        return self.adr.enabled and self.adr.snr.stochastic

    def effective_profile(self) -> PowerProfile:
        base = self.calibration.profile if self.calibration is not None else PowerProfile()
        if not self.profile:
            return base
        return PowerProfile.from_dict(self.profile, base=base)

    def to_dict(self) -> dict:
        """转换为场景文件格式的字典（不含已加载的校准对象）"""
        data = {"version": self.version, "name": self.name}
        if self.description:
            data["description"] = self.description
        if self.seed is not None:
            data["seed"] = self.seed
        if self.duration_s is not None:
            data["duration_s"] = self.duration_s
        if self.run_to_death:
            data["run_to_death"] = True
        if self.calibration_path:
            data["calibration"] = self.calibration_path
        data["battery"] = self.battery.to_dict()
        if self.profile:
            data["profile"] = dict(self.profile)
        data["radio"] = self.radio.to_dict()
        data["mac"] = self.mac.to_dict()
        data["sensing"] = sensing_to_dict(self.sensing)
        data["signal"] = {f.name: getattr(self.signal, f.name) for f in fields(self.signal)}
        data["strategy"] = {
            "processing_s": self.processing_s,
            "accumulation": {f.name: getattr(self.accumulation, f.name) for f in fields(self.accumulation)},
            "filter": None if self.relevance is None else {
                "threshold": self.relevance.threshold,
                "hysteresis": self.relevance.hysteresis,
            },
        }
        data["adr"] = self.adr.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        """从已验证的场景字典创建

        Args:
            data: 通过 validate_scenario_dict 的字典

        Returns:
            Scenario 实例
        """
        strategy = data.get("strategy", {})
        accumulation = strategy.get("accumulation", {})
        filter_data = strategy.get("filter")
        signal_fields = {f.name for f in fields(SignalModel)}
        return cls(
            version=str(data.get("version", SCENARIO_SCHEMA_VERSION)),
            name=data.get("name", ""),
            description=data.get("description", ""),
            seed=data.get("seed"),
            duration_s=data.get("duration_s"),
            run_to_death=bool(data.get("run_to_death", False)),
            calibration_path=data.get("calibration", ""),
            battery=BatteryConfig.from_dict(data.get("battery", {})),
            profile=dict(data.get("profile", {})),
            radio=RadioConfig.from_dict(data.get("radio", {})),
            mac=MacConfig.from_dict(data.get("mac", {})),
            sensing=sensing_from_dict(data.get("sensing", {})),
            signal=SignalModel(**{k: v for k, v in data.get("signal", {}).items() if k in signal_fields}),
            processing_s=float(strategy.get("processing_s", 0.0)),
            accumulation=AccumulationPolicy(
                batch_size=int(accumulation.get("batch_size", 1)),
                sample_bytes=int(accumulation.get("sample_bytes", 2)),
                overhead_bytes=int(accumulation.get("overhead_bytes", DEFAULT_OVERHEAD_BYTES)),
                deadline_s=accumulation.get("deadline_s"),
                compression_ratio=float(accumulation.get("compression_ratio", 1.0)),
            ),
            relevance=None if filter_data is None else RelevanceFilter(
                threshold=float(filter_data.get("threshold", 40.0)),
                hysteresis=float(filter_data.get("hysteresis", 0.0)),
            ),
            adr=AdrConfig.from_dict(data.get("adr", {})),
        )
