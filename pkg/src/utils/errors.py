"""Unified error classes for LoRa_EnergyKits.

This module provides exception classes with helpful suggestions
for resolving parameter, calibration and scenario errors.
"""

from typing import List, Optional


class EnergyKitError(Exception):
    """能耗工具错误基类

    提供错误消息和可操作的修复建议。
    """

    def __init__(self, message: str, suggestions: List[str] = None):
        super().__init__(message)
        self.suggestions = suggestions or []

    def __str__(self):
        base_msg = super().__str__()
        if self.suggestions:
            suggestions = "\n".join(f"  - {s}" for s in self.suggestions)
            return f"{base_msg}\n\n建议:\n{suggestions}"
        return base_msg


class ParameterError(EnergyKitError):
    """参数超出有效范围

    SF、带宽、编码率、时长或能量等输入不合法时抛出。
    """

    def __init__(self, message: str, suggestions: List[str] = None):
        super().__init__(message, suggestions or ["检查参数取值范围"])


class PayloadTooLargeError(EnergyKitError):
    """负载超过区域最大值

    EU868: DR0-2 为 51 B，DR3 为 115 B，DR4-5 为 222 B。
    """

    def __init__(self, payload_len: int, max_len: int, dr: Optional[int] = None):
        self.payload_len = payload_len
        self.max_len = max_len
        self.dr = dr
        where = f"DR{dr}" if dr is not None else "LoRa PHY"
        super().__init__(
            f"负载过大: {payload_len} B 超过 {where} 最大值 {max_len} B",
            suggestions=[
                "减小 batch_size 或 sample_bytes",
                "提高数据速率 (DR)",
                "设置 compression_ratio < 1",
            ]
        )


class CalibrationMissingError(EnergyKitError):
    """缺少校准数据

    Tx 功率档位无电流数据，或 rx1_ack 缺失且无功率模型回退时抛出。
    """

    def __init__(self, message: str, suggestions: List[str] = None):
        default_suggestions = [
            "检查校准文件 tx_current_by_power 是否包含该功率档位",
            "提供 PowerProfile 以启用 profile-derived 回退",
        ]
        super().__init__(message, suggestions or default_suggestions)


class ConfigLoadError(EnergyKitError):
    """配置加载失败

    当无法从文件加载校准、场景或设置时抛出。
    """

    def __init__(self, reason: str, suggestions: List[str] = None):
        default_suggestions = [
            "检查配置文件是否存在",
            "验证文件格式是否正确",
            "确保文件没有被其他程序锁定"
        ]
        if suggestions:
            default_suggestions = suggestions
        super().__init__(
            f"无法加载配置: {reason}",
            default_suggestions
        )


class ConfigSaveError(EnergyKitError):
    """配置保存失败

    当无法保存设置到文件系统时抛出。
    """

    def __init__(self, reason: str):
        super().__init__(
            f"无法保存配置: {reason}",
            suggestions=[
                "检查配置目录权限",
                "确保磁盘空间充足",
                "查看详细日志获取更多信息"
            ]
        )


class ScenarioValidationError(EnergyKitError):
    """场景验证失败

    携带完整的 ValidationResult，消息中列出所有出错的键路径。
    """

    def __init__(self, result, source: str = ""):
        self.result = result
        errors = [e for e in result.errors if e.severity.value == "error"]
        self.offending_keys = [e.field for e in errors]
        lines = "; ".join(f"{e.field}: {e.message}" for e in errors)
        prefix = f"场景验证失败 ({source})" if source else "场景验证失败"
        suggestions = []
        for e in errors:
            suggestions.extend(s for s in e.suggestions if s not in suggestions)
        super().__init__(f"{prefix}: {lines}", suggestions)


class BatteryModelError(EnergyKitError):
    """电池模型不一致

    例如电池电压低于供电电压，或容量非正。
    """

    def __init__(self, message: str):
        super().__init__(
            message,
            suggestions=[
                "确认 battery.voltage >= profile.supply_voltage",
                "确认 battery.capacity_mah > 0",
            ]
        )
