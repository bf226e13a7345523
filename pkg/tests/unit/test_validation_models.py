"""单元测试：数据模型

测试 ValidationError、ValidationResult、ValidationSeverity 以及场景子段模型。
"""

import pytest

from core.adr import SnrModel
from core.mac_class_a import AckPlan
from core.models import (
    AdrConfig,
    BatteryConfig,
    Calibration,
    MacConfig,
    RadioConfig,
    ValidationError,
    ValidationResult,
    ValidationSeverity,
    sensing_from_dict,
    sensing_to_dict,
)
from core.strategy import InterruptMode, PollMode
from utils.errors import ParameterError


class TestValidationSeverity:
    """测试 ValidationSeverity 枚举"""

    def test_severity_enum_values(self):
        assert ValidationSeverity.ERROR.value == "error"
        assert ValidationSeverity.WARNING.value == "warning"
        assert ValidationSeverity.INFO.value == "info"


class TestValidationError:
    """测试 ValidationError dataclass"""

    def test_default_values(self):
        error = ValidationError()
        assert error.field == ""
        assert error.message == ""
        assert error.severity == ValidationSeverity.ERROR
        assert error.suggestions == []

    def test_module_import_and_independent_suggestions(self):
        """导入 core.models 后，各实例的 suggestions 互不共享"""
        import importlib

        module = importlib.import_module("core.models")
        first = module.ValidationError(field="radio.dr")
        second = module.ValidationError(field="radio.tx_power_dbm")
        first.suggestions.append("取值 0..5")
        assert second.suggestions == []
        assert first.field == "radio.dr"

    def test_to_dict(self):
        error = ValidationError(
            field="radio.dr",
            message="DR 超出范围: 9",
            severity=ValidationSeverity.ERROR,
            suggestions=["取值 0..5"],
        )
        assert error.to_dict() == {
            "field": "radio.dr",
            "message": "DR 超出范围: 9",
            "severity": "error",
            "suggestions": ["取值 0..5"],
        }

    def test_from_dict_filters_unknown_fields(self):
        """测试从字典创建时过滤未知字段并转换严重级别"""
        error = ValidationError.from_dict({
            "field": "strategy.filter",
            "message": "ignored",
            "severity": "warning",
            "stage": "legacy",
        })
        assert error.severity == ValidationSeverity.WARNING
        assert not hasattr(error, "stage")


class TestValidationResult:
    """测试 ValidationResult dataclass"""

    def test_default_values(self):
        result = ValidationResult()
        assert result.is_valid is True
        assert result.errors == []
        assert result.warning_count == 0
        assert result.error_count == 0

    def test_warning_keeps_result_valid(self):
        """警告不影响 is_valid，错误使其失效"""
        result = ValidationResult()
        result.add_error(ValidationError(field="a", severity=ValidationSeverity.WARNING))
        result.add_error(ValidationError(field="b", severity=ValidationSeverity.INFO))
        assert result.is_valid
        assert result.warning_count == 1
        result.add_error(ValidationError(field="c"))
        assert not result.is_valid
        assert result.error_count == 1

    def test_get_errors_by_severity(self):
        result = ValidationResult()
        result.add_error(ValidationError(field="a"))
        result.add_error(ValidationError(field="b", severity=ValidationSeverity.WARNING))
        result.add_error(ValidationError(field="c"))
        errors = result.get_errors_by_severity(ValidationSeverity.ERROR)
        assert [e.field for e in errors] == ["a", "c"]

    def test_to_dict(self):
        result = ValidationResult()
        result.add_error(ValidationError(field="seed", message="缺少 seed"))
        data = result.to_dict()
        assert data["is_valid"] is False
        assert data["error_count"] == 1
        assert data["errors"][0]["severity"] == "error"


class TestSectionModels:
    """测试场景子段模型"""

    def test_battery_defaults(self):
        battery = BatteryConfig.from_dict({"capacity_mah": 2400, "chemistry": "li-ion"})
        assert battery.capacity_mah == 2400
        assert battery.voltage == 3.3
        assert battery.self_discharge_a == 0.0

    def test_radio_omits_unset_coding_rate(self):
        assert RadioConfig(dr=3).to_dict() == {"dr": 3, "tx_power_dbm": 14}
        assert RadioConfig(dr=3, coding_rate=4).to_dict()["coding_rate"] == 4

    def test_mac_builds_ack_plan(self):
        mac = MacConfig.from_dict({"confirmed": True, "ack_plan": {"mode": "fixed", "outcome": "no_ack"}})
        assert isinstance(mac.ack_plan, AckPlan)
        assert mac.ack_plan.outcome == "no_ack"
        assert mac.to_dict()["ack_plan"] == {"mode": "fixed", "outcome": "no_ack"}

    def test_adr_builds_snr_model(self):
        adr = AdrConfig.from_dict({"enabled": True, "snr": {"model": "trace", "values": [5, 6]}})
        assert adr.snr == SnrModel(model="trace", values=[5.0, 6.0])
        assert adr.to_dict()["snr"] == {"model": "trace", "values": [5.0, 6.0]}

    def test_sensing_modes(self):
        poll = sensing_from_dict({"mode": "poll", "period_s": 30})
        assert poll == PollMode(period_s=30.0)
        interrupt = sensing_from_dict({"mode": "interrupt", "event_rate_per_hour": 2})
        assert isinstance(interrupt, InterruptMode)
        assert sensing_from_dict(sensing_to_dict(interrupt)) == interrupt

    def test_invalid_sensing_values_raise(self):
        with pytest.raises(ParameterError):
            sensing_from_dict({"mode": "interrupt", "event_rate_per_hour": -1})


class TestCalibrationModel:
    """测试校准模型"""

    def test_defaults_when_rx_model_missing(self, calibration):
        data = calibration.to_dict()
        del data["rx_model"]
        bare = Calibration.from_dict(data, source="inline")
        assert bare.rx.symbol_timeout == 5
        assert bare.rx.rx2_dr == 3
        assert bare.receive_delay1_s == calibration.receive_delay1_s
        assert bare.source == "inline"

    def test_dict_round_trip(self, calibration):
        again = Calibration.from_dict(calibration.to_dict())
        assert again.rx.rx1_noack == calibration.rx.rx1_noack
        assert again.rx.rx1_ack == calibration.rx.rx1_ack
        assert again.profile.tx_current(14) == calibration.profile.tx_current(14)

    def test_inconsistent_table_rejected(self, calibration):
        """rx2_ack 小于 rx2_noack 的表无效"""
        data = calibration.to_dict()
        data["table"]["rx2_ack_mj"] = 1.0
        with pytest.raises(ParameterError):
            Calibration.from_dict(data)
