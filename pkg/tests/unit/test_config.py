"""Unit tests for scenario, calibration and settings configuration."""

import copy
import json
from pathlib import Path

import pytest

from core.config import (
    load_calibration,
    load_scenario,
    load_settings,
    save_settings,
    scenario_from_dict,
    validate_scenario_dict,
)
from core.models import AppSettings, Scenario, ValidationSeverity
from core.strategy import InterruptMode, PollMode
from utils.errors import ConfigLoadError, ScenarioValidationError

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _error_fields(result):
    return [e.field for e in result.get_errors_by_severity(ValidationSeverity.ERROR)]


class TestScenarioValidation:
    """测试场景验证"""

    def test_base_scenario_is_valid(self, scenario_dict):
        result = validate_scenario_dict(scenario_dict)
        assert result.is_valid
        assert result.error_count == 0

    def test_shipped_scenarios_are_valid(self):
        for path in sorted((CONFIGS / "scenarios").glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            assert validate_scenario_dict(data).is_valid, path.name

    def test_unknown_key_reported_with_path(self, scenario_dict):
        """未知键以点分路径报告

        Given: sensing 段包含未知键 perod_s
        When: 验证场景
        Then: 错误列出 sensing.perod_s
        """
        scenario_dict["sensing"]["perod_s"] = 10
        scenario_dict["colour"] = "blue"
        fields = _error_fields(validate_scenario_dict(scenario_dict))
        assert "sensing.perod_s" in fields
        assert "colour" in fields

    def test_wrong_type(self, scenario_dict):
        scenario_dict["radio"]["dr"] = "5"
        scenario_dict["mac"] = {"confirmed": "yes"}
        fields = _error_fields(validate_scenario_dict(scenario_dict))
        assert fields == ["radio.dr", "mac.confirmed"]

    def test_all_errors_collected(self, scenario_dict):
        """一次验证报告全部问题，而不是遇到第一个就停止"""
        scenario_dict["radio"]["dr"] = 9
        scenario_dict["radio"]["tx_power_dbm"] = 20
        scenario_dict["battery"]["capacity_mah"] = -1
        fields = _error_fields(validate_scenario_dict(scenario_dict))
        assert set(fields) == {"radio.dr", "radio.tx_power_dbm", "battery.capacity_mah"}

    def test_missing_version(self, scenario_dict):
        del scenario_dict["version"]
        assert _error_fields(validate_scenario_dict(scenario_dict)) == ["version"]

    def test_major_version_mismatch(self, scenario_dict):
        scenario_dict["version"] = "2.0"
        assert _error_fields(validate_scenario_dict(scenario_dict)) == ["version"]

    def test_minor_version_accepted(self, scenario_dict):
        scenario_dict["version"] = "1.3"
        assert validate_scenario_dict(scenario_dict).is_valid

    def test_duration_or_run_to_death(self, scenario_dict):
        del scenario_dict["duration_s"]
        assert _error_fields(validate_scenario_dict(scenario_dict)) == ["duration_s"]
        scenario_dict["run_to_death"] = True
        assert validate_scenario_dict(scenario_dict).is_valid

    def test_seed_required_for_stochastic(self, scenario_dict):
        """包含随机元素（中断事件）时必须给出 seed"""
        scenario_dict["sensing"] = {"mode": "interrupt", "event_rate_per_hour": 2.0}
        scenario_dict["strategy"]["filter"] = None
        assert _error_fields(validate_scenario_dict(scenario_dict)) == ["seed"]
        scenario_dict["seed"] = 3
        assert validate_scenario_dict(scenario_dict).is_valid

    def test_seed_required_for_probabilistic_ack(self, scenario_dict):
        scenario_dict["mac"] = {"ack_plan": {"mode": "probabilistic", "p_ack_rx2": 0.5}}
        assert _error_fields(validate_scenario_dict(scenario_dict)) == ["seed"]

    def test_deterministic_scenario_needs_no_seed(self, scenario_dict):
        """信号事件率为 0 的轮询场景没有随机元素"""
        assert "seed" not in scenario_dict
        assert validate_scenario_dict(scenario_dict).is_valid

    def test_payload_too_large_for_datarate(self, scenario_dict):
        """满批负载超过 DR 最大值时指向 batch_size"""
        scenario_dict["radio"]["dr"] = 0
        scenario_dict["strategy"]["accumulation"]["batch_size"] = 30
        result = validate_scenario_dict(scenario_dict)
        assert _error_fields(result) == ["strategy.accumulation.batch_size"]
        assert result.errors[0].suggestions

    def test_filter_ignored_in_interrupt_mode_warns(self, scenario_dict):
        scenario_dict["sensing"] = {"mode": "interrupt", "event_rate_per_hour": 0.0}
        result = validate_scenario_dict(scenario_dict)
        assert result.is_valid
        assert result.warning_count == 1
        assert result.errors[0].field == "strategy.filter"

    @pytest.mark.parametrize("section,key,value", [
        ("mac", "ack_plan", {"mode": "fixed", "outcome": "perhaps"}),
        ("mac", "duty_cycle_policy", "token_bucket"),
        ("mac", "duty_cycle_limit", 1.5),
        ("sensing", "mode", "listen"),
        ("adr", "snr", {"model": "trace", "values": []}),
        ("profile", "rx_current_a", 0.5),
        ("profile", "sleep_mode", "em9"),
        ("profile", "sleep_modes_a", {"em2": "low"}),
    ])
    def test_semantic_errors(self, scenario_dict, section, key, value):
        scenario_dict.setdefault(section, {})[key] = value
        fields = _error_fields(validate_scenario_dict(scenario_dict))
        assert fields and all(f.startswith(section) for f in fields)

    def test_top_level_not_object(self):
        result = validate_scenario_dict([1, 2, 3])
        assert not result.is_valid

    def test_scenario_from_dict_raises_with_keys(self, scenario_dict):
        scenario_dict["radio"]["dr"] = 7
        scenario_dict["bogus"] = 1
        with pytest.raises(ScenarioValidationError) as exc_info:
            scenario_from_dict(scenario_dict, source="unit.json")
        assert set(exc_info.value.offending_keys) == {"radio.dr", "bogus"}
        assert "unit.json" in str(exc_info.value)


class TestScenarioModel:
    """测试场景模型"""

    def test_from_dict(self, scenario_dict, calibration):
        scenario = scenario_from_dict(scenario_dict, calibration=calibration)
        assert isinstance(scenario.sensing, PollMode)
        assert scenario.sensing.period_s == 60.0
        assert scenario.relevance.threshold == 40.0
        assert scenario.accumulation.payload_len() == 15
        assert scenario.calibration is calibration
        assert not scenario.stochastic

    def test_interrupt_mode(self, scenario_dict):
        scenario_dict["seed"] = 1
        scenario_dict["sensing"] = {"mode": "interrupt", "event_rate_per_hour": 4.0, "min_interarrival_s": 5.0}
        scenario_dict["strategy"]["filter"] = None
        scenario = scenario_from_dict(scenario_dict)
        assert scenario.sensing == InterruptMode(event_rate_per_hour=4.0, min_interarrival_s=5.0)
        assert scenario.relevance is None
        assert scenario.stochastic

    def test_dict_round_trip(self, scenario_dict):
        scenario = scenario_from_dict(scenario_dict)
        again = Scenario.from_dict(scenario.to_dict())
        assert again.to_dict() == scenario.to_dict()
        assert validate_scenario_dict(scenario.to_dict()).is_valid

    def test_profile_override(self, scenario_dict, calibration):
        scenario_dict["profile"] = {"sleep_current_a": 5e-7}
        scenario = scenario_from_dict(scenario_dict, calibration=calibration)
        profile = scenario.effective_profile()
        assert profile.sleep_current == 5e-7
        assert profile.rx_current == calibration.profile.rx_current


class TestLoadScenario:
    """测试场景文件加载与校准路径解析"""

    def test_loads_shipped_calibration(self, tmp_path, scenario_dict):
        path = _write_json(tmp_path / "s.json", scenario_dict)
        scenario = load_scenario(path)
        assert scenario.calibration.source.endswith("calibration_table1.json")

    def test_seed_argument_overrides(self, tmp_path, scenario_dict):
        scenario_dict["seed"] = 1
        path = _write_json(tmp_path / "s.json", scenario_dict)
        assert load_scenario(path, seed=99).seed == 99

    def test_calibration_relative_to_scenario(self, tmp_path, scenario_dict):
        """场景中的 calibration 键相对场景文件所在目录解析"""
        calibration = json.loads((CONFIGS / "calibration_table1.json").read_text(encoding="utf-8"))
        calibration["table"]["rx2_noack_mj"] = 1.4
        (tmp_path / "cal").mkdir()
        _write_json(tmp_path / "cal" / "custom.json", calibration)
        scenario_dict["calibration"] = "cal/custom.json"
        scenario = load_scenario(_write_json(tmp_path / "s.json", scenario_dict))
        assert scenario.calibration.rx.rx2_noack == 1.4

    def test_explicit_path_wins(self, tmp_path, scenario_dict):
        scenario_dict["calibration"] = "missing.json"
        path = _write_json(tmp_path / "s.json", scenario_dict)
        scenario = load_scenario(path, calibration_path=CONFIGS / "calibration_table1.json")
        assert scenario.calibration.rx.rx2_ack == 5.6

    def test_environment_variable(self, tmp_path, scenario_dict, monkeypatch):
        calibration = json.loads((CONFIGS / "calibration_table1.json").read_text(encoding="utf-8"))
        calibration["profile"]["sleep_current_a"] = 2e-6
        monkeypatch.setenv("LORA_ENERGY_CALIBRATION", str(_write_json(tmp_path / "env.json", calibration)))
        scenario = load_scenario(_write_json(tmp_path / "s.json", scenario_dict))
        assert scenario.calibration.profile.sleep_current == 2e-6

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigLoadError):
            load_scenario(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigLoadError):
            load_scenario(path)


class TestLoadCalibration:
    """测试校准文件加载"""

    def test_shipped(self, calibration):
        assert calibration.rx.datarates() == [0, 1, 2, 3, 4, 5]
        assert calibration.rx.rx2_dr == 3
        assert calibration.rx.symbol_timeout == 5
        assert calibration.profile.supply_voltage == 3.3
        assert calibration.profile.sleep_modes == {"em4": 2e-8}
        assert calibration.receive_delay1_s == 1.0

    def test_missing_table(self, tmp_path):
        with pytest.raises(ConfigLoadError):
            load_calibration(_write_json(tmp_path / "c.json", {"profile": {}}))

    def test_invalid_content(self, tmp_path):
        data = json.loads((CONFIGS / "calibration_table1.json").read_text(encoding="utf-8"))
        broken = copy.deepcopy(data)
        broken["profile"]["rx_current_a"] = -1
        with pytest.raises(ConfigLoadError):
            load_calibration(_write_json(tmp_path / "c.json", broken))


class TestSettings:
    """测试用户设置"""

    def test_missing_file_gives_defaults(self, tmp_path):
        assert load_settings(tmp_path / "none.toml") == AppSettings()

    def test_save_and_load(self, tmp_path):
        """保存后重新加载得到相同设置

        Given: 目标目录不存在
        When: 保存设置
        Then: 目录自动创建，重新加载内容一致
        """
        path = tmp_path / "nested" / "settings.toml"
        settings = AppSettings(calibration_path="/data/cal.json", log_level="INFO", workers=4)
        assert save_settings(settings, path) is True
        assert load_settings(path) == settings

    def test_no_overwrite_by_default(self, tmp_path):
        path = tmp_path / "settings.toml"
        save_settings(AppSettings(workers=2), path)
        assert save_settings(AppSettings(workers=3), path) is False
        assert load_settings(path).workers == 2
        assert save_settings(AppSettings(workers=3), path, overwrite=True) is True
        assert load_settings(path).workers == 3

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "settings.toml"
        path.write_text("log_level = ", encoding="utf-8")
        with pytest.raises(ConfigLoadError):
            load_settings(path)

    @pytest.mark.parametrize("content", ['log_level = "LOUD"', "workers = 0"])
    def test_invalid_values(self, tmp_path, content):
        path = tmp_path / "settings.toml"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(ConfigLoadError):
            load_settings(path)
