"""Configuration persistence module for LoRa_EnergyKits.

This module loads the calibration JSON, validates and loads scenario JSON
documents, and saves/loads the user settings file in TOML format.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

# Python 3.11+ has built-in tomllib, Python 3.10 needs tomli
try:
    import tomllib
except ImportError:
    import tomli as tomllib

# tomli_w is needed for writing TOML
try:
    import tomli_w
except ImportError:
    tomli_w = None

from core.adr import ADR_MAX_TX_POWER_DBM, ADR_MIN_TX_POWER_DBM, SnrModel
from core.energy_model import PowerProfile
from core.mac_class_a import DUTY_CYCLE_POLICIES, AckPlan
from core.models import (
    SCENARIO_SCHEMA_VERSION,
    AppSettings,
    Calibration,
    Scenario,
    ValidationError,
    ValidationResult,
    ValidationSeverity,
)
from core.phy import MAX_DR, MIN_DR, DataRate, max_payload
from core.strategy import AccumulationPolicy
from utils.errors import (
    ConfigLoadError,
    ConfigSaveError,
    EnergyKitError,
    ScenarioValidationError,
)
from utils.path_utils import get_settings_path, resolve_calibration_path

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# 值类型标记
NUMBER = "number"
INTEGER = "integer"
BOOLEAN = "boolean"
STRING = "string"
MAPPING = "mapping"
SEQUENCE = "sequence"

# 场景文件结构：嵌套 dict 表示子段，元组 (类型, 可为 null)
_N = (NUMBER, False)
_I = (INTEGER, False)
_B = (BOOLEAN, False)
_S = (STRING, False)

SCENARIO_SCHEMA: Dict[str, Any] = {
    "version": _S,
    "name": _S,
    "description": _S,
    "seed": _I,
    "duration_s": _N,
    "run_to_death": _B,
    "calibration": _S,
    "battery": {"capacity_mah": _N, "voltage": _N, "self_discharge_a": _N},
    "profile": {
        "supply_voltage": _N,
        "sleep_current_a": _N,
        "mcu_clock_mhz": _N,
        "mcu_active_current_a": _N,
        "sense_current_a": _N,
        "rx_current_a": _N,
        "tx_current_by_power": (MAPPING, False),
        "default_tx_power_dbm": _I,
        "sleep_modes_a": (MAPPING, False),
        "sleep_mode": _S,
        "sensor_standby_current_a": _N,
        "sensor_power_cut": _B,
    },
    "radio": {"dr": _I, "tx_power_dbm": _I, "coding_rate": _I},
    "mac": {
        "confirmed": _B,
        "ack_plan": {"mode": _S, "outcome": _S, "p_ack_rx1": _N, "p_ack_rx2": _N},
        "max_retries": _I,
        "retry_backoff_s": _N,
        "duty_cycle_limit": _N,
        "duty_cycle_policy": _S,
        "duty_cycle_window_s": _N,
        "tx_startup_s": _N,
    },
    "sensing": {
        "mode": _S,
        "period_s": _N,
        "sample_duration_s": _N,
        "event_rate_per_hour": _N,
        "wake_duration_s": _N,
        "min_interarrival_s": _N,
    },
    "signal": {
        "event_rate_per_hour": _N,
        "hold_s": _N,
        "baseline": _N,
        "peak": _N,
        "min_interarrival_s": _N,
    },
    "strategy": {
        "processing_s": _N,
        "accumulation": {
            "batch_size": _I,
            "sample_bytes": _I,
            "overhead_bytes": _I,
            "deadline_s": (NUMBER, True),
            "compression_ratio": _N,
        },
        "filter": {"threshold": _N, "hysteresis": _N},
    },
    "adr": {
        "enabled": _B,
        "history_size": _I,
        "device_margin_db": _N,
        "adr_ack_limit": _I,
        "gateway_count": _I,
        "snr": {"model": _S, "mean_db": _N, "sigma_db": _N, "values": (SEQUENCE, False)},
    },
}

# 可整体为 null 的子段
NULLABLE_SECTIONS = {"strategy.filter"}


def _type_ok(value: Any, kind: str) -> bool:
    if kind == BOOLEAN:
        return isinstance(value, bool)
    if kind == INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == NUMBER:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == STRING:
        return isinstance(value, str)
    if kind == MAPPING:
        return isinstance(value, dict)
    return isinstance(value, list)


def _error(result: ValidationResult, path: str, message: str, suggestions: Optional[List[str]] = None) -> None:
    result.add_error(ValidationError(
        field=path,
        message=message,
        severity=ValidationSeverity.ERROR,
        suggestions=suggestions or [],
    ))


def _warning(result: ValidationResult, path: str, message: str) -> None:
    result.add_error(ValidationError(field=path, message=message, severity=ValidationSeverity.WARNING))


def _check_structure(data: dict, schema: dict, prefix: str, result: ValidationResult) -> None:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in schema:
            _error(result, path, "未知键", [f"允许的键: {', '.join(sorted(schema))}"])
            continue
        spec = schema[key]
        if isinstance(spec, dict):
            if value is None and path in NULLABLE_SECTIONS:
                continue
            if not isinstance(value, dict):
                _error(result, path, "应为对象")
                continue
            _check_structure(value, spec, f"{path}.", result)
            continue
        kind, nullable = spec
        if value is None and nullable:
            continue
        if not _type_ok(value, kind):
            _error(result, path, f"类型错误，应为 {kind}: {value!r}")


def _section(data: dict, key: str) -> dict:
    value = data.get(key)
    return value if isinstance(value, dict) else {}


def _check_positive(result: ValidationResult, section: dict, prefix: str, keys: List[str], allow_zero: bool = False) -> None:
    for key in keys:
        value = section.get(key)
        if value is None or not _type_ok(value, NUMBER):
            continue
        if value < 0 or (value == 0 and not allow_zero):
            bound = ">= 0" if allow_zero else "> 0"
            _error(result, f"{prefix}{key}", f"必须 {bound}: {value}")


def _check_semantics(data: dict, result: ValidationResult) -> None:
    version = data.get("version")
    if version is None:
        _error(result, "version", "缺少必需键", [f"添加 \"version\": \"{SCENARIO_SCHEMA_VERSION}\""])
    elif isinstance(version, str) and version.split(".")[0] != SCENARIO_SCHEMA_VERSION.split(".")[0]:
        _error(result, "version", f"版本不兼容: {version}", [f"场景主版本必须为 {SCENARIO_SCHEMA_VERSION.split('.')[0]}"])

    if data.get("duration_s") is None and not data.get("run_to_death", False):
        _error(result, "duration_s", "必须给出 duration_s 或 run_to_death", ["设置 duration_s（秒）或 run_to_death: true"])
    _check_positive(result, data, "", ["duration_s"])

    battery = _section(data, "battery")
    _check_positive(result, battery, "battery.", ["capacity_mah", "voltage"])
    _check_positive(result, battery, "battery.", ["self_discharge_a"], allow_zero=True)

    profile = _section(data, "profile")
    if profile and not any(e.field.startswith("profile") for e in result.errors):
        try:
            PowerProfile.from_dict(profile, base=PowerProfile())
        except (EnergyKitError, TypeError, ValueError) as e:
            _error(result, "profile", str(e).split("\n")[0])

    radio = _section(data, "radio")
    dr_index = radio.get("dr", 0)
    if _type_ok(dr_index, INTEGER) and not MIN_DR <= dr_index <= MAX_DR:
        _error(result, "radio.dr", f"DR 超出范围: {dr_index}", [f"取值 {MIN_DR}..{MAX_DR}"])
    power = radio.get("tx_power_dbm")
    if _type_ok(power, INTEGER) and not ADR_MIN_TX_POWER_DBM <= power <= ADR_MAX_TX_POWER_DBM:
        _error(result, "radio.tx_power_dbm", f"发射功率超出范围: {power}",
               [f"取值 {ADR_MIN_TX_POWER_DBM}..{ADR_MAX_TX_POWER_DBM} dBm"])
    coding_rate = radio.get("coding_rate")
    if _type_ok(coding_rate, INTEGER) and coding_rate not in (1, 2, 3, 4):
        _error(result, "radio.coding_rate", f"编码率偏移超出范围: {coding_rate}", ["取值 1..4"])

    mac = _section(data, "mac")
    ack = mac.get("ack_plan")
    if isinstance(ack, dict) and not any(e.field.startswith("mac.ack_plan") for e in result.errors):
        for problem in AckPlan.from_dict(ack).validate():
            _error(result, "mac.ack_plan", problem)
    policy = mac.get("duty_cycle_policy")
    if isinstance(policy, str) and policy not in DUTY_CYCLE_POLICIES:
        _error(result, "mac.duty_cycle_policy", f"未知占空比策略: {policy}", [f"取值: {', '.join(DUTY_CYCLE_POLICIES)}"])
    limit = mac.get("duty_cycle_limit")
    if _type_ok(limit, NUMBER) and not 0 < limit <= 1:
        _error(result, "mac.duty_cycle_limit", f"必须在 (0, 1]: {limit}")
    retries = mac.get("max_retries")
    if _type_ok(retries, INTEGER) and retries < 0:
        _error(result, "mac.max_retries", f"不能为负: {retries}")
    _check_positive(result, mac, "mac.", ["duty_cycle_window_s"])
    _check_positive(result, mac, "mac.", ["retry_backoff_s", "tx_startup_s"], allow_zero=True)

    sensing = _section(data, "sensing")
    mode = sensing.get("mode", "poll")
    if mode not in ("poll", "interrupt"):
        _error(result, "sensing.mode", f"未知采样模式: {mode}", ["取值: poll, interrupt"])
    _check_positive(result, sensing, "sensing.", ["period_s", "sample_duration_s", "wake_duration_s"])
    _check_positive(result, sensing, "sensing.", ["event_rate_per_hour", "min_interarrival_s"], allow_zero=True)

    signal = _section(data, "signal")
    _check_positive(result, signal, "signal.", ["hold_s"])
    _check_positive(result, signal, "signal.", ["event_rate_per_hour", "min_interarrival_s"], allow_zero=True)

    strategy = _section(data, "strategy")
    _check_positive(result, strategy, "strategy.", ["processing_s"], allow_zero=True)
    accumulation = _section(strategy, "accumulation")
    _check_accumulation(accumulation, dr_index, result)
    relevance = strategy.get("filter")
    if isinstance(relevance, dict):
        _check_positive(result, relevance, "strategy.filter.", ["hysteresis"], allow_zero=True)
        if mode == "interrupt":
            _warning(result, "strategy.filter", "中断模式下相关性过滤器被忽略（传感器阈值中断已完成过滤）")

    adr = _section(data, "adr")
    for key in ("history_size", "adr_ack_limit", "gateway_count"):
        value = adr.get(key)
        if _type_ok(value, INTEGER) and value < 1:
            _error(result, f"adr.{key}", f"必须 >= 1: {value}")
    snr = adr.get("snr")
    if isinstance(snr, dict) and not any(e.field.startswith("adr.snr") for e in result.errors):
        for problem in SnrModel.from_dict(snr).validate():
            _error(result, "adr.snr", problem)


def _check_accumulation(accumulation: dict, dr_index: Any, result: ValidationResult) -> None:
    prefix = "strategy.accumulation."
    if any(e.field.startswith(prefix) for e in result.errors):
        return
    for key in ("batch_size", "sample_bytes"):
        value = accumulation.get(key)
        if value is not None and value < 1:
            _error(result, f"{prefix}{key}", f"必须 >= 1: {value}")
    overhead = accumulation.get("overhead_bytes")
    if overhead is not None and overhead < 0:
        _error(result, f"{prefix}overhead_bytes", f"不能为负: {overhead}")
    deadline = accumulation.get("deadline_s")
    if deadline is not None and deadline <= 0:
        _error(result, f"{prefix}deadline_s", f"必须 > 0: {deadline}")
    ratio = accumulation.get("compression_ratio")
    if ratio is not None and not 0 < ratio <= 1:
        _error(result, f"{prefix}compression_ratio", f"必须在 (0, 1]: {ratio}")
    if any(e.field.startswith(prefix) for e in result.errors):
        return
    if not (_type_ok(dr_index, INTEGER) and MIN_DR <= dr_index <= MAX_DR):
        return
    policy = AccumulationPolicy(
        batch_size=accumulation.get("batch_size", 1),
        sample_bytes=accumulation.get("sample_bytes", 2),
        overhead_bytes=accumulation.get("overhead_bytes", 13),
        compression_ratio=accumulation.get("compression_ratio", 1.0),
    )
    dr = DataRate(dr_index)
    if policy.payload_len() > max_payload(dr):
        _error(
            result,
            f"{prefix}batch_size",
            f"满批负载 {policy.payload_len()} B 超过 {dr} 最大值 {max_payload(dr)} B",
            ["减小 batch_size 或 sample_bytes", "提高 radio.dr", "设置 compression_ratio < 1"],
        )


def _needs_seed(data: dict) -> bool:
    sensing = _section(data, "sensing")
    strategy = _section(data, "strategy")
    if sensing.get("mode", "poll") == "interrupt":
        if sensing.get("event_rate_per_hour", 1.0) > 0:
            return True
    elif isinstance(strategy.get("filter"), dict) and _section(data, "signal").get("event_rate_per_hour", 1.0) > 0:
        return True
    if _section(_section(data, "mac"), "ack_plan").get("mode") == "probabilistic":
        return True
    adr = _section(data, "adr")
    snr = _section(adr, "snr")
    return bool(adr.get("enabled")) and snr.get("model", "normal") == "normal" and snr.get("sigma_db", 0.0) > 0


def validate_scenario_dict(data: Any) -> ValidationResult:
    """验证场景字典

    检查未知键、值类型、取值范围、版本与 seed 要求，所有问题以点分键路径报告。

    Args:
        data: 场景 JSON 解析结果

    Returns:
        ValidationResult，is_valid 为 False 时 errors 列出全部出错键
    """
    result = ValidationResult()
    if not isinstance(data, dict):
        _error(result, "", "场景文件顶层应为对象")
        return result

    _check_structure(data, SCENARIO_SCHEMA, "", result)
    _check_semantics(data, result)
    if data.get("seed") is None and result.is_valid and _needs_seed(data):
        _error(result, "seed", "场景包含随机元素，必须给出 seed", ["添加 \"seed\": 整数，或使用 --seed"])

    for warning in result.get_errors_by_severity(ValidationSeverity.WARNING):
        logger.warning(f"场景警告 {warning.field}: {warning.message}")
    return result


def _read_json(path: Path, kind: str) -> Any:
    if not path.exists():
        raise ConfigLoadError(
            f"{kind}文件不存在: {path}",
            suggestions=[
                "检查文件路径是否正确",
                "使用绝对路径或相对于当前目录的路径",
            ]
        )
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigLoadError(
            f"{kind}文件格式错误: {path} ({e})",
            suggestions=[
                "检查 JSON 文件格式是否正确",
                "使用 JSON 验证工具验证文件"
            ]
        )
    except UnicodeDecodeError:
        raise ConfigLoadError(f"{kind}文件编码错误: {path}", suggestions=["请使用 UTF-8 编码保存"])


def load_calibration(path: Union[str, Path]) -> Calibration:
    """加载校准文件

    Args:
        path: 校准 JSON 路径

    Returns:
        Calibration 对象

    Raises:
        ConfigLoadError: 文件不存在、格式错误或内容无效
    """
    path = Path(path)
    data = _read_json(path, "校准")
    if not isinstance(data, dict) or "table" not in data:
        raise ConfigLoadError(
            f"校准文件缺少 'table' 字段: {path}",
            suggestions=["参考 configs/calibration_table1.json 的结构"]
        )
    try:
        calibration = Calibration.from_dict(data, source=str(path))
    except (EnergyKitError, KeyError, TypeError, ValueError) as e:
        logger.error(f"校准文件无效: {e}")
        raise ConfigLoadError(f"校准文件内容无效: {path} ({e})")
    logger.info(f"校准已加载: {path} ({len(calibration.rx.datarates())} 个 DR)")
    return calibration


def scenario_from_dict(
    data: Any,
    source: str = "",
    calibration: Optional[Calibration] = None,
) -> Scenario:
    """验证并创建场景

    Raises:
        ScenarioValidationError: 验证失败
    """
    result = validate_scenario_dict(data)
    if not result.is_valid:
        error = ScenarioValidationError(result, source)
        logger.error(str(error).split("\n")[0])
        raise error
    scenario = Scenario.from_dict(data)
    scenario.calibration = calibration
    return scenario


def load_scenario(
    path: Union[str, Path],
    calibration_path: Optional[Union[str, Path]] = None,
    settings: Optional[AppSettings] = None,
    seed: Optional[int] = None,
) -> Scenario:
    """加载场景文件并解析其校准

    校准路径优先级：calibration_path 参数 → 场景 calibration 键（相对场景文件目录）
    → 环境变量 → 设置 → 内置默认。

    Args:
        path: 场景 JSON 路径
        calibration_path: 命令行给出的校准路径
        settings: 用户设置
        seed: 覆盖场景中的 seed

    Returns:
        已附带 Calibration 的 Scenario

    Raises:
        ConfigLoadError: 场景或校准文件无法读取
        ScenarioValidationError: 场景验证失败
    """
    path = Path(path)
    data = _read_json(path, "场景")
    if seed is not None and isinstance(data, dict):
        data["seed"] = seed
    scenario = scenario_from_dict(data, source=str(path))
    explicit = calibration_path
    if explicit is None and scenario.calibration_path:
        explicit = path.parent / scenario.calibration_path
    resolved = resolve_calibration_path(explicit, settings.calibration_path if settings else None)
    scenario.calibration = load_calibration(resolved)
    logger.info(f"场景已加载: {path} ({scenario.name or '未命名'})")
    return scenario


def load_settings(path: Optional[Union[str, Path]] = None) -> AppSettings:
    """加载用户设置，文件不存在时返回默认设置

    Raises:
        ConfigLoadError: TOML 格式错误或取值无效
    """
    settings_file = Path(path) if path else get_settings_path()
    if not settings_file.exists():
        logger.debug(f"设置文件不存在，使用默认设置: {settings_file}")
        return AppSettings()
    try:
        with open(settings_file, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError:
        raise ConfigLoadError(
            f"设置文件格式错误: {settings_file}",
            suggestions=[
                "使用文本编辑器检查 TOML 文件格式",
                "运行 init-settings --force 重新生成设置文件"
            ]
        )
    settings = AppSettings.from_dict(data)
    if str(settings.log_level).upper() not in LOG_LEVELS:
        raise ConfigLoadError(
            f"log_level 无效: {settings.log_level}",
            suggestions=[f"取值: {', '.join(LOG_LEVELS)}"]
        )
    if not isinstance(settings.workers, int) or settings.workers < 1:
        raise ConfigLoadError(f"workers 必须为正整数: {settings.workers}")
    logger.info(f"设置已加载: {settings_file}")
    return settings


def save_settings(
    settings: AppSettings,
    path: Optional[Union[str, Path]] = None,
    overwrite: bool = False,
) -> bool:
    """保存用户设置到 TOML 文件

    Args:
        settings: 设置对象
        path: 目标路径，缺省为平台设置目录
        overwrite: 是否覆盖已存在的文件（默认 False）

    Returns:
        bool: 文件已存在且未允许覆盖时返回 False

    Raises:
        ConfigSaveError: 保存失败时抛出
    """
    if tomli_w is None:
        logger.error("tomli_w 未安装，请运行: pip install tomli_w")
        raise ConfigSaveError("tomli_w 未安装")

    settings_file = Path(path) if path else get_settings_path()
    if settings_file.exists() and not overwrite:
        return False
    try:
        settings_file.parent.mkdir(parents=True, exist_ok=True)
        with open(settings_file, "wb") as f:
            tomli_w.dump(settings.to_dict(), f)
    except OSError as e:
        logger.error(f"保存设置失败: {e}")
        raise ConfigSaveError(str(e))
    logger.info(f"设置已保存: {settings_file}")
    return True
