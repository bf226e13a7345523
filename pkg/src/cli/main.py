"""LoRa_EnergyKits command-line entry point.

Subcommands:
    airtime          time-on-air and energy per bit of one frame
    per-bit          energy-per-bit curve as tidy CSV
    table1           Rx-window energy table rebuilt from its components
    calibrate-check  consistency checks of a calibration file
    simulate         run a scenario and write report.json / events.csv
    compare          two scenarios side by side with the lifetime ratio
    init-settings    write the user settings TOML

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from cli import __version__
from cli.reports import (
    format_checks,
    format_comparison,
    format_table1,
    write_aggregate_json,
    write_curve_csv,
    write_events_csv,
    write_report_json,
)
from core.config import load_calibration, load_scenario, load_settings, save_settings
from core.energy_model import (
    check_calibration,
    energy_per_bit_curve,
    state_energy,
    PowerState,
    table1_rows,
)
from core.models import SCENARIO_SCHEMA_VERSION, AppSettings, Calibration
from core.phy import (
    DataRate,
    LoRaParams,
    block_aligned_payloads,
    datarate_params,
    max_payload,
    time_on_air,
)
from core.sim_engine import aggregate_reports, run, run_seeds
from utils.errors import (
    ConfigLoadError,
    EnergyKitError,
    ParameterError,
    PayloadTooLargeError,
    ScenarioValidationError,
)
from utils.path_utils import ensure_output_dir, resolve_calibration_path, sanitize_filename

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

VALIDATION_ERRORS = (ScenarioValidationError, ParameterError, PayloadTooLargeError, ConfigLoadError)


def _parse_seeds(text: str) -> List[int]:
    """解析 --seeds，形如 "1..8" 或 "3" """
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            if high < low:
                raise ValueError
            return list(range(low, high + 1))
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无效的 seed 区间: {text}（形如 1..8）")


def _parse_payloads(text: str) -> List[int]:
    """解析 --payloads，形如 "1-51" 或 "8,12,51" """
    try:
        if "-" in text:
            low, high = (int(part) for part in text.split("-", 1))
            return list(range(low, high + 1))
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无效的负载列表: {text}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lora-energykits",
        description="LoRaWAN end-node energy model and battery lifetime simulator",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__} (scenario schema {SCENARIO_SCHEMA_VERSION})",
    )
    parser.add_argument("--log-level", default=None, help="日志级别（默认取设置文件，否则 WARNING）")
    parser.add_argument("--settings", type=Path, default=None, help="设置文件路径")
    sub = parser.add_subparsers(dest="command", required=True)

    airtime = sub.add_parser("airtime", help="单帧空口时间与每比特能耗")
    airtime.add_argument("--sf", type=int, required=True)
    airtime.add_argument("--bw", type=int, default=125000)
    airtime.add_argument("--cr", type=int, default=1)
    airtime.add_argument("--payload", type=int, required=True)
    airtime.add_argument("--preamble", type=int, default=8)
    airtime.add_argument("--implicit-header", action="store_true")
    airtime.add_argument("--no-crc", action="store_true")
    airtime.add_argument("--tx-power", type=int, default=None, help="发射功率 dBm（默认取校准）")
    airtime.add_argument("--calibration", type=Path, default=None)

    per_bit = sub.add_parser("per-bit", help="每比特能耗曲线 (CSV)")
    per_bit.add_argument("--dr", type=int, action="append", default=None, help="可重复，默认 DR0..DR5")
    per_bit.add_argument("--payloads", type=_parse_payloads, default=None, help="如 1-51 或 8,12,51")
    per_bit.add_argument("--block-aligned", action="store_true", help="仅输出块对齐负载长度")
    per_bit.add_argument("--tx-power", type=int, default=None)
    per_bit.add_argument("--calibration", type=Path, default=None)
    per_bit.add_argument("--out", type=Path, default=None, help="输出文件，默认标准输出")

    table1 = sub.add_parser("table1", help="重建 Rx 窗口能耗表")
    table1.add_argument("--calibration", type=Path, default=None)

    check = sub.add_parser("calibrate-check", help="校验校准文件")
    check.add_argument("--calibration", type=Path, default=None)
    check.add_argument("--tolerance", type=float, default=0.15)

    simulate = sub.add_parser("simulate", help="运行场景仿真")
    simulate.add_argument("--scenario", type=Path, required=True)
    seeds = simulate.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, default=None)
    seeds.add_argument("--seeds", type=_parse_seeds, default=None, help="seed 区间，如 1..8")
    simulate.add_argument("--out", type=Path, default=None)
    simulate.add_argument("--format", choices=("json", "csv", "both"), default="both")
    simulate.add_argument("--workers", type=int, default=None)
    simulate.add_argument("--calibration", type=Path, default=None)

    compare = sub.add_parser("compare", help="对比两个场景")
    compare.add_argument("--scenario", type=Path, action="append", required=True, help="给出两次")
    compare.add_argument("--seed", type=int, default=None)
    compare.add_argument("--calibration", type=Path, default=None)

    init = sub.add_parser("init-settings", help="生成用户设置文件")
    init.add_argument("--path", type=Path, default=None)
    init.add_argument("--calibration", type=str, default="")
    init.add_argument("--force", action="store_true")
    return parser


def _calibration(args: argparse.Namespace, settings: AppSettings) -> Calibration:
    return load_calibration(resolve_calibration_path(args.calibration, settings.calibration_path))


def cmd_airtime(args: argparse.Namespace, settings: AppSettings) -> int:
    params = LoRaParams(
        sf=args.sf,
        bw=args.bw,
        cr=args.cr,
        preamble_syms=args.preamble,
        explicit_header=not args.implicit_header,
        crc_on=not args.no_crc,
    )
    toa = time_on_air(params, args.payload)
    print(f"time on air: {toa * 1e3:.3f} ms (SF{params.sf}, {params.bw} Hz, CR 4/{params.cr + 4}, "
          f"{args.payload} B, DE={'on' if params.low_dr_optimize else 'off'})")
    if args.payload >= 1:
        profile = _calibration(args, settings).profile
        power = profile.default_tx_power_dbm if args.tx_power is None else args.tx_power
        energy = state_energy(profile, PowerState.TX, toa, power)
        print(f"tx energy: {energy * 1e3:.3f} mJ at {power} dBm")
        print(f"energy per bit: {energy / (8 * args.payload) * 1e9:.1f} nJ/bit")
    return EXIT_OK


def cmd_per_bit(args: argparse.Namespace, settings: AppSettings) -> int:
    profile = _calibration(args, settings).profile
    datarates = [DataRate(i) for i in (args.dr if args.dr else range(6))]
    rows = []
    for dr in datarates:
        if args.block_aligned:
            payloads = block_aligned_payloads(datarate_params(dr), max_payload(dr))
        else:
            payloads = args.payloads or list(range(1, max_payload(dr) + 1))
        rows.extend(energy_per_bit_curve(profile, [dr], payloads, args.tx_power))
    if args.out is None:
        write_curve_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            write_curve_csv(rows, f)
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_table1(args: argparse.Namespace, settings: AppSettings) -> int:
    calibration = _calibration(args, settings)
    rows = table1_rows(calibration.rx)
    print(f"Rx window energy (mJ) from {calibration.source}")
    print(format_table1(rows))
    mismatched = [row for row in rows if row.mismatches]
    if mismatched:
        print(f"{len(mismatched)} row(s) differ from the printed totals (marked *)")
    return EXIT_OK


def cmd_calibrate_check(args: argparse.Namespace, settings: AppSettings) -> int:
    calibration = _calibration(args, settings)
    checks = check_calibration(calibration.profile, calibration.rx, tolerance=args.tolerance)
    print(format_checks(checks))
    failed = [c for c in checks if not c.ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_RUNTIME


def _write_outputs(report, out_dir: Path, fmt: str) -> None:
    ensure_output_dir(out_dir)
    if fmt in ("json", "both"):
        write_report_json(report, out_dir / "report.json")
    if fmt in ("csv", "both"):
        write_events_csv(report, out_dir / "events.csv")


def cmd_simulate(args: argparse.Namespace, settings: AppSettings) -> int:
    seed = args.seeds[0] if args.seeds else args.seed
    scenario = load_scenario(args.scenario, args.calibration, settings, seed=seed)
    out_dir = Path(args.out) if args.out else Path(settings.output_dir) / sanitize_filename(
        scenario.name or args.scenario.stem
    )
    if args.seeds is None:
        report = run(scenario)
        _write_outputs(report, out_dir, args.format)
        print(report.summary_line())
        return EXIT_OK

    workers = args.workers or settings.workers
    reports = run_seeds(scenario, args.seeds, workers)
    for seed, report in zip(args.seeds, reports):
        _write_outputs(report, out_dir / f"seed_{seed}", args.format)
        print(f"[seed {seed}] {report.summary_line()}")
    aggregate = aggregate_reports(reports)
    if args.format in ("json", "both"):
        ensure_output_dir(out_dir)
        write_aggregate_json(aggregate, out_dir / "aggregate.json")
    print(f"[aggregate] {aggregate.summary_line()}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, settings: AppSettings) -> int:
    if len(args.scenario) != 2:
        raise ParameterError(
            f"compare 需要恰好两个 --scenario，实际 {len(args.scenario)} 个",
            suggestions=["用法: compare --scenario A.json --scenario B.json"]
        )
    reports = [
        run(load_scenario(path, args.calibration, settings, seed=args.seed))
        for path in args.scenario
    ]
    print(format_comparison(reports[0], reports[1]))
    return EXIT_OK


def cmd_init_settings(args: argparse.Namespace, settings: AppSettings) -> int:
    fresh = AppSettings(calibration_path=args.calibration)
    if not save_settings(fresh, args.path, overwrite=args.force):
        print("settings file already exists; use --force to overwrite", file=sys.stderr)
        return EXIT_RUNTIME
    print("settings written")
    return EXIT_OK


COMMANDS = {
    "airtime": cmd_airtime,
    "per-bit": cmd_per_bit,
    "table1": cmd_table1,
    "calibrate-check": cmd_calibrate_check,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "init-settings": cmd_init_settings,
}


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """CLI 入口

    Args:
        argv: 参数列表，None 时取 sys.argv[1:]

    Returns:
        退出码 0 / 1 / 2
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        settings = load_settings(args.settings)
    except ConfigLoadError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    _setup_logging(args.log_level or settings.log_level)

    try:
        return COMMANDS[args.command](args, settings)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (EnergyKitError, OSError) as e:
        logger.error(f"{args.command} 失败: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
