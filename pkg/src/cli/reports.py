"""Report rendering for the LoRa_EnergyKits CLI.

Text tables for the terminal, JSON for reports and CSV for event logs and
the energy-per-bit curve. Every number comes from a library call; this
module only formats.
"""

import csv
import io
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, TextIO, Union

from core.energy_model import CalibrationCheck, PowerState, Table1Row
from core.sim_engine import EVENT_CSV_COLUMNS, SeedAggregate, SimReport

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("dr", "sf", "tx_power_dbm", "payload_bytes", "toa_ms", "tx_energy_mj", "energy_per_bit_nj")


def format_mj(value: Optional[float]) -> str:
    """表格单元：保留 0.1 mJ，去掉多余的 0，缺失值为 -

    Examples:
        >>> format_mj(12.000000000000002)
        '12'
        >>> format_mj(None)
        '-'
    """
    if value is None:
        return "-"
    return f"{round(value, 1):g}"


def format_table1(rows: List[Table1Row]) -> str:
    """Rx 窗口能耗表（mJ），不符的合计单元标 *"""
    header = ["DR", "RX1 ACK", "RX1 NO-ACK", "RX2 ACK", "RX2 NO-ACK", "ACK worst", "ACK best", "NO-ACK", "check"]
    lines = []
    for row in rows:
        def total(name: str, value: Optional[float]) -> str:
            text = format_mj(value)
            return f"{text}*" if name in row.mismatches else text

        lines.append([
            f"DR{row.dr}",
            format_mj(row.rx1_ack),
            format_mj(row.rx1_noack),
            format_mj(row.rx2_ack),
            format_mj(row.rx2_noack),
            total("ack_worst", row.ack_worst),
            total("ack_best", row.ack_best),
            total("noack", row.noack),
            "ok" if not row.mismatches else "MISMATCH " + ",".join(row.mismatches),
        ])
    widths = [max(len(str(r[i])) for r in [header] + lines) for i in range(len(header))]
    rendered = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() for r in [header] + lines]
    return "\n".join(rendered)


def format_checks(checks: List[CalibrationCheck]) -> str:
    return "\n".join(f"[{'PASS' if c.ok else 'FAIL'}] {c.name}: {c.detail}" for c in checks)


def format_comparison(a: SimReport, b: SimReport) -> str:
    """两个场景的寿命、能耗与 Tx/Rx/感知/睡眠分解对比"""
    ratio = b.projected_lifetime_s / a.projected_lifetime_s if a.projected_lifetime_s > 0 else float("inf")
    rows = [
        ("scenario", a.scenario or "A", b.scenario or "B"),
        ("lifetime (days)", f"{a.projected_lifetime_days:.2f}", f"{b.projected_lifetime_days:.2f}"),
        ("simulated (days)", f"{a.lifetime_days:.2f}", f"{b.lifetime_days:.2f}"),
        ("average current (uA)", f"{a.average_current_a * 1e6:.3f}", f"{b.average_current_a * 1e6:.3f}"),
        ("uplinks", str(a.uplinks), str(b.uplinks)),
        ("delivered", str(a.delivered), str(b.delivered)),
        ("delivered samples", str(a.delivered_samples), str(b.delivered_samples)),
        ("retransmissions", str(a.retransmissions), str(b.retransmissions)),
        ("total energy (J)", f"{a.ledger.total:.6f}", f"{b.ledger.total:.6f}"),
    ]
    shares_a, shares_b = a.ledger.shares(), b.ledger.shares()
    for state in PowerState:
        rows.append((
            f"{state.value} share",
            f"{shares_a[state.value]:.1%}",
            f"{shares_b[state.value]:.1%}",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() for r in rows]
    lines.append(f"lifetime ratio (B/A): {ratio:.3f}")
    return "\n".join(lines)


def report_json(report: SimReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


def write_report_json(report: SimReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report_json(report))
    logger.info(f"报告已写入: {path}")
    return path


def write_aggregate_json(aggregate: SeedAggregate, path: Union[str, Path]) -> Path:
    """多种子汇总 JSON（合并账本与寿命统计）"""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(aggregate.to_dict(), indent=2, ensure_ascii=False) + "\n")
    logger.info(f"汇总已写入: {path}")
    return path


def write_events_csv(report: SimReport, path: Union[str, Path]) -> Path:
    """事件日志 CSV：t_us, state, duration_us, energy_nJ, detail"""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(EVENT_CSV_COLUMNS)
        for event in report.events:
            writer.writerow(event.to_row())
    logger.info(f"事件日志已写入: {path} ({len(report.events)} 行)")
    return path


def write_curve_csv(rows: Iterable[dict], stream: Optional[TextIO] = None) -> str:
    """每比特能耗曲线的整洁 CSV，stream 为 None 时仅返回文本"""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CURVE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in CURVE_COLUMNS})
    text = buffer.getvalue()
    if stream is not None:
        stream.write(text)
    return text
