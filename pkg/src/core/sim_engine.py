"""Discrete-event simulator for LoRa_EnergyKits.

Binds the sensing strategy, the Class A planner, the energy model and ADR
into one single-threaded event loop. Time is kept in integer microseconds;
every microsecond of the run lands in exactly one logged state segment.
"""

import heapq
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Deque, Dict, List, Optional, Tuple

import numpy as np

from core.adr import (
    AdrState,
    SnrSource,
    UplinkObservation,
    adr_backoff,
    adr_decision,
    record_uplink,
)
from core.energy_model import EnergyLedger, PowerState, state_energy
from core.mac_class_a import (
    ClassATransaction,
    DutyCycleState,
    next_permitted_time,
    plan_uplink,
    record_transmission,
    retransmit_policy,
)
from core.models import Calibration, Scenario
from core.phy import DataRate, datarate_params, max_payload, time_on_air
from core.strategy import (
    EventStream,
    FilterState,
    InterruptMode,
    PollMode,
    Sample,
    SignalTrace,
    UplinkRequest,
    filter_sample,
    flush_due,
    next_wake,
    offer_sample,
)
from utils.errors import BatteryModelError, ParameterError

logger = logging.getLogger(__name__)

US_PER_S = 1_000_000
MAC_PRIORITY = 0
STRATEGY_PRIORITY = 1
# run_to_death 且未给 duration_s 时的仿真上限
MAX_RUN_TO_DEATH_S = 100 * 365 * 86400

EVENT_CSV_COLUMNS = ("t_us", "state", "duration_us", "energy_nJ", "detail")


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def battery_lifetime(capacity_mah: float, voltage: float, average_current: float) -> float:
    """理想电池寿命 (s) = capacity·3600 / average_current

    Args:
        capacity_mah: 容量 (mAh)
        voltage: 电池电压 (V)，仅做一致性检查
        average_current: 平均电流 (A)

    Returns:
        寿命 (s)

    Raises:
        ParameterError: 任一参数非正

    Examples:
        >>> battery_lifetime(1000, 3.3, 1e-3) / 3600
        1000.0
    """
    for name, value in (("capacity_mah", capacity_mah), ("voltage", voltage), ("average_current", average_current)):
        if value <= 0:
            raise ParameterError(f"{name} 必须为正: {value}")
    return capacity_mah * 1e-3 * 3600.0 / average_current


@dataclass(order=True)
class Event:
    """事件队列条目，按 (时刻, 优先级, 序号) 全序"""

    time_us: int
    priority: int
    seq: int
    kind: str = field(compare=False, default="")
    data: Any = field(compare=False, default=None)


class EventQueue:
    """确定性事件队列：同一时刻 MAC 事件先于策略事件，再按插入顺序"""

    def __init__(self):
        self._heap: List[Event] = []
        self._seq = 0

    def push(self, time_us: int, priority: int, kind: str, data: Any = None) -> None:
        heapq.heappush(self._heap, Event(time_us, priority, self._seq, kind, data))
        self._seq += 1

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class SimEvent:
    """事件日志中的一段状态"""

    t_us: int
    state: str
    duration_us: int
    energy_j: float
    detail: str = ""

    def to_row(self) -> Tuple[int, str, int, str, str]:
        return self.t_us, self.state, self.duration_us, repr(self.energy_j * 1e9), self.detail


@dataclass
class SimReport:
    """仿真报告

    lifetime_s：实际存活时长，耗尽时为耗尽时刻，否则为仿真终点（survived-to-limit），
    满足 lifetime_s · average_current_a · supply_voltage = ledger.total。
    projected_lifetime_s：未耗尽时按平均电流（含自放电）外推的电池寿命，耗尽时等于 lifetime_s。
    uplinks 为上行请求数，attempts 含重传。
    """

    scenario: str = ""
    seed: Optional[int] = None
    simulated_s: float = 0.0
    lifetime_s: float = 0.0
    projected_lifetime_s: float = 0.0
    depleted: bool = False
    projected: bool = False
    uplinks: int = 0
    attempts: int = 0
    delivered: int = 0
    failed: int = 0
    retransmissions: int = 0
    samples: int = 0
    filtered_samples: int = 0
    delivered_samples: int = 0
    duty_cycle_deferrals: int = 0
    adr_decisions: int = 0
    adr_changes: int = 0
    final_dr: int = 0
    final_tx_power_dbm: int = 14
    average_current_a: float = 0.0
    supply_voltage: float = 3.3
    ledger: EnergyLedger = field(default_factory=EnergyLedger)
    state_durations_us: Dict[str, int] = field(default_factory=dict)
    rx_sources: Dict[str, int] = field(default_factory=dict)
    transactions: List[ClassATransaction] = field(default_factory=list)
    events: List[SimEvent] = field(default_factory=list)

    @property
    def lifetime_days(self) -> float:
        return self.lifetime_s / 86400.0

    @property
    def projected_lifetime_days(self) -> float:
        return self.projected_lifetime_s / 86400.0

    def summary_line(self) -> str:
        kind = "depleted at" if self.depleted else "projected"
        return (
            f"{self.scenario or 'scenario'}: lifetime {kind} {self.projected_lifetime_days:.2f} d, "
            f"average current {self.average_current_a * 1e6:.3f} uA, "
            f"uplinks {self.uplinks} (delivered {self.delivered}, retransmissions {self.retransmissions}), "
            f"energy {self.ledger.total:.6f} J over {self.simulated_s:.0f} s"
        )

    def to_dict(self) -> dict:
        """报告 JSON（不含逐段事件日志，后者写入 CSV）"""
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "simulated_s": self.simulated_s,
            "lifetime_s": self.lifetime_s,
            "lifetime_days": self.lifetime_days,
            "projected_lifetime_s": self.projected_lifetime_s,
            "projected_lifetime_days": self.projected_lifetime_days,
            "depleted": self.depleted,
            "projected": self.projected,
            "uplinks": self.uplinks,
            "attempts": self.attempts,
            "delivered": self.delivered,
            "failed": self.failed,
            "retransmissions": self.retransmissions,
            "samples": self.samples,
            "filtered_samples": self.filtered_samples,
            "delivered_samples": self.delivered_samples,
            "duty_cycle_deferrals": self.duty_cycle_deferrals,
            "adr_decisions": self.adr_decisions,
            "adr_changes": self.adr_changes,
            "final_dr": self.final_dr,
            "final_tx_power_dbm": self.final_tx_power_dbm,
            "average_current_a": self.average_current_a,
            "supply_voltage": self.supply_voltage,
            "ledger": self.ledger.to_dict(),
            "shares": self.ledger.shares(),
            "state_durations_s": {k: v / US_PER_S for k, v in sorted(self.state_durations_us.items())},
            "rx_sources": dict(sorted(self.rx_sources.items())),
            "transactions": [t.to_dict() for t in self.transactions],
        }


class Simulation:
    """单次仿真运行的可变状态，只由 run() 驱动"""

    def __init__(self, scenario: Scenario, calibration: Calibration):
        self.scenario = scenario
        self.calibration = calibration
        self.profile = scenario.effective_profile()
        self.voltage = self.profile.supply_voltage
        battery = scenario.battery
        if battery.capacity_mah <= 0:
            raise BatteryModelError(f"电池容量必须为正: {battery.capacity_mah}")
        if battery.voltage < self.voltage:
            raise BatteryModelError(
                f"电池电压 {battery.voltage} V 低于供电电压 {self.voltage} V"
            )
        if battery.self_discharge_a < 0:
            raise BatteryModelError(f"自放电电流不能为负: {battery.self_discharge_a}")
        self.capacity_c = battery.capacity_mah * 3.6
        self.self_discharge_a = battery.self_discharge_a

        if scenario.duration_s is not None:
            self.horizon_us = to_us(scenario.duration_s)
        else:
            self.horizon_us = to_us(MAX_RUN_TO_DEATH_S)

        seed = scenario.seed if scenario.seed is not None else 0
        streams = np.random.SeedSequence(seed).spawn(3)
        self.event_rng, self.ack_rng, self.snr_rng = (np.random.default_rng(s) for s in streams)

        self.queue = EventQueue()
        self.cursor_us = 0
        self.charge_c = 0.0
        self.dead = False
        self.report = SimReport(scenario=scenario.name, seed=scenario.seed, supply_voltage=self.voltage)

        self.dr = scenario.radio.dr
        self.tx_power = scenario.radio.tx_power_dbm
        self.coding_rate = scenario.radio.coding_rate or calibration.coding_rate
        mac = scenario.mac
        self.duty_cycle = DutyCycleState(
            limit=mac.duty_cycle_limit,
            policy=mac.duty_cycle_policy,
            window_s=mac.duty_cycle_window_s,
        )
        self.buffer: Tuple[Sample, ...] = ()
        self.filter_state = FilterState()
        self.pending: Deque[UplinkRequest] = deque()
        self.in_flight = False

        self.stream: Optional[EventStream] = None
        self.trace: Optional[SignalTrace] = None
        if isinstance(scenario.sensing, InterruptMode):
            self.stream = EventStream(
                scenario.sensing.event_rate_per_hour,
                self.event_rng,
                scenario.sensing.min_interarrival_s,
            )
        elif scenario.relevance is not None:
            signal = scenario.signal
            self.trace = SignalTrace(
                signal,
                EventStream(signal.event_rate_per_hour, self.event_rng, signal.min_interarrival_s),
            )

        self.adr_state: Optional[AdrState] = None
        self.snr_source: Optional[SnrSource] = None
        if scenario.adr.enabled:
            self.adr_state = AdrState(
                history_size=scenario.adr.history_size,
                device_margin_db=scenario.adr.device_margin_db,
                adr_ack_limit=scenario.adr.adr_ack_limit,
            )
            self.snr_source = SnrSource(scenario.adr.snr, self.snr_rng)

    # -- 时间与能量记账 ------------------------------------------------

    def _charge_rate(self, energy_j: float, duration_us: int) -> float:
        return energy_j / self.voltage + self.self_discharge_a * duration_us / US_PER_S

    def account(self, state: PowerState, start_us: int, duration_us: int,
                energy_j: Optional[float], detail: str = "") -> None:
        """记录一段状态，之前的空隙按睡眠记账

        energy_j 为 None 时按该状态电流与整数微秒时长计算。
        超出仿真终点或电池耗尽的部分被截断。
        """
        if self.dead or self.cursor_us >= self.horizon_us:
            return
        if start_us > self.cursor_us:
            self.account(PowerState.SLEEP, self.cursor_us, start_us - self.cursor_us, None, "sleep")
            if self.dead or self.cursor_us >= self.horizon_us:
                return
        start_us = self.cursor_us
        if duration_us <= 0:
            return
        if energy_j is None:
            energy_j = state_energy(self.profile, state, duration_us / US_PER_S, self.tx_power)

        truncated = min(duration_us, self.horizon_us - start_us)
        charge = self._charge_rate(energy_j, duration_us)
        if charge > 0 and self.charge_c + charge * truncated / duration_us >= self.capacity_c:
            remaining = self.capacity_c - self.charge_c
            truncated = min(truncated, int(math.floor(duration_us * remaining / charge)))
            self.dead = True
        if truncated < duration_us:
            energy_j = energy_j * truncated / duration_us
            charge = charge * truncated / duration_us
            duration_us = truncated

        key = state.value
        self.report.events.append(SimEvent(start_us, key, duration_us, energy_j, detail))
        self.report.ledger.add(state, energy_j)
        self.report.state_durations_us[key] = self.report.state_durations_us.get(key, 0) + duration_us
        self.charge_c += charge
        self.cursor_us = start_us + duration_us
        if self.dead:
            logger.info(f"电池在 {self.cursor_us / US_PER_S:.0f} s 耗尽")

    def sleep_until(self, t_us: int) -> None:
        if t_us > self.cursor_us:
            self.account(PowerState.SLEEP, self.cursor_us, t_us - self.cursor_us, None, "sleep")

    def sleep_to_end(self) -> None:
        """无后续事件：睡眠至终点或电池耗尽"""
        if self.dead:
            return
        sleep_current = self.profile.current(PowerState.SLEEP) + self.self_discharge_a
        remaining_s = (self.capacity_c - self.charge_c) / sleep_current
        end_us = min(self.horizon_us, self.cursor_us + int(math.ceil(remaining_s * US_PER_S)) + 1)
        self.sleep_until(end_us)

    # -- 策略 --------------------------------------------------------

    def schedule_wake(self, index: int) -> None:
        """压入第 index 次唤醒

        轮询唤醒时刻为 index·period（整数微秒），不随浮点累加漂移；
        中断唤醒时刻取自事件流。
        """
        mode = self.scenario.sensing
        if isinstance(mode, PollMode):
            self.queue.push(index * to_us(mode.period_s), STRATEGY_PRIORITY, "wake", index)
            return
        t, _ = next_wake(mode, 0.0, self.stream)
        if not math.isinf(t):
            self.queue.push(to_us(t), STRATEGY_PRIORITY, "wake", index)

    def on_wake(self, event: Event) -> None:
        mode = self.scenario.sensing
        self.schedule_wake(event.data + 1)

        start_us = max(event.time_us, self.cursor_us)
        if isinstance(mode, PollMode):
            duration = mode.sample_duration_s
            detail = "poll sample"
        else:
            duration = mode.wake_duration_s
            detail = "interrupt wake"
        self.account(PowerState.SENSE, start_us, to_us(duration), None, detail)
        if self.scenario.processing_s > 0:
            self.account(PowerState.PROCESS, self.cursor_us, to_us(self.scenario.processing_s), None, "process")

        sample_time = start_us / US_PER_S
        if self.trace is not None:
            value = self.trace.value_at(sample_time)
        else:
            value = self.scenario.signal.peak
        sample = Sample(sample_time, value)
        self.report.samples += 1

        if isinstance(mode, PollMode) and self.scenario.relevance is not None:
            self.filter_state, send = filter_sample(self.scenario.relevance, self.filter_state, sample)
            if not send:
                self.report.filtered_samples += 1
                return

        policy = self.scenario.accumulation
        self.buffer, request = offer_sample(policy, self.buffer, sample)
        if request is not None:
            self.submit(request)
        elif len(self.buffer) == 1 and policy.deadline_s is not None:
            self.queue.push(to_us(sample.time + policy.deadline_s), STRATEGY_PRIORITY, "flush")

    def on_flush(self, event: Event) -> None:
        now = max(event.time_us, self.cursor_us) / US_PER_S
        self.buffer, request = flush_due(self.scenario.accumulation, self.buffer, now)
        if request is not None:
            self.submit(request)

    # -- MAC ---------------------------------------------------------

    def submit(self, request: UplinkRequest) -> None:
        self.report.uplinks += 1
        self.pending.append(request)
        if not self.in_flight:
            self.drain()

    def drain(self) -> None:
        while self.pending and not self.in_flight and not self.dead:
            self.transmit(self.pending.popleft(), 0)

    def on_retry(self, event: Event) -> None:
        request, retries_used = event.data
        self.sleep_until(event.time_us)
        self.transmit(request, retries_used)
        self.drain()

    def on_uplink(self, event: Event) -> None:
        """占空比推迟的发射到期"""
        request, retries_used = event.data
        self.sleep_until(event.time_us)
        self.transmit(request, retries_used, deferred=True)
        self.drain()

    def defer_for_duty_cycle(self, request: UplinkRequest, retries_used: int, now: float) -> bool:
        """占空比不允许立即发射时压入 "uplink" 事件并返回 True

        等待期间节点睡眠，采样照常进行，新请求在 pending 中排队。
        """
        dr = DataRate(self.dr)
        if request.payload_len > max_payload(dr):
            return False
        toa = time_on_air(datarate_params(dr, self.coding_rate), request.payload_len)
        permitted = next_permitted_time(self.duty_cycle, now, toa)
        if permitted <= now + 1e-9:
            return False
        self.report.duty_cycle_deferrals += 1
        logger.debug(f"占空比推迟发射 {permitted - now:.3f} s")
        self.in_flight = True
        permitted_us = int(math.ceil(permitted * US_PER_S))
        self.queue.push(permitted_us, MAC_PRIORITY, "uplink", (request, retries_used))
        return True

    def transmit(self, request: UplinkRequest, retries_used: int, deferred: bool = False) -> None:
        if self.dead or self.cursor_us >= self.horizon_us:
            self.in_flight = False
            return
        mac = self.scenario.mac
        cal = self.calibration
        now = self.cursor_us / US_PER_S
        if not deferred and self.defer_for_duty_cycle(request, retries_used, now):
            return
        # 占空比由 defer_for_duty_cycle 检查，此处 now 已被允许
        tx = plan_uplink(
            now,
            DataRate(self.dr),
            self.tx_power,
            request.payload_len,
            mac.confirmed,
            mac.ack_plan,
            profile=self.profile,
            cal=cal.rx,
            rng=self.ack_rng,
            retries_used=retries_used,
            receive_delay1=cal.receive_delay1_s,
            rx2_offset=cal.rx2_offset_s,
            startup_s=mac.tx_startup_s,
            coding_rate=self.coding_rate,
        )

        for segment in tx.segments():
            start_us = max(to_us(segment.start), self.cursor_us)
            end_us = to_us(segment.start + segment.duration)
            self.account(segment.state, start_us, end_us - start_us, segment.energy, segment.detail)
        record_transmission(self.duty_cycle, tx.uplink_start, tx.uplink_duration)
        self.report.transactions.append(tx)
        self.report.attempts += 1
        self.report.rx_sources[tx.rx_source] = self.report.rx_sources.get(tx.rx_source, 0) + 1
        if retries_used > 0:
            self.report.retransmissions += 1

        self.update_adr(tx)

        decision = retransmit_policy(tx, mac.max_retries, mac.retry_backoff_s)
        if decision.retry:
            self.in_flight = True
            self.queue.push(to_us(decision.next_attempt_at), MAC_PRIORITY, "retry", (request, retries_used + 1))
            return
        self.in_flight = False
        if tx.delivered:
            self.report.delivered += 1
            self.report.delivered_samples += request.sample_count
        else:
            self.report.failed += 1

    def update_adr(self, tx: ClassATransaction) -> None:
        if self.adr_state is None:
            return
        current = (DataRate(self.dr), self.tx_power)
        if tx.received:
            obs = UplinkObservation(
                snr=self.snr_source.next_snr(),
                dr=DataRate(tx.dr),
                tx_power_dbm=tx.tx_power_dbm,
                gateway_count=self.scenario.adr.gateway_count,
            )
            self.adr_state = record_uplink(self.adr_state, obs)
            decision = adr_decision(self.adr_state, current)
            self.report.adr_decisions += 1
            if decision is not None and decision != current:
                logger.debug(f"ADR: {current[0]}/{current[1]} dBm -> {decision[0]}/{decision[1]} dBm")
                self.report.adr_changes += 1
                current = decision
        self.adr_state, (dr, power) = adr_backoff(self.adr_state, current, tx.received)
        if dr != current[0] and self.scenario.accumulation.payload_len() > max_payload(dr):
            logger.warning(f"ADR 退避至 {dr} 时满批负载超过最大值，保持 {current[0]}")
            dr = current[0]
        self.dr, self.tx_power = dr.index, power

    # -- 主循环 ------------------------------------------------------

    def run(self) -> SimReport:
        handlers = {
            "wake": self.on_wake,
            "flush": self.on_flush,
            "retry": self.on_retry,
            "uplink": self.on_uplink,
        }
        self.schedule_wake(1)
        while len(self.queue) and not self.dead:
            event = self.queue.pop()
            if event.time_us >= self.horizon_us:
                break
            handlers[event.kind](event)
        self.sleep_to_end()
        return self.finish()

    def finish(self) -> SimReport:
        report = self.report
        report.simulated_s = self.cursor_us / US_PER_S
        report.depleted = self.dead
        report.final_dr = self.dr
        report.final_tx_power_dbm = self.tx_power
        if report.simulated_s > 0:
            report.average_current_a = report.ledger.total / (self.voltage * report.simulated_s)
        report.lifetime_s = report.simulated_s
        report.projected_lifetime_s = report.simulated_s
        if not self.dead:
            report.projected = True
            drain = report.average_current_a + self.self_discharge_a
            report.projected_lifetime_s = battery_lifetime(
                self.scenario.battery.capacity_mah, self.scenario.battery.voltage, drain
            )
        return report


def run(scenario: Scenario) -> SimReport:
    """运行场景仿真

    Args:
        scenario: 已验证的场景；calibration 为 None 时加载默认校准

    Returns:
        SimReport，同一 (场景, seed) 结果逐位一致

    Raises:
        BatteryModelError: 电池与功率模型不一致
        ParameterError: 随机元素缺少 seed
    """
    if scenario.stochastic and scenario.seed is None:
        raise ParameterError(
            "场景包含随机元素但未给出 seed",
            suggestions=["在场景中设置 seed，或使用 --seed"]
        )
    calibration = scenario.calibration
    if calibration is None:
        from core.config import load_calibration
        from utils.path_utils import resolve_calibration_path
        calibration = load_calibration(resolve_calibration_path())
    logger.info(f"开始仿真: {scenario.name or '未命名'} (seed={scenario.seed})")
    report = Simulation(scenario, calibration).run()
    logger.info(
        f"仿真完成: {scenario.name or '未命名'} {report.simulated_s:.0f} s, "
        f"{report.uplinks} 次上行, {report.ledger.total:.6f} J"
    )
    return report


def _run_seed(args: Tuple[Scenario, int]) -> SimReport:
    scenario, seed = args
    return run(replace(scenario, seed=seed))


def run_seeds(scenario: Scenario, seeds: List[int], workers: int = 1) -> List[SimReport]:
    """对多个 seed 运行同一场景，workers > 1 时并行（各进程互不共享状态）

    Returns:
        与 seeds 顺序一致的报告列表
    """
    jobs = [(scenario, seed) for seed in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_seed(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seed, jobs))


@dataclass
class SeedAggregate:
    """多种子汇总：合并账本与寿命统计"""

    scenario: str = ""
    seeds: List[Optional[int]] = field(default_factory=list)
    ledger: EnergyLedger = field(default_factory=EnergyLedger)
    uplinks: int = 0
    delivered: int = 0
    mean_average_current_a: float = 0.0
    mean_projected_lifetime_s: float = 0.0
    min_projected_lifetime_s: float = 0.0
    max_projected_lifetime_s: float = 0.0

    def summary_line(self) -> str:
        return (
            f"{self.scenario or 'scenario'} x{len(self.seeds)} seeds: lifetime mean "
            f"{self.mean_projected_lifetime_s / 86400.0:.2f} d "
            f"(min {self.min_projected_lifetime_s / 86400.0:.2f}, max {self.max_projected_lifetime_s / 86400.0:.2f}), "
            f"energy {self.ledger.total:.6f} J"
        )

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seeds": list(self.seeds),
            "uplinks": self.uplinks,
            "delivered": self.delivered,
            "mean_average_current_a": self.mean_average_current_a,
            "mean_projected_lifetime_s": self.mean_projected_lifetime_s,
            "min_projected_lifetime_s": self.min_projected_lifetime_s,
            "max_projected_lifetime_s": self.max_projected_lifetime_s,
            "ledger": self.ledger.to_dict(),
            "shares": self.ledger.shares(),
        }


def aggregate_reports(reports: List[SimReport]) -> SeedAggregate:
    """汇总 run_seeds 的结果

    Raises:
        ParameterError: 报告列表为空
    """
    if not reports:
        raise ParameterError("没有可汇总的报告")
    ledger = EnergyLedger()
    for report in reports:
        ledger = ledger.merge(report.ledger)
    lifetimes = [r.projected_lifetime_s for r in reports]
    return SeedAggregate(
        scenario=reports[0].scenario,
        seeds=[r.seed for r in reports],
        ledger=ledger,
        uplinks=sum(r.uplinks for r in reports),
        delivered=sum(r.delivered for r in reports),
        mean_average_current_a=float(np.mean([r.average_current_a for r in reports])),
        mean_projected_lifetime_s=float(np.mean(lifetimes)),
        min_projected_lifetime_s=min(lifetimes),
        max_projected_lifetime_s=max(lifetimes),
    )
