"""能耗模型单元测试

测试功率模型、状态能耗、每比特能耗、能耗账本与 Rx 窗口校准表。
"""

from dataclasses import replace

import pytest

from core.energy_model import (
    EnergyLedger,
    PowerProfile,
    PowerState,
    TransactionOutcome,
    check_calibration,
    energy_per_bit,
    energy_per_bit_curve,
    ledger_add,
    profile_rx_energy_mj,
    rx_energy_source,
    rx_window_breakdown,
    rx_window_duration,
    state_energy,
    table1_rows,
    transaction_rx_energy,
    tx_energy,
    tx_rx_dominance,
)
from core.phy import DataRate, LoRaParams, block_aligned_payloads, datarate_params, time_on_air
from utils.errors import CalibrationMissingError, ParameterError, PayloadTooLargeError


class TestPowerProfile:
    """测试功率模型"""

    def test_defaults(self):
        profile = PowerProfile()
        assert profile.supply_voltage == 3.3
        assert profile.current(PowerState.SLEEP) == 1e-6
        assert profile.current("tx") == 0.02

    def test_mcu_current_derived_from_clock(self):
        """未给出 MCU 电流时按 150 µA/MHz 推导"""
        assert PowerProfile(mcu_clock_mhz=8.0).mcu_active_current == pytest.approx(1.2e-3)
        assert PowerProfile(mcu_active_current=5e-4).mcu_active_current == 5e-4

    def test_tx_below_rx_rejected(self):
        """最大功率档 Tx 电流低于 Rx 电流时报错"""
        with pytest.raises(ParameterError):
            PowerProfile(rx_current=0.03)

    def test_negative_current_rejected(self):
        with pytest.raises(ParameterError):
            PowerProfile(sleep_current=-1e-6)

    def test_unknown_tx_power(self):
        with pytest.raises(CalibrationMissingError):
            PowerProfile().tx_current(15)

    def test_unknown_state(self):
        with pytest.raises(ParameterError):
            PowerProfile().current("hibernate")

    def test_from_dict_overrides_base(self):
        """场景覆盖只替换给出的键"""
        base = PowerProfile()
        profile = PowerProfile.from_dict({"sleep_current_a": 2e-6}, base=base)
        assert profile.sleep_current == 2e-6
        assert profile.rx_current == base.rx_current
        assert profile.tx_current_by_power == base.tx_current_by_power

    def test_from_dict_clock_rederives_mcu_current(self):
        profile = PowerProfile.from_dict({"mcu_clock_mhz": 4.0}, base=PowerProfile())
        assert profile.mcu_active_current == pytest.approx(6e-4)

    def test_round_trip_keys(self):
        data = PowerProfile().to_dict()
        assert set(data["tx_current_by_power"]) == {str(p) for p in range(2, 15)}
        assert PowerProfile.from_dict(data) == PowerProfile()

    def test_sleep_mode_selects_mcu_current(self):
        """EM4 睡眠：20 nA 替代整节点 sleep_current"""
        profile = PowerProfile(sleep_mode="em4")
        assert profile.current(PowerState.SLEEP) == pytest.approx(20e-9)
        assert PowerProfile().current(PowerState.SLEEP) == 1e-6

    def test_sensor_standby_and_power_cut(self):
        """传感器待机 1 µA 计入睡眠电流，断电后不计"""
        powered = PowerProfile(sleep_mode="em4", sensor_standby_current=1e-6)
        assert powered.current(PowerState.SLEEP) == pytest.approx(1.02e-6)
        cut = PowerProfile(sleep_mode="em4", sensor_standby_current=1e-6, sensor_power_cut=True)
        assert cut.current(PowerState.SLEEP) == pytest.approx(20e-9)
        assert state_energy(cut, PowerState.SLEEP, 1.0) == pytest.approx(3.3 * 20e-9)

    @pytest.mark.parametrize("kwargs", [
        {"sleep_mode": "em9"},
        {"sleep_modes": {"em2": 0.0}},
        {"sensor_standby_current": -1e-6},
    ])
    def test_invalid_sleep_settings(self, kwargs):
        with pytest.raises(ParameterError):
            PowerProfile(**kwargs)

    def test_from_dict_adds_sleep_mode(self):
        """场景补充的睡眠模式与基础模式合并"""
        profile = PowerProfile.from_dict(
            {"sleep_modes_a": {"em2": 1.1e-6}, "sleep_mode": "em2"}, base=PowerProfile()
        )
        assert profile.sleep_modes == {"em2": 1.1e-6, "em4": 20e-9}
        assert profile.current(PowerState.SLEEP) == pytest.approx(1.1e-6)


class TestStateEnergy:
    """测试 E = V·I·t"""

    def test_zero_duration(self):
        assert state_energy(PowerProfile(), PowerState.SLEEP, 0.0) == 0.0

    def test_sleep_one_second(self):
        """1 µA @ 3.3 V 持续 1 s → 3.3 µJ"""
        assert state_energy(PowerProfile(), PowerState.SLEEP, 1.0) == pytest.approx(3.3e-6)

    def test_sense_ten_ms(self):
        """10 mA @ 3.3 V 持续 10 ms → 330 µJ"""
        assert state_energy(PowerProfile(), PowerState.SENSE, 0.01) == pytest.approx(330e-6)

    def test_tx_power_level(self):
        profile = PowerProfile()
        assert state_energy(profile, PowerState.TX, 1.0, 2) == pytest.approx(3.3 * 0.01063)

    def test_negative_duration(self):
        with pytest.raises(ParameterError):
            state_energy(PowerProfile(), PowerState.RX, -0.1)

    def test_missing_power_level(self):
        with pytest.raises(CalibrationMissingError):
            state_energy(PowerProfile(), PowerState.TX, 1.0, 20)


class TestEnergyPerBit:
    """测试每比特能耗"""

    def test_composition(self):
        """DR5 12 B 等于 Tx 状态 41.216 ms 能耗 / 96 bit"""
        profile = PowerProfile()
        expected = state_energy(profile, PowerState.TX, 0.041216, 14) / 96
        assert energy_per_bit(profile, datarate_params(DataRate(5)), 14, 12) == pytest.approx(expected)

    def test_decreasing_in_datarate(self):
        """固定 12 B 时 DR 越高每比特能耗越低"""
        profile = PowerProfile()
        values = [energy_per_bit(profile, datarate_params(DataRate(i)), 14, 12) for i in range(6)]
        assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("index", range(6))
    def test_non_increasing_over_block_aligned_payloads(self, index):
        """块对齐负载 1..51 B 上每比特能耗单调不增"""
        profile = PowerProfile()
        params = datarate_params(DataRate(index))
        values = [energy_per_bit(profile, params, 14, n) for n in block_aligned_payloads(params, 51)]
        assert len(values) > 3
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_byte_step_sawtooth_at_block_boundary(self):
        """逐字节时块边界处会上跳：DR5 8 B → 9 B"""
        profile = PowerProfile()
        params = datarate_params(DataRate(5))
        assert energy_per_bit(profile, params, 14, 9) > energy_per_bit(profile, params, 14, 8)

    def test_zero_payload_rejected(self):
        with pytest.raises(ParameterError):
            energy_per_bit(PowerProfile(), LoRaParams(), 14, 0)

    def test_regional_max_propagates(self):
        with pytest.raises(PayloadTooLargeError):
            energy_per_bit(PowerProfile(), datarate_params(DataRate(0)), 14, 52)

    def test_curve_skips_oversized_payloads(self):
        rows = energy_per_bit_curve(PowerProfile(), [DataRate(0), DataRate(5)], [12, 60])
        assert [(r["dr"], r["payload_bytes"]) for r in rows] == [(0, 12), (5, 12), (5, 60)]
        assert rows[1]["toa_ms"] == 41.216
        assert rows[1]["energy_per_bit_nj"] == pytest.approx(
            energy_per_bit(PowerProfile(), datarate_params(DataRate(5)), 14, 12) * 1e9
        )


class TestEnergyLedger:
    """测试能耗账本"""

    def test_add_single(self):
        ledger = ledger_add(EnergyLedger(), PowerState.TX, 1e-3)
        assert ledger.total == pytest.approx(1e-3)
        assert ledger.get(PowerState.TX) == pytest.approx(1e-3)

    def test_add_zero_is_identity(self):
        ledger = ledger_add(EnergyLedger(), PowerState.TX, 0.0)
        assert ledger.total == 0.0

    def test_additivity(self):
        """Tx 1 mJ + Rx 2 mJ → 合计 3 mJ"""
        ledger = ledger_add(ledger_add(EnergyLedger(), "tx", 1e-3), "rx", 2e-3)
        assert ledger.total == pytest.approx(3e-3)
        assert ledger.get("tx") == pytest.approx(1e-3)
        assert ledger.get("rx") == pytest.approx(2e-3)

    def test_ledger_add_keeps_original(self):
        original = EnergyLedger()
        ledger_add(original, "sleep", 1.0)
        assert original.total == 0.0

    def test_negative_energy_rejected(self):
        with pytest.raises(ParameterError):
            ledger_add(EnergyLedger(), PowerState.RX, -1e-9)

    def test_conservation_and_shares(self):
        ledger = EnergyLedger()
        for _ in range(1000):
            ledger.add(PowerState.SLEEP, 1e-7)
            ledger.add(PowerState.TX, 3e-3)
        assert ledger.conservation_error() < 1e-9
        shares = ledger.shares()
        assert sum(shares.values()) == pytest.approx(1.0)
        assert shares["sense"] == 0.0

    def test_merge(self):
        a = ledger_add(EnergyLedger(), "tx", 1.0)
        b = ledger_add(EnergyLedger(), "rx", 2.0)
        merged = a.merge(b)
        assert merged.total == pytest.approx(3.0)
        assert a.total == 1.0

    def test_dict_round_trip(self):
        ledger = ledger_add(EnergyLedger(), "sense", 0.5)
        assert EnergyLedger.from_dict(ledger.to_dict()) == ledger


class TestRxWindows:
    """测试 Rx 窗口能耗"""

    def test_dr0_no_ack(self, rx_cal):
        """DR0 无 ACK → 6.4 + 1.3 = 7.7 mJ"""
        assert transaction_rx_energy(rx_cal, DataRate(0), TransactionOutcome.NO_ACK) == pytest.approx(7.7)

    def test_dr5_ack_rx1(self, rx_cal):
        assert transaction_rx_energy(rx_cal, DataRate(5), "ack_rx1") == pytest.approx(1.7)

    def test_dr2_ack_rx2(self, rx_cal):
        """DR2 RX2 收到 ACK → 1.6 + 5.6 = 7.2 mJ"""
        assert transaction_rx_energy(rx_cal, DataRate(2), TransactionOutcome.ACK_RX2) == pytest.approx(7.2)

    def test_unconfirmed_equals_no_ack(self, rx_cal):
        for index in range(6):
            dr = DataRate(index)
            assert transaction_rx_energy(rx_cal, dr, "unconfirmed") == transaction_rx_energy(rx_cal, dr, "no_ack")

    def test_ack_rx1_missing_without_profile(self, rx_cal):
        """DR0 无 rx1_ack 校准且无功率模型回退时报错"""
        with pytest.raises(CalibrationMissingError):
            transaction_rx_energy(rx_cal, DataRate(0), TransactionOutcome.ACK_RX1)

    def test_ack_rx1_profile_fallback(self, rx_cal, profile):
        rx1, rx2, source = rx_window_breakdown(rx_cal, DataRate(0), "ack_rx1", profile)
        assert rx2 is None
        assert source == "profile-derived"
        assert rx1 == pytest.approx(profile_rx_energy_mj(profile, rx_cal, DataRate(0), ack=True))
        assert rx_energy_source(rx_cal, DataRate(0), "ack_rx1") == "profile-derived"
        assert rx_energy_source(rx_cal, DataRate(4), "ack_rx1") == "table"

    @pytest.mark.parametrize("outcome", ["ack_rx1", "ack_rx2", "no_ack", "unconfirmed"])
    def test_breakdown_source_matches_label(self, rx_cal, profile, outcome):
        """拆分结果的来源标签与 rx_energy_source 一致"""
        for index in range(6):
            _, _, source = rx_window_breakdown(rx_cal, DataRate(index), outcome, profile)
            assert source == rx_energy_source(rx_cal, DataRate(index), outcome)

    def test_unknown_outcome(self, rx_cal):
        with pytest.raises(ParameterError):
            transaction_rx_energy(rx_cal, DataRate(0), "maybe")

    def test_window_duration_symbol_timeout(self, rx_cal):
        """无 ACK 窗口 = 5 个符号 + 11 ms 开销"""
        assert rx_window_duration(rx_cal, DataRate(5), ack=False) == pytest.approx(5 * 1.024e-3 + 0.011)

    def test_window_duration_ack_frame(self, rx_cal):
        """ACK 窗口 = 12 B 下行帧（CRC 关闭）的空口时间，不加开销"""
        params = datarate_params(DataRate(3))
        expected = time_on_air(replace(params, crc_on=False), 12)
        assert rx_window_duration(rx_cal, DataRate(3), ack=True) == pytest.approx(expected)
        assert expected == pytest.approx(0.144384, abs=1e-9)

    @pytest.mark.parametrize("dr, toa_s, energy_mj", [(5, 0.041216, 1.4554), (4, 0.072192, 2.5491)])
    def test_derived_ack_energy_is_rx_current_times_toa(self, profile, rx_cal, dr, toa_s, energy_mj):
        """推导的 ACK 能耗 = rx_current × 电压 × ACK 帧空口时间"""
        assert rx_window_duration(rx_cal, DataRate(dr), ack=True) == pytest.approx(toa_s, abs=1e-9)
        derived = profile_rx_energy_mj(profile, rx_cal, DataRate(dr), ack=True)
        assert derived == pytest.approx(profile.rx_current * profile.supply_voltage * toa_s * 1e3)
        assert derived == pytest.approx(energy_mj, abs=1e-3)

    def test_invalid_calibration(self, rx_cal):
        with pytest.raises(ParameterError):
            replace(rx_cal, rx2_ack=1.0)


class TestTable1:
    """测试 Rx 窗口能耗表重建"""

    EXPECTED = {
        0: (12.0, None, 7.7),
        1: (8.9, None, 4.6),
        2: (7.2, None, 2.9),
        3: (6.9, None, 2.6),
        4: (6.3, 2.9, 2.0),
        5: (6.1, 1.7, 1.8),
    }

    def test_all_rows_reconstructed(self, rx_cal):
        rows = table1_rows(rx_cal)
        assert [row.dr for row in rows] == list(range(6))
        for row in rows:
            worst, best, noack = self.EXPECTED[row.dr]
            assert row.ack_worst == pytest.approx(worst, abs=0.05)
            assert row.noack == pytest.approx(noack, abs=0.05)
            if best is None:
                assert row.ack_best is None
            else:
                assert row.ack_best == pytest.approx(best, abs=0.05)
            assert row.mismatches == []

    def test_perturbed_rx2_ack_flags_every_worst_case(self, rx_cal):
        """rx2_ack 改为 5.7 时每行 ACK worst 合计都不符"""
        rows = table1_rows(replace(rx_cal, rx2_ack=5.7))
        assert all("ack_worst" in row.mismatches for row in rows)
        assert all("noack" not in row.mismatches for row in rows)


class TestCalibrationChecks:
    """测试校准一致性检查"""

    def test_shipped_calibration_passes(self, profile, rx_cal):
        checks = check_calibration(profile, rx_cal)
        failed = [c.name for c in checks if not c.ok]
        assert failed == []

    def test_tight_tolerance_fails(self, profile, rx_cal):
        checks = check_calibration(profile, rx_cal, tolerance=0.01)
        assert any(not c.ok for c in checks)

    def test_tx_dominance_near_ten(self, profile, rx_cal):
        """DR0 12 B 上行 Tx 能耗约为无 ACK Rx 能耗的 10 倍"""
        ratio = tx_rx_dominance(profile, rx_cal)
        assert 5.0 <= ratio <= 15.0
        expected = tx_energy(profile, datarate_params(DataRate(0)), 14, 12) * 1e3 / 7.7
        assert ratio == pytest.approx(expected)
        assert ratio == pytest.approx(9.9006, abs=1e-3)
