"""LoRa PHY 单元测试

测试符号时长、空口时间、EU868 DR 表与块对齐负载。
"""

import pytest

from core.phy import (
    DataRate,
    LoRaParams,
    block_aligned_payloads,
    datarate_for,
    datarate_params,
    downlink_params,
    max_payload,
    payload_symbols,
    symbol_duration,
    time_on_air,
)
from utils.errors import ParameterError, PayloadTooLargeError


def _oracle_toa(sf, bw, cr, payload, preamble=8, crc=True, explicit=True):
    """独立转写的空口时间公式，逐项展开"""
    t_sym = 2.0 ** sf / bw
    de = 1 if (sf >= 11 and bw == 125000) else 0
    ih = 0 if explicit else 1
    value = 8 * payload - 4 * sf + 28 + 16 * (1 if crc else 0) - 20 * ih
    blocks = -(-value // (4 * (sf - 2 * de)))
    n_payload = 8 + max(blocks * (cr + 4), 0)
    return (preamble + 4.25) * t_sym + n_payload * t_sym


class TestSymbolDuration:
    """测试符号时长"""

    @pytest.mark.parametrize("sf,expected", [(7, 1.024e-3), (9, 4.096e-3), (12, 32.768e-3)])
    def test_known_values(self, sf, expected):
        """2^sf / 125 kHz"""
        assert symbol_duration(sf, 125000) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("sf", [6, 13])
    def test_sf_out_of_range(self, sf):
        with pytest.raises(ParameterError):
            symbol_duration(sf, 125000)

    def test_non_positive_bw(self):
        with pytest.raises(ParameterError):
            symbol_duration(7, 0)


class TestTimeOnAir:
    """测试空口时间"""

    def test_sf7_12_bytes(self):
        """SF7/125 kHz/CR 4/5/12 B → 41.216 ms"""
        params = LoRaParams(sf=7, bw=125000, cr=1)
        assert time_on_air(params, 12) * 1e3 == pytest.approx(41.216, abs=1e-9)

    def test_sf12_51_bytes(self):
        """SF12 开启低速率优化，51 B → 2465.792 ms"""
        params = LoRaParams(sf=12)
        assert params.low_dr_optimize is True
        assert time_on_air(params, 51) * 1e3 == pytest.approx(2465.792, abs=1e-9)

    def test_zero_payload_has_minimum_block(self):
        """负载为 0 时仍至少有 8 个负载符号"""
        params = LoRaParams(sf=7, explicit_header=False, crc_on=False)
        t_sym = symbol_duration(7, 125000)
        assert payload_symbols(params, 0) == 8
        assert time_on_air(params, 0) == pytest.approx((8 + 4.25 + 8) * t_sym)

    def test_matches_oracle_on_grid(self):
        """sf 7..12 × 负载 0..51 × cr 1..4 共 1248 组与独立公式相差 < 1 µs"""
        cases = 0
        for sf in range(7, 13):
            for cr in range(1, 5):
                params = LoRaParams(sf=sf, bw=125000, cr=cr)
                for payload in range(0, 52):
                    expected = _oracle_toa(sf, 125000, cr, payload)
                    assert abs(time_on_air(params, payload) - expected) < 1e-6
                    cases += 1
        assert cases == 1248

    def test_oracle_header_and_crc_variants(self):
        """隐式报头与关闭 CRC 的组合同样与独立公式一致"""
        for sf in range(7, 13):
            for crc in (True, False):
                for explicit in (True, False):
                    params = LoRaParams(sf=sf, crc_on=crc, explicit_header=explicit)
                    for payload in (0, 1, 12, 33, 51):
                        expected = _oracle_toa(sf, 125000, 1, payload, crc=crc, explicit=explicit)
                        assert time_on_air(params, payload) == pytest.approx(expected, abs=1e-9)

    def test_non_decreasing_in_payload(self):
        """ToA(n+1) >= ToA(n)，进入新符号块时严格增加"""
        for index in range(6):
            dr = DataRate(index)
            params = datarate_params(dr)
            previous = time_on_air(params, 0)
            for payload in range(1, max_payload(dr) + 1):
                current = time_on_air(params, payload)
                assert current >= previous
                if payload_symbols(params, payload) > payload_symbols(params, payload - 1):
                    assert current > previous
                previous = current

    def test_decreasing_in_datarate(self):
        """相同负载下 DR_k 的空口时间大于 DR_{k+1}"""
        for payload in (1, 12, 51):
            toas = [time_on_air(datarate_params(DataRate(i)), payload) for i in range(6)]
            assert all(a > b for a, b in zip(toas, toas[1:]))

    @pytest.mark.parametrize("dr,too_big", [(0, 52), (2, 52), (3, 116), (5, 223)])
    def test_regional_max_enforced(self, dr, too_big):
        """超过 EU868 区域最大负载时报错"""
        params = datarate_params(DataRate(dr))
        with pytest.raises(PayloadTooLargeError) as exc_info:
            time_on_air(params, too_big)
        assert exc_info.value.dr == dr
        assert exc_info.value.max_len == too_big - 1

    def test_regional_max_can_be_disabled(self):
        params = datarate_params(DataRate(0))
        assert time_on_air(params, 200, enforce_regional_max=False) > time_on_air(params, 51)

    def test_phy_limit(self):
        with pytest.raises(PayloadTooLargeError):
            time_on_air(LoRaParams(sf=7, bw=500000), 256, enforce_regional_max=False)

    def test_negative_payload(self):
        with pytest.raises(ParameterError):
            time_on_air(LoRaParams(), -1)


class TestDataRate:
    """测试 EU868 DR 表"""

    @pytest.mark.parametrize("index,sf,de", [(0, 12, True), (3, 9, False), (5, 7, False)])
    def test_datarate_params(self, index, sf, de):
        params = datarate_params(DataRate(index))
        assert params.sf == sf
        assert params.bw == 125000
        assert params.low_dr_optimize is de

    @pytest.mark.parametrize("index", [-1, 6])
    def test_invalid_index(self, index):
        with pytest.raises(ParameterError):
            DataRate(index)

    def test_bool_is_rejected(self):
        with pytest.raises(ParameterError):
            DataRate(True)

    def test_reverse_lookup(self):
        assert datarate_for(LoRaParams(sf=9)) == DataRate(3)
        assert datarate_for(LoRaParams(sf=9, bw=250000)) is None

    def test_max_payload_table(self):
        assert [max_payload(DataRate(i)) for i in range(6)] == [51, 51, 51, 115, 222, 222]

    def test_explicit_ldro_override(self):
        """显式给出 low_dr_optimize 时不再自动推导"""
        assert LoRaParams(sf=12, low_dr_optimize=False).low_dr_optimize is False
        assert LoRaParams(sf=7, low_dr_optimize=True).low_dr_optimize is True

    def test_invalid_coding_rate(self):
        with pytest.raises(ParameterError):
            LoRaParams(cr=5)

    def test_downlink_params_disable_crc(self):
        params = downlink_params(datarate_params(DataRate(3)))
        assert params.crc_on is False
        assert params.sf == 9


class TestBlockAlignedPayloads:
    """测试块对齐负载长度"""

    def test_each_length_ends_a_block(self):
        params = datarate_params(DataRate(5))
        lengths = block_aligned_payloads(params, 51)
        assert lengths
        for length in lengths:
            assert payload_symbols(params, length + 1) > payload_symbols(params, length)

    def test_sorted_and_within_bounds(self):
        params = datarate_params(DataRate(0))
        lengths = block_aligned_payloads(params, 51, min_len=5)
        assert lengths == sorted(lengths)
        assert all(5 <= n <= 51 for n in lengths)

    def test_block_step_matches_symbol_capacity(self):
        """SF7 每个符号块容纳 3.5 B，相邻块对齐长度相差 3 或 4 B"""
        lengths = block_aligned_payloads(datarate_params(DataRate(5)), 60)
        steps = {b - a for a, b in zip(lengths, lengths[1:])}
        assert steps == {3, 4}
