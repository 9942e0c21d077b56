"""Sentence parsing, payload armoring, reassembly, and report codecs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aisq import nmea


def make_sentence(payload_bits, **kwargs):
    payload, fill = nmea.encode_payload(payload_bits)
    return nmea.render_sentence(payload, fill, **kwargs)


class TestChecksum:
    def test_single_character_body(self):
        # XOR of one byte is that byte
        assert nmea.nmea_checksum("A") == 0x41

    def test_known_body(self):
        body = "AIVDM,1,1,,A,0,0"
        expected = 0
        for ch in body:
            expected ^= ord(ch)
        assert nmea.nmea_checksum(body) == expected

    def test_flipped_checksum_rejected(self):
        line = make_sentence(np.zeros(6, dtype=np.uint8))
        stated = int(line[-2:], 16)
        bad = line[:-2] + f"{stated ^ 0x01:02X}"
        with pytest.raises(nmea.ChecksumMismatch):
            nmea.parse_sentence(bad)


class TestParseSentence:
    def test_field_extraction(self):
        payload, fill = nmea.encode_payload(nmea.encode_position_report(1, 0, 0, 0, 0))
        line = nmea.render_sentence(
            payload, fill, fragment_count=2, fragment_index=1, message_id=3, radio_channel="B"
        )
        s = nmea.parse_sentence(line)
        assert s.fragment_count == 2
        assert s.fragment_index == 1
        assert s.message_id == 3
        assert s.radio_channel == "B"
        assert s.payload == payload
        assert s.fill_bits == fill

    def test_empty_message_id(self):
        line = make_sentence(np.zeros(6, dtype=np.uint8))
        assert nmea.parse_sentence(line).message_id is None

    def test_wrong_field_count(self):
        with pytest.raises(nmea.MalformedSentence):
            nmea.parse_sentence("!AIVDM,1,1,,A,0*23")

    def test_fragment_index_out_of_range(self):
        body = "AIVDM,1,2,,A,0,0"
        with pytest.raises(nmea.MalformedSentence):
            nmea.parse_sentence(f"!{body}*{nmea.nmea_checksum(body):02X}")

    def test_fill_bits_out_of_range(self):
        body = "AIVDM,1,1,,A,00,6"
        with pytest.raises(nmea.InvalidFillBits):
            nmea.parse_sentence(f"!{body}*{nmea.nmea_checksum(body):02X}")

    @given(st.binary(min_size=6, max_size=80))
    @settings(max_examples=300)
    def test_round_trip_random_bits(self, raw):
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        line = make_sentence(bits)
        s = nmea.parse_sentence(line)
        decoded = nmea.decode_payload(s.payload, s.fill_bits)
        assert np.array_equal(decoded, bits)


class TestPayloadArmoring:
    def test_zero_char(self):
        assert np.array_equal(nmea.decode_payload("0", 0), np.zeros(6, dtype=np.uint8))

    def test_w_is_63(self):
        # ascii 119 -> 71 -> minus 8 -> 63 -> all ones
        assert np.array_equal(nmea.decode_payload("w", 0), np.ones(6, dtype=np.uint8))

    def test_fill_bits_dropped(self):
        bits = nmea.decode_payload("00", 2)
        assert len(bits) == 10
        assert not bits.any()

    @pytest.mark.parametrize("ch", ["X", "[", "%", " ", "z"])
    def test_invalid_characters(self, ch):
        # ascii 88..95 and anything outside 48..87 / 96..119 is not armorable
        if 48 <= ord(ch) <= 87 or 96 <= ord(ch) <= 119:
            pytest.skip("valid char")
        with pytest.raises(nmea.InvalidArmorCharacter):
            nmea.decode_payload(ch, 0)

    def test_encode_decode_identity_all_values(self):
        for v in range(64):
            bits = np.array([(v >> k) & 1 for k in range(5, -1, -1)], dtype=np.uint8)
            payload, fill = nmea.encode_payload(bits)
            assert fill == 0
            assert np.array_equal(nmea.decode_payload(payload, fill), bits)


class TestMultipart:
    def test_single_fragment_passthrough(self):
        bits = nmea.encode_position_report(7, 0, 0, 0, 0)
        line = make_sentence(bits)
        out = list(nmea.assemble_multipart([nmea.parse_sentence(line)]))
        assert len(out) == 1
        assert np.array_equal(out[0], bits)

    def test_two_fragments_out_of_order(self):
        part1 = np.ones(12, dtype=np.uint8)
        part2 = np.zeros(12, dtype=np.uint8)
        s2 = nmea.parse_sentence(
            make_sentence(part2, fragment_count=2, fragment_index=2, message_id=5)
        )
        s1 = nmea.parse_sentence(
            make_sentence(part1, fragment_count=2, fragment_index=1, message_id=5)
        )
        out = list(nmea.assemble_multipart([s2, s1]))
        assert len(out) == 1
        assert np.array_equal(out[0], np.concatenate([part1, part2]))

    def test_orphan_fragment_dropped(self):
        asm = nmea.MultipartAssembler(window=4)
        orphan = nmea.parse_sentence(
            make_sentence(np.zeros(6, dtype=np.uint8), fragment_count=2, fragment_index=2, message_id=9)
        )
        assert asm.feed(orphan) is None
        filler = nmea.parse_sentence(make_sentence(np.zeros(6, dtype=np.uint8)))
        for _ in range(6):
            asm.feed(filler)
        assert asm.dropped_incomplete == 1


class TestPositionReport:
    def test_hand_packed_zeros(self):
        bits = nmea.encode_position_report(mmsi=1, sog=0, lat_raw=0, lon_raw=0, cog_tenths=0)
        r = nmea.decode_position_report(bits)
        assert (r.mmsi, r.sog, r.lat, r.lon, r.cog) == (1, 0, 0.0, 0.0, 0.0)

    def test_hand_packed_values(self):
        # lat 45 deg -> 27000000 raw; lon -30 deg -> -18000000 raw
        bits = nmea.encode_position_report(
            mmsi=123456789, sog=204, lat_raw=27_000_000, lon_raw=-18_000_000, cog_tenths=3599
        )
        r = nmea.decode_position_report(bits)
        assert r.mmsi == 123456789
        assert r.sog == 204
        assert r.lat == pytest.approx(45.0, abs=1e-9)
        assert r.lon == pytest.approx(-30.0, abs=1e-9)
        assert r.cog == pytest.approx(359.9)

    @pytest.mark.parametrize(
        "kwargs,field",
        [
            (dict(sog=1023), "sog"),
            (dict(cog_tenths=3600), "cog"),
            (dict(lat_raw=nmea.LAT_SENTINEL), "lat"),
            (dict(lon_raw=nmea.LON_SENTINEL), "lon"),
        ],
    )
    def test_sentinels_rejected(self, kwargs, field):
        base = dict(mmsi=1, sog=0, lat_raw=0, lon_raw=0, cog_tenths=0)
        base.update(kwargs)
        with pytest.raises(nmea.SentinelValue) as exc:
            nmea.decode_position_report(nmea.encode_position_report(**base))
        assert exc.value.field_name == field

    def test_all_sentinels_rejected(self):
        bits = nmea.encode_position_report(
            mmsi=1, sog=1023, lat_raw=nmea.LAT_SENTINEL, lon_raw=nmea.LON_SENTINEL, cog_tenths=3600
        )
        with pytest.raises(nmea.SentinelValue):
            nmea.decode_position_report(bits)

    def test_unsupported_type(self):
        bits = nmea.encode_position_report(1, 0, 0, 0, 0, msg_type=4)
        with pytest.raises(nmea.UnsupportedMessageType):
            nmea.decode_position_report(bits)

    @given(
        mmsi=st.integers(0, (1 << 30) - 1),
        sog=st.integers(0, 1022),
        lat_raw=st.integers(-90 * 600000, 90 * 600000),
        lon_raw=st.integers(-180 * 600000, 180 * 600000),
        cog=st.integers(0, 3599),
    )
    @settings(max_examples=300)
    def test_pack_decode_round_trip(self, mmsi, sog, lat_raw, lon_raw, cog):
        bits = nmea.encode_position_report(mmsi, sog, lat_raw, lon_raw, cog)
        r = nmea.decode_position_report(bits)
        assert r.mmsi == mmsi
        assert r.sog == sog
        assert abs(r.lat - lat_raw / 600000) <= 1.0 / 600000
        assert abs(r.lon - lon_raw / 600000) <= 1.0 / 600000
        assert r.cog == cog / 10.0

    @given(st.binary(min_size=0, max_size=40))
    @settings(max_examples=500)
    def test_fuzzed_bits_never_yield_invalid_record(self, raw):
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8)) if raw else np.zeros(0, np.uint8)
        try:
            r = nmea.decode_position_report(bits)
        except (
            nmea.UnsupportedMessageType,
            nmea.TruncatedPayload,
            nmea.SentinelValue,
        ):
            return
        assert 0 <= r.mmsi < 1 << 30
        assert 0 <= r.sog <= 1022
        assert abs(r.lat) <= 90.0
        assert abs(r.lon) <= 180.0
        assert 0.0 <= r.cog < 360.0


class TestStaticReport:
    def test_shiptype_70(self):
        mmsi, shiptype = nmea.decode_static_report(nmea.encode_static_report(42, 70))
        assert (mmsi, shiptype) == (42, 70)

    def test_truncated_type5(self):
        bits = nmea.encode_static_report(42, 70)[:100]
        with pytest.raises(nmea.TruncatedPayload):
            nmea.decode_static_report(bits)

    def test_nearly_empty_payload(self):
        with pytest.raises(nmea.TruncatedPayload):
            nmea.decode_static_report(np.zeros(3, dtype=np.uint8))

    def test_shiptype_zero_not_available(self):
        _, shiptype = nmea.decode_static_report(nmea.encode_static_report(42, 0))
        assert shiptype == 0

    def test_wrong_type(self):
        bits = nmea.encode_position_report(1, 0, 0, 0, 0)
        with pytest.raises(nmea.UnsupportedMessageType):
            nmea.decode_static_report(bits)
