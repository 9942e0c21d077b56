"""NMEA 0183 AIVDM/AIVDO sentence parsing and AIS bit-level codecs.

Covers the path from raw sentence text to decoded position/static reports:
checksum verification, 6-bit payload armoring, multi-fragment reassembly,
and field extraction for message types 1/2/3 (position) and 5 (static).
Class B reports (18/19/24) and type 27 long-range reports are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np


class MalformedSentence(ValueError):
    """Sentence does not have the expected AIVDM field structure."""


class ChecksumMismatch(ValueError):
    """Stated checksum does not match the XOR of the sentence body."""


class InvalidFillBits(ValueError):
    """Fill bits outside 0..5."""


class InvalidArmorCharacter(ValueError):
    """Payload character outside the 6-bit armoring alphabet."""


class UnsupportedMessageType(ValueError):
    """Message type this decoder does not handle."""


class TruncatedPayload(ValueError):
    """Bit payload shorter than the message type requires."""


class SentinelValue(ValueError):
    """A kinematic field carries its 'not available' sentinel."""

    def __init__(self, field_name: str):
        super().__init__(f"sentinel value in field {field_name!r}")
        self.field_name = field_name


@dataclass(frozen=True)
class NmeaSentence:
    talker_tag: str
    fragment_count: int
    fragment_index: int
    message_id: int | None
    radio_channel: str
    payload: str
    fill_bits: int
    checksum: int


def nmea_checksum(body: str) -> int:
    """XOR of all characters strictly between the leading '!' and the '*'."""
    cs = 0
    for ch in body:
        cs ^= ord(ch)
    return cs


def parse_sentence(line: str) -> NmeaSentence:
    """Parse one NMEA 0183 AIVDM/AIVDO sentence and verify its checksum."""
    line = line.strip()
    if not line.startswith("!"):
        raise MalformedSentence("sentence must start with '!'")
    star = line.rfind("*")
    if star < 0:
        raise MalformedSentence("missing '*' checksum delimiter")
    body = line[1:star]
    cs_text = line[star + 1 : star + 3]
    if len(cs_text) != 2:
        raise MalformedSentence("checksum must be two hex digits")
    try:
        stated = int(cs_text, 16)
    except ValueError:
        raise MalformedSentence(f"non-hex checksum {cs_text!r}") from None

    fields = body.split(",")
    if len(fields) != 7:
        raise MalformedSentence(f"expected 7 fields, got {len(fields)}")
    tag, cnt_s, idx_s, mid_s, chan, payload, fill_s = fields

    try:
        cnt = int(cnt_s)
        idx = int(idx_s)
    except ValueError:
        raise MalformedSentence("non-integer fragment fields") from None
    if not (1 <= idx <= cnt):
        raise MalformedSentence(f"fragment index {idx} outside 1..{cnt}")
    mid = None
    if mid_s:
        try:
            mid = int(mid_s)
        except ValueError:
            raise MalformedSentence(f"non-integer message id {mid_s!r}") from None
    if len(chan) > 1:
        raise MalformedSentence(f"radio channel {chan!r} is not a single character")
    try:
        fill = int(fill_s)
    except ValueError:
        raise MalformedSentence(f"non-integer fill bits {fill_s!r}") from None
    if not (0 <= fill <= 5):
        raise InvalidFillBits(f"fill bits {fill} outside 0..5")

    computed = nmea_checksum(body)
    if computed != stated:
        raise ChecksumMismatch(f"stated {stated:02X}, computed {computed:02X}")

    return NmeaSentence(
        talker_tag=tag,
        fragment_count=cnt,
        fragment_index=idx,
        message_id=mid,
        radio_channel=chan,
        payload=payload,
        fill_bits=fill,
        checksum=stated,
    )


def render_sentence(
    payload: str,
    fill_bits: int,
    fragment_count: int = 1,
    fragment_index: int = 1,
    message_id: int | None = None,
    radio_channel: str = "A",
    talker_tag: str = "AIVDM",
) -> str:
    """Build a checksummed sentence around an already-armored payload."""
    mid = "" if message_id is None else str(message_id)
    body = f"{talker_tag},{fragment_count},{fragment_index},{mid},{radio_channel},{payload},{fill_bits}"
    return f"!{body}*{nmea_checksum(body):02X}"


def decode_payload(payload: str, fill_bits: int) -> np.ndarray:
    """Unpack an armored payload into a bit vector (uint8, MSB-first per char).

    Armoring: c = ascii - 48, minus 8 more if the result exceeds 40. Valid
    characters are ASCII 48..87 and 96..119. The final `fill_bits` bits are
    padding and are dropped.
    """
    if not (0 <= fill_bits <= 5):
        raise InvalidFillBits(f"fill bits {fill_bits} outside 0..5")
    values = np.empty(len(payload), dtype=np.uint8)
    for i, ch in enumerate(payload):
        a = ord(ch)
        if not (48 <= a <= 87 or 96 <= a <= 119):
            raise InvalidArmorCharacter(f"character {ch!r} (ascii {a})")
        v = a - 48
        if v > 40:
            v -= 8
        values[i] = v
    # expand each 6-bit value, MSB first
    shifts = np.arange(5, -1, -1, dtype=np.uint8)
    bits = ((values[:, None] >> shifts[None, :]) & 1).reshape(-1)
    n = 6 * len(payload) - fill_bits
    if n < 0:
        raise TruncatedPayload("fill bits exceed payload size")
    return bits[:n].astype(np.uint8)


def encode_payload(bits: np.ndarray) -> tuple[str, int]:
    """Pack a bit vector into an armored payload string; returns (text, fill)."""
    bits = np.asarray(bits, dtype=np.uint8)
    fill = (-len(bits)) % 6
    padded = np.concatenate([bits, np.zeros(fill, dtype=np.uint8)])
    groups = padded.reshape(-1, 6)
    shifts = np.arange(5, -1, -1, dtype=np.uint8)
    values = (groups << shifts[None, :]).sum(axis=1)
    chars = []
    for v in values:
        v = int(v)
        chars.append(chr(v + 48 if v < 40 else v + 56))
    return "".join(chars), fill


class MultipartAssembler:
    """Reassembles fragmented payloads keyed by (message_id, radio_channel).

    Pending groups that have not completed within `window` subsequent
    sentences are dropped and counted, bounding memory on lossy streams.
    """

    def __init__(self, window: int = 64):
        self.window = window
        self._pending: dict[tuple, dict] = {}
        self._clock = 0
        self.dropped_incomplete = 0

    def feed(self, sentence: NmeaSentence) -> np.ndarray | None:
        """Add one sentence; returns the full bit vector once a group completes."""
        self._clock += 1
        self._expire()
        if sentence.fragment_count == 1:
            return decode_payload(sentence.payload, sentence.fill_bits)
        key = (sentence.message_id, sentence.radio_channel)
        group = self._pending.get(key)
        if group is None:
            group = {"first_seen": self._clock, "count": sentence.fragment_count, "frags": {}}
            self._pending[key] = group
        group["frags"][sentence.fragment_index] = decode_payload(
            sentence.payload, sentence.fill_bits
        )
        if len(group["frags"]) == group["count"] and set(group["frags"]) == set(
            range(1, group["count"] + 1)
        ):
            del self._pending[key]
            return np.concatenate([group["frags"][i] for i in range(1, group["count"] + 1)])
        return None

    def _expire(self) -> None:
        stale = [k for k, g in self._pending.items() if self._clock - g["first_seen"] > self.window]
        for k in stale:
            del self._pending[k]
            self.dropped_incomplete += 1

    def flush(self) -> None:
        """Drop all pending groups (end of stream)."""
        self.dropped_incomplete += len(self._pending)
        self._pending.clear()


def assemble_multipart(
    sentences: Iterable[NmeaSentence], window: int = 64
) -> Iterator[np.ndarray]:
    """Yield complete payload bit vectors from an ordered sentence stream."""
    asm = MultipartAssembler(window=window)
    for s in sentences:
        bits = asm.feed(s)
        if bits is not None:
            yield bits


def _take_uint(bits: np.ndarray, start: int, width: int) -> int:
    chunk = bits[start : start + width]
    value = 0
    for b in chunk:
        value = (value << 1) | int(b)
    return value


def _take_int(bits: np.ndarray, start: int, width: int) -> int:
    v = _take_uint(bits, start, width)
    if v >= 1 << (width - 1):
        v -= 1 << width
    return v


def _put_uint(bits: np.ndarray, start: int, width: int, value: int) -> None:
    if value < 0:
        value += 1 << width
    for k in range(width):
        bits[start + width - 1 - k] = (value >> k) & 1


# AIS coordinate unit: 1/10000 arc-minute = 1/600000 degree.
COORD_SCALE = 600_000

SOG_SENTINEL = 1023
COG_SENTINEL = 3600
LON_SENTINEL = 181 * COORD_SCALE
LAT_SENTINEL = 91 * COORD_SCALE


@dataclass(frozen=True)
class PositionReport:
    """Kinematic fields of a type 1/2/3 report; timestamp is supplied by the caller."""

    mmsi: int
    sog: int  # tenths of knots, 0..1022
    lon: float  # degrees
    lat: float  # degrees
    cog: float  # degrees, < 360


def decode_position_report(bits: np.ndarray) -> PositionReport:
    """Extract kinematics from a type 1/2/3 position report.

    Field offsets: mmsi 8..37, sog 50..59 (0.1 kn), lon 61..88 (signed,
    1/600000 deg), lat 89..115 (signed, 1/600000 deg), cog 116..127 (0.1 deg).
    Reports carrying any 'not available' sentinel are rejected.
    """
    if len(bits) < 6:
        raise TruncatedPayload(f"{len(bits)} bits")
    msg_type = _take_uint(bits, 0, 6)
    if msg_type not in (1, 2, 3):
        raise UnsupportedMessageType(f"type {msg_type}")
    if len(bits) < 128:
        raise TruncatedPayload(f"{len(bits)} bits for type {msg_type}")
    mmsi = _take_uint(bits, 8, 30)
    sog = _take_uint(bits, 50, 10)
    lon_raw = _take_int(bits, 61, 28)
    lat_raw = _take_int(bits, 89, 27)
    cog = _take_uint(bits, 116, 12)
    if sog >= SOG_SENTINEL:
        raise SentinelValue("sog")
    if cog >= COG_SENTINEL:
        raise SentinelValue("cog")
    if lon_raw == LON_SENTINEL or abs(lon_raw) > 180 * COORD_SCALE:
        raise SentinelValue("lon")
    if lat_raw == LAT_SENTINEL or abs(lat_raw) > 90 * COORD_SCALE:
        raise SentinelValue("lat")
    return PositionReport(
        mmsi=mmsi,
        sog=sog,
        lon=lon_raw / COORD_SCALE,
        lat=lat_raw / COORD_SCALE,
        cog=cog / 10.0,
    )


def encode_position_report(
    mmsi: int,
    sog: int,
    lat_raw: int,
    lon_raw: int,
    cog_tenths: int,
    msg_type: int = 1,
) -> np.ndarray:
    """Pack a 168-bit type 1/2/3 report. Coordinates in 1/600000-degree units."""
    bits = np.zeros(168, dtype=np.uint8)
    _put_uint(bits, 0, 6, msg_type)
    _put_uint(bits, 8, 30, mmsi)
    _put_uint(bits, 50, 10, sog)
    _put_uint(bits, 61, 28, lon_raw)
    _put_uint(bits, 89, 27, lat_raw)
    _put_uint(bits, 116, 12, cog_tenths)
    return bits


STATIC_MIN_BITS = 240
STATIC_SHIPTYPE_START = 232


def decode_static_report(bits: np.ndarray) -> tuple[int, int]:
    """Extract (mmsi, shiptype) from a type 5 static voyage report."""
    if len(bits) < 6:
        raise TruncatedPayload(f"{len(bits)} bits")
    msg_type = _take_uint(bits, 0, 6)
    if msg_type != 5:
        raise UnsupportedMessageType(f"type {msg_type}")
    if len(bits) < STATIC_MIN_BITS:
        raise TruncatedPayload(f"{len(bits)} bits for type 5")
    mmsi = _take_uint(bits, 8, 30)
    shiptype = _take_uint(bits, STATIC_SHIPTYPE_START, 8)
    return mmsi, shiptype


def encode_static_report(mmsi: int, shiptype: int) -> np.ndarray:
    """Pack a minimal 424-bit type 5 report (only mmsi and shiptype set)."""
    bits = np.zeros(424, dtype=np.uint8)
    _put_uint(bits, 0, 6, 5)
    _put_uint(bits, 8, 30, mmsi)
    _put_uint(bits, STATIC_SHIPTYPE_START, 8, shiptype)
    return bits
