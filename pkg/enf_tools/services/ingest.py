"""Readers for the capture formats: RIFF/WAVE audio and YUV4MPEG2 video."""

from __future__ import annotations

import io
import logging
import math
import struct
from collections.abc import Iterator
from fractions import Fraction
from pathlib import Path
from typing import BinaryIO

import numpy as np

from enf_tools.errors import InputError, ParseError, UnsupportedFormatError
from enf_tools.models import SampledSignal, StereoRecording, VideoLuma

logger = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

Y4M_MAGIC = b"YUV4MPEG2"
_Y4M_MAX_LINE = 4096
# Chroma layouts: (horizontal divisor, vertical divisor), None for no chroma planes.
_Y4M_CHROMA: dict[str, tuple[int, int] | None] = {
    "420": (2, 2),
    "420jpeg": (2, 2),
    "420paldv": (2, 2),
    "420mpeg2": (2, 2),
    "422": (2, 1),
    "444": (1, 1),
    "mono": None,
}


def _as_stream(data: bytes | bytearray | memoryview | BinaryIO) -> BinaryIO:
    if isinstance(data, bytes | bytearray | memoryview):
        return io.BytesIO(bytes(data))
    return data


class _CountingReader:
    """Wraps a stream and keeps the absolute byte offset for error messages."""

    def __init__(self, stream: BinaryIO) -> None:
        self._stream = stream
        self.offset = 0

    def read(self, n: int) -> bytes:
        chunk = self._stream.read(n)
        self.offset += len(chunk)
        return chunk

    def read_exact(self, n: int, what: str) -> bytes:
        start = self.offset
        chunk = self.read(n)
        if len(chunk) != n:
            raise ParseError(f"truncated {what}: expected {n} bytes, got {len(chunk)}", offset=start + len(chunk))
        return chunk

    def readline(self, limit: int) -> bytes:
        line = self._stream.readline(limit)
        self.offset += len(line)
        return line


# ---------------------------------------------------------------------------
# WAV


def _parse_fmt(body: bytes, offset: int) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise ParseError("fmt chunk shorter than 16 bytes", offset=offset)
    format_tag, channels, rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if format_tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 26:
            raise ParseError("extensible fmt chunk is missing its sub-format", offset=offset)
        # The sub-format GUID starts with the plain format tag.
        format_tag = struct.unpack("<H", body[24:26])[0]
    if format_tag not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedFormatError(f"unsupported WAV format tag 0x{format_tag:04X}", offset=offset)
    if (format_tag, bits) not in ((WAVE_FORMAT_PCM, 16), (WAVE_FORMAT_IEEE_FLOAT, 32)):
        raise UnsupportedFormatError(f"unsupported sample layout: format 0x{format_tag:04X} at {bits} bits", offset=offset)
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{channels} channels; only mono and stereo are supported", offset=offset)
    if rate == 0:
        raise ParseError("sample rate is zero", offset=offset)
    if block_align != channels * bits // 8:
        raise ParseError(f"block align {block_align} does not match {channels} x {bits} bits", offset=offset)
    return format_tag, channels, rate, bits


def parse_wav(data: bytes | bytearray | memoryview | BinaryIO) -> StereoRecording | SampledSignal:
    """Parse a PCM16 or float32 RIFF/WAVE stream.

    Stereo input becomes a StereoRecording with channel 0 (left) the mains
    reference and channel 1 (right) the photodiode; mono input a single
    SampledSignal. Integer samples are scaled by 1/32768.
    """
    reader = _CountingReader(_as_stream(data))
    header = reader.read(12)
    if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
        raise ParseError("not a RIFF/WAVE stream", offset=0)

    fmt: tuple[int, int, int, int] | None = None
    while True:
        chunk_offset = reader.offset
        chunk_header = reader.read(8)
        if not chunk_header:
            raise ParseError("no data chunk found", offset=chunk_offset)
        if len(chunk_header) < 8:
            raise ParseError("truncated chunk header", offset=chunk_offset)
        chunk_id, size = struct.unpack("<4sI", chunk_header)
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(reader.read_exact(size, "fmt chunk"), chunk_offset)
            if size % 2:
                reader.read(1)
        elif chunk_id == b"data":
            if fmt is None:
                raise ParseError("data chunk before fmt chunk", offset=chunk_offset)
            payload = reader.read_exact(size, "data chunk")
            break
        else:
            logger.debug("skipping WAV chunk %r (%d bytes)", chunk_id, size)
            reader.read_exact(size + (size % 2), f"{chunk_id.decode('latin-1')!r} chunk")

    format_tag, channels, rate, bits = fmt
    frame_bytes = channels * bits // 8
    if len(payload) % frame_bytes:
        raise ParseError(
            f"data chunk of {len(payload)} bytes is not a whole number of {frame_bytes}-byte frames",
            offset=reader.offset,
        )
    if format_tag == WAVE_FORMAT_PCM:
        samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    else:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    frames = samples.reshape(-1, channels)
    logger.debug("parsed WAV: %d frames, %d channel(s), %d Hz", frames.shape[0], channels, rate)

    if channels == 1:
        return SampledSignal(frames[:, 0], rate, label="mono")
    left = SampledSignal(frames[:, 0], rate, label="mains")
    right = SampledSignal(frames[:, 1], rate, label="photodiode")
    return StereoRecording(left=left, right=right, sample_rate_hz=rate)


def read_wav(path: str | Path) -> StereoRecording | SampledSignal:
    with open(path, "rb") as handle:
        return parse_wav(handle)


def select_channel(recording: StereoRecording | SampledSignal, channel: str, *, swap: bool = False) -> SampledSignal:
    """Pick ``left``, ``right`` or ``mono`` from a parsed WAV.

    A mono file's only channel also answers to ``left``.
    """
    if isinstance(recording, SampledSignal):
        if channel == "right":
            raise InputError(f"channel {channel!r} requested from a mono recording")
        return recording
    if swap:
        recording = recording.swapped()
    if channel == "left":
        return recording.left
    if channel == "right":
        return recording.right
    raise InputError(f"channel {channel!r} requested from a stereo recording; use left or right")


# ---------------------------------------------------------------------------
# Y4M


class Y4mReader:
    """Streaming YUV4MPEG2 reader that keeps the luma plane of each frame.

    The header is parsed on construction; ``frames()`` then yields one
    ``(height, width)`` uint8 plane at a time. Chroma is read and discarded so
    pipes work as well as files.
    """

    def __init__(self, stream: BinaryIO) -> None:
        self._reader = _CountingReader(stream)
        line = self._reader.readline(_Y4M_MAX_LINE)
        if not line.startswith(Y4M_MAGIC + b" ") or not line.endswith(b"\n"):
            raise ParseError("missing YUV4MPEG2 magic", offset=0)
        tags: dict[str, str] = {}
        for token in line[len(Y4M_MAGIC) :].decode("ascii", errors="replace").split():
            tags[token[0]] = token[1:]
        try:
            self.width = int(tags["W"])
            self.height = int(tags["H"])
            num, den = (int(part) for part in tags["F"].split(":"))
        except (KeyError, ValueError) as exc:
            raise ParseError(f"Y4M header needs W, H and F tags: {line.strip()!r}", offset=0) from exc
        if self.width <= 0 or self.height <= 0 or num <= 0 or den <= 0:
            raise ParseError(f"invalid Y4M geometry or rate: {line.strip()!r}", offset=0)
        self.frame_rate_hz = Fraction(num, den)
        self.colorspace = tags.get("C", "420jpeg")
        if self.colorspace not in _Y4M_CHROMA:
            raise UnsupportedFormatError(f"unsupported Y4M colorspace C{self.colorspace}", offset=0)
        self.header_bytes = self._reader.offset
        self.frames_read = 0
        self.luma_bytes = 0
        self.chroma_bytes = 0

    @property
    def luma_plane_bytes(self) -> int:
        return self.width * self.height

    @property
    def chroma_plane_bytes(self) -> int:
        """Bytes of both chroma planes in one frame."""
        layout = _Y4M_CHROMA[self.colorspace]
        if layout is None:
            return 0
        x_div, y_div = layout
        return 2 * math.ceil(self.width / x_div) * math.ceil(self.height / y_div)

    @property
    def bytes_consumed(self) -> int:
        return self._reader.offset

    def frames(self) -> Iterator[np.ndarray]:
        while True:
            frame_offset = self._reader.offset
            line = self._reader.readline(_Y4M_MAX_LINE)
            if not line:
                return
            if not line.startswith(b"FRAME") or not line.endswith(b"\n"):
                raise ParseError("expected FRAME header", offset=frame_offset, frame_index=self.frames_read)
            luma = self._reader.read(self.luma_plane_bytes)
            chroma = self._reader.read(self.chroma_plane_bytes) if len(luma) == self.luma_plane_bytes else b""
            if len(luma) != self.luma_plane_bytes or len(chroma) != self.chroma_plane_bytes:
                raise ParseError("stream ends inside an incomplete frame", offset=self._reader.offset, frame_index=self.frames_read)
            self.frames_read += 1
            self.luma_bytes += len(luma)
            self.chroma_bytes += len(chroma)
            yield np.frombuffer(luma, dtype=np.uint8).reshape(self.height, self.width)

    def video(self) -> VideoLuma:
        return VideoLuma(width=self.width, height=self.height, frame_rate_hz=self.frame_rate_hz, frames=self.frames())


def parse_y4m(data: bytes | bytearray | memoryview | BinaryIO) -> VideoLuma:
    """Parse a Y4M stream into a one-pass VideoLuma of luma planes."""
    return Y4mReader(_as_stream(data)).video()
