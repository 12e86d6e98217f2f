"""Symbolic shape plan for the DenseNet201-encoder U-Net.

Channel counts per stage are fixed; only the spatial size scales with the
input. For a 256x256 input the plan is::

    Block     Encoder        Decoder
    Block 1   256x256x64     256x256x512
    Block 2   128x128x128    128x128x256
    Block 3   64x64x256      64x64x128
    Block 4   32x32x512      32x32x64
    Middle    16x16x1024     16x16x1024
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InvalidInput

__all__ = [
    "TensorShape",
    "StagePlan",
    "StageCheck",
    "AlignmentReport",
    "STAGE_NAMES",
    "ENCODER_CHANNELS",
    "DECODER_CHANNELS",
    "encoder_shapes",
    "decoder_shapes",
    "plan",
    "verify_alignment",
    "format_table",
]

STAGE_NAMES = ("Block 1", "Block 2", "Block 3", "Block 4", "Middle (Bottleneck)")
ENCODER_CHANNELS = (64, 128, 256, 512, 1024)
DECODER_CHANNELS = (512, 256, 128, 64, 1024)
MIN_INPUT = 32


@dataclass(frozen=True)
class TensorShape:
    height: int
    width: int
    channels: int

    def __post_init__(self):
        for name in ("height", "width", "channels"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise InvalidInput(f"{name} must be a positive integer, got {value!r}")

    def __str__(self):
        return f"{self.height}×{self.width}×{self.channels}"

    def spatial(self) -> tuple:
        return self.height, self.width


@dataclass(frozen=True)
class StagePlan:
    name: str
    encoder_shape: TensorShape
    decoder_shape: TensorShape


def _side(input: TensorShape) -> int:
    s = input.height
    if input.width != s:
        raise InvalidInput(f"input must be square, got {input.height}×{input.width}")
    if s < MIN_INPUT or s & (s - 1):
        raise InvalidInput(f"input size must be a power of two >= {MIN_INPUT}, got {s}")
    return s


def encoder_shapes(input: TensorShape) -> list:
    s = _side(input)
    return [TensorShape(s >> k, s >> k, c) for k, c in enumerate(ENCODER_CHANNELS)]


def decoder_shapes(input: TensorShape) -> list:
    s = _side(input)
    return [TensorShape(s >> k, s >> k, c) for k, c in enumerate(DECODER_CHANNELS)]


def plan(input: TensorShape) -> list:
    return [StagePlan(n, e, d) for n, e, d in
            zip(STAGE_NAMES, encoder_shapes(input), decoder_shapes(input))]


@dataclass(frozen=True)
class StageCheck:
    name: str
    encoder_shape: TensorShape
    decoder_shape: TensorShape
    ok: bool
    detail: str


@dataclass(frozen=True)
class AlignmentReport:
    stages: tuple

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.stages)

    @property
    def failures(self) -> list:
        return [s for s in self.stages if not s.ok]


def verify_alignment(input: TensorShape, encoder: Optional[Sequence[TensorShape]] = None,
                     decoder: Optional[Sequence[TensorShape]] = None) -> AlignmentReport:
    """Check skip-connection alignment stage by stage.

    Every stage needs equal encoder/decoder spatial size; the bottleneck must
    match in all three dimensions. ``encoder``/``decoder`` override the
    computed plans, which is how a corrupted table is checked.
    """
    encoder = list(encoder) if encoder is not None else encoder_shapes(input)
    decoder = list(decoder) if decoder is not None else decoder_shapes(input)
    checks = []
    for n, name in enumerate(STAGE_NAMES):
        e = encoder[n] if n < len(encoder) else None
        d = decoder[n] if n < len(decoder) else None
        if e is None or d is None:
            checks.append(StageCheck(name, e, d, False, "stage missing"))
            continue
        if e.spatial() != d.spatial():
            checks.append(StageCheck(name, e, d, False, f"spatial mismatch {e} vs {d}"))
        elif n == len(STAGE_NAMES) - 1 and e != d:
            checks.append(StageCheck(name, e, d, False, f"bottleneck mismatch {e} vs {d}"))
        else:
            checks.append(StageCheck(name, e, d, True, "aligned"))
    return AlignmentReport(tuple(checks))


def format_table(report: AlignmentReport) -> str:
    rows = [("Block", "DenseNet-201 (Encoder)", "U-Net (Decoder)", "Status")]
    for s in report.stages:
        rows.append((s.name, str(s.encoder_shape or "-"), str(s.decoder_shape or "-"),
                     "ok" if s.ok else f"FAIL: {s.detail}"))
    widths = [max(len(r[k]) for r in rows) for k in range(4)]
    lines = ["  ".join(cell.ljust(widths[k]) for k, cell in enumerate(r)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"
