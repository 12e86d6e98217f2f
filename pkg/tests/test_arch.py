import pytest
from dataclasses import replace

from smotune.arch import (
    STAGE_NAMES,
    TensorShape,
    decoder_shapes,
    encoder_shapes,
    format_table,
    plan,
    verify_alignment,
)
from smotune.errors import InvalidInput

IN256 = TensorShape(256, 256, 3)

# the reference table, cell for cell
TABLE = [
    ("Block 1", "256×256×64", "256×256×512"),
    ("Block 2", "128×128×128", "128×128×256"),
    ("Block 3", "64×64×256", "64×64×128"),
    ("Block 4", "32×32×512", "32×32×64"),
    ("Middle (Bottleneck)", "16×16×1024", "16×16×1024"),
]


def test_plan_reproduces_reference_table():
    rows = [(s.name, str(s.encoder_shape), str(s.decoder_shape)) for s in plan(IN256)]
    assert rows == TABLE


@pytest.mark.parametrize("size, bottleneck", [(128, 8), (256, 16), (512, 32), (64, 4), (32, 2)])
def test_spatial_scaling(size, bottleneck):
    enc = encoder_shapes(TensorShape(size, size, 3))
    dec = decoder_shapes(TensorShape(size, size, 1))
    assert [e.height for e in enc] == [size >> k for k in range(5)]
    assert enc[-1] == dec[-1] == TensorShape(bottleneck, bottleneck, 1024)
    assert [e.channels for e in enc] == [64, 128, 256, 512, 1024]
    assert verify_alignment(TensorShape(size, size, 3)).ok


def test_block1_decoder_at_512():
    assert decoder_shapes(TensorShape(512, 512, 3))[0] == TensorShape(512, 512, 512)


@pytest.mark.parametrize("shape", [(256, 128, 3), (100, 100, 3), (16, 16, 3), (48, 48, 1)])
def test_invalid_inputs(shape):
    with pytest.raises(InvalidInput):
        encoder_shapes(TensorShape(*shape))


@pytest.mark.parametrize("shape", [(0, 256, 3), (256, 256, -1), (2.5, 2, 2)])
def test_invalid_tensor_shape(shape):
    with pytest.raises(InvalidInput):
        TensorShape(*shape)


def test_corrupted_bottleneck_channels_fail_named():
    dec = decoder_shapes(IN256)
    dec[4] = replace(dec[4], channels=512)
    report = verify_alignment(IN256, decoder=dec)
    assert not report.ok
    assert [f.name for f in report.failures] == ["Middle (Bottleneck)"]
    assert "FAIL" in format_table(report)


def test_corrupted_spatial_stage_fails_named():
    dec = decoder_shapes(IN256)
    dec[1] = TensorShape(64, 64, 256)
    report = verify_alignment(IN256, decoder=dec)
    assert [f.name for f in report.failures] == ["Block 2"]


def test_missing_stage_reported():
    report = verify_alignment(IN256, decoder=decoder_shapes(IN256)[:4])
    assert [f.name for f in report.failures] == [STAGE_NAMES[-1]]


def test_format_table_lists_every_stage():
    text = format_table(verify_alignment(IN256))
    lines = text.splitlines()
    assert len(lines) == 6
    for (name, enc, dec), line in zip(TABLE, lines[1:]):
        assert line.startswith(name) and enc in line and dec in line and line.endswith("ok")
