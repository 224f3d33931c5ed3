import pytest
from hypothesis import given, settings, strategies as st

from stencilflow.descriptor import (
    DescriptorSyntaxError, Intent, KernelDescriptor, KernelType, ParameterGroup,
    ValidationError, VariableGroup, parse_descriptor, render, validate, validate_all,
)

from fixtures import VELOCITY_CCL, VELOCITY_CCL_REFORMATTED

EXPECTED = KernelDescriptor(
    name="UPDATE_VELOCITY",
    kernel_type="3DBLOCK",
    stencil=(1, 1, 1, 1, 1, 1),
    tile=(16, 16, 16),
    var_groups=(
        VariableGroup(("vx", "vy", "vz"), "VELOCITY", cached=True, intent=Intent.SEPARATEINOUT),
        VariableGroup(("p",), "PRESSURE", cached=True, intent=Intent.IN),
    ),
    parameters=(ParameterGroup(("density",), "DENSITY"),),
)


def _kernel(name="K", attrs='TYPE=3DBLOCK TILE="4,4,4"', body=""):
    return f"CCTK_CUDA_KERNEL {name} {attrs}\n{{\n{body}\n}}\n"


def test_velocity_descriptor_golden():
    assert parse_descriptor(VELOCITY_CCL) == [EXPECTED]


def test_velocity_descriptor_layout_insensitive():
    assert parse_descriptor(VELOCITY_CCL_REFORMATTED) == [EXPECTED]


def test_empty_file():
    assert parse_descriptor("") == []
    assert parse_descriptor("  # only a comment\n\n") == []


def test_two_kernels_in_order():
    text = _kernel("FIRST") + "\n" + _kernel("SECOND")
    assert [d.name for d in parse_descriptor(text)] == ["FIRST", "SECOND"]


def test_raw_parse_leaves_defaults_unset():
    body = 'CCTK_CUDA_KERNEL_VARIABLE { a } "A"'
    (d,) = parse_descriptor(_kernel(body=body))
    assert d.var_groups[0].cached is None
    assert d.var_groups[0].intent is None
    assert d.stencil is None


def test_duplicate_attribute_rejected():
    with pytest.raises(DescriptorSyntaxError, match="TYPE"):
        parse_descriptor(_kernel(attrs='TYPE=3DBLOCK TYPE=3DBLOCK TILE="1,1,1"'))


def test_syntax_error_reports_line_and_column():
    text = VELOCITY_CCL.replace('} "PRESSURE"', "}")
    with pytest.raises(DescriptorSyntaxError) as err:
        parse_descriptor(text)
    assert err.value.line >= 14


def test_quoted_and_bare_values_equivalent():
    a = parse_descriptor(_kernel(attrs='TYPE="3DBLOCK" TILE="4,4,4"'))
    b = parse_descriptor(_kernel(attrs='TYPE=3DBLOCK TILE="4,4,4"'))
    assert a == b


def test_validate_velocity_descriptor_unchanged():
    (raw,) = parse_descriptor(VELOCITY_CCL)
    v = validate(raw, ["vx", "vy", "vz", "p", "extra"])
    assert v.kernel_type is KernelType.THREEDBLOCK
    assert v.stencil == raw.stencil and v.tile == raw.tile
    assert v.var_groups == raw.var_groups
    assert v.parameters == raw.parameters


def test_validate_applies_defaults():
    (raw,) = parse_descriptor(_kernel(body='CCTK_CUDA_KERNEL_VARIABLE { a } "A"'))
    v = validate(raw, ["a"])
    assert v.var_groups[0].cached is False
    assert v.var_groups[0].intent is Intent.IN
    assert v.stencil == (0,) * 6


@pytest.mark.parametrize("attrs,kind", [
    ('TYPE=3DBLOCK TILE="0,16,16"', "bad-tile"),
    ('TYPE=3DBLOCK TILE="16,16"', "bad-tile"),
    ('TYPE=3DBLOCK TILE="4,4,4" STENCIL="1,1,1"', "bad-stencil"),
    ('TYPE=2DBLOCK TILE="4,4,4"', "unsupported-type"),
    ('TILE="4,4,4"', "missing-attribute"),
])
def test_validate_header_errors(attrs, kind):
    (raw,) = parse_descriptor(_kernel(attrs=attrs))
    with pytest.raises(ValidationError) as err:
        validate(raw, [])
    assert err.value.kind == kind


def test_negative_stencil_rejected():
    raw = KernelDescriptor("K", "3DBLOCK", (1, -1, 0, 0, 0, 0), (4, 4, 4))
    with pytest.raises(ValidationError) as err:
        validate(raw, [])
    assert err.value.kind == "bad-stencil"


def test_unknown_variable_named():
    (raw,) = parse_descriptor(_kernel(body='CCTK_CUDA_KERNEL_VARIABLE { q } "Q"'))
    with pytest.raises(ValidationError) as err:
        validate(raw, ["vx"])
    assert (err.value.kind, err.value.subject) == ("unknown-variable", "q")


def test_duplicate_variable():
    body = 'CCTK_CUDA_KERNEL_VARIABLE { a } "A"\nCCTK_CUDA_KERNEL_VARIABLE INTENT=OUT { a } "B"'
    (raw,) = parse_descriptor(_kernel(body=body))
    with pytest.raises(ValidationError) as err:
        validate(raw, ["a"])
    assert err.value.kind == "duplicate-variable"


def test_bad_intent_value():
    with pytest.raises(DescriptorSyntaxError, match="SIDEWAYS"):
        parse_descriptor(_kernel(body='CCTK_CUDA_KERNEL_VARIABLE INTENT=SIDEWAYS { a } "A"'))


def test_repeated_kernel_name_in_file():
    raws = parse_descriptor(_kernel("A") + _kernel("A"))
    with pytest.raises(ValidationError):
        validate_all(raws, [])


def test_render_round_trip_velocity_descriptor():
    raws = parse_descriptor(VELOCITY_CCL)
    assert parse_descriptor(render(raws)) == raws


def test_render_is_canonical():
    once = render(parse_descriptor(VELOCITY_CCL_REFORMATTED))
    assert render(parse_descriptor(once)) == once


_ident = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True).filter(
    lambda s: not s.upper().startswith("CCTK"))
_desc = st.text(alphabet="ABCDEFGHIJ _-.", min_size=0, max_size=8)


@st.composite
def descriptors(draw):
    names = draw(st.lists(_ident, min_size=1, max_size=8, unique=True))
    groups = []
    i = 0
    while i < len(names):
        k = draw(st.integers(1, len(names) - i))
        groups.append(VariableGroup(
            tuple(names[i:i + k]), draw(_desc),
            cached=draw(st.sampled_from([None, True, False])),
            intent=draw(st.sampled_from([None, *Intent])),
        ))
        i += k
    params = draw(st.lists(st.lists(_ident, min_size=1, max_size=3, unique=True), max_size=2))
    return KernelDescriptor(
        name=draw(st.from_regex(r"[A-Z][A-Z0-9_]{0,8}", fullmatch=True)),
        kernel_type=draw(st.sampled_from([None, "3DBLOCK"])),
        stencil=draw(st.one_of(st.none(), st.tuples(*[st.integers(0, 3)] * 6))),
        tile=draw(st.one_of(st.none(), st.tuples(*[st.integers(1, 64)] * 3))),
        var_groups=tuple(groups),
        parameters=tuple(ParameterGroup(tuple(p), draw(_desc)) for p in params),
    )


@settings(max_examples=150, deadline=None)
@given(st.lists(descriptors(), max_size=3))
def test_property_render_reparse(ds):
    assert parse_descriptor(render(ds)) == ds
