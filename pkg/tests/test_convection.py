import numpy as np
import pytest
import sympy

from oseen_phs.convection import X, Y, STREAM_PRESETS, TangentialField, check_tangential, generate_tangential_field
from oseen_phs.convection import parse_stream_function


@pytest.mark.parametrize("preset", sorted(STREAM_PRESETS))
def test_presets_are_tangential(channel, preset):
    b = generate_tangential_field(channel, preset, 2.0)

    assert b.is_divergence_free
    assert check_tangential(channel, b) == []


def test_uniform_stream_flags_horizontal_walls(channel):
    b = generate_tangential_field(channel, "x")
    violations = check_tangential(channel, b)

    assert len(violations) == 8
    assert all(v.rule == "normal flow" and "[wall]" in v.entity for v in violations)


def test_field_components():
    b = TangentialField(X**2 * Y)
    bx, by = b(np.array([1.0, 2.0]), np.array([3.0, 1.0]))

    assert np.allclose(bx, [1.0, 4.0])
    assert np.allclose(by, [-6.0, -4.0])


def test_constant_component_broadcasts():
    bx, by = TangentialField(Y)(np.zeros(4), np.ones(4))

    assert bx.shape == (4,) and np.allclose(bx, 1.0)
    assert by.shape == (4,) and np.allclose(by, 0.0)


def test_parse_stream_function_substitutes_constants():
    psi = parse_stream_function("sin(pi*x/L)*y", L=2.0)

    assert psi.free_symbols == {X, Y}
    assert float(psi.subs({X: 1.0, Y: 3.0})) == pytest.approx(3.0)


def test_amplitude_scales(channel):
    weak = generate_tangential_field(channel, "vortex")
    strong = generate_tangential_field(channel, "vortex", 3.0)
    x, y = np.array([0.3, 1.1]), np.array([0.4, 0.7])

    assert np.allclose(3.0 * weak(x, y)[0], strong(x, y)[0])


def test_sympy_expression_input(channel):
    b = generate_tangential_field(channel, sympy.sin(sympy.pi * X) ** 2 * sympy.sin(sympy.pi * Y) ** 2)

    assert b.is_divergence_free
