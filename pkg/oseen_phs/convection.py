"""Stationary convection fields generated from closed-form stream functions."""

from typing import Callable, Union

import numpy as np
import sympy

from oseen_phs.const import TANGENTIAL_VIOLATIONS
from oseen_phs.quadrature import interval_rule
from oseen_phs.utils.logger import logger
from oseen_phs.type import Mesh, Violation


X, Y = sympy.symbols("x y", real=True)

VectorField = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

STREAM_PRESETS: dict[str, str] = {
    "vortex": "sin(pi*x/L)**2*sin(pi*y/H)**2",
    "double-vortex": "sin(2*pi*x/L)**2*sin(pi*y/H)**2",
}


def _vectorize(expr: sympy.Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    fn = sympy.lambdify((X, Y), expr, "numpy")

    def evaluate(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        value = np.asarray(fn(x, np.asarray(y, dtype=float)), dtype=float)
        return value if value.shape == x.shape else np.full(x.shape, float(value))

    return evaluate


class TangentialField:
    """
    Divergence-free field b = (dpsi/dy, -dpsi/dx) of a stream function psi.
    Calling the field evaluates both components at arrays of x and y coordinates.
    """

    def __init__(self, stream_function: sympy.Expr) -> None:
        self.stream_function = sympy.sympify(stream_function)
        self.bx = sympy.diff(self.stream_function, Y)
        self.by = -sympy.diff(self.stream_function, X)
        self._bx = _vectorize(self.bx)
        self._by = _vectorize(self.by)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._bx(x, y), self._by(x, y)

    @property
    def divergence(self) -> sympy.Expr:
        return sympy.simplify(sympy.diff(self.bx, X) + sympy.diff(self.by, Y))

    @property
    def is_divergence_free(self) -> bool:
        return self.divergence == 0


def parse_stream_function(text: str, **parameters: float) -> sympy.Expr:
    """Parses `text` in the variables x and y; keyword arguments substitute named constants."""
    symbols = {"x": X, "y": Y}
    symbols.update({name: sympy.Float(value) for name, value in parameters.items()})

    return sympy.sympify(text, locals=symbols)


def generate_tangential_field(
    mesh: Mesh, stream_function: Union[str, sympy.Expr], amplitude: float = 1.0
) -> TangentialField:
    """
    Generates a convection field with vanishing divergence and normal trace.
    Args:
        mesh (Mesh): Domain; its bounding box provides the constants L (length) and H (height)
            used by the preset stream functions.
        stream_function (str | sympy.Expr): psi(x, y), constant on the boundary of the domain,
            or the name of a preset in STREAM_PRESETS.
        amplitude (float): Factor applied to psi.
    Returns:
        TangentialField: Callable field b(x, y).
    """

    lo, hi = mesh.points.min(axis=0), mesh.points.max(axis=0)
    if isinstance(stream_function, str):
        text = STREAM_PRESETS.get(stream_function, stream_function)
        psi = parse_stream_function(text, L=float(hi[0] - lo[0]), H=float(hi[1] - lo[1]))
    else:
        psi = stream_function

    return TangentialField(sympy.Float(amplitude) * psi if amplitude != 1.0 else psi)


def check_tangential(mesh: Mesh, field: VectorField, tol: float = 1e-10) -> list[Violation]:
    """
    Samples b.n at the Gauss points of every boundary edge.
    Returns:
        list[Violation]: One entry per edge where |b.n| exceeds `tol`.
    """

    rule = interval_rule(3)
    violations = []

    for i, j, tag in mesh.boundary_edges:
        p, q = mesh.points[i], mesh.points[j]
        tangent = q - p
        normal = np.array([tangent[1], -tangent[0]]) / np.linalg.norm(tangent)
        xs = p[0] + rule.points * tangent[0]
        ys = p[1] + rule.points * tangent[1]
        bx, by = field(xs, ys)
        flow = np.max(np.abs(bx * normal[0] + by * normal[1]))
        if flow > tol:
            violations.append(
                Violation(rule="normal flow", entity=f"edge ({i}, {j}) [{tag.value}]", detail=f"|b.n| = {flow:.3e}")
            )

    if violations:
        logger.warning(TANGENTIAL_VIOLATIONS.format(len(violations), tol))

    return violations
