"""Coefficient functions and the registry of built-in problems.

Every coefficient is a pure function of coordinate arrays ``(x, y)`` and is
evaluated batched at quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidCoefficient, NoExactSolution, UnknownProblem

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class NonlinearReaction(NamedTuple):
    r: Callable[[np.ndarray], np.ndarray]
    dr: Callable[[np.ndarray], np.ndarray]


def _zeros(x, y):
    return np.zeros(np.shape(x))


@dataclass(frozen=True)
class ProblemSpec:
    """Data of ``alpha u - eps Lap u + b . grad u + r(u) = f`` with Dirichlet/Neumann data.

    ``exact`` returns ``(u, du/dx, du/dy)``.  ``neumann_marker(x, y)`` selects
    which boundary edges of a generated mesh are Neumann (tested at edge
    midpoints); all other boundary edges are Dirichlet.
    """

    name: str
    diffusion: Field
    advection: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    reaction: Field
    source: Field
    dirichlet: Field
    neumann: Field = _zeros
    nonlinear: NonlinearReaction | None = None
    exact: Callable | None = None
    neumann_marker: Callable[[float, float], bool] | None = None
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if self.nonlinear is not None:
            r0 = float(np.asarray(self.nonlinear.r(np.zeros(1)))[0])
            if abs(r0) > 1e-14:
                raise InvalidCoefficient(f"{self.name}: nonlinear reaction must satisfy r(0) = 0, got {r0}")

    def diffusion_at(self, x, y) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.diffusion(x, y), dtype=float), np.shape(x))

    def advection_at(self, x, y) -> np.ndarray:
        """Velocity stacked on a trailing axis: shape ``x.shape + (2,)``."""
        bx, by = self.advection(x, y)
        shape = np.shape(x)
        return np.stack([np.broadcast_to(bx, shape), np.broadcast_to(by, shape)], axis=-1).astype(float)

    def reaction_at(self, x, y) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.reaction(x, y), dtype=float), np.shape(x))

    def exact_at(self, x, y):
        if self.exact is None:
            raise NoExactSolution(f"problem {self.name!r} has no exact solution")
        return self.exact(x, y)

    def check_diffusion(self, values) -> None:
        values = np.asarray(values)
        if values.size and not np.all(values > 0):
            raise InvalidCoefficient(f"{self.name}: diffusion must be positive, min is {values.min()!r}")


# -- boundary layer --------------------------------------------------------------


def _sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def boundary_layer_problem(eps: float = 1e-6, nonlinear: bool = True) -> ProblemSpec:
    """Interior layer along 2x - y = 0.25, transported by b = (1, 2)/sqrt(5)."""
    c = 1.0 / np.sqrt(5.0)
    s = np.sqrt(5.0 * eps)

    def diffusion(x, y):
        return eps * np.ones(np.shape(x))

    def advection(x, y):
        return c * np.ones(np.shape(x)), 2.0 * c * np.ones(np.shape(x))

    def reaction(x, y):
        return np.ones(np.shape(x))

    def exact(x, y):
        z = (2.0 * x - y - 0.25) / s
        sech2 = _sech2(z)
        return 0.5 * (1.0 - np.tanh(z)), -sech2 / s, 0.5 * sech2 / s

    def source(x, y):
        z = (2.0 * x - y - 0.25) / s
        u, ux, uy = exact(x, y)
        t_sech2 = np.tanh(z) * _sech2(z)
        uxx = (0.8 / eps) * t_sech2
        uyy = (0.2 / eps) * t_sech2
        f = -eps * (uxx + uyy) + c * ux + 2.0 * c * uy + u
        return f + u**2 if nonlinear else f

    def dirichlet(x, y):
        return exact(x, y)[0]

    return ProblemSpec(
        name="paper-boundary-layer" if nonlinear else "paper-boundary-layer-linear",
        diffusion=diffusion,
        advection=advection,
        reaction=reaction,
        source=source,
        dirichlet=dirichlet,
        nonlinear=NonlinearReaction(lambda u: u**2, lambda u: 2.0 * u) if nonlinear else None,
        exact=exact,
        description=f"interior layer, eps={eps:g}, b=(1,2)/sqrt(5), alpha=1" + (", r(u)=u^2" if nonlinear else ""),
    )


# -- smooth manufactured solutions ------------------------------------------------


def smooth_sine_problem(
    eps: float = 1.0,
    b=(1.0, 2.0),
    alpha: float = 1.0,
    nonlinear: NonlinearReaction | None = None,
    neumann_right: bool = False,
    name: str | None = None,
) -> ProblemSpec:
    """u = sin(pi x) sin(pi y); the source absorbs every term, including r(u)."""
    pi = np.pi
    bx, by = map(float, b)

    def exact(x, y):
        sx, sy = np.sin(pi * x), np.sin(pi * y)
        return sx * sy, pi * np.cos(pi * x) * sy, pi * sx * np.cos(pi * y)

    def source(x, y):
        u, ux, uy = exact(x, y)
        f = 2.0 * pi**2 * eps * u + bx * ux + by * uy + alpha * u
        if nonlinear is not None:
            f = f + nonlinear.r(u)
        return f

    def neumann(x, y):
        # outward normal (1, 0) on x = 1
        return eps * exact(x, y)[1]

    if name is None:
        name = "smooth-sine-mixed" if neumann_right else "smooth-sine"
    return ProblemSpec(
        name=name,
        diffusion=lambda x, y: eps * np.ones(np.shape(x)),
        advection=lambda x, y: (bx * np.ones(np.shape(x)), by * np.ones(np.shape(x))),
        reaction=lambda x, y: alpha * np.ones(np.shape(x)),
        source=source,
        dirichlet=lambda x, y: exact(x, y)[0],
        neumann=neumann,
        nonlinear=nonlinear,
        exact=exact,
        neumann_marker=(lambda x, y: x > 1.0 - 1e-12) if neumann_right else None,
        description=f"u=sin(pi x)sin(pi y), eps={eps:g}, b=({bx:g},{by:g}), alpha={alpha:g}"
        + (", Neumann on x=1" if neumann_right else ""),
    )


def poly_exact_problem() -> ProblemSpec:
    """Linear exact solution; every IP variant must reproduce it to round-off."""

    def exact(x, y):
        shape = np.shape(x)
        return 1.0 + 2.0 * x + 3.0 * y, 2.0 * np.ones(shape), 3.0 * np.ones(shape)

    return ProblemSpec(
        name="poly-exact",
        diffusion=lambda x, y: np.ones(np.shape(x)),
        advection=lambda x, y: (np.ones(np.shape(x)), 2.0 * np.ones(np.shape(x))),
        reaction=lambda x, y: np.ones(np.shape(x)),
        source=lambda x, y: 8.0 + exact(x, y)[0],
        dirichlet=lambda x, y: exact(x, y)[0],
        exact=exact,
        description="u=1+2x+3y, eps=1, b=(1,2), alpha=1",
    )


def pure_advection_patch_problem(eps: float = 1e-8) -> ProblemSpec:
    """Transport of a discontinuous inflow profile; no exact solution for eps > 0."""
    c = 1.0 / np.sqrt(5.0)
    return ProblemSpec(
        name="pure-advection-patch",
        diffusion=lambda x, y: eps * np.ones(np.shape(x)),
        advection=lambda x, y: (c * np.ones(np.shape(x)), 2.0 * c * np.ones(np.shape(x))),
        reaction=_zeros,
        source=_zeros,
        dirichlet=lambda x, y: np.where(2.0 * x - y - 0.25 > 0.0, 1.0, 0.0),
        description=f"eps={eps:g}, b=(1,2)/sqrt(5), f=0, piecewise constant inflow data",
    )


REGISTRY: dict[str, Callable[[], ProblemSpec]] = {
    "paper-boundary-layer": lambda: boundary_layer_problem(nonlinear=True),
    "paper-boundary-layer-linear": lambda: boundary_layer_problem(nonlinear=False),
    "smooth-sine": smooth_sine_problem,
    "smooth-sine-mixed": lambda: smooth_sine_problem(neumann_right=True),
    "poly-exact": poly_exact_problem,
    "pure-advection-patch": pure_advection_patch_problem,
}


def registry_get(name: str) -> ProblemSpec:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; available: {', '.join(sorted(REGISTRY))}") from None
    return factory()


def list_problems() -> list[tuple[str, str]]:
    return [(name, REGISTRY[name]().description) for name in REGISTRY]


def verify_manufactured(spec: ProblemSpec, points, h: float = 1e-4) -> float:
    """Max strong-form residual of the exact solution at ``points``.

    Second derivatives come from central differences of the exact gradient
    with step ``h``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    u, ux, uy = spec.exact_at(x, y)
    uxx = (spec.exact_at(x + h, y)[1] - spec.exact_at(x - h, y)[1]) / (2.0 * h)
    uyy = (spec.exact_at(x, y + h)[2] - spec.exact_at(x, y - h)[2]) / (2.0 * h)
    b = spec.advection_at(x, y)
    res = (
        spec.reaction_at(x, y) * u
        - spec.diffusion_at(x, y) * (uxx + uyy)
        + b[:, 0] * ux
        + b[:, 1] * uy
        - spec.source(x, y)
    )
    if spec.nonlinear is not None:
        res = res + spec.nonlinear.r(u)
    return float(np.max(np.abs(res)))
