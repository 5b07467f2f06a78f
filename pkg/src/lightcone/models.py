"""
Builtin model spacetimes.

Every model here is foliated, ``g = -n^2 dt^2 + h_ij dx^i dx^j``, written in
Cartesian-type chart coordinates, and has closed-form curvature that the test
suite uses as an oracle. Models are looked up by name (or alias) in `MODELS`.
"""

from __future__ import annotations

import math
from typing import Any, ClassVar, Optional

import numpy as np
from lexicon import Lexicon

from .domain import ChartDomain
from .exceptions import SpecError
from .parser.expression import Expression, coordinate_names, parse_expression


class Model:
    """
    Base class of builtin models.

    Subclasses set `name`, `aliases` and `defaults` (parameter name to default
    value), and implement `lapse`, `spatial`, `domain` and `expressions`.
    ``lapse`` and ``spatial`` are batched: they take points of shape
    ``(P, N)`` and return shapes ``(P,)`` and ``(P, n, n)``.
    """

    name: ClassVar[str] = ""
    aliases: ClassVar[tuple[str, ...]] = ()
    defaults: ClassVar[dict[str, Any]] = {}
    #: Fixed spacetime dimension, or ``None`` for any ``dim >= 2``.
    fixed_dim: ClassVar[Optional[int]] = None

    def __init__(self, dim: int = 4, **params: Any) -> None:
        if self.fixed_dim is not None and dim != self.fixed_dim:
            raise SpecError(
                "dimension mismatch: model {!r} needs dim = {}, got {}".format(
                    self.name, self.fixed_dim, dim
                )
            )
        if dim < 2:
            raise SpecError("spacetime dimension must be at least 2")
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise SpecError(
                "model {!r} takes no parameter(s) {}".format(
                    self.name, ", ".join(sorted(unknown))
                )
            )
        self.dim = dim
        self.params = dict(self.defaults, **params)
        self.validate()

    def validate(self) -> None:
        pass

    def __repr__(self) -> str:
        args = ", ".join(
            "{}={!r}".format(k, v) for k, v in sorted(self.params.items())
        )
        return "<{} dim={} {}>".format(self.name, self.dim, args).replace(
            " >", ">"
        )

    @property
    def n(self) -> int:
        return self.dim - 1

    def lapse(self, x: np.ndarray) -> np.ndarray:
        return np.ones(len(x))

    def spatial(self, x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.eye(self.n), (len(x), self.n, self.n)).copy()

    def domain(self) -> ChartDomain:
        return ChartDomain.unbounded(self.dim)

    def expressions(self) -> tuple[dict[str, float], str, dict[str, str]]:
        """
        The model written in the document expression language.

        :returns: ``(constants, lapse, spatial)`` where ``spatial`` maps
            ``gij`` keys (``i <= j``, 1-based) to expressions; omitted
            off-diagonal entries are zero.
        """
        return {}, "1", {self.key(i, i): "1" for i in range(1, self.dim)}

    @staticmethod
    def key(i: int, j: int) -> str:
        return "g{}{}".format(i, j)

    def sections(self, expressions: bool = False) -> dict[str, dict]:
        """
        Document sections describing this model.

        By default the short builtin form (``model = "name"`` plus
        parameters); with ``expressions=True`` the equivalent foliated
        expression document, which parses back to the same metric.
        """
        names = coordinate_names(self.dim)
        domain = self.domain().sections(names)
        if not expressions:
            model: dict[str, Any] = {"model": self.name, "dim": self.dim}
            model.update(self.params)
            return {"model": model, "domain": domain}
        constants, lapse, spatial = self.expressions()
        return {
            "model": {"dim": self.dim},
            "constants": constants,
            "lapse": {"lapse": lapse},
            "spatial": spatial,
            "domain": domain,
        }


def _radius2(x: np.ndarray) -> np.ndarray:
    return np.einsum("pi,pi->p", x[:, 1:], x[:, 1:])


def _sum_of_squares(dim: int) -> str:
    return " + ".join("x{}^2".format(i) for i in range(1, dim))


def _conformal(factor: np.ndarray, n: int) -> np.ndarray:
    return factor[:, None, None] * np.eye(n)[None, :, :]


class Minkowski(Model):
    name = "minkowski"
    aliases = ("flat", "mink")


class Schwarzschild(Model):
    """
    Schwarzschild exterior in Schwarzschild time with Cartesian-type
    spatial coordinates: ``n = sqrt(1 - 2M/r)``,
    ``h = delta + 2M/(r - 2M) * x x^T / r^2``.
    """

    name = "schwarzschild"
    aliases = ("schw",)
    defaults = {"M": 1.0}
    fixed_dim = 4

    def validate(self) -> None:
        if not self.params["M"] > 0:
            raise SpecError("schwarzschild mass must be positive")

    @property
    def mass(self) -> float:
        return float(self.params["M"])

    def lapse(self, x: np.ndarray) -> np.ndarray:
        r = np.sqrt(_radius2(x))
        with np.errstate(all="ignore"):
            return np.sqrt(1.0 - 2.0 * self.mass / r)

    def spatial(self, x: np.ndarray) -> np.ndarray:
        m = self.mass
        xs = x[:, 1:]
        r2 = _radius2(x)
        r = np.sqrt(r2)
        with np.errstate(all="ignore"):
            coeff = 2.0 * m / ((r - 2.0 * m) * r2)
        outer = np.einsum("pi,pj->pij", xs, xs)
        return np.eye(3)[None] + coeff[:, None, None] * outer

    def domain(self) -> ChartDomain:
        inf = float("inf")
        edge = 60.0 * self.mass
        return ChartDomain(
            box=((-inf, inf),) + ((-edge, edge),) * 3,
            r_min=2.2 * self.mass,
        )

    def expressions(self) -> tuple[dict[str, float], str, dict[str, str]]:
        r2 = "({})".format(_sum_of_squares(4))
        r = "sqrt{}".format(r2)
        spatial = {}
        for i in range(1, 4):
            for j in range(i, 4):
                bump = "2*M*x{}*x{}/(({} - 2*M)*{})".format(i, j, r, r2)
                spatial[self.key(i, j)] = (
                    "1 + " + bump if i == j else bump
                )
        return {"M": self.mass}, "sqrt(1 - 2*M/{})".format(r), spatial


class DeSitterSlicing(Model):
    """
    de Sitter space in flat slicing: ``n = 1``, ``h = exp(2 sqrt(K) t) delta``;
    constant curvature ``K``.
    """

    name = "desitter_slicing"
    aliases = ("desitter", "ds")
    defaults = {"K": 1.0}

    def validate(self) -> None:
        if not self.params["K"] > 0:
            raise SpecError("de Sitter curvature K must be positive")

    def spatial(self, x: np.ndarray) -> np.ndarray:
        rate = 2.0 * math.sqrt(self.params["K"])
        return _conformal(np.exp(rate * x[:, 0]), self.n)

    def domain(self) -> ChartDomain:
        inf = float("inf")
        return ChartDomain(box=((-10.0, 10.0),) + ((-inf, inf),) * self.n)

    def expressions(self) -> tuple[dict[str, float], str, dict[str, str]]:
        factor = "exp(2*sqrt(K)*t)"
        return (
            {"K": float(self.params["K"])},
            "1",
            {self.key(i, i): factor for i in range(1, self.dim)},
        )


class FLRW(Model):
    """
    Spatially flat FLRW, ``n = 1``, ``h = a(t)^2 delta`` for a scale factor
    expression ``a`` in ``t``.
    """

    name = "flrw"
    aliases = ("frw",)
    defaults = {"a": "exp(t)"}

    def validate(self) -> None:
        self._a: Expression = parse_expression(str(self.params["a"]), ["t"])

    def spatial(self, x: np.ndarray) -> np.ndarray:
        a = np.broadcast_to(self._a.evaluate({"t": x[:, 0]}), (len(x),))
        return _conformal(a * a, self.n)

    def domain(self) -> ChartDomain:
        inf = float("inf")
        return ChartDomain(box=((-5.0, 5.0),) + ((-inf, inf),) * self.n)

    def expressions(self) -> tuple[dict[str, float], str, dict[str, str]]:
        factor = "({})^2".format(self.params["a"])
        return {}, "1", {self.key(i, i): factor for i in range(1, self.dim)}


class FlatSpatialTorus(Model):
    """
    Flat spacetime ``R x T^n`` with every spatial axis of period ``L``.
    """

    name = "flat_spatial_torus"
    aliases = ("torus",)
    defaults = {"L": 2.0}

    def validate(self) -> None:
        if not self.params["L"] > 0:
            raise SpecError("torus period L must be positive")

    def domain(self) -> ChartDomain:
        inf = float("inf")
        return ChartDomain(
            box=((-inf, inf),) * self.dim,
            periods=(None,) + (float(self.params["L"]),) * self.n,
        )


class StaticSphere(Model):
    """
    Einstein static universe ``-dt^2 + psi^2 delta``, ``psi = 2/(1+K|x|^2)``:
    the round spatial sphere of radius ``1/sqrt(K)`` in stereographic
    coordinates (the pole at infinity is outside the chart).
    """

    name = "static_sphere"
    aliases = ("einstein_static", "esu")
    defaults = {"K": 1.0}

    def validate(self) -> None:
        if not self.params["K"] > 0:
            raise SpecError("sphere curvature K must be positive")

    def spatial(self, x: np.ndarray) -> np.ndarray:
        psi = 2.0 / (1.0 + self.params["K"] * _radius2(x))
        return _conformal(psi * psi, self.n)

    def domain(self) -> ChartDomain:
        inf = float("inf")
        edge = 20.0 / math.sqrt(self.params["K"])
        return ChartDomain(box=((-inf, inf),) + ((-edge, edge),) * self.n)

    def expressions(self) -> tuple[dict[str, float], str, dict[str, str]]:
        factor = "(2/(1 + K*({})))^2".format(_sum_of_squares(self.dim))
        return (
            {"K": float(self.params["K"])},
            "1",
            {self.key(i, i): factor for i in range(1, self.dim)},
        )


MODELS = Lexicon()
for _cls in (
    Minkowski,
    Schwarzschild,
    DeSitterSlicing,
    FLRW,
    FlatSpatialTorus,
    StaticSphere,
):
    MODELS[_cls.name] = _cls
    for _alias in _cls.aliases:
        MODELS.alias(_alias, to=_cls.name)


def lookup(name: str) -> type[Model]:
    """
    Model class for ``name`` or one of its aliases.

    :raises: `.SpecError` for unknown names.
    """
    try:
        return MODELS[name]
    except KeyError:
        raise SpecError(
            "unknown model {!r}; builtin models are {}".format(
                name, ", ".join(sorted(MODELS.keys()))
            )
        ) from None
