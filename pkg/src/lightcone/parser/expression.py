"""
Arithmetic expressions for metric components.

Grammar (``^`` is right-associative and binds tighter than unary minus, so
``-x1^2`` is ``-(x1^2)`` and ``2^3^2`` is ``2^9``)::

    expr   :: term [ ('+' | '-') term ]*
    term   :: unary [ ('*' | '/') unary ]*
    unary  :: ('-' | '+') unary | power
    power  :: atom [ '^' unary ]
    atom   :: number | func '(' expr ')' | name | '(' expr ')'
    func   :: exp | log | sin | cos | sinh | cosh | sqrt

Names are the time coordinate ``t``, spatial coordinates ``x1`` .. ``xn``,
the constants ``pi`` and ``e``, and any user constants declared alongside the
expression. Parsed expressions evaluate elementwise over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np
import pyparsing as pp

from ..exceptions import ParseError, SpecError

pp.ParserElement.enable_packrat()

Array = Union[float, np.ndarray]

FUNCTIONS: dict[str, Callable[[Array], Array]] = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "sqrt": np.sqrt,
}

CONSTANTS = {"pi": math.pi, "e": math.e}

BINARY: dict[str, Callable[[Array, Array], Array]] = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}

# Binding strength used when rendering back to text.
_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


class Node:
    """
    Base class of expression syntax tree nodes.
    """

    def evaluate(self, env: Mapping[str, Array]) -> Array:
        raise NotImplementedError

    def names(self) -> set[str]:
        return set()

    def render(self) -> str:
        raise NotImplementedError

    @property
    def precedence(self) -> int:
        return 5


@dataclass(frozen=True)
class Number(Node):
    value: float

    def evaluate(self, env: Mapping[str, Array]) -> Array:
        return self.value

    def render(self) -> str:
        return repr(float(self.value))


@dataclass(frozen=True)
class Name(Node):
    name: str

    def evaluate(self, env: Mapping[str, Array]) -> Array:
        return env[self.name]

    def names(self) -> set[str]:
        return {self.name}

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def evaluate(self, env: Mapping[str, Array]) -> Array:
        return FUNCTIONS[self.func](self.arg.evaluate(env))

    def names(self) -> set[str]:
        return self.arg.names()

    def render(self) -> str:
        return "{}({})".format(self.func, self.arg.render())


@dataclass(frozen=True)
class Negate(Node):
    arg: Node

    def evaluate(self, env: Mapping[str, Array]) -> Array:
        return np.negative(self.arg.evaluate(env))

    def names(self) -> set[str]:
        return self.arg.names()

    def render(self) -> str:
        inner = self.arg.render()
        if self.arg.precedence <= _PRECEDENCE["neg"]:
            inner = "(" + inner + ")"
        return "-" + inner

    @property
    def precedence(self) -> int:
        return _PRECEDENCE["neg"]


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, env: Mapping[str, Array]) -> Array:
        return BINARY[self.op](
            self.left.evaluate(env), self.right.evaluate(env)
        )

    def names(self) -> set[str]:
        return self.left.names() | self.right.names()

    def render(self) -> str:
        mine = self.precedence
        left, right = self.left.render(), self.right.render()
        # '^' groups to the right, everything else to the left.
        if self.op == "^":
            if self.left.precedence <= mine:
                left = "(" + left + ")"
            if self.right.precedence < mine:
                right = "(" + right + ")"
        else:
            if self.left.precedence < mine:
                left = "(" + left + ")"
            if self.right.precedence <= mine:
                right = "(" + right + ")"
        return "{} {} {}".format(left, self.op, right)

    @property
    def precedence(self) -> int:
        return _PRECEDENCE[self.op]


def _fold_left(tokens: pp.ParseResults) -> Node:
    items = list(tokens[0])
    node = items[0]
    for op, right in zip(items[1::2], items[2::2]):
        node = Binary(op, node, right)
    return node


def _build_grammar() -> pp.ParserElement:
    number = pp.Regex(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
    number.set_parse_action(lambda t: Number(float(t[0])))
    number.set_name("number")
    ident = pp.Word(pp.alphas + "_", pp.alphanums + "_")
    ident.set_name("name")
    lpar = pp.Suppress("(")
    rpar = pp.Suppress(")")

    expr = pp.Forward()
    unary = pp.Forward()
    func = pp.one_of(list(FUNCTIONS), as_keyword=True)
    call = func + lpar + expr + rpar
    call.set_parse_action(lambda t: Call(t[0], t[1]))
    name = ident.copy().set_parse_action(lambda t: Name(t[0]))
    atom = number | call | name | (lpar + expr + rpar)
    power = atom + pp.Optional(pp.Suppress("^") + unary)
    power.set_parse_action(
        lambda t: Binary("^", t[0], t[1]) if len(t) == 2 else t[0]
    )
    sign = pp.one_of("- +")
    unary <<= (sign + unary) | power
    unary.set_parse_action(
        lambda t: (Negate(t[1]) if t[0] == "-" else t[1])
        if len(t) == 2
        else t[0]
    )
    term = pp.Group(unary + pp.ZeroOrMore(pp.one_of("* /") + unary))
    term.set_parse_action(_fold_left)
    expr <<= pp.Group(term + pp.ZeroOrMore(pp.one_of("+ -") + term))
    expr.set_parse_action(_fold_left)
    return expr


GRAMMAR = _build_grammar()


def _near(text: str, loc: int) -> str:
    rest = text[loc:].strip()
    return rest.split()[0] if rest else ""


@dataclass(frozen=True)
class Expression:
    """
    A parsed, name-checked expression.

    Instances are immutable and safe to evaluate from several threads.
    """

    source: str
    tree: Node
    constants: tuple[tuple[str, float], ...] = ()

    @property
    def names(self) -> set[str]:
        return self.tree.names()

    def evaluate(self, env: Mapping[str, Array]) -> Array:
        """
        Evaluate against ``env`` (coordinate name to scalar or array).

        Constants (builtin and user) are merged in underneath ``env``.
        """
        full: dict[str, Array] = dict(CONSTANTS)
        full.update(self.constants)
        full.update(env)
        with np.errstate(all="ignore"):
            return self.tree.evaluate(full)

    def render(self) -> str:
        return self.tree.render()

    def is_constant(self) -> bool:
        bound = set(CONSTANTS) | {n for n, _ in self.constants}
        return not self.names - bound


def parse_expression(
    text: str,
    variables: Iterable[str] = (),
    constants: Optional[Mapping[str, float]] = None,
    line: int = 1,
    column: int = 1,
) -> Expression:
    """
    Parse ``text`` into an `Expression`, checking every name is known.

    :param variables: Coordinate names the expression may reference.
    :param constants: User constants (name to value).
    :param line: Line of ``text`` within its enclosing document, for errors.
    :param column: Column where ``text`` starts within that line.

    :raises: `.ParseError` for syntax errors and unknown names, located
        relative to the enclosing document.
    """
    constants = dict(constants or {})
    if not text.strip():
        raise ParseError("empty expression", line, column)
    try:
        tree = GRAMMAR.parse_string(text, parse_all=True)[0]
    except pp.ParseBaseException as exc:
        raise ParseError(
            "syntax error in expression",
            line,
            column + exc.loc,
            _near(text, exc.loc),
        ) from None
    except RecursionError:
        raise ParseError("expression nested too deeply", line, column)
    known = set(variables) | set(CONSTANTS) | set(constants)
    for name in sorted(tree.names()):
        if name not in known:
            raise ParseError(
                "unknown variable {!r}".format(name),
                line,
                column + max(text.find(name), 0),
                name,
            )
    return Expression(
        source=text, tree=tree, constants=tuple(sorted(constants.items()))
    )


def coordinate_names(dim: int) -> list[str]:
    """
    Names of the chart coordinates for an ``dim``-dimensional spacetime.
    """
    if dim < 2:
        raise SpecError("spacetime dimension must be at least 2")
    return ["t"] + ["x{}".format(i) for i in range(1, dim)]
