"""Small expression language for chart-model vector fields.

Grammar (whitespace insensitive)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := number | name | name "(" expr ")" | "(" expr ")"

Names are either declared coordinate variables or one of the functions
sin, cos, exp, tanh.  Parse errors carry a 1-based column.  Every tree
supports evaluation, symbolic differentiation and printing; the printed
form reparses to an equivalent tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

FUNCTIONS = {
    "sin": (math.sin, "math.sin"),
    "cos": (math.cos, "math.cos"),
    "exp": (math.exp, "math.exp"),
    "tanh": (math.tanh, "math.tanh"),
}

# derivative of f(u) expressed as a tree builder on the inner tree u
_FUNC_DERIV = {
    "sin": lambda u: Call("cos", u),
    "cos": lambda u: Neg(Call("sin", u)),
    "exp": lambda u: Call("exp", u),
    # d tanh = 1 - tanh^2
    "tanh": lambda u: BinOp("-", Num(1.0), BinOp("^", Call("tanh", u), Num(2.0))),
}


class ParseError(ValueError):
    """Raised on malformed source; `column` is 1-based."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env):
        return self.value

    def deriv(self, var):
        return Num(0.0)

    def codegen(self):
        return repr(self.value)

    def __str__(self):
        if self.value == int(self.value) and abs(self.value) < 1e15:
            return repr(int(self.value))
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def eval(self, env):
        return env[self.name]

    def deriv(self, var):
        return Num(1.0 if var == self.name else 0.0)

    def codegen(self):
        return self.name

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    arg: object

    def eval(self, env):
        return -self.arg.eval(env)

    def deriv(self, var):
        return Neg(self.arg.deriv(var))

    def codegen(self):
        return f"(-{self.arg.codegen()})"

    def __str__(self):
        return f"-({self.arg})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: object

    def eval(self, env):
        return FUNCTIONS[self.func][0](self.arg.eval(env))

    def deriv(self, var):
        inner = self.arg.deriv(var)
        return BinOp("*", _FUNC_DERIV[self.func](self.arg), inner)

    def codegen(self):
        return f"{FUNCTIONS[self.func][1]}({self.arg.codegen()})"

    def __str__(self):
        return f"{self.func}({self.arg})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        if self.op == "^":
            return a ** b
        raise AssertionError(self.op)

    def deriv(self, var):
        a, b = self.left, self.right
        da, db = a.deriv(var), b.deriv(var)
        if self.op in "+-":
            return BinOp(self.op, da, db)
        if self.op == "*":
            return BinOp("+", BinOp("*", da, b), BinOp("*", a, db))
        if self.op == "/":
            num = BinOp("-", BinOp("*", da, b), BinOp("*", a, db))
            return BinOp("/", num, BinOp("^", b, Num(2.0)))
        if self.op == "^":
            if isinstance(b, Num):
                # b * a^(b-1) * a'
                return BinOp(
                    "*",
                    BinOp("*", b, BinOp("^", a, Num(b.value - 1.0))),
                    da,
                )
            raise ValueError("derivative of non-constant exponent is unsupported")
        raise AssertionError(self.op)

    def codegen(self):
        op = "**" if self.op == "^" else self.op
        return f"({self.left.codegen()} {op} {self.right.codegen()})"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.pos = 0
        self.variables = set(variables)

    def error(self, msg):
        raise ParseError(msg, self.pos + 1)

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expr(self):
        node = self.term()
        while self.peek() and self.peek() in "+-":
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() and self.peek() in "*/":
            op = self.text[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.factor())
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek() == "^":
            self.pos += 1
            node = BinOp("^", node, self.factor())
        return node

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                self.error("unbalanced parentheses")
            self.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            start = self.pos
            while self.pos < len(self.text) and (
                self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"
                or (self.text[self.pos] in "+-" and self.text[self.pos - 1] in "eE")
            ):
                self.pos += 1
            try:
                return Num(float(self.text[start : self.pos]))
            except ValueError:
                self.pos = start
                self.error("malformed number")
        if ch.isalpha() or ch == "_":
            start = self.pos
            while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] == "_"
            ):
                self.pos += 1
            name = self.text[start : self.pos]
            if self.peek() == "(":
                if name not in FUNCTIONS:
                    self.pos = start
                    self.error(f"unknown function '{name}'")
                self.pos += 1
                arg = self.expr()
                if self.peek() != ")":
                    self.error("unbalanced parentheses")
                self.pos += 1
                return Call(name, arg)
            if name in FUNCTIONS:
                self.pos = start
                self.error(f"function '{name}' needs an argument list")
            if name not in self.variables:
                self.pos = start
                self.error(f"unknown identifier '{name}'")
            return Var(name)
        if ch == "":
            self.error("unexpected end of input")
        self.error(f"unexpected character '{ch}'")


DEFAULT_VARIABLES = ("w", "x", "y", "z", "t")


def parse(text: str, variables=DEFAULT_VARIABLES):
    """Parse `text` into a tree over the given coordinate names."""
    p = _Parser(text, variables)
    node = p.expr()
    if p.peek() != "":
        p.error("trailing input")
    return node


def compile_tree(tree, variables):
    """Compile a tree to a fast positional callable f(c0, c1, ...)."""
    src = f"lambda {', '.join(variables)}: {tree.codegen()}"
    return eval(src, {"math": math})  # noqa: S307 - generated from our own AST


class FieldExpression:
    """A parsed scalar expression with evaluation and symbolic gradient."""

    def __init__(self, text: str, variables=DEFAULT_VARIABLES):
        self.source = text
        self.variables = tuple(variables)
        self.tree = parse(text, variables)
        self._fn = compile_tree(self.tree, self.variables)
        self._grad_fns = None

    def __call__(self, coords):
        return self._fn(*coords)

    def gradient(self, coords):
        if self._grad_fns is None:
            self._grad_fns = [
                compile_tree(self.tree.deriv(v), self.variables)
                for v in self.variables
            ]
        return [g(*coords) for g in self._grad_fns]

    def derivative(self, var: str) -> "FieldExpression":
        out = FieldExpression.__new__(FieldExpression)
        out.source = f"d/d{var}({self.source})"
        out.variables = self.variables
        out.tree = self.tree.deriv(var)
        out._fn = compile_tree(out.tree, out.variables)
        out._grad_fns = None
        return out

    def __str__(self):
        return str(self.tree)
