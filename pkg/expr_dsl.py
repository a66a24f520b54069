"""
Expression Language Module
A small arithmetic language so configs can state weights, maps, kernels and test
functions as text.

Grammar (lowest to highest precedence):
    expression := term (('+' | '-') term)*
    term       := power (('*' | '/') power)*
    power      := unary ('^' power)?            right associative
    unary      := '-' unary | atom
    atom       := NUMBER | NAME | NAME '(' args ')' | '(' expression ')'

Functions: abs, sqrt, exp, log, min, max, pow, chi. chi(a, b, e) is the
indicator of the closed interval [a, b] evaluated at e.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from grid_core import MixnormError


FUNCTION_ARITY = {
    'abs': 1,
    'sqrt': 1,
    'exp': 1,
    'log': 1,
    'min': 2,
    'max': 2,
    'pow': 2,
    'chi': 3,
}


class NodeKind(Enum):
    CONSTANT = "constant"
    VARIABLE = "variable"
    UNARY = "unary"
    BINARY = "binary"
    CALL = "call"


@dataclass(frozen=True)
class Span:
    start: int
    end: int


@dataclass(frozen=True)
class ExprAst:
    """Immutable syntax tree node; spans are ignored by equality"""
    kind: NodeKind
    value: Optional[float] = None
    name: Optional[str] = None
    children: Tuple["ExprAst", ...] = ()
    span: Span = field(default=Span(0, 0), compare=False)

    def variables(self) -> frozenset:
        if self.kind == NodeKind.VARIABLE:
            return frozenset([self.name])
        found = frozenset()
        for child in self.children:
            found = found | child.variables()
        return found


def _line_col(source: str, offset: int) -> Tuple[int, int]:
    line = source.count("\n", 0, offset) + 1
    line_start = source.rfind("\n", 0, offset) + 1
    return line, offset - line_start + 1


class ParseError(MixnormError):
    """Syntax error with its position; offset is 0-based, line and column 1-based"""

    def __init__(self, source: str, offset: int, message: str, expected: Sequence[str] = ()):
        self.source = source
        self.offset = max(0, min(offset, len(source)))
        self.line, self.column = _line_col(source, self.offset)
        self.message = message
        self.expected = tuple(expected)
        detail = f"{self.line}:{self.column}: {message}"
        if self.expected:
            detail += f" (expected {' or '.join(repr(e) for e in self.expected)})"
        super().__init__(detail)


class EvaluationError(MixnormError):
    """Unbound variable or domain error raised while evaluating a node"""

    def __init__(self, message: str, span: Span):
        self.span = span
        super().__init__(f"{message} at [{span.start}:{span.end}]")


# ==================== TOKENIZER ====================

@dataclass(frozen=True)
class Token:
    kind: str  # 'number', 'name', 'op', 'end'
    text: str
    start: int
    end: int


_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPERATORS = "+-*/^(),"


def tokenize(source: str) -> List[Token]:
    tokens = []
    position = 0
    while position < len(source):
        ch = source[position]
        if ch.isspace():
            position += 1
            continue
        number = _NUMBER.match(source, position)
        if number:
            tokens.append(Token('number', number.group(0), position, number.end()))
            position = number.end()
            continue
        name = _NAME.match(source, position)
        if name:
            tokens.append(Token('name', name.group(0), position, name.end()))
            position = name.end()
            continue
        if ch in _OPERATORS:
            tokens.append(Token('op', ch, position, position + 1))
            position += 1
            continue
        raise ParseError(source, position, f"unexpected character {ch!r}")
    tokens.append(Token('end', '', len(source), len(source)))
    return tokens


# ==================== PARSER ====================

class ExprParser:
    """Recursive descent parser over the token list"""

    def __init__(self, source: str, allowed_vars: Sequence[str]):
        self.source = source
        self.allowed = frozenset(allowed_vars)
        self.tokens = tokenize(source)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _at(self, text: str) -> bool:
        return self.current.kind == 'op' and self.current.text == text

    def _fail(self, message: str, expected: Sequence[str] = (), token: Optional[Token] = None):
        token = token or self.current
        raise ParseError(self.source, token.start, message, expected)

    def _describe(self, token: Token) -> str:
        return "end of input" if token.kind == 'end' else repr(token.text)

    def parse(self) -> ExprAst:
        node = self._expression()
        if self.current.kind != 'end':
            if self._at(')'):
                self._fail("unbalanced ')'", ('end of input',))
            self._fail(f"unexpected {self._describe(self.current)}", ('end of input',))
        return node

    def _binary(self, op: Token, left: ExprAst, right: ExprAst) -> ExprAst:
        return ExprAst(NodeKind.BINARY, name=op.text, children=(left, right),
                       span=Span(left.span.start, right.span.end))

    def _expression(self) -> ExprAst:
        node = self._term()
        while self._at('+') or self._at('-'):
            op = self._advance()
            node = self._binary(op, node, self._term())
        return node

    def _term(self) -> ExprAst:
        node = self._power()
        while self._at('*') or self._at('/'):
            op = self._advance()
            node = self._binary(op, node, self._power())
        return node

    def _power(self) -> ExprAst:
        base = self._unary()
        if self._at('^'):
            op = self._advance()
            return self._binary(op, base, self._power())
        return base

    def _unary(self) -> ExprAst:
        if self._at('-'):
            op = self._advance()
            operand = self._unary()
            return ExprAst(NodeKind.UNARY, name='-', children=(operand,),
                           span=Span(op.start, operand.span.end))
        return self._atom()

    def _atom(self) -> ExprAst:
        token = self.current
        if token.kind == 'number':
            self._advance()
            return ExprAst(NodeKind.CONSTANT, value=float(token.text), span=Span(token.start, token.end))

        if token.kind == 'name':
            self._advance()
            if token.text in FUNCTION_ARITY:
                if not self._at('('):
                    self._fail(f"function '{token.text}' must be called", ('(',))
                return self._call(token)
            if token.text not in self.allowed:
                self._fail(f"unknown identifier '{token.text}'", token=token)
            return ExprAst(NodeKind.VARIABLE, name=token.text, span=Span(token.start, token.end))

        if self._at('('):
            self._advance()
            node = self._expression()
            if not self._at(')'):
                self._fail("unbalanced '('", (')',))
            self._advance()
            return node

        self._fail(f"unexpected {self._describe(token)}", ('number', 'name', '(', '-'))

    def _call(self, name: Token) -> ExprAst:
        self._advance()  # '('
        args = [self._expression()]
        while not self._at(')'):
            if not self._at(','):
                self._fail(f"unexpected {self._describe(self.current)} in argument list", (',', ')'))
            self._advance()
            args.append(self._expression())
        close = self._advance()

        arity = FUNCTION_ARITY[name.text]
        if len(args) != arity:
            raise ParseError(self.source, name.start,
                             f"'{name.text}' takes {arity} argument{'s' if arity > 1 else ''}, got {len(args)}")
        return ExprAst(NodeKind.CALL, name=name.text, children=tuple(args), span=Span(name.start, close.end))


def parse(source: str, allowed_vars: Sequence[str]) -> ExprAst:
    """Parse source into an ExprAst; raises ParseError with position on failure"""
    return ExprParser(source, allowed_vars).parse()


# ==================== PRETTY PRINTER ====================

def to_source(node: ExprAst) -> str:
    """Fully parenthesized text that reparses to a structurally equal tree"""
    if node.kind == NodeKind.CONSTANT:
        return repr(float(node.value))
    if node.kind == NodeKind.VARIABLE:
        return node.name
    if node.kind == NodeKind.UNARY:
        return f"(-{to_source(node.children[0])})"
    if node.kind == NodeKind.BINARY:
        left, right = node.children
        return f"({to_source(left)} {node.name} {to_source(right)})"
    return f"{node.name}({', '.join(to_source(child) for child in node.children)})"


# ==================== EVALUATOR ====================

def _check(condition: np.ndarray, message: str, node: ExprAst):
    if np.any(condition):
        raise EvaluationError(message, node.span)


def _power(base: np.ndarray, exponent: np.ndarray, node: ExprAst) -> np.ndarray:
    _check((base == 0) & (exponent < 0), "0 raised to a negative power", node)
    _check((base < 0) & (exponent != np.round(exponent)), "negative base with fractional exponent", node)
    return np.power(base, exponent)


def _eval(node: ExprAst, bindings: Mapping[str, np.ndarray]) -> np.ndarray:
    kind = node.kind
    if kind == NodeKind.CONSTANT:
        return np.float64(node.value)

    if kind == NodeKind.VARIABLE:
        if node.name not in bindings:
            raise EvaluationError(f"unbound variable '{node.name}'", node.span)
        return np.asarray(bindings[node.name], dtype=float)

    args = [_eval(child, bindings) for child in node.children]

    if kind == NodeKind.UNARY:
        result = -args[0]
    elif kind == NodeKind.BINARY:
        left, right = args
        op = node.name
        if op == '+':
            result = left + right
        elif op == '-':
            result = left - right
        elif op == '*':
            result = left * right
        elif op == '/':
            _check(right == 0, "division by zero", node)
            result = left / right
        else:
            result = _power(left, right, node)
    else:
        name = node.name
        if name == 'abs':
            result = np.abs(args[0])
        elif name == 'sqrt':
            _check(args[0] < 0, "square root of a negative number", node)
            result = np.sqrt(args[0])
        elif name == 'exp':
            result = np.exp(args[0])
        elif name == 'log':
            _check(args[0] <= 0, "logarithm of a nonpositive number", node)
            result = np.log(args[0])
        elif name == 'min':
            result = np.minimum(args[0], args[1])
        elif name == 'max':
            result = np.maximum(args[0], args[1])
        elif name == 'pow':
            result = _power(args[0], args[1], node)
        else:
            lower, upper, point = args
            result = ((lower <= point) & (point <= upper)).astype(float)

    _check(np.isnan(result), "result is not a number", node)
    return result


def evaluate_array(ast: ExprAst, bindings: Mapping[str, object]) -> np.ndarray:
    """Vectorized evaluation; bound arrays broadcast against each other"""
    with np.errstate(all='ignore'):
        return _eval(ast, bindings)


def evaluate(ast: ExprAst, bindings: Mapping[str, float]) -> float:
    """Evaluate at one point"""
    result = evaluate_array(ast, bindings)
    if np.size(result) != 1:
        raise EvaluationError("scalar evaluation received array bindings", ast.span)
    return float(np.reshape(result, ()))


class ExpressionFunction:
    """Callable view of an expression: positional arguments bound to names

    Expressions and native closures are interchangeable wherever the laboratory
    takes a function of coordinates.
    """

    def __init__(self, source: str, arg_names: Sequence[str], aliases: Optional[Dict[str, int]] = None):
        self.source = source
        self.arg_names = tuple(arg_names)
        self.aliases = dict(aliases or {})
        self.ast = parse(source, self.arg_names + tuple(self.aliases))

    def __call__(self, *args):
        if len(args) != len(self.arg_names):
            raise TypeError(f"{self.source!r} takes {len(self.arg_names)} arguments, got {len(args)}")
        bindings = dict(zip(self.arg_names, args))
        for alias, position in self.aliases.items():
            bindings[alias] = args[position]
        return evaluate_array(self.ast, bindings)

    def __repr__(self):
        return f"ExpressionFunction({self.source!r}, {self.arg_names})"


def compile_function(source_or_fn, arg_names: Sequence[str],
                     aliases: Optional[Dict[str, int]] = None) -> Callable:
    """Text becomes an ExpressionFunction; callables pass through"""
    if callable(source_or_fn):
        return source_or_fn
    if isinstance(source_or_fn, (int, float)):
        return ExpressionFunction(repr(float(source_or_fn)), arg_names, aliases)
    return ExpressionFunction(str(source_or_fn), arg_names, aliases)
