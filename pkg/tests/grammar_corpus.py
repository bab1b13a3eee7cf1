"""Shared expression-grammar corpus: parse cases, error cases, eval cases."""

import math

XT = frozenset({"x", "t"})
XTU = frozenset({"x", "t", "u"})

# (source, allowed vars) that must parse
PARSE_OK = [
    ("2*x + sin(pi*t)", XT),
    ("x^2*exp(-t)", XT),
    ("1", XT),
    ("-1", XT),
    ("3.5e-2", XT),
    ("0.5", XT),
    (".5 + x", XT),
    ("pi", XT),
    ("e", XT),
    ("x", XT),
    ("t", XT),
    ("u", XTU),
    ("x + t - 1", XT),
    ("x*t/2", XT),
    ("2^3^2", XT),
    ("-2^2", XT),
    ("(x+t)^2", XT),
    ("sin(cos(exp(x)))", XT),
    ("min(x, t)", XT),
    ("max(x, -t)", XT),
    ("pow(x, 2)", XT),
    ("abs(-x)", XT),
    ("tanh(x*t)", XT),
    ("sqrt(x^2 + t^2)", XT),
    ("log(1 + x)", XT),
    ("--x", XT),
    ("2^-3", XT),
    ("x  +\tt", XT),
    ("((x))", XT),
    ("1e3*x", XT),
    ("sin(u)*exp(-t) + x", XTU),
]

# (source, allowed vars, substring expected in the error, expected offset or None)
PARSE_ERRORS = [
    ("foo(x)", XT, "unknown function 'foo'", 0),
    ("sin(x, t)", XT, "takes 1 argument", 0),
    ("min(x)", XT, "takes 2 argument", 0),
    ("pow(x, t, 1)", XT, "takes 2 argument", 0),
    ("u + x", XT, "not allowed in this context", 0),
    ("y + 1", XT, "unknown identifier 'y'", 0),
    ("x +", XT, "expected a value", 3),
    ("(x + t", XT, "expected ')'", 6),
    ("x + * t", XT, "expected a value", 4),
    ("2 + @", XT, "unexpected character '@'", 4),
    ("x t", XT, "unexpected trailing input", 2),
    ("sin", XT, "used without arguments", 0),
    ("", XT, "expected a value", 0),
    ("1..2", XT, "unexpected trailing input", None),
]

# (source, bindings, expected value)
EVAL_CASES = [
    ("2*x + sin(pi*t)", {"x": 1.0, "t": 0.5}, 3.0),
    ("x^2*exp(-t)", {"x": 2.0, "t": 0.0}, 4.0),
    ("min(x, t)", {"x": 3.0, "t": -1.0}, -1.0),
    ("max(x, t)", {"x": 3.0, "t": -1.0}, 3.0),
    ("2+3*4", {}, 14.0),
    ("2^3^2", {}, 512.0),
    ("-2^2", {}, -4.0),
    ("(2+3)*4", {}, 20.0),
    ("2^-1", {}, 0.5),
    ("pow(2, 10)", {}, 1024.0),
    ("abs(-3.5)", {}, 3.5),
    ("sqrt(16)", {}, 4.0),
    ("log(e)", {}, 1.0),
    ("tanh(0)", {}, 0.0),
    ("pi", {}, math.pi),
    ("e", {}, math.e),
    ("10 - 4 - 3", {}, 3.0),
    ("12 / 4 / 3", {}, 1.0),
    ("--5", {}, 5.0),
    ("cos(0)", {}, 1.0),
]
