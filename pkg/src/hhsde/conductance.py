"""Generic conductance-based membrane models.

A model is k channel gating variables p_1..p_k with voltage-dependent
opening/closing rates, a list of ohmic conductance terms G * prod(p_i^e_i)
* (V - V_rev), a leak term and a capacitance.  Rate functions are stored
as small expression trees over a closed set of primitives (affine maps,
exp, the guarded quotient u/(e^u - 1), sums, products, quotients), so each
rate can be evaluated on floats, numpy arrays and jets alike.

Models serialize to/from JSON; the schema is documented in the README.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet4, expm1_ratio, expm1_ratio_jet
from .model import DEFAULT_PARAMS, HHParams


# -- expression trees --------------------------------------------------------

class Expr:
    """Base class for rate-function expression nodes."""

    def __call__(self, v):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _exp(x):
    if isinstance(x, Jet4):
        return x.exp()
    if isinstance(x, np.ndarray):
        return np.exp(x)
    return math.exp(x)


@dataclass(frozen=True)
class Affine(Expr):
    """p + q * v."""

    p: float
    q: float

    def __call__(self, v):
        return v * self.q + self.p

    def to_dict(self):
        return {"kind": "affine", "p": self.p, "q": self.q}


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __call__(self, v):
        if isinstance(v, np.ndarray):
            return np.full_like(v, self.value, dtype=float)
        return self.value

    def to_dict(self):
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True)
class Exp(Expr):
    child: Expr

    def __call__(self, v):
        return _exp(self.child(v))

    def to_dict(self):
        return {"kind": "exp", "child": self.child.to_dict()}


@dataclass(frozen=True)
class ExpRatio(Expr):
    """u / (e^u - 1) for an affine u; total thanks to the series guard."""

    u: Affine

    def __call__(self, v):
        x = self.u(v)
        if isinstance(x, Jet4):
            return expm1_ratio_jet(x)
        if isinstance(x, np.ndarray):
            from .model import _expm1_ratio_np
            return _expm1_ratio_np(x)
        return expm1_ratio(x)

    def to_dict(self):
        return {"kind": "exp_ratio", "u": self.u.to_dict()}


@dataclass(frozen=True)
class Sum(Expr):
    children: tuple

    def __call__(self, v):
        acc = self.children[0](v)
        for c in self.children[1:]:
            acc = acc + c(v)
        return acc

    def to_dict(self):
        return {"kind": "sum", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True)
class Product(Expr):
    children: tuple

    def __call__(self, v):
        acc = self.children[0](v)
        for c in self.children[1:]:
            acc = acc * c(v)
        return acc

    def to_dict(self):
        return {"kind": "product", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True)
class Quotient(Expr):
    num: Expr
    den: Expr

    def __call__(self, v):
        return self.num(v) / self.den(v)

    def to_dict(self):
        return {"kind": "quotient", "num": self.num.to_dict(), "den": self.den.to_dict()}


_NODE_KINDS = {"affine", "const", "exp", "exp_ratio", "sum", "product", "quotient"}


def expr_from_dict(d: dict) -> Expr:
    kind = d.get("kind")
    if kind not in _NODE_KINDS:
        raise ValueError(f"unknown expression node kind: {kind!r}")
    if kind == "affine":
        return Affine(float(d["p"]), float(d["q"]))
    if kind == "const":
        return Const(float(d["value"]))
    if kind == "exp":
        return Exp(expr_from_dict(d["child"]))
    if kind == "exp_ratio":
        u = expr_from_dict(d["u"])
        if not isinstance(u, Affine):
            raise ValueError("exp_ratio argument must be affine")
        return ExpRatio(u)
    if kind == "sum":
        return Sum(tuple(expr_from_dict(c) for c in d["children"]))
    if kind == "quotient":
        return Quotient(expr_from_dict(d["num"]), expr_from_dict(d["den"]))
    return Product(tuple(expr_from_dict(c) for c in d["children"]))


# -- the model ---------------------------------------------------------------

@dataclass(frozen=True)
class ConductanceTerm:
    """One ohmic current G * prod(p_i^exponents_i) * (V - reversal)."""

    gain: float
    exponents: tuple
    reversal: float


@dataclass(frozen=True)
class ConductanceModel:
    """Current-balance membrane model with k gating variables."""

    k: int
    open_rates: tuple      # b_i = alpha_i, expression trees of v
    close_rates: tuple     # beta_i
    terms: tuple           # ConductanceTerm entries
    leak_gain: float
    leak_reversal: float
    capacitance: float = 1.0
    name: str = "conductance"
    check_box: tuple = (-50.0, 150.0)

    def __post_init__(self):
        if not (len(self.open_rates) == len(self.close_rates) == self.k):
            raise ValueError("need one open/close rate pair per gating variable")
        for t in self.terms:
            if len(t.exponents) != self.k:
                raise ValueError("conductance exponent pattern length must equal k")
        total = sum(t.gain for t in self.terms) + self.leak_gain
        if self.leak_gain < 0 or total <= 0:
            raise ValueError("total conductance must stay positive")
        self._validate_rates()

    def _validate_rates(self):
        # a_i > 0 and b_i <= a_i on the working voltage box, so the gating
        # probabilities remain in [0,1]
        vs = np.linspace(self.check_box[0], self.check_box[1], 201)
        for i in range(self.k):
            a = self.rate_a(i, vs)
            b = self.rate_b(i, vs)
            if np.any(a <= 0.0):
                raise ValueError(f"a_{i + 1}(v) must be positive on the working box")
            if np.any(b > a * (1.0 + 1e-12)):
                raise ValueError(f"b_{i + 1}(v) must not exceed a_{i + 1}(v)")

    # rates in the -a*p + b normal form: a = alpha + beta, b = alpha
    def rate_a(self, i: int, v):
        return self.open_rates[i](v) + self.close_rates[i](v)

    def rate_b(self, i: int, v):
        return self.open_rates[i](v)

    def gate_steady(self, i: int, v):
        return self.rate_b(i, v) / self.rate_a(i, v)

    def conductance_total(self, p) -> float:
        """Sum of channel conductances plus leak at gating state p."""
        total = self.leak_gain
        for t in self.terms:
            g = t.gain
            for pi, e in zip(p, t.exponents):
                g *= pi ** e
            total += g
        return total

    def membrane_drift(self, v, p):
        """dV/dt contribution of the ionic currents (input excluded)."""
        acc = self.leak_gain * (v - self.leak_reversal)
        for t in self.terms:
            g = t.gain
            for pi, e in zip(p, t.exponents):
                g *= pi ** e
            acc += g * (v - t.reversal)
        return -acc / self.capacitance

    def gate_drift(self, i: int, v, p_i):
        return -self.rate_a(i, v) * p_i + self.rate_b(i, v)

    def vector_field(self, x, input_value: float = 0.0):
        """Drift of (v, p_1..p_k) under a deterministic input current."""
        v, p = x[0], x[1:]
        dv = self.membrane_drift(v, p) + input_value / self.capacitance
        return np.array([dv, *(self.gate_drift(i, v, p[i]) for i in range(self.k))])

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "k": self.k,
            "capacitance": self.capacitance,
            "leak": {"gain": self.leak_gain, "reversal": self.leak_reversal},
            "terms": [
                {"gain": t.gain, "exponents": list(t.exponents), "reversal": t.reversal}
                for t in self.terms
            ],
            "open_rates": [r.to_dict() for r in self.open_rates],
            "close_rates": [r.to_dict() for r in self.close_rates],
            "check_box": list(self.check_box),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def from_dict(d: dict) -> "ConductanceModel":
        known = {"name", "k", "capacitance", "leak", "terms", "open_rates",
                 "close_rates", "check_box"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        return ConductanceModel(
            k=int(d["k"]),
            open_rates=tuple(expr_from_dict(r) for r in d["open_rates"]),
            close_rates=tuple(expr_from_dict(r) for r in d["close_rates"]),
            terms=tuple(
                ConductanceTerm(float(t["gain"]), tuple(int(e) for e in t["exponents"]),
                                float(t["reversal"]))
                for t in d["terms"]
            ),
            leak_gain=float(d["leak"]["gain"]),
            leak_reversal=float(d["leak"]["reversal"]),
            capacitance=float(d.get("capacitance", 1.0)),
            name=str(d.get("name", "conductance")),
            check_box=tuple(d.get("check_box", (-50.0, 150.0))),
        )

    @staticmethod
    def from_json(text: str) -> "ConductanceModel":
        return ConductanceModel.from_dict(json.loads(text))


def build_hh_as_conductance_model(params: HHParams = DEFAULT_PARAMS) -> ConductanceModel:
    """The Hodgkin-Huxley system as a k=3 conductance model (n, m, h)."""
    alpha_n = Product((Const(0.1), ExpRatio(Affine(1.0, -0.1))))
    beta_n = Product((Const(0.125), Exp(Affine(0.0, -1.0 / 80.0))))
    alpha_m = ExpRatio(Affine(2.5, -0.1))
    beta_m = Product((Const(4.0), Exp(Affine(0.0, -1.0 / 18.0))))
    alpha_h = Product((Const(0.07), Exp(Affine(0.0, -1.0 / 20.0))))
    beta_h = Quotient(Const(1.0), Sum((Exp(Affine(3.0, -0.1)), Const(1.0))))
    return ConductanceModel(
        k=3,
        open_rates=(alpha_n, alpha_m, alpha_h),
        close_rates=(beta_n, beta_m, beta_h),
        terms=(
            ConductanceTerm(params.g_k, (4, 0, 0), params.e_k),
            ConductanceTerm(params.g_na, (0, 3, 1), params.e_na),
        ),
        leak_gain=params.g_l,
        leak_reversal=params.e_l,
        capacitance=1.0,
        name="hodgkin-huxley",
    )
