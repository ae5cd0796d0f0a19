"""Run configuration: an INI file with the sections below.

::

    [chain]
    model = uniform(2)          ; built-in name, or give N and Q instead
    N = 2
    Q = -1, 1; 1, -1            ; rows separated by ';'

    [velocity]
    A = 1, -1                   ; one row per spatial axis (d x N)

    [space]
    d = 1
    M = 33                      ; odd number of modes per axis

    [test_function]
    name = sin_k                ; sin_k | trig_poly | gaussian_bump | constant | csv
    k = 1                       ; sin_k wavevector (comma separated)
    n_terms = 5                 ; trig_poly
    width = 0.5                 ; gaussian_bump
    value = 1.0                 ; constant
    path = samples.csv          ; csv: M**d grid samples (C order) or an M x M table

    [expansion]
    order = 4

    [sweep]
    eps = 0.2, 0.1, 0.05, 0.025
    times = 1.0
    orders = 0, 1, 2
    min_slope = 0:0.9, 1:1.8, 2:2.5
    min_r2 = 0.98

    [mc]
    paths = 100000
    seed = 0
    epsilon = 0.1
    t = 1.0
    points = 20                 ; random query points (seeded), or give x = ...

    [tolerances]
    identity = 1e-10            ; any field of Tolerances

    [output]
    dir = out

Every section is optional; missing values fall back to the defaults shown.
"""
import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .expansion import MAX_ORDER
from .markov import ChainModel, validate_model
from .models import builtin_model
from .spectral import ModeGrid, TestFunction, constant, gaussian_bump, sin_k, trig_poly
from .tolerances import DEFAULT_TOLERANCES

DEFAULT_MIN_SLOPE = {0: 0.9, 1: 1.8, 2: 2.5}


def parse_matrix(text):
    rows = [r for r in text.replace("\n", ";").split(";") if r.strip()]
    try:
        out = np.array([[float(v) for v in r.replace(",", " ").split()] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"cannot parse matrix {text!r}: {exc}") from None
    if out.ndim != 2:
        raise ConfigError(f"ragged matrix {text!r}")
    return out


def parse_floats(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}: {exc}") from None


def parse_slopes(text):
    out = {}
    for item in text.replace(",", " ").split():
        key, _, val = item.partition(":")
        if not val:
            raise ConfigError(f"min_slope entries look like 'order:slope', got {item!r}")
        out[int(key)] = float(val)
    return out


def min_slope_for(order, table):
    if order in table:
        return table[order]
    return DEFAULT_MIN_SLOPE.get(order, order + 0.5)


@dataclass
class RunConfig:
    model: ChainModel
    model_source: dict
    M: int = 33
    test_function: dict = field(default_factory=lambda: {"name": "sin_k"})
    order: int = 4
    eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    times: list = field(default_factory=lambda: [1.0])
    orders: list = field(default_factory=lambda: [0, 1, 2])
    min_slope: dict = field(default_factory=dict)
    min_r2: float = 0.98
    mc: dict = field(default_factory=lambda: {"paths": 100_000, "seed": 0, "epsilon": 0.1,
                                              "t": 1.0, "points": 20})
    tolerances: object = DEFAULT_TOLERANCES
    out_dir: str = "out"

    def __post_init__(self):
        if not 0 <= self.order <= MAX_ORDER:
            raise ConfigError(f"order must be in 0..{MAX_ORDER}, got {self.order}")
        if any(e <= 0 for e in self.eps) or len(set(self.eps)) != len(self.eps):
            raise ConfigError(f"eps values must be positive and distinct, got {self.eps}")
        if any(n > self.order for n in self.orders):
            self.order = max(self.orders)

    @property
    def d(self):
        return self.model.d

    @classmethod
    def from_model(cls, name, **kwargs):
        return cls(model=builtin_model(name), model_source={"builtin": name}, **kwargs)

    @classmethod
    def load(cls, path):
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str  # keep 'Q', 'A', 'N', 'M' case
        if not parser.read(path):
            raise ConfigError(f"cannot read config {path}")
        return cls.from_parser(parser, base=Path(path).parent)

    @classmethod
    def from_string(cls, text, base="."):
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        parser.read_string(text)
        return cls.from_parser(parser, base=Path(base))

    @classmethod
    def from_parser(cls, parser, base=Path(".")):
        get = lambda sec, key, default=None: parser.get(sec, key, fallback=default)
        chain = parser["chain"] if parser.has_section("chain") else {}
        if "model" in chain:
            directions = get("velocity", "A")
            model = builtin_model(chain["model"],
                                  None if directions is None else parse_matrix(directions))
            source = {"builtin": chain["model"]}
        else:
            if "Q" not in chain or not parser.has_option("velocity", "A"):
                raise ConfigError("[chain] needs 'model' or 'Q' (with [velocity] A)")
            Q = parse_matrix(chain["Q"])
            if "N" in chain and int(chain["N"]) != Q.shape[0]:
                raise ConfigError(f"[chain] N={chain['N']} but Q has {Q.shape[0]} rows")
            A = parse_matrix(get("velocity", "A"))
            model = validate_model(ChainModel(Q=Q, A=A, name=get("chain", "name", "custom")))
            source = {"Q": Q.tolist(), "A": A.tolist()}
        d = int(get("space", "d", model.d))
        if d != model.d:
            raise ConfigError(f"[space] d={d} but the velocity matrix has {model.d} rows")
        kwargs = {"M": int(get("space", "M", 33))}
        if parser.has_section("test_function"):
            opts = dict(parser["test_function"])
            if opts.get("name") == "csv" and "path" in opts:
                opts["path"] = str((base / opts["path"]).resolve())
            kwargs["test_function"] = opts
        if parser.has_option("expansion", "order"):
            kwargs["order"] = int(get("expansion", "order"))
        if parser.has_section("sweep"):
            sw = parser["sweep"]
            if "eps" in sw:
                kwargs["eps"] = parse_floats(sw["eps"])
            if "times" in sw:
                kwargs["times"] = parse_floats(sw["times"])
            if "orders" in sw:
                kwargs["orders"] = [int(v) for v in parse_floats(sw["orders"])]
            if "min_slope" in sw:
                kwargs["min_slope"] = parse_slopes(sw["min_slope"])
            if "min_r2" in sw:
                kwargs["min_r2"] = float(sw["min_r2"])
        mc = {"paths": 100_000, "seed": 0, "epsilon": 0.1, "t": 1.0, "points": 20}
        if parser.has_section("mc"):
            for key, value in parser["mc"].items():
                mc[key] = parse_matrix(value).tolist() if key == "x" else (
                    int(value) if key in ("paths", "seed", "points") else float(value))
        kwargs["mc"] = mc
        if parser.has_section("tolerances"):
            try:
                kwargs["tolerances"] = DEFAULT_TOLERANCES.with_overrides(
                    dict(parser["tolerances"]))
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
        if parser.has_option("output", "dir"):
            kwargs["out_dir"] = get("output", "dir")
        return cls(model=model, model_source=source, **kwargs)

    def grid(self):
        return ModeGrid(self.d, self.M)

    def build_test_function(self, grid=None):
        grid = grid or self.grid()
        opts = dict(self.test_function)
        name = opts.get("name", "sin_k")
        if name == "sin_k":
            k = [int(v) for v in parse_floats(opts["k"])] if "k" in opts else None
            if k is not None and len(k) < grid.d:
                k = k + [0] * (grid.d - len(k))
            return sin_k(grid, k, float(opts.get("amplitude", 1.0)))
        if name == "trig_poly":
            return trig_poly(grid, int(opts.get("n_terms", 5)))
        if name == "gaussian_bump":
            return gaussian_bump(grid, float(opts.get("width", 0.5)))
        if name == "constant":
            return constant(grid, float(opts.get("value", 1.0)))
        if name == "csv":
            samples = np.loadtxt(opts["path"], delimiter=",", ndmin=1)
            return TestFunction.from_samples(samples.ravel(), grid, f"csv:{opts['path']}")
        raise ConfigError(f"unknown test function {name!r}")

    def query_points(self):
        if "x" in self.mc:
            return np.atleast_2d(np.asarray(self.mc["x"], dtype=float))
        rng = np.random.default_rng(self.mc.get("seed", 0))
        return rng.uniform(0.0, 2 * np.pi, (int(self.mc.get("points", 20)), self.d))

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "model_source": self.model_source,
            "grid": {"d": self.d, "M": self.M},
            "test_function": dict(self.test_function),
            "order": self.order,
            "eps": list(self.eps),
            "times": list(self.times),
            "orders": list(self.orders),
            "min_slope": {str(n): min_slope_for(n, self.min_slope) for n in self.orders},
            "min_r2": self.min_r2,
            "mc": dict(self.mc),
            "tolerances": self.tolerances.as_dict(),
            "out_dir": self.out_dir,
        }
