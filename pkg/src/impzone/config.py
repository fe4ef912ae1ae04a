"""Problem description: plant, sets, controller weights and numerical knobs.

A config is a single JSON document.  Sets may be given as boxes
(``{"lower": [...], "upper": [...]}``) or H-representations
(``{"H": [[...]], "v": [...]}``).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import Polytope
from .lti import ImpulsiveSystem


def _set_to_dict(P):
    return {"H": P.H.tolist(), "v": P.v.tolist()}


def _parse_set(d, name, dim):
    if not isinstance(d, dict):
        raise ConfigError(f"{name}: expected an object with lower/upper or H/v")
    try:
        if "lower" in d or "upper" in d:
            lo, hi = np.asarray(d["lower"], float), np.asarray(d["upper"], float)
            if lo.shape != hi.shape or np.any(lo > hi):
                raise ConfigError(f"{name}: lower/upper must have equal length and lower <= upper")
            P = Polytope.box(lo, hi)
        else:
            H = np.asarray(d["H"], dtype=float)
            v = np.asarray(d["v"], dtype=float)
            if H.ndim != 2 or v.ndim != 1 or H.shape[0] != v.size:
                raise ConfigError(f"{name}: H must be (l, n) and v of length l")
            P = Polytope(H, v)
    except KeyError as exc:
        raise ConfigError(f"{name}: missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    if P.dim != dim:
        raise ConfigError(f"{name}: dimension {P.dim}, expected {dim}")
    return P


def _weight(w, size, name):
    W = np.asarray(w, dtype=float)
    if W.ndim == 0:
        W = W * np.eye(size)
    elif W.ndim == 1:
        W = np.diag(W)
    if W.shape != (size, size):
        raise ConfigError(f"{name}: expected a scalar, diagonal or {size}x{size} matrix")
    return W


@dataclass
class ProblemConfig:
    """Everything a batch run needs.

    Weights are stored as full matrices; ``K`` is the number of support
    directions for inner approximations, ``M`` the dense samples per impulse
    interval.
    """

    A: np.ndarray
    B: np.ndarray
    period: float
    state_set: Polytope
    input_set: Polytope
    target: Polytope
    horizon: int = 5
    Q: np.ndarray | None = None
    R: np.ndarray | None = None
    Q_O: np.ndarray | None = None
    K: int = 16
    M: int = 101
    max_iter: int = 50
    cis_tol: float = 1e-7
    feas_tol: float = 1e-7
    marginal_tol: float = 1e-5
    qp_tol: float = 1e-9
    seed: int = 0
    output_dir: str = "out"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        self.B = B.reshape(-1, 1) if B.ndim == 1 else B
        n, m = self.B.shape
        if self.A.shape != (n, n):
            raise ConfigError(f"A is {self.A.shape}, B is {self.B.shape}")
        if not self.period > 0:
            raise ConfigError("period must be positive")
        for name, P, size in (("state_set", self.state_set, n), ("input_set", self.input_set, m),
                              ("target", self.target, n)):
            if P.dim != size:
                raise ConfigError(f"{name}: dimension {P.dim}, expected {size}")
        self.Q = _weight(1.0 if self.Q is None else self.Q, n, "Q")
        self.R = _weight(1.0 if self.R is None else self.R, m, "R")
        self.Q_O = _weight(1.0 if self.Q_O is None else self.Q_O, n, "Q_O")
        if self.horizon < 1 or self.K < n + 1 or self.M < 2 or self.max_iter < 1:
            raise ConfigError("need horizon >= 1, K >= n + 1, M >= 2, max_iter >= 1")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def system(self):
        return ImpulsiveSystem(self.A, self.B, self.period, self.state_set, self.input_set)

    def to_dict(self):
        d = asdict(self)
        for k in ("A", "B", "Q", "R", "Q_O"):
            d[k] = getattr(self, k).tolist()
        for k in ("state_set", "input_set", "target"):
            d[k] = _set_to_dict(getattr(self, k))
        return d

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        d = dict(d)
        for key in ("A", "B", "period", "state_set", "input_set", "target"):
            if key not in d:
                raise ConfigError(f"missing required field {key!r}")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown fields {sorted(unknown)}")
        try:
            A = np.atleast_2d(np.asarray(d["A"], dtype=float))
            B = np.asarray(d["B"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"A/B: {exc}") from None
        n = A.shape[0]
        m = 1 if B.ndim == 1 else B.shape[1]
        d["A"], d["B"] = A, B
        d["state_set"] = _parse_set(d["state_set"], "state_set", n)
        d["input_set"] = _parse_set(d["input_set"], "input_set", m)
        d["target"] = _parse_set(d["target"], "target", n)
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_json(text)


def example_config(**overrides):
    """Two-state example: stable fast mode, unstable slow mode, one input.

    The target box sits away from the origin and holds a segment of
    impulsive equilibria.
    """
    kw = dict(
        A=[[-1.0, 1.2], [0.0, 0.2]],
        B=[3.0, -2.0],
        period=1.0,
        state_set=Polytope.box([0.5, 0.0], [4.5, 4.0]),
        input_set=Polytope.box([-0.2], [0.2]),
        target=Polytope.box([2.5, 1.5], [4.0, 3.5]),
        horizon=5,
        Q=1.0,
        R=10.0,
        Q_O=10.0,
    )
    kw.update(overrides)
    return ProblemConfig(**kw)
