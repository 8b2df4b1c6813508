"""Gaussian driver models on [0, 1].

Every model exposes its covariance R(t, s), variance V(t) = R(t, t), variogram
E(X_t - X_s)^2 and the two numbers that govern the discretisation rate: the
Hoelder index ``hurst`` (H_eff) and the leading variogram coefficient
``sigma2`` in ``vartheta(t, s) = sigma2 |t - s|^{2 H_eff} + g(t, s)``.

All built-ins are normalised so that V(1) = 1.  Functions accept scalars or
numpy arrays and broadcast.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ParameterError",
    "ModelKind",
    "CovarianceModel",
    "FBM",
    "MultiMixedFBM",
    "SubFBM",
    "BiFBM",
    "StationaryPowExp",
    "CustomExpression",
    "CustomTable",
    "covariance",
    "variance",
    "variogram",
    "variogram_bounds",
    "model_from_dict",
    "read_lower_triangular_csv",
]


class ParameterError(ValueError):
    """Invalid model or spec parameter.  ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ModelKind(str, enum.Enum):
    FBM = "fbm"
    MULTI_MIXED_FBM = "multi_mixed_fbm"
    SUB_FBM = "sub_fbm"
    BIFBM = "bifbm"
    STATIONARY_POWEXP = "stationary_powexp"
    CUSTOM = "custom"


def _check_hurst(value, field="hurst", lo=0.0, hi=1.0):
    value = float(value)
    if not (lo < value < hi) or not math.isfinite(value):
        raise ParameterError(field, f"must lie in ({lo:g}, {hi:g}), got {value!r}")
    return value


def _check_rate_index(h_eff, field="hurst"):
    # the sharp-rate theory needs H_eff in (1/2, 1)
    if not (0.5 < h_eff < 1.0):
        raise ParameterError(field, f"effective Hoelder index must lie in (1/2, 1), got {h_eff!r}")
    return h_eff


def _check_times(*ts):
    for t in ts:
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(~np.isfinite(arr)):
            raise ParameterError("t", "times must lie in [0, 1]")


class CovarianceModel:
    """Base class.  Subclasses implement ``_cov`` and may override ``_vario``."""

    kind: ModelKind
    hurst: float
    sigma2: float
    #: True for models where only two-sided variogram bounds hold near 0
    envelope: bool = False

    def covariance(self, t, s):
        _check_times(t, s)
        return self._cov(np.asarray(t, dtype=float), np.asarray(s, dtype=float))

    def variance(self, t):
        t = np.asarray(t, dtype=float)
        _check_times(t)
        return self._cov(t, t)

    def variogram(self, t, s):
        _check_times(t, s)
        return self._vario(np.asarray(t, dtype=float), np.asarray(s, dtype=float))

    def _vario(self, t, s):
        return self._cov(t, t) + self._cov(s, s) - 2.0 * self._cov(t, s)

    def _cov(self, t, s):  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def key(self) -> str:
        """Hashable identity used for factor caching and provenance."""
        return json.dumps(self.to_dict(), sort_keys=True)

    @property
    def name(self) -> str:
        params = ",".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{self.kind.value}({params})"

    @property
    def continuous(self) -> bool:
        """False when R is only known on a fixed grid."""
        return True

    def to_dict(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    def __eq__(self, other):
        return isinstance(other, CovarianceModel) and self.key == other.key

    def __hash__(self):
        return hash(self.key)


class FBM(CovarianceModel):
    """Fractional Brownian motion, R = (t^2H + s^2H - |t-s|^2H) / 2."""

    kind = ModelKind.FBM

    def __init__(self, hurst: float):
        self.H = _check_hurst(hurst)
        self.hurst = _check_rate_index(self.H)
        self.sigma2 = 1.0

    def _cov(self, t, s):
        h2 = 2.0 * self.H
        return 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)

    def _vario(self, t, s):
        return np.abs(t - s) ** (2.0 * self.H)

    def to_dict(self):
        return {"kind": self.kind.value, "hurst": self.H}


class MultiMixedFBM(CovarianceModel):
    """Sum of independent fBms, X = sum_k sigma_k B^{H_k}, with sum sigma_k^2 = 1.

    ``variances`` are the squared weights sigma_k^2.  The rate is driven by the
    smallest Hurst index; components tied at that index are pooled into sigma2.
    """

    kind = ModelKind.MULTI_MIXED_FBM

    def __init__(self, hursts: Sequence[float], variances: Sequence[float]):
        hursts = tuple(_check_hurst(h, "hursts") for h in hursts)
        variances = tuple(float(v) for v in variances)
        if len(hursts) == 0 or len(hursts) != len(variances):
            raise ParameterError("variances", "need one positive variance per Hurst index")
        if any(not (v > 0.0) for v in variances):
            raise ParameterError("variances", "weights must be positive")
        if abs(math.fsum(variances) - 1.0) > 1e-10:
            raise ParameterError("variances", f"must sum to 1, got {math.fsum(variances)!r}")
        self.hursts = hursts
        self.variances = variances
        self.hurst = _check_rate_index(min(hursts), "hursts")
        self.sigma2 = math.fsum(v for h, v in zip(hursts, variances) if h == self.hurst)

    def _cov(self, t, s):
        out = 0.0
        for h, v in zip(self.hursts, self.variances):
            h2 = 2.0 * h
            out = out + v * 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
        return out

    def _vario(self, t, s):
        d = np.abs(t - s)
        out = 0.0
        for h, v in zip(self.hursts, self.variances):
            out = out + v * d ** (2.0 * h)
        return out

    def to_dict(self):
        return {"kind": self.kind.value, "hursts": list(self.hursts), "variances": list(self.variances)}


class SubFBM(CovarianceModel):
    """Normalised sub-fractional Brownian motion (V(t) = t^2H)."""

    kind = ModelKind.SUB_FBM
    envelope = True

    def __init__(self, hurst: float):
        self.H = _check_hurst(hurst)
        self.hurst = _check_rate_index(self.H)
        # covariance normaliser, also the interior variogram coefficient
        self.norm = 1.0 / (2.0 - 2.0 ** (2.0 * self.H - 1.0))
        self.sigma2 = self.norm

    def _cov(self, t, s):
        h2 = 2.0 * self.H
        return self.norm * (s**h2 + t**h2 - 0.5 * ((s + t) ** h2 + np.abs(s - t) ** h2))

    def to_dict(self):
        return {"kind": self.kind.value, "hurst": self.H}


class BiFBM(CovarianceModel):
    """Bifractional Brownian motion B^{H,K}; rate index H*K, V(t) = t^{2HK}."""

    kind = ModelKind.BIFBM
    envelope = True

    def __init__(self, hurst: float, k: float):
        self.H = _check_hurst(hurst)
        k = float(k)
        if not (0.0 < k <= 1.0):
            raise ParameterError("k", f"must lie in (0, 1], got {k!r}")
        self.K = k
        self.hurst = _check_rate_index(self.H * self.K, "k")
        # interior coefficient: the smooth part of the variogram is O(|t-s|^2)
        self.sigma2 = 2.0 ** (1.0 - self.K)

    def _cov(self, t, s):
        h2 = 2.0 * self.H
        return ((t**h2 + s**h2) ** self.K - np.abs(t - s) ** (h2 * self.K)) / 2.0**self.K

    def to_dict(self):
        return {"kind": self.kind.value, "hurst": self.H, "k": self.K}


class StationaryPowExp(CovarianceModel):
    """Stationary process with r(tau) = exp(-|tau|^2H).

    The variogram is 2(1 - r(tau)) = 2|tau|^2H + o(|tau|^2H), so sigma2 = 2.
    """

    kind = ModelKind.STATIONARY_POWEXP

    def __init__(self, hurst: float):
        self.H = _check_hurst(hurst)
        self.hurst = _check_rate_index(self.H)
        self.sigma2 = 2.0

    def _cov(self, t, s):
        return np.exp(-(np.abs(t - s) ** (2.0 * self.H)))

    def _vario(self, t, s):
        return -2.0 * np.expm1(-(np.abs(t - s) ** (2.0 * self.H)))

    def to_dict(self):
        return {"kind": self.kind.value, "hurst": self.H}


def _validate_custom(model: CovarianceModel, grid: np.ndarray):
    tt, ss = np.meshgrid(grid, grid, indexing="ij")
    R = np.asarray(model._cov(tt, ss), dtype=float)
    if not np.all(np.isfinite(R)):
        raise ParameterError("covariance", "non-finite covariance values")
    if np.max(np.abs(R - R.T)) > 1e-12:
        raise ParameterError("covariance", "covariance is not symmetric")
    V = np.diag(R)
    if abs(V[-1] - 1.0) > 1e-10:
        raise ParameterError("covariance", f"V(1) must equal 1, got {V[-1]!r}")
    if np.any(np.diff(V) < -1e-12):
        raise ParameterError("covariance", "variance function must be non-decreasing")
    theta = V[:, None] + V[None, :] - 2.0 * R
    if np.min(theta) < -1e-12:
        raise ParameterError("covariance", "variogram takes negative values")


def _declared(hurst, sigma2):
    if hurst is None:
        raise ParameterError("hurst", "custom models must declare their Hoelder index")
    if sigma2 is None:
        raise ParameterError("sigma2", "custom models must declare the variogram coefficient sigma2")
    sigma2 = float(sigma2)
    if not (sigma2 > 0.0 and math.isfinite(sigma2)):
        raise ParameterError("sigma2", f"must be positive, got {sigma2!r}")
    return _check_rate_index(float(hurst)), sigma2


class CustomExpression(CovarianceModel):
    """User covariance given as an expression in ``t`` and ``s`` (parsed by sympy)."""

    kind = ModelKind.CUSTOM

    def __init__(self, expression: str, hurst: float, sigma2: float, envelope: bool = False):
        import sympy

        self.hurst, self.sigma2 = _declared(hurst, sigma2)
        self.expression = str(expression)
        self.envelope = bool(envelope)
        t, s = sympy.symbols("t s", real=True)
        try:
            expr = sympy.parsing.sympy_parser.parse_expr(self.expression, local_dict={"t": t, "s": s})
        except Exception as exc:  # sympy raises a zoo of exception types
            raise ParameterError("expression", f"cannot parse: {exc}") from None
        extra = expr.free_symbols - {t, s}
        if extra:
            raise ParameterError("expression", f"unknown symbols {sorted(map(str, extra))}")
        self._fn: Callable = sympy.lambdify((t, s), expr, modules="numpy")
        _validate_custom(self, np.linspace(0.0, 1.0, 65))

    def _cov(self, t, s):
        return np.broadcast_to(np.asarray(self._fn(t, s), dtype=float), np.broadcast(t, s).shape) * 1.0

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "expression": self.expression,
            "hurst": self.hurst,
            "sigma2": self.sigma2,
            "envelope": self.envelope,
        }


class CustomTable(CovarianceModel):
    """Covariance tabulated at t_j = j/n, j = 0..n (lower triangle of an (n+1)x(n+1) matrix).

    Only times on that grid can be evaluated, so any analysis grid n' must
    divide n.
    """

    kind = ModelKind.CUSTOM

    def __init__(self, matrix, n: int, hurst: float, sigma2: float, envelope: bool = False, source: str = ""):
        self.hurst, self.sigma2 = _declared(hurst, sigma2)
        self.n = int(n)
        if self.n < 1:
            raise ParameterError("n", "table grid size must be >= 1")
        M = np.array(matrix, dtype=float)
        if M.shape != (self.n + 1, self.n + 1):
            raise ParameterError("table", f"expected {(self.n + 1, self.n + 1)} matrix, got {M.shape}")
        lower = np.tril(M)
        self.table = lower + np.tril(lower, -1).T
        self.table.setflags(write=False)
        self.envelope = bool(envelope)
        self.source = source
        self._digest = hashlib.sha1(self.table.tobytes()).hexdigest()[:16]
        _validate_custom(self, np.arange(self.n + 1) / self.n)

    @property
    def continuous(self):
        return False

    def _index(self, t):
        x = np.asarray(t, dtype=float) * self.n
        idx = np.rint(x)
        if np.any(np.abs(x - idx) > 1e-9):
            raise ParameterError("t", f"tabulated model only defined on the grid k/{self.n}")
        return idx.astype(np.int64)

    def _cov(self, t, s):
        return self.table[self._index(t), self._index(s)]

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "n": self.n,
            "table_sha1": self._digest,
            "hurst": self.hurst,
            "sigma2": self.sigma2,
            "envelope": self.envelope,
        }


def covariance(model: CovarianceModel, t, s):
    return model.covariance(t, s)


def variance(model: CovarianceModel, t):
    return model.variance(t)


def variogram(model: CovarianceModel, t, s):
    return model.variogram(t, s)


def variogram_bounds(model: CovarianceModel, n: int) -> tuple[float, float]:
    """Min and max of vartheta(t_j, t_k) / |t_j - t_k|^{2 H_eff} over distinct grid pairs.

    Rows are processed one at a time, so memory stays O(n).
    """
    if n < 2:
        raise ParameterError("n", "variogram bounds need a grid with n >= 2")
    t = np.arange(n + 1) / n
    h2 = 2.0 * model.hurst
    lo, hi = math.inf, -math.inf
    for j in range(1, n + 1):
        s = t[:j]
        ratio = model.variogram(t[j], s) / (t[j] - s) ** h2
        lo = min(lo, float(np.min(ratio)))
        hi = max(hi, float(np.max(ratio)))
    return lo, hi


def read_lower_triangular_csv(path) -> np.ndarray:
    """Read a lower-triangular covariance table; row j holds R(t_j, t_0..t_j)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(x) for x in line.split(",")])
    size = len(rows)
    M = np.zeros((size, size))
    for j, row in enumerate(rows):
        if len(row) not in (j + 1, size):
            raise ParameterError("table", f"row {j} has {len(row)} entries, expected {j + 1}")
        M[j, : j + 1] = row[: j + 1]
    return M


_KEYS = {
    "fbm": ({"hurst"}, set()),
    "multi_mixed_fbm": ({"hursts", "variances"}, set()),
    "sub_fbm": ({"hurst"}, set()),
    "bifbm": ({"hurst", "k"}, set()),
    "stationary_powexp": ({"hurst"}, set()),
}


def model_from_dict(block: dict, base_dir=None) -> CovarianceModel:
    """Build a model from its JSON block; unknown keys are rejected."""
    if not isinstance(block, dict):
        raise ParameterError("model", "must be an object")
    kind = block.get("kind")
    fields = {k: v for k, v in block.items() if k != "kind"}
    if kind in _KEYS:
        required, optional = _KEYS[kind]
        missing = required - fields.keys()
        unknown = fields.keys() - required - optional
        if missing:
            raise ParameterError("model", f"missing keys {sorted(missing)} for kind {kind!r}")
        if unknown:
            raise ParameterError("model", f"unknown keys {sorted(unknown)} for kind {kind!r}")
    if kind == "fbm":
        model = FBM(fields["hurst"])
    elif kind == "multi_mixed_fbm":
        model = MultiMixedFBM(fields["hursts"], fields["variances"])
    elif kind == "sub_fbm":
        model = SubFBM(fields["hurst"])
    elif kind == "bifbm":
        model = BiFBM(fields["hurst"], fields["k"])
    elif kind == "stationary_powexp":
        model = StationaryPowExp(fields["hurst"])
    elif kind == "custom":
        allowed = {"expression", "table", "n", "hurst", "sigma2", "envelope"}
        unknown = fields.keys() - allowed
        if unknown:
            raise ParameterError("model", f"unknown keys {sorted(unknown)} for kind 'custom'")
        common = dict(hurst=fields.get("hurst"), sigma2=fields.get("sigma2"), envelope=fields.get("envelope", False))
        if ("expression" in fields) == ("table" in fields):
            raise ParameterError("model", "custom model needs exactly one of 'expression' or 'table'")
        if "expression" in fields:
            return CustomExpression(fields["expression"], **common)
        if "n" not in fields:
            raise ParameterError("n", "tabulated custom model needs its grid size n")
        _declared(common["hurst"], common["sigma2"])
        import os

        path = fields["table"]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        try:
            M = read_lower_triangular_csv(path)
        except OSError as exc:
            raise ParameterError("table", str(exc)) from None
        except ValueError as exc:
            raise ParameterError("table", f"bad number: {exc}") from None
        return CustomTable(M, fields["n"], source=str(path), **common)
    else:
        raise ParameterError("kind", f"unknown model kind {kind!r}")
    return model
