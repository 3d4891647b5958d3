"""Curve backends and their jets.

Two curve representations are supported: polynomial frame curves, whose
jets at any base time are exact Taylor shifts, and ODE-defined frame
curves, advanced by an adaptive Runge-Kutta integrator with higher
derivatives filled in by differentiating the defining equation through
jet arithmetic.

A frame curve takes values in the kn x n matrices; its value at ``t``
spans an n-plane of R^(kn).  The curve is *fanning* at ``t`` when the
juxtaposed kn x kn matrix ``(A | A' | ... | A^(k-1))`` is invertible
there.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp

from .jets import DEFAULT_CONDITION_LIMIT, MatrixJet, jet_mul


class NotFanningError(RuntimeError):
    """The juxtaposed derivative matrix is singular or too ill-conditioned."""

    def __init__(self, condition, at_time=None):
        where = "" if at_time is None else f" at t={at_time!r}"
        super().__init__(f"frame is not fanning{where}: condition {condition:.3e}")
        self.condition = condition
        self.at_time = at_time


class InsufficientOrderError(ValueError):
    """A jet of higher order is required for the requested computation."""


class IntegrationError(RuntimeError):
    """The adaptive integrator failed to reach the requested time."""


class CurveFormatError(ValueError):
    """Malformed curve description (JSON schema violation)."""


def _matrix_tuple(coefficients, shape, what):
    out = []
    for i, c in enumerate(coefficients):
        arr = np.array(c, dtype=float)
        if arr.shape != shape:
            raise CurveFormatError(
                f"{what} coefficient {i} has shape {arr.shape}, expected {shape}"
            )
        arr.setflags(write=False)
        out.append(arr)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class PolynomialMatrix:
    """Matrix polynomial ``sum_i C_i t^i`` in the global time variable."""

    coefficients: tuple

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise CurveFormatError("a polynomial needs at least one coefficient")
        shape = np.asarray(self.coefficients[0], dtype=float).shape
        object.__setattr__(
            self, "coefficients", _matrix_tuple(self.coefficients, shape, "polynomial")
        )

    @property
    def degree(self):
        return len(self.coefficients) - 1

    @property
    def shape(self):
        return self.coefficients[0].shape

    def value(self, t):
        val = np.array(self.coefficients[-1])
        for c in self.coefficients[-2::-1]:
            val = val * float(t) + c
        return val

    def jet_at(self, t, order):
        """Exact Taylor re-expansion about base time ``t``, truncated at ``order``."""
        t = float(t)
        coeffs = []
        for j in range(order + 1):
            c = np.zeros(self.shape)
            for i in range(j, self.degree + 1):
                c = c + math.comb(i, j) * self.coefficients[i] * t ** (i - j)
            coeffs.append(c)
        return MatrixJet(t, tuple(coeffs))

    def __matmul__(self, other):
        """Polynomial product by coefficient convolution."""
        coeffs = [
            np.zeros((self.shape[0], other.shape[1]))
            for _ in range(self.degree + other.degree + 1)
        ]
        for i, a in enumerate(self.coefficients):
            for j, b in enumerate(other.coefficients):
                coeffs[i + j] = coeffs[i + j] + a @ b
        return PolynomialMatrix(tuple(coeffs))


class FrameJet:
    """Jet of a frame curve at one time, with its cached juxtaposed lift.

    ``jet`` is a kn x n :class:`MatrixJet` of order at least k-1.  The
    juxtaposed jet stacks the jets of A, A', ..., A^(k-1) as block
    columns; the frame is fanning when its value at the base time is
    invertible within the conditioning threshold.
    """

    def __init__(self, jet, condition_limit=DEFAULT_CONDITION_LIMIT):
        rows, cols = jet.shape
        if cols < 1 or rows % cols != 0:
            raise CurveFormatError(
                f"frame shape {jet.shape} is not kn x n for integer k"
            )
        self.n = cols
        self.k = rows // cols
        if self.k < 2:
            raise CurveFormatError("frames need k >= 2 (ambient dimension kn > n)")
        if jet.order < self.k - 1:
            raise InsufficientOrderError(
                f"frame jet order {jet.order} is below k-1={self.k - 1}"
            )
        self.jet = jet
        self.condition_limit = condition_limit

    @property
    def order(self):
        return self.jet.order

    @property
    def base_time(self):
        return self.jet.base_time

    def derivative_jet(self, j):
        """Jet of A^(j) about the base time (order drops by ``j``)."""
        if j == 0:
            return self.jet
        if j > self.jet.order:
            raise InsufficientOrderError(
                f"derivative {j} needs jet order >= {j}, have {self.jet.order}"
            )
        coeffs = tuple(
            math.perm(m + j, j) * self.jet.coeffs[m + j]
            for m in range(self.jet.order - j + 1)
        )
        return MatrixJet(self.base_time, coeffs)

    @cached_property
    def juxtaposed(self):
        """kn x kn jet of ``(A | A' | ... | A^(k-1))``."""
        q = self.jet.order - self.k + 1
        kn = self.k * self.n
        coeffs = []
        for m in range(q + 1):
            block = np.empty((kn, kn))
            for j in range(self.k):
                block[:, j * self.n : (j + 1) * self.n] = (
                    math.perm(m + j, j) * self.jet.coeffs[m + j]
                )
            coeffs.append(block)
        return MatrixJet(self.base_time, tuple(coeffs))

    @cached_property
    def condition(self):
        return float(np.linalg.cond(self.juxtaposed.value()))

    @property
    def is_fanning(self):
        return self.condition < self.condition_limit

    def require_fanning(self):
        if not self.is_fanning:
            raise NotFanningError(self.condition, at_time=self.base_time)

    @cached_property
    def juxtaposed_inverse(self):
        self.require_fanning()
        return self.juxtaposed.inverse(condition_limit=None)

    def left_multiplied(self, t_matrix):
        """Frame jet of ``T A`` for a constant ambient matrix ``T``."""
        t_matrix = np.asarray(t_matrix, dtype=float)
        coeffs = tuple(t_matrix @ c for c in self.jet.coeffs)
        return FrameJet(MatrixJet(self.base_time, coeffs), self.condition_limit)

    def right_multiplied(self, x):
        """Frame jet of ``A X`` for a constant n x n matrix or an n x n jet."""
        if isinstance(x, MatrixJet):
            return FrameJet(jet_mul(self.jet, x), self.condition_limit)
        x = np.asarray(x, dtype=float)
        coeffs = tuple(c @ x for c in self.jet.coeffs)
        return FrameJet(MatrixJet(self.base_time, coeffs), self.condition_limit)

    def truncated(self, order):
        return FrameJet(self.jet.truncated(order), self.condition_limit)

    def extended_with_zeros(self, order):
        """Pad with zero coefficients; used to fix a jet extension explicitly."""
        if order <= self.jet.order:
            return self
        zero = np.zeros(self.jet.shape)
        coeffs = self.jet.coeffs + (zero,) * (order - self.jet.order)
        return FrameJet(MatrixJet(self.base_time, coeffs), self.condition_limit)

    def __repr__(self):
        return (
            f"FrameJet(k={self.k}, n={self.n}, order={self.order}, "
            f"base_time={self.base_time})"
        )


@dataclass(frozen=True, eq=False)
class PolynomialFrameCurve:
    """Frame curve ``A(t) = sum_i M_i t^i`` with kn x n coefficients."""

    k: int
    n: int
    coefficients: tuple

    def __post_init__(self):
        if self.k < 2 or self.n < 1:
            raise CurveFormatError(f"need k >= 2 and n >= 1, got k={self.k}, n={self.n}")
        shape = (self.k * self.n, self.n)
        object.__setattr__(
            self, "coefficients", _matrix_tuple(self.coefficients, shape, "frame")
        )

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def value(self, t):
        val = np.array(self.coefficients[-1])
        for c in self.coefficients[-2::-1]:
            val = val * float(t) + c
        return val

    def derivative_value(self, t, j):
        """A^(j)(t) by direct polynomial differentiation."""
        val = np.zeros((self.k * self.n, self.n))
        for i in range(j, self.degree + 1):
            val = val + math.perm(i, j) * self.coefficients[i] * float(t) ** (i - j)
        return val

    @cached_property
    def _derivative_stack(self):
        """Horner-ready coefficients of (A | A' | ... | A^(k)) as one array."""
        k, n = self.k, self.n
        stack = np.zeros((self.degree + 1, k * n, (k + 1) * n))
        for j in range(k + 1):
            for m in range(self.degree + 1 - j):
                stack[m, :, j * n : (j + 1) * n] = (
                    math.perm(m + j, j) * self.coefficients[m + j]
                )
        return stack

    def derivative_row(self, t):
        """Values of (A | A' | ... | A^(k)) at ``t`` in one Horner pass."""
        stack = self._derivative_stack
        val = np.array(stack[-1])
        t = float(t)
        for c in stack[-2::-1]:
            val = val * t + c
        return val

    def frame_jet(self, t, order, condition_limit=DEFAULT_CONDITION_LIMIT):
        return eval_frame_jet(self, t, order, condition_limit)

    def transformed(self, t_matrix):
        """The curve ``T A(t)`` for a constant kn x kn matrix ``T``."""
        t_matrix = np.asarray(t_matrix, dtype=float)
        return PolynomialFrameCurve(
            self.k, self.n, tuple(t_matrix @ c for c in self.coefficients)
        )

    def right_multiplied(self, x):
        """The curve ``A(t) X(t)`` for a constant matrix or PolynomialMatrix."""
        if not isinstance(x, PolynomialMatrix):
            x = PolynomialMatrix((np.asarray(x, dtype=float),))
        product = PolynomialMatrix(self.coefficients) @ x
        return PolynomialFrameCurve(self.k, self.n, product.coefficients)


def eval_frame_jet(curve, t, order, condition_limit=DEFAULT_CONDITION_LIMIT):
    """Exact jet of a polynomial frame curve at base time ``t``."""
    if order < curve.k - 1:
        raise InsufficientOrderError(
            f"order {order} is below k-1={curve.k - 1}"
        )
    poly = PolynomialMatrix(curve.coefficients)
    return FrameJet(poly.jet_at(t, order), condition_limit)


@dataclass(frozen=True, eq=False)
class OdeFrameCurve:
    """Frame curve defined by its order-k linear equation.

    The frame satisfies ``A^(k) + sum_(i=1..k) C(k,i) A^(k-i) P_i = 0``
    with prescribed n x n polynomial coefficient curves ``P_1 .. P_k``
    and initial juxtaposed matrix ``(A | A' | ... | A^(k-1))(0)``.
    """

    k: int
    n: int
    p: tuple
    initial_juxtaposed: np.ndarray
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if self.k < 2 or self.n < 1:
            raise CurveFormatError(f"need k >= 2 and n >= 1, got k={self.k}, n={self.n}")
        if len(self.p) != self.k:
            raise CurveFormatError(f"expected {self.k} coefficient curves, got {len(self.p)}")
        ps = []
        for i, poly in enumerate(self.p):
            if not isinstance(poly, PolynomialMatrix):
                poly = PolynomialMatrix(tuple(np.asarray(c, dtype=float) for c in poly))
            if poly.shape != (self.n, self.n):
                raise CurveFormatError(
                    f"P_{i + 1} has shape {poly.shape}, expected {(self.n, self.n)}"
                )
            ps.append(poly)
        object.__setattr__(self, "p", tuple(ps))
        a0 = np.array(self.initial_juxtaposed, dtype=float)
        kn = self.k * self.n
        if a0.shape != (kn, kn):
            raise CurveFormatError(
                f"initial juxtaposed matrix has shape {a0.shape}, expected {(kn, kn)}"
            )
        condition = np.linalg.cond(a0)
        if not condition < DEFAULT_CONDITION_LIMIT:
            raise NotFanningError(condition, at_time=0.0)
        a0.setflags(write=False)
        object.__setattr__(self, "initial_juxtaposed", a0)

    def p_value(self, t):
        return [poly.value(t) for poly in self.p]

    def frame_jet(self, t, order, condition_limit=DEFAULT_CONDITION_LIMIT):
        return integrate_ode_jet(self, t, order, condition_limit)


def _ode_state_derivative(curve, t, state):
    k, n = curve.k, curve.n
    kn = k * n
    y = state.reshape(k, kn, n)
    out = np.empty_like(y)
    out[:-1] = y[1:]
    top = np.zeros((kn, n))
    for i in range(1, k + 1):
        top -= math.comb(k, i) * y[k - i] @ curve.p[i - 1].value(t)
    out[-1] = top
    return out.reshape(-1)


def integrate_ode_jet(curve, t, order, condition_limit=DEFAULT_CONDITION_LIMIT):
    """Advance the frame state to ``t`` and build its jet of the given order.

    The state ``(A, A', ..., A^(k-1))`` is integrated with an adaptive
    Runge-Kutta 5(4) scheme; derivatives of order >= k come from
    differentiating the defining equation through jet arithmetic.
    """
    k, n = curve.k, curve.n
    if order < k - 1:
        raise InsufficientOrderError(f"order {order} is below k-1={k - 1}")
    t = float(t)
    kn = k * n
    y0 = np.empty((k, kn, n))
    for j in range(k):
        y0[j] = curve.initial_juxtaposed[:, j * n : (j + 1) * n]
    if t == 0.0:
        state = y0
    else:
        sol = solve_ivp(
            lambda s, y: _ode_state_derivative(curve, s, y),
            (0.0, t),
            y0.reshape(-1),
            method="RK45",
            rtol=curve.rtol,
            atol=curve.atol,
            dense_output=False,
        )
        if not sol.success:
            raise IntegrationError(f"integrator stopped before t={t}: {sol.message}")
        state = sol.y[:, -1].reshape(k, kn, n)

    coeffs = [state[j] / math.factorial(j) for j in range(k)]
    p_jets = [poly.jet_at(t, max(order - k, 0)) for poly in curve.p]
    for m in range(k, order + 1):
        idx = m - k
        current = MatrixJet(t, tuple(coeffs))
        frame = FrameJet(current, condition_limit=np.inf)
        top = np.zeros((kn, n))
        for i in range(1, k + 1):
            dji = frame.derivative_jet(k - i)
            prod = jet_mul(dji.truncated(idx), p_jets[i - 1].truncated(idx))
            top -= math.comb(k, i) * prod.coeffs[idx]
        coeffs.append(top * math.factorial(idx) / math.factorial(m))
    return FrameJet(MatrixJet(t, tuple(coeffs)), condition_limit)


def standard_jet(k, n, order, base_time=0.0):
    """Canonical frame jet: ``A^(j) = j``-th block column for j <= k-1, zero above.

    Its juxtaposed value is the identity, so the jet is fanning and its
    fundamental endomorphism equals the canonical nilpotent matrix.
    """
    if order < k - 1:
        raise InsufficientOrderError(f"order {order} is below k-1={k - 1}")
    coeffs = []
    for j in range(order + 1):
        c = np.zeros((k * n, n))
        if j <= k - 1:
            c[j * n : (j + 1) * n] = np.eye(n) / math.factorial(j)
        coeffs.append(c)
    return FrameJet(MatrixJet(base_time, tuple(coeffs)))


def standard_curve(k, n):
    """The monomial curve ``A(t) = sum_j E_j t^j`` over the identity blocks."""
    coeffs = []
    for j in range(k):
        c = np.zeros((k * n, n))
        c[j * n : (j + 1) * n] = np.eye(n)
        coeffs.append(c)
    return PolynomialFrameCurve(k, n, tuple(coeffs))


# -- JSON curve format ----------------------------------------------------


def curve_from_dict(data):
    """Build a curve from the JSON description consumed by the CLI."""
    if not isinstance(data, dict):
        raise CurveFormatError("curve description must be a JSON object")
    try:
        kind = data["kind"]
        k = int(data["k"])
        n = int(data["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CurveFormatError(f"missing or invalid curve header: {exc}") from exc
    if kind == "polynomial":
        if "coefficients" not in data:
            raise CurveFormatError("polynomial curve needs 'coefficients'")
        return PolynomialFrameCurve(k, n, tuple(data["coefficients"]))
    if kind == "ode":
        if "P" not in data or "A0" not in data:
            raise CurveFormatError("ode curve needs 'P' and 'A0'")
        ps = []
        for i, entry in enumerate(data["P"]):
            try:
                coeffs = entry["coefficients"]
            except (TypeError, KeyError) as exc:
                raise CurveFormatError(f"P entry {i} lacks 'coefficients'") from exc
            ps.append(PolynomialMatrix(tuple(coeffs)))
        return OdeFrameCurve(k, n, tuple(ps), np.array(data["A0"], dtype=float))
    raise CurveFormatError(f"unknown curve kind {kind!r}")


def curve_to_dict(curve):
    if isinstance(curve, PolynomialFrameCurve):
        return {
            "kind": "polynomial",
            "k": curve.k,
            "n": curve.n,
            "coefficients": [c.tolist() for c in curve.coefficients],
        }
    if isinstance(curve, OdeFrameCurve):
        return {
            "kind": "ode",
            "k": curve.k,
            "n": curve.n,
            "P": [
                {"degree": poly.degree, "coefficients": [c.tolist() for c in poly.coefficients]}
                for poly in curve.p
            ],
            "A0": curve.initial_juxtaposed.tolist(),
        }
    raise CurveFormatError(f"cannot serialize {type(curve).__name__}")


def load_curve(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CurveFormatError(f"cannot read curve file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CurveFormatError(f"invalid JSON in {path}: {exc}") from exc
    return curve_from_dict(data)
