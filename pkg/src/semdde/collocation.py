"""Discretized periodic BVP and its damped Newton solver.

The unknowns are the representation values of the periodic piecewise
polynomial (the shared break values stored once) plus mu = (period,
parameters).  The residual collects the rescaled equation at the
collocation points of every mesh interval, followed by the affine
constraint rows that square the system.

Jacobians are forward finite differences on the full residual; the
constraint rows are overwritten with their exact affine coefficients.
The Newton iteration damps by halving on residual increase, down to a
floor, and factors the dense Jacobian by LU with partial pivoting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .errors import (
    FormatVersionError,
    InvalidArgumentError,
    MaxIterExceededError,
    NonFiniteResidualError,
    SingularJacobianError,
)
from .nodes import NodeKind, make_nodes
from .piecewise import (
    FORMAT_VERSION,
    Mesh,
    PeriodicPiecewisePoly,
    poly_from_document,
    poly_to_document,
    sample_periodic,
)
from .problems import DdeProblem, RescaledRhs

DEFAULT_COLLOCATION_KIND = NodeKind.GAUSS_LEGENDRE


class DiscreteState:
    """A candidate solution: periodic profile plus mu = (period, params).

    ``flatten`` packs the free representation values (nodes 0..m-1 of
    each interval; the right endpoint is the next interval's left one)
    and mu into one vector; ``from_flat`` inverts it bitwise.
    """

    def __init__(self, poly: PeriodicPiecewisePoly, mu):
        mu = np.asarray(mu, dtype=float).copy()
        if mu.ndim != 1 or mu.size < 1:
            raise InvalidArgumentError("mu must pack (period, parameters)")
        if not np.all(np.isfinite(mu)):
            raise InvalidArgumentError("mu must be finite")
        if mu[0] <= 0.0:
            raise InvalidArgumentError(f"period must be positive, got {mu[0]}")
        mu.flags.writeable = False
        self.poly = poly
        self.mu = mu

    @property
    def period(self) -> float:
        return float(self.mu[0])

    @property
    def params(self) -> np.ndarray:
        return self.mu[1:]

    @property
    def size(self) -> int:
        mesh = self.poly.mesh
        return (mesh.num_intervals * self.poly.degree * self.poly.dim
                + self.mu.size)

    def flatten(self) -> np.ndarray:
        m = self.poly.degree
        free = self.poly.values[:, :m, :]
        return np.concatenate([free.ravel(), self.mu])

    @classmethod
    def from_flat(cls, flat, mesh: Mesh, degree: int, dim: int,
                  num_params: int) -> "DiscreteState":
        flat = np.asarray(flat, dtype=float)
        L = mesh.num_intervals
        n_mu = 1 + num_params
        n_free = L * degree * dim
        if flat.shape != (n_free + n_mu,):
            raise InvalidArgumentError(
                f"flat vector must have length {n_free + n_mu}, got "
                f"{flat.shape}")
        free = flat[:n_free].reshape(L, degree, dim)
        values = np.empty((L, degree + 1, dim))
        values[:, :degree, :] = free
        values[:-1, degree, :] = free[1:, 0, :]
        values[-1, degree, :] = free[0, 0, :]
        poly = PeriodicPiecewisePoly(mesh, degree, values)
        return cls(poly, flat[n_free:])


def resample_state(state: DiscreteState, mesh: Mesh,
                   degree: int) -> DiscreteState:
    """Re-express a state on another mesh and degree, keeping mu.

    The profile is re-sampled at the new representation nodes; this is
    the warm-start path between discretizations.
    """
    poly = sample_periodic(state.poly.eval, mesh, degree)
    return DiscreteState(poly, state.mu)


def with_parameter(state: DiscreteState, index: int,
                   value: float) -> DiscreteState:
    """Copy a state with one problem parameter replaced."""
    if not 0 <= index < state.params.size:
        raise InvalidArgumentError(
            f"parameter index {index} outside 0..{state.params.size - 1}")
    mu = state.mu.copy()
    mu[1 + index] = value
    return DiscreteState(state.poly, mu)


def state_to_document(state: DiscreteState) -> dict:
    """JSON-ready description of a state; round-trips bitwise."""
    return {
        "format_version": FORMAT_VERSION,
        "mu": state.mu.tolist(),
        "profile": poly_to_document(state.poly),
    }


def state_from_document(doc: dict) -> DiscreteState:
    required = {"format_version", "mu", "profile"}
    if set(doc) != required:
        raise InvalidArgumentError(
            f"state document needs keys {sorted(required)}, got "
            f"{sorted(doc)}")
    version = doc["format_version"]
    if not isinstance(version, int) or version < 1:
        raise FormatVersionError(f"bad format_version {version!r}")
    if version > FORMAT_VERSION:
        raise FormatVersionError(
            f"file declares format_version {version}; this build reads "
            f"up to {FORMAT_VERSION}")
    return DiscreteState(poly_from_document(doc["profile"]), doc["mu"])


@dataclass(frozen=True)
class AffineRow:
    """One affine functional: sum of point values of the profile plus a
    linear term in mu plus an offset.

    ``point_terms`` is a tuple of (time, component, coefficient).
    """

    point_terms: Tuple[Tuple[float, int, float], ...]
    mu_coeffs: np.ndarray
    offset: float

    def __post_init__(self):
        coeffs = np.asarray(self.mu_coeffs, dtype=float).copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "mu_coeffs", coeffs)

    def value(self, poly: PeriodicPiecewisePoly, mu: np.ndarray) -> float:
        total = float(self.mu_coeffs @ mu) + self.offset
        for time, comp, coeff in self.point_terms:
            total += coeff * float(poly.eval(time)[comp])
        return total


def phase_anchor_row(anchor_value: float, num_params: int,
                     component: int = 0) -> AffineRow:
    """The row y_component(0) - anchor_value = 0."""
    return AffineRow(point_terms=((0.0, component, 1.0),),
                     mu_coeffs=np.zeros(1 + num_params),
                     offset=-float(anchor_value))


def parameter_pin_row(param_index: int, target: float,
                      num_params: int) -> AffineRow:
    """The row p[param_index] - target = 0."""
    coeffs = np.zeros(1 + num_params)
    coeffs[1 + param_index] = 1.0
    return AffineRow(point_terms=(), mu_coeffs=coeffs, offset=-float(target))


def default_constraints(prob: DdeProblem, params_target,
                        anchor_value: Optional[float] = None,
                        ) -> Tuple[AffineRow, ...]:
    """Phase anchor at t=0 plus one pin row per free parameter.

    The anchor value defaults to the problem's declared equilibrium;
    problems without one must pass it explicitly (taken from the initial
    guess's value at t=0 by the callers that do so).
    """
    params_target = np.atleast_1d(np.asarray(params_target, dtype=float))
    if params_target.size != prob.num_params:
        raise InvalidArgumentError(
            f"expected {prob.num_params} target parameters, got "
            f"{params_target.size}")
    if anchor_value is None:
        if prob.equilibrium is None:
            raise InvalidArgumentError(
                f"problem {prob.name!r} declares no equilibrium; pass an "
                f"explicit phase anchor value")
        anchor_value = float(prob.equilibrium[0])
    rows = [phase_anchor_row(anchor_value, prob.num_params)]
    for k in range(prob.num_params):
        rows.append(parameter_pin_row(k, float(params_target[k]),
                                      prob.num_params))
    return tuple(rows)


@dataclass(frozen=True)
class NewtonSettings:
    """Damped Newton iteration controls; all entries must be positive."""

    tol_residual: float = 1e-10
    tol_step: float = 1e-12
    max_iter: int = 25
    damping_min: float = 1.0 / 64.0
    fd_step: float = float(np.sqrt(np.finfo(float).eps))

    def __post_init__(self):
        for name in ("tol_residual", "tol_step", "damping_min", "fd_step"):
            if getattr(self, name) <= 0.0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be at least 1")


def collocation_times(mesh: Mesh, m: int,
                      kind: NodeKind = DEFAULT_COLLOCATION_KIND) -> np.ndarray:
    """Global collocation times, shape (intervals, m)."""
    family = make_nodes(kind, m)
    return (mesh.breaks[:-1, None]
            + mesh.lengths[:, None] * family.nodes[None, :])


def assemble_residual(state: DiscreteState, prob: DdeProblem,
                      cons: Sequence[AffineRow],
                      kind: NodeKind = DEFAULT_COLLOCATION_KIND) -> np.ndarray:
    """Collocation rows (profile derivative minus rescaled rhs) followed
    by the affine constraint values."""
    if len(cons) != state.mu.size:
        raise InvalidArgumentError(
            f"need {state.mu.size} constraint rows to square the system, "
            f"got {len(cons)}")
    poly = state.poly
    times = collocation_times(poly.mesh, poly.degree, kind).ravel()
    deriv = poly.eval_deriv(times)
    rhs_vals = RescaledRhs(prob)(poly, times, state.mu)
    rows = (deriv - rhs_vals).ravel()
    cons_vals = [row.value(poly, state.mu) for row in cons]
    return np.concatenate([rows, cons_vals])


def _basis_row(node_times, weights, t):
    """Lagrange basis values at t for one interval's global nodes."""
    diff = t - node_times
    hits = np.nonzero(diff == 0.0)[0]
    if hits.size:
        row = np.zeros(node_times.size)
        row[hits[0]] = 1.0
        return row
    ratio = weights / diff
    return ratio / np.sum(ratio)


def constraint_gradient(row: AffineRow, state: DiscreteState) -> np.ndarray:
    """Exact gradient of an affine row with respect to the flat vector."""
    poly = state.poly
    mesh = poly.mesh
    L = mesh.num_intervals
    m = poly.degree
    dim = poly.dim
    n_free = L * m * dim
    grad = np.zeros(n_free + state.mu.size)
    for time, comp, coeff in row.point_terms:
        wrapped = float(np.asarray(time) - np.floor(time))
        i = int(mesh.interval_index(wrapped))
        basis = _basis_row(poly.node_times[i], poly.rep_family.bary_weights,
                           wrapped)
        for j in range(m):
            grad[(i * m + j) * dim + comp] += coeff * basis[j]
        # the interval's right endpoint is stored as the next interval's
        # (or, wrapping, the first interval's) left node
        grad[(((i + 1) % L) * m) * dim + comp] += coeff * basis[m]
    grad[n_free:] = row.mu_coeffs
    return grad


def assemble_jacobian(state: DiscreteState, prob: DdeProblem,
                      cons: Sequence[AffineRow],
                      settings: NewtonSettings = NewtonSettings(),
                      kind: NodeKind = DEFAULT_COLLOCATION_KIND) -> np.ndarray:
    """Forward finite-difference Jacobian with analytic constraint rows."""
    poly = state.poly
    mesh = poly.mesh
    x0 = state.flatten()
    r0 = assemble_residual(state, prob, cons, kind)
    n = x0.size
    jac = np.empty((n, n))
    for j in range(n):
        h = settings.fd_step * max(1.0, abs(x0[j]))
        xj = x0.copy()
        xj[j] += h
        state_j = DiscreteState.from_flat(xj, mesh, poly.degree, poly.dim,
                                          state.mu.size - 1)
        jac[:, j] = (assemble_residual(state_j, prob, cons, kind) - r0) / h
    n_colloc = n - state.mu.size
    for k, row in enumerate(cons):
        jac[n_colloc + k, :] = constraint_gradient(row, state)
    return jac


@dataclass(frozen=True)
class NewtonResult:
    state: DiscreteState
    iterations: int
    residual_history: np.ndarray = field(repr=False)


def newton_solve(init: DiscreteState, prob: DdeProblem,
                 cons: Sequence[AffineRow],
                 settings: NewtonSettings = NewtonSettings(),
                 kind: NodeKind = DEFAULT_COLLOCATION_KIND) -> NewtonResult:
    """Damped Newton iteration on the discretized periodic BVP.

    Stops when the residual max-norm drops to ``tol_residual``.  Raises
    when the iteration budget runs out, the step stagnates below
    ``tol_step`` without meeting the tolerance, the LU factorization
    meets a pivot below 1e-14 of the matrix scale, or the residual
    leaves the finite (or positive-period) region at the damping floor.
    """
    mesh = init.poly.mesh
    degree = init.poly.degree
    dim = init.poly.dim
    num_params = init.mu.size - 1
    x = init.flatten()
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("initial state must be finite")
    state = init
    residual = assemble_residual(state, prob, cons, kind)
    if not np.all(np.isfinite(residual)):
        raise NonFiniteResidualError("residual not finite at the initial state")
    res_norm = float(np.max(np.abs(residual)))
    history = [res_norm]

    for iteration in range(settings.max_iter):
        if res_norm <= settings.tol_residual:
            return NewtonResult(state, iteration, np.array(history))
        jac = assemble_jacobian(state, prob, cons, settings, kind)
        scale = float(np.max(np.abs(jac)))
        with warnings.catch_warnings():
            # the explicit pivot check below turns singularity into a
            # typed error; scipy's advisory warning would be redundant
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(jac)
        if float(np.min(np.abs(np.diag(lu)))) < 1e-14 * scale:
            raise SingularJacobianError(
                f"LU pivot below 1e-14 of the matrix scale {scale:.3e} at "
                f"iteration {iteration}")
        step = lu_solve((lu, piv), -residual)

        damping = 1.0
        period_idx = x.size - state.mu.size
        while True:
            x_trial = x + damping * step
            trial_ok = (np.all(np.isfinite(x_trial))
                        and x_trial[period_idx] > 0.0)
            if trial_ok:
                trial_state = DiscreteState.from_flat(
                    x_trial, mesh, degree, dim, num_params)
                trial_residual = assemble_residual(trial_state, prob, cons,
                                                   kind)
                finite = bool(np.all(np.isfinite(trial_residual)))
            else:
                finite = False
            if finite:
                trial_norm = float(np.max(np.abs(trial_residual)))
                if trial_norm < res_norm or damping <= settings.damping_min:
                    break
            elif damping <= settings.damping_min:
                raise NonFiniteResidualError(
                    "residual left the finite region even at the damping "
                    f"floor (iteration {iteration})")
            damping *= 0.5

        step_norm = float(np.max(np.abs(damping * step)))
        x, state, residual = x_trial, trial_state, trial_residual
        res_norm = trial_norm
        history.append(res_norm)
        if res_norm <= settings.tol_residual:
            return NewtonResult(state, iteration + 1, np.array(history))
        if step_norm <= settings.tol_step * max(1.0, float(np.max(np.abs(x)))):
            raise MaxIterExceededError(
                f"Newton stalled: step {step_norm:.3e} below tol_step with "
                f"residual {res_norm:.3e}",
                residual_history=np.array(history))

    raise MaxIterExceededError(
        f"no convergence in {settings.max_iter} iterations "
        f"(residual {res_norm:.3e})",
        residual_history=np.array(history))
