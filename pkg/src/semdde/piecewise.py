"""Continuous 1-periodic piecewise polynomials on a mesh of [0, 1].

Two representations live here.  ``PeriodicPiecewisePoly`` stores degree-m
polynomials per interval through values at Chebyshev-Lobatto nodes, with
matching values at shared break points so the function is continuous and
1-periodic.  ``PiecewiseProjection`` stores the degree-(m-1) interpolation
projection on m collocation nodes per interval, with no continuity across
breaks.

Evaluation uses barycentric interpolation against precomputed global node
times, so querying a stored node time returns the stored value bitwise.
Interval lookup follows the half-open convention: a break time belongs to
the interval starting there, and t = 1 wraps to 0.
"""

from __future__ import annotations

import json
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError
from .nodes import NodeFamily, NodeKind, gauss_weights, make_nodes

#: version stamp carried by every file this package writes; readers
#: reject anything newer
FORMAT_VERSION = 1


class Mesh:
    """Strictly increasing break points 0 = t_0 < ... < t_L = 1."""

    def __init__(self, breaks):
        breaks = np.asarray(breaks, dtype=float).copy()
        if breaks.ndim != 1 or breaks.size < 2:
            raise InvalidArgumentError("mesh needs at least two break points")
        if breaks[0] != 0.0 or breaks[-1] != 1.0:
            raise InvalidArgumentError("mesh must start at 0 and end at 1")
        if not np.all(np.diff(breaks) > 0):
            raise InvalidArgumentError("mesh breaks must be strictly increasing")
        breaks.flags.writeable = False
        self.breaks = breaks

    @classmethod
    def uniform(cls, num_intervals: int) -> "Mesh":
        if num_intervals < 1:
            raise InvalidArgumentError(
                f"interval count must be >= 1, got {num_intervals}")
        return cls(np.linspace(0.0, 1.0, num_intervals + 1))

    @property
    def num_intervals(self) -> int:
        return self.breaks.size - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breaks)

    def interval_index(self, t):
        """Index of the half-open interval [t_i, t_{i+1}) containing t."""
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        return np.clip(idx, 0, self.num_intervals - 1)

    def __eq__(self, other):
        return isinstance(other, Mesh) and np.array_equal(self.breaks,
                                                          other.breaks)

    def __repr__(self):
        return f"Mesh({self.breaks.tolist()})"


def _wrap_time(t: np.ndarray) -> np.ndarray:
    """Map times to [0, 1) by subtracting the floor (exact in binary)."""
    return t - np.floor(t)


def _bary_rows(node_times, weights, node_values, query):
    """Interpolate one interval's data at query times (second barycentric
    form).  Queries that hit a node bitwise return the stored value bitwise.
    """
    diff = query[:, None] - node_times[None, :]
    hit_rows, hit_cols = np.nonzero(diff == 0.0)
    diff[hit_rows, hit_cols] = 1.0
    ratio = weights[None, :] / diff
    denom = np.sum(ratio, axis=1)
    denom[hit_rows] = 1.0
    out = (ratio @ node_values) / denom[:, None]
    out[hit_rows] = node_values[hit_cols]
    return out


class _PiecewiseBase:
    """Shared evaluation and integration over per-interval nodal values."""

    mesh: Mesh
    node_family: NodeFamily
    values: np.ndarray      # (L, nodes per interval, dim)
    node_times: np.ndarray  # (L, nodes per interval), global times

    def _init_storage(self, mesh, node_family, values, snap_breaks):
        values = np.array(values, dtype=float)
        if values.ndim != 3:
            raise InvalidArgumentError(
                f"values must have shape (intervals, nodes, dim), got "
                f"{values.shape}")
        expect = (mesh.num_intervals, node_family.m)
        if values.shape[:2] != expect:
            raise InvalidArgumentError(
                f"values shape {values.shape[:2]} does not match "
                f"(intervals, nodes) = {expect}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("values must be finite")
        times = (mesh.breaks[:-1, None]
                 + mesh.lengths[:, None] * node_family.nodes[None, :])
        if snap_breaks:
            # the affine map may not round back onto the break exactly
            times[:, 0] = mesh.breaks[:-1]
            times[:, -1] = mesh.breaks[1:]
        values.flags.writeable = False
        times.flags.writeable = False
        self.mesh = mesh
        self.node_family = node_family
        self.values = values
        self.node_times = times

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @cached_property
    def _deriv_values(self) -> np.ndarray:
        # derivative of each local polynomial at the same nodes; one degree
        # lower, so interpolating it on the full node set stays exact
        scaled = self.values / self.mesh.lengths[:, None, None]
        return np.einsum("jk,iks->ijs", self.node_family.diff_matrix, scaled)

    def _eval_values(self, data, t):
        t_arr = np.asarray(t, dtype=float)
        flat = _wrap_time(np.atleast_1d(t_arr).ravel())
        idx = self.mesh.interval_index(flat)
        out = np.empty((flat.size, self.dim))
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = _bary_rows(self.node_times[i],
                                  self.node_family.bary_weights,
                                  data[i], flat[sel])
        if t_arr.ndim == 0:
            return out[0]
        return out.reshape(t_arr.shape + (self.dim,))

    def eval(self, t):
        """Value at time t (any real; wrapped to [0,1) by periodicity).

        Scalar t gives shape (dim,), an array gives t.shape + (dim,).
        """
        return self._eval_values(self.values, t)

    def eval_deriv(self, t):
        """Derivative of the local polynomial at time t.

        At a break the right-interval one-sided derivative is returned,
        consistent with the half-open interval convention.
        """
        return self._eval_values(self._deriv_values, t)

    def integrate(self, a: float, b: float):
        """Exact integral over [a, b] within [0, 1], split at breaks."""
        if not 0.0 <= a <= b <= 1.0:
            raise InvalidArgumentError(
                f"integration bounds need 0 <= a <= b <= 1, got [{a}, {b}]")
        quad_nodes, quad_wts = _gauss_rule(self.node_family.m)
        breaks = self.mesh.breaks
        total = np.zeros(self.dim)
        first = int(self.mesh.interval_index(a))
        last = int(self.mesh.interval_index(b))
        for i in range(first, last + 1):
            lo = max(a, breaks[i])
            hi = min(b, breaks[i + 1])
            if hi <= lo:
                continue
            pts = lo + (hi - lo) * quad_nodes
            vals = _bary_rows(self.node_times[i],
                              self.node_family.bary_weights,
                              self.values[i], pts)
            total += (hi - lo) * (quad_wts @ vals)
        return total


_GAUSS_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_rule(m: int):
    """Cached Gauss-Legendre rule on [0,1], exact for the stored degree."""
    rule = _GAUSS_RULES.get(m)
    if rule is None:
        fam = make_nodes(NodeKind.GAUSS_LEGENDRE, m)
        rule = (fam.nodes, gauss_weights(fam))
        _GAUSS_RULES[m] = rule
    return rule


class PeriodicPiecewisePoly(_PiecewiseBase):
    """Continuous 1-periodic piecewise polynomial of degree m per interval.

    ``values[i, j, :]`` is the function value at the j-th Chebyshev-Lobatto
    representation node of interval i.  Neighbouring intervals must agree
    bitwise at shared breaks, and the last interval must close up with the
    first; both are checked at construction.
    """

    def __init__(self, mesh: Mesh, degree: int, values):
        if degree < 1:
            raise InvalidArgumentError(f"degree must be >= 1, got {degree}")
        family = make_nodes(NodeKind.CHEBYSHEV_LOBATTO, degree)
        self._init_storage(mesh, family, values, snap_breaks=True)
        self.degree = degree
        v = self.values
        if not np.array_equal(v[:-1, -1, :], v[1:, 0, :]):
            raise InvalidArgumentError(
                "values must match bitwise at interior breaks")
        if not np.array_equal(v[-1, -1, :], v[0, 0, :]):
            raise InvalidArgumentError(
                "periodic closure requires the last value to equal the first")

    @property
    def rep_family(self) -> NodeFamily:
        return self.node_family

    @property
    def rep_times(self) -> np.ndarray:
        """Global representation node times, shape (L, m+1)."""
        return self.node_times


class PiecewiseProjection(_PiecewiseBase):
    """Interpolation projection: degree m-1 per interval on m collocation
    nodes, generally discontinuous at breaks.
    """

    def __init__(self, mesh: Mesh, family: NodeFamily, values):
        self._init_storage(mesh, family, values, snap_breaks=False)
        self.degree = family.m - 1

    @property
    def collocation_times(self) -> np.ndarray:
        """Global collocation node times, shape (L, m)."""
        return self.node_times


def sample_periodic(f, mesh: Mesh, degree: int) -> PeriodicPiecewisePoly:
    """Periodic piecewise polynomial through samples of a 1-periodic f.

    Sampling happens at wrapped representation times, so the shared break
    values (including the t=1 wrap onto t=0) agree bitwise by construction
    even when f itself is only approximately periodic in float arithmetic.
    """
    if degree < 1:
        raise InvalidArgumentError(f"degree must be >= 1, got {degree}")
    family = make_nodes(NodeKind.CHEBYSHEV_LOBATTO, degree)
    times = (mesh.breaks[:-1, None]
             + mesh.lengths[:, None] * family.nodes[None, :])
    times[:, 0] = mesh.breaks[:-1]
    times[:, -1] = mesh.breaks[1:]
    samples = np.asarray(f(_wrap_time(times.ravel())), dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    values = samples.reshape(mesh.num_intervals, family.m, -1)
    return PeriodicPiecewisePoly(mesh, degree, values)


def project(f, mesh: Mesh, m: int,
            kind: NodeKind = NodeKind.GAUSS_LEGENDRE) -> PiecewiseProjection:
    """Interpolate a 1-periodic function on m collocation nodes per interval.

    ``f`` maps an array of times to an array of values, one row per time;
    the result matches f exactly at the collocation points.
    """
    if m < 1:
        raise InvalidArgumentError(f"node count must be >= 1, got {m}")
    family = make_nodes(kind, m)
    times = (mesh.breaks[:-1, None]
             + mesh.lengths[:, None] * family.nodes[None, :])
    samples = np.asarray(f(times.ravel()), dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    values = samples.reshape(mesh.num_intervals, family.m, -1)
    return PiecewiseProjection(mesh, family, values)


def poly_to_document(p: PeriodicPiecewisePoly) -> dict:
    """JSON-ready description of a periodic piecewise polynomial.

    Standard JSON float formatting round-trips doubles exactly, so
    serializing and reloading reproduces the values bitwise.
    """
    return {
        "breaks": p.mesh.breaks.tolist(),
        "degree": p.degree,
        "dim": p.dim,
        "rep_kind": p.rep_family.kind.value,
        "values": p.values.tolist(),
    }


def poly_from_document(doc: dict) -> PeriodicPiecewisePoly:
    """Rebuild a periodic piecewise polynomial from its JSON document."""
    required = {"breaks", "degree", "dim", "rep_kind", "values"}
    if set(doc) != required:
        raise InvalidArgumentError(
            f"polynomial document needs keys {sorted(required)}, got "
            f"{sorted(doc)}")
    kind = NodeKind.from_name(doc["rep_kind"])
    if kind != NodeKind.CHEBYSHEV_LOBATTO:
        raise InvalidArgumentError(
            "representation nodes must include both interval endpoints; "
            f"got {kind.value}")
    values = np.asarray(doc["values"], dtype=float)
    if values.ndim != 3 or values.shape[2] != doc["dim"]:
        raise InvalidArgumentError(
            f"values shape {values.shape} inconsistent with dim {doc['dim']}")
    return PeriodicPiecewisePoly(Mesh(doc["breaks"]), doc["degree"], values)


def poly_to_json(p: PeriodicPiecewisePoly) -> str:
    return json.dumps(poly_to_document(p), indent=2)


def poly_from_json(text: str) -> PeriodicPiecewisePoly:
    return poly_from_document(json.loads(text))
