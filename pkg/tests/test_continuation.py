"""Tests for Hopf location, initial guesses, and branch continuation.

The oscillation-onset numbers have closed forms: for the Mackey-Glass
linearization alpha = -1, beta = -4, so omega = sqrt(15) and the onset
delay is arccos(1/4 / -1 ... ) = arccos(-0.25)/sqrt(15).  Branch tests
run a short, cheap stretch of the real branch and check its shape.
"""

import io
import math

import numpy as np
import pytest

from semdde.collocation import default_constraints, newton_solve, \
    NewtonSettings
from semdde.continuation import (
    BranchPoint,
    HopfData,
    continue_branch,
    hopf_initial_guess,
    mackey_glass_hopf,
    read_branch_csv,
    scalar_hopf_point,
    sd_quadratic_seed,
    write_branch_csv,
)
from semdde.errors import (
    FormatVersionError,
    InvalidArgumentError,
    NoHopfError,
    StepFailureError,
)
from semdde.piecewise import Mesh
from semdde.problems import mackey_glass, sd_quadratic

TAU_HOPF = math.acos(-0.25) / math.sqrt(15.0)
PERIOD_HOPF = 2.0 * math.pi / math.sqrt(15.0)


@pytest.fixture(scope="module")
def short_branch():
    """Mackey-Glass branch from just past onset to delay 0.6, L=11, m=4."""
    prob = mackey_glass()
    data = mackey_glass_hopf()
    guess = hopf_initial_guess(data, 0.01, Mesh.uniform(11), 4)
    start = newton_solve(guess, prob,
                         default_constraints(prob, guess.params)).state
    points = continue_branch(start, prob, float(guess.params[0]), 0.6, 5)
    return prob, start, float(guess.params[0]), points


class TestScalarHopfPoint:
    def test_matches_closed_form(self):
        tau, omega = scalar_hopf_point(-1.0, -4.0)
        assert omega == pytest.approx(math.sqrt(15.0), abs=1e-12)
        assert tau == pytest.approx(TAU_HOPF, abs=1e-10)

    def test_characteristic_equation_plugback(self):
        for alpha, beta in ((-1.0, -4.0), (-1.0, 4.0), (0.0, -1.0),
                            (0.5, -2.0)):
            tau, omega = scalar_hopf_point(alpha, beta)
            assert abs(alpha + beta * math.cos(omega * tau)) <= 1e-10
            assert abs(omega + beta * math.sin(omega * tau)) <= 1e-9

    def test_positive_beta_uses_second_branch(self):
        tau_neg, omega = scalar_hopf_point(-1.0, -4.0)
        tau_pos, _ = scalar_hopf_point(-1.0, 4.0)
        # same frequency, but the crossing angle moves past pi
        assert omega * tau_neg < math.pi < omega * tau_pos < 2.0 * math.pi

    def test_no_crossing_raises(self):
        with pytest.raises(NoHopfError):
            scalar_hopf_point(-1.0, -0.5)
        with pytest.raises(NoHopfError):
            scalar_hopf_point(-1.0, 1.0)

    def test_quadratic_delay_linearization_onset(self):
        tau, omega = scalar_hopf_point(0.0, -1.0)
        assert omega == pytest.approx(1.0, abs=1e-14)
        assert tau == pytest.approx(math.pi / 2.0, abs=1e-10)


class TestHopfData:
    def test_mackey_glass_onset_digits(self):
        data = mackey_glass_hopf()
        assert abs(data.tau_hopf - 0.4708) <= 5e-4
        assert data.omega == pytest.approx(math.sqrt(15.0), abs=1e-12)
        assert data.equilibrium.tolist() == [1.0]
        assert data.period == pytest.approx(PERIOD_HOPF, abs=1e-14)

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            HopfData(tau_hopf=-1.0, omega=1.0, equilibrium=np.array([0.0]))
        with pytest.raises(InvalidArgumentError):
            HopfData(tau_hopf=1.0, omega=0.0, equilibrium=np.array([0.0]))
        with pytest.raises(InvalidArgumentError):
            HopfData(tau_hopf=1.0, omega=1.0,
                     equilibrium=np.array([np.inf]))


class TestHopfInitialGuess:
    def test_guess_layout_and_mu(self):
        data = mackey_glass_hopf()
        state = hopf_initial_guess(data, 0.01, Mesh.uniform(11), 4)
        assert state.flatten().size == 1 * 4 * 11 + 2
        assert state.period == data.period
        assert state.params[0] == data.tau_hopf + 1e-3
        dense = state.poly.eval(np.linspace(0.0, 1.0, 2001))
        deviation = np.max(np.abs(dense - 1.0))
        assert 0.0099 <= deviation <= 0.0101

    def test_zero_amplitude_gives_the_equilibrium(self):
        data = mackey_glass_hopf()
        state = hopf_initial_guess(data, 0.0, Mesh.uniform(3), 3)
        assert np.all(state.poly.values == 1.0)

    def test_negative_amplitude_rejected(self):
        data = mackey_glass_hopf()
        with pytest.raises(InvalidArgumentError):
            hopf_initial_guess(data, -0.01, Mesh.uniform(3), 3)

    def test_offset_override(self):
        data = mackey_glass_hopf()
        state = hopf_initial_guess(data, 0.01, Mesh.uniform(3), 3,
                                   offset=-2e-2)
        assert state.params[0] == data.tau_hopf - 2e-2


class TestBranchPoint:
    def test_validation(self, short_branch):
        _, _, _, points = short_branch
        good = points[0]
        with pytest.raises(InvalidArgumentError):
            BranchPoint(parameter=good.parameter, state=good.state,
                        amplitude=-1.0, period=good.period, err=good.err,
                        newton_iters=1, phi_defect=good.phi_defect)
        with pytest.raises(InvalidArgumentError):
            BranchPoint(parameter=good.parameter, state=good.state,
                        amplitude=good.amplitude, period=0.0, err=good.err,
                        newton_iters=1, phi_defect=good.phi_defect)


class TestContinueBranch:
    def test_rejects_bad_step_count(self, short_branch):
        prob, start, p0, _ = short_branch
        with pytest.raises(InvalidArgumentError):
            continue_branch(start, prob, p0, 1.0, 0)

    def test_branch_shape(self, short_branch):
        _, _, p0, points = short_branch
        assert len(points) == 5
        expected = np.linspace(p0, 0.6, 6)[1:]
        np.testing.assert_allclose([p.parameter for p in points], expected,
                                   atol=1e-15)
        amplitudes = [p.amplitude for p in points]
        assert all(b > a for a, b in zip(amplitudes, amplitudes[1:]))
        assert all(p.period > 0 for p in points)

    def test_every_point_passes_the_fixed_point_oracle(self, short_branch):
        _, _, _, points = short_branch
        assert all(p.phi_defect <= 1e-8 for p in points)

    def test_reconverge_in_place(self, short_branch):
        prob, _, _, points = short_branch
        last = points[-1]
        again = continue_branch(last.state, prob, last.parameter,
                                last.parameter, 1)
        assert len(again) == 1
        assert again[0].newton_iters <= 1
        assert again[0].amplitude == pytest.approx(last.amplitude, abs=1e-8)

    def test_first_step_failure_has_no_last_good(self, short_branch):
        prob, start, p0, _ = short_branch
        with pytest.raises(StepFailureError) as excinfo:
            continue_branch(start, prob, p0, 1.0, 1,
                            NewtonSettings(max_iter=2), max_bisections=3)
        assert excinfo.value.last_good is None
        assert excinfo.value.points == []

    def test_failure_past_the_onset_keeps_completed_points(
            self, short_branch):
        """No orbit exists below the onset delay, so a downward branch
        must fail after its first (still feasible) step."""
        prob, _, _, points = short_branch
        with pytest.raises(StepFailureError) as excinfo:
            continue_branch(points[-1].state, prob, 0.6, 0.3, 3,
                            max_bisections=3)
        got = excinfo.value.points
        assert len(got) >= 1
        assert excinfo.value.last_good is got[-1]
        assert got[0].parameter == pytest.approx(0.5, abs=1e-12)


class TestBranchCsv:
    def test_round_trip_is_exact(self, short_branch):
        _, _, _, points = short_branch
        out = io.StringIO()
        write_branch_csv(points, out)
        text = out.getvalue()
        assert text.splitlines()[0] == "# format_version=1"
        assert text.splitlines()[1] == \
            "p,T,amplitude,newton_iters,residual_err,phi_defect"
        rows = read_branch_csv(io.StringIO(text))
        assert len(rows) == len(points)
        for row, point in zip(rows, points):
            assert row["p"] == point.parameter
            assert row["T"] == point.period
            assert row["amplitude"] == point.amplitude
            assert row["newton_iters"] == point.newton_iters
            assert row["residual_err"] == point.err
            assert row["phi_defect"] == point.phi_defect

    def test_future_version_rejected(self):
        text = "# format_version=2\np,T,amplitude,newton_iters," \
            "residual_err,phi_defect\n"
        with pytest.raises(FormatVersionError):
            read_branch_csv(io.StringIO(text))

    def test_missing_version_line_rejected(self):
        with pytest.raises(FormatVersionError):
            read_branch_csv(io.StringIO("p,T\n1.0,2.0\n"))

    def test_wrong_columns_rejected(self):
        with pytest.raises(InvalidArgumentError):
            read_branch_csv(io.StringIO("# format_version=1\np,T\n"))


class TestSdQuadraticSeed:
    def test_seed_layout(self):
        for tau, period in ((0.95, 14.061906923), (1.1, 8.776977221)):
            seed = sd_quadratic_seed(tau)
            assert seed.poly.mesh.num_intervals == 12
            assert seed.poly.degree == 5
            assert seed.params.tolist() == [tau]
            assert seed.period == pytest.approx(period, abs=1e-6)

    def test_seed_reconverges_quickly(self):
        prob = sd_quadratic()
        seed = sd_quadratic_seed(1.1)
        result = newton_solve(seed, prob,
                              default_constraints(prob, seed.params))
        assert result.iterations <= 5
        # the coarse re-solve moves the period by its truncation error
        assert result.state.period == pytest.approx(seed.period, rel=1e-2)

    def test_unknown_delay_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sd_quadratic_seed(0.5)
