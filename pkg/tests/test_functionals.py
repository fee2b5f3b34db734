import math

import numpy as np
import pytest
from scipy.integrate import quad

from granuloma_fv.errors import GridShapeError, PositivityError
from granuloma_fv.functionals import (
    DIAGNOSTIC_COLUMNS, DISSIPATION_NAMES, DiagnosticsRecorder, combined_mass, diagnostics_row,
    dirichlet_quotient, dissipation_ledger, energy1, energy2, entropy, init_budget,
    log_hessian_weighted, mass, quartic_quotient, time_integrals,
)
from granuloma_fv.model import Grid, KineticsF, Params, SigmaSpec, State
from granuloma_fv.timestepper import StepConfig, integrate


def _const_state(values, grid):
    return State(0.0, *(np.full(grid.shape, float(c)) for c in values), grid)


def _entropy_oracle(f):
    return quad(lambda s: f(s) * math.log(f(s)) - f(s), 0.0, 1.0, epsabs=1e-14)[0]


def test_mass_examples():
    g2 = Grid.uniform(16, 2)
    assert mass(np.ones(g2.shape), g2) == pytest.approx(1.0, rel=1e-15)
    assert mass(np.full(g2.shape, 2.5), g2) == pytest.approx(2.5, rel=1e-15)
    g = Grid.uniform(128)
    (x,) = g.centers()
    assert mass(np.cos(np.pi * x) ** 2, g) == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(GridShapeError):
        mass(np.ones(5), g)


def test_combined_mass_examples():
    g = Grid.uniform(8, 2)
    assert combined_mass(_const_state((1, 1, 1, 1), g), Params.unit()) == pytest.approx(6.0, rel=1e-15)
    assert combined_mass(_const_state((0, 0, 0, 0), g), Params.unit()) == 0.0


def test_combined_mass_smooth_state_against_exact_integrals():
    # Neumann cosine modes integrate to zero, so only the means survive
    g = Grid((64, 48), (1.0, 0.75))
    x, y = g.centers()
    mode = np.cos(np.pi * x) * np.cos(2 * np.pi * y / 0.75)
    state = State(0.0, 1.0 + 0.5 * mode, 2.0 + 0.3 * mode, 0.7 - 0.2 * mode, 0.4 + 0.1 * mode, g)
    p = Params.unit(gamma_u=2.0, gamma_v=0.5, gamma_w=1.5, alpha_w=3.0, alpha_z=0.6)
    gw = (2.0 + 0.5) / 1.5
    exact = 0.75 * (1.0 + 2.0 + gw * 0.7 + 3.0 / 0.6 * gw * 0.4)
    assert combined_mass(state, p) == pytest.approx(exact, rel=1e-8)


def test_entropy_examples():
    g = Grid.uniform(16)
    assert entropy(np.ones(16), g) == pytest.approx(-1.0, rel=1e-15)
    assert entropy(np.full(16, math.e), g) == pytest.approx(0.0, abs=1e-15)
    assert entropy(np.zeros(16), g) == 0.0
    with pytest.raises(PositivityError):
        entropy(-np.ones(16), g)
    g = Grid.uniform(256)
    (x,) = g.centers()
    want = _entropy_oracle(lambda s: 1 + 0.5 * math.cos(math.pi * s))
    assert entropy(1 + 0.5 * np.cos(np.pi * x), g) == pytest.approx(want, abs=1e-6)


def test_dirichlet_quotient_examples():
    g = Grid.uniform(32)
    assert dirichlet_quotient(np.full(32, 3.0), g) == 0.0
    errors = []
    for n in (128, 256, 512):
        g = Grid.uniform(n)
        (x,) = g.centers()
        errors.append(abs(dirichlet_quotient(np.exp(x), g) - (math.e - 1)))
        phi = 1 + np.sin(3 * x) ** 2
        assert dirichlet_quotient(4.0 * phi, g) == pytest.approx(4.0 * dirichlet_quotient(phi, g), rel=1e-14)
    assert errors[-1] <= 1e-5
    assert errors[0] / errors[1] >= 2.8 and errors[1] / errors[2] >= 3.4
    with pytest.raises(PositivityError):
        dirichlet_quotient(np.zeros(512), g)


def test_energy1_examples():
    g = Grid.uniform(8, 2)
    assert energy1(_const_state((1, 1, 1, 1), g), Params.unit()) == pytest.approx(-1.5, rel=1e-15)
    g = Grid.uniform(64)
    (x,) = g.centers()
    v = 1.5 + np.cos(np.pi * x)
    state = State(0.0, np.ones(64), v, np.ones(64), np.ones(64), g)
    assert energy1(state, Params.unit()) == pytest.approx(-1.5 + 0.5 * dirichlet_quotient(v, g), rel=1e-14)
    with pytest.raises(PositivityError):
        energy1(State(0.0, np.ones(64), np.zeros(64), np.ones(64), np.ones(64), g), Params.unit())


def test_energy1_smooth_state_against_quadrature():
    p = Params.unit(chi_u=0.7, gamma_v=1.3, mu_v=0.4, d_w=0.5)
    n = 1024
    g = Grid.uniform(n)
    (x,) = g.centers()
    state = State(0.0, 1.2 + 0.4 * np.cos(np.pi * x), 2 + np.cos(np.pi * x),
                  0.8 + 0.3 * np.cos(2 * np.pi * x), np.ones(n), g)
    quotient = quad(lambda s: (math.pi * math.sin(math.pi * s)) ** 2 / (2 + math.cos(math.pi * s)),
                    0.0, 1.0, epsabs=1e-14)[0]
    want = (_entropy_oracle(lambda s: 1.2 + 0.4 * math.cos(math.pi * s))
            + 0.7 / (2 * 1.3) * quotient
            + 0.4 * 0.7 / (2 * 0.5 * 1.3) * _entropy_oracle(lambda s: 0.8 + 0.3 * math.cos(2 * math.pi * s)))
    assert energy1(state, p) == pytest.approx(want, rel=1e-6)


def test_energy2_examples():
    g = Grid.uniform(8, 2)
    assert energy2(_const_state((1, 1, 1, 1), g), Params.unit()) == pytest.approx(-1.0, rel=1e-15)
    assert energy2(_const_state((1, 1, 1, 0), g), Params.unit()) == 0.0
    g = Grid.uniform(512)
    (x,) = g.centers()
    state = State(0.0, np.ones(512), np.ones(512), np.exp(x), np.ones(512), g)
    assert energy2(state, Params.unit()) == pytest.approx(-1 + 0.5 * (math.e - 1), abs=1e-5)


def test_dissipation_constant_state_is_zero():
    g = Grid.uniform(8, 2)
    ledger = dissipation_ledger(_const_state((1, 2, 3, 4), g), Params.unit(), SigmaSpec())
    assert set(ledger) == set(DISSIPATION_NAMES)
    assert all(value == 0.0 for value in ledger.values())


def test_log_hessian_weighted_gaussian_exponent():
    g = Grid.uniform(64)
    (x,) = g.centers()
    v = np.exp(x**2)
    assert log_hessian_weighted(v, g) == pytest.approx(4 * mass(v, g), rel=1e-9)


def test_sigma_weighted_entries_on_the_plateau():
    # u above 2/eps everywhere: sigma(u) is the constant 1.5/eps
    eps = 0.5
    g = Grid.uniform(64)
    (x,) = g.centers()
    v = 1 + 0.5 * np.cos(np.pi * x)
    state = State(0.0, np.full(64, 5.0), v, v, np.full(64, 9.0), g)
    ledger = dissipation_ledger(state, Params.unit(), SigmaSpec.mollified(eps))
    assert ledger["diss_sigv_u"] == pytest.approx(1.5 / eps * dirichlet_quotient(v, g), rel=1e-13)
    assert ledger["diss_sigw_z"] == pytest.approx(1.5 / eps * dirichlet_quotient(v, g), rel=1e-13)
    assert ledger["diss_quartic_v"] == pytest.approx(quartic_quotient(v, g), rel=1e-13)


def test_dissipation_strictness():
    g = Grid.uniform(16)
    (x,) = g.centers()
    v = 1 + np.cos(np.pi * x)
    v[5] = 0.0
    state = State(0.0, np.ones(16), v, np.ones(16), np.ones(16), g)
    loose = dissipation_ledger(state, Params.unit(), SigmaSpec(), strict=False)
    assert math.isnan(loose["diss_hess_v"])
    assert loose["diss_grad_u"] == 0.0
    with pytest.raises(PositivityError, match="diss_"):
        dissipation_ledger(state, Params.unit(), SigmaSpec())


def test_diagnostics_row_layout():
    g = Grid.uniform(8, 2)
    row = diagnostics_row(_const_state((1, 1, 1, 1), g), Params.unit(), SigmaSpec(), dt=0.01)
    assert tuple(row.as_dict()) == DIAGNOSTIC_COLUMNS
    assert row.y_mass == pytest.approx(6.0)
    assert row.values()[-1] == 0.01
    assert row.energy1 == pytest.approx(-1.5) and row.energy2 == pytest.approx(-1.0)


def test_recorder_and_time_integrals():
    g = Grid.uniform(16)
    (x,) = g.centers()
    state = State(0.0, 1 + 0.5 * np.cos(np.pi * x), 1 + 0.2 * np.cos(np.pi * x), np.ones(16),
                  np.full(16, 0.5), g)
    recorder = DiagnosticsRecorder(Params.unit(), SigmaSpec())
    integrate(state, Params.unit(), KineticsF(), SigmaSpec(), StepConfig(0.2), sinks=[recorder], sample_every=0.05)
    assert [round(r.t, 12) for r in recorder.rows] == [0.0, 0.05, 0.1, 0.15, 0.2]
    assert math.isnan(recorder.rows[0].dt)
    totals = time_integrals(recorder.rows)
    values = [r.diss_grad_u for r in recorder.rows]
    assert totals["diss_grad_u"] == pytest.approx(0.05 * (sum(values) - 0.5 * (values[0] + values[-1])))
    assert time_integrals(recorder.rows[:1])["diss_grad_u"] == 0.0


def test_init_budget():
    g = Grid.uniform(8)
    budget = init_budget(_const_state((1, 2, 1, 1), g))
    assert budget.sup_v == 2.0
    assert budget.entropy_u == 0.0 and budget.quotient_v == 0.0
    assert budget.l3_w == pytest.approx(1.0)
    assert budget.a_bound == pytest.approx(budget.total)
    assert init_budget(_const_state((1, 0, 0, 1), g)).a_bound == 1.0
