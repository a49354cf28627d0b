"""Manufactured problem, experiment configs, slope fitting and convergence runs."""

import math
from fractions import Fraction as F

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from cssplit.experiments import (
    DEFAULT_EXAMPLE1_CELLS,
    ConfigError,
    Example1Cell,
    ExperimentConfig,
    build_run_config,
    evaluate_example1,
    example1_initial,
    example2_exact,
    example2_forcing,
    fit_slope,
    fit_slope_detail,
    initial_energy,
    parse_config,
    run_convergence,
    serialize_config,
)
from cssplit.stepper import Blowup, Mode, RunRecord, RunResult


def _symbolic_forcing(nonlinear):
    x, y, t, nu = sp.symbols("x y t nu")
    u1 = sp.sin(2 * sp.pi * y) * sp.sin(sp.pi * x) ** 2 * sp.sin(t)
    u2 = -sp.sin(2 * sp.pi * x) * sp.sin(sp.pi * y) ** 2 * sp.sin(t)
    p = sp.cos(sp.pi * x) * sp.sin(sp.pi * y) * sp.sin(t)
    out = []
    for u, dp in ((u1, sp.diff(p, x)), (u2, sp.diff(p, y))):
        f = sp.diff(u, t) - nu * (sp.diff(u, x, 2) + sp.diff(u, y, 2)) + dp
        if nonlinear:
            f += u1 * sp.diff(u, x) + u2 * sp.diff(u, y)
        out.append(sp.lambdify((x, y, t, nu), f, "numpy"))
    return out


class TestManufacturedProblem:
    @pytest.mark.parametrize("mode", ["navier-stokes", "stokes"])
    @pytest.mark.parametrize("nu", [1.0, 0.01])
    def test_forcing_matches_symbolic(self, mode, nu):
        sym = _symbolic_forcing(mode == "navier-stokes")
        rng = np.random.default_rng(3)
        x, y = rng.uniform(-1, 1, (2, 200))
        for t in (0.0, 0.37, 2.5):
            f1, f2 = example2_forcing(nu, mode)(x, y, t)
            np.testing.assert_allclose(f1, sym[0](x, y, t, nu), atol=1e-12)
            np.testing.assert_allclose(f2, sym[1](x, y, t, nu), atol=1e-12)

    def test_exact_solution_divergence_free_and_no_slip(self):
        x, y, t = sp.symbols("x y t")
        u1 = sp.sin(2 * sp.pi * y) * sp.sin(sp.pi * x) ** 2 * sp.sin(t)
        u2 = -sp.sin(2 * sp.pi * x) * sp.sin(sp.pi * y) ** 2 * sp.sin(t)
        assert sp.simplify(sp.diff(u1, x) + sp.diff(u2, y)) == 0
        s = np.linspace(-1, 1, 11)
        for xb, yb in ((np.full_like(s, -1), s), (np.full_like(s, 1), s), (s, np.full_like(s, -1)), (s, np.full_like(s, 1))):
            u, v, _ = example2_exact(xb, yb, 0.8)
            assert np.abs(u).max() < 1e-14 and np.abs(v).max() < 1e-14

    def test_initial_velocity_is_exact_solution_shape(self):
        x, y = np.meshgrid(np.linspace(-1, 1, 9), np.linspace(-1, 1, 9))
        u1, u2, _ = example2_exact(x, y, math.pi / 2)
        v1, v2 = example1_initial(x, y)
        np.testing.assert_allclose(u1, v1, atol=1e-15)
        np.testing.assert_allclose(u2, v2, atol=1e-15)

    def test_initial_energy(self):
        assert initial_energy(32) == pytest.approx(0.75, abs=1e-10)


class TestConfig:
    TEXT = """
experiment.name = converge
scheme.k = 3
scheme.beta = 6
run.nu = 1.0
run.dt = 0.05
run.t_end = 1.0
run.n_modes = 24
run.mode = stokes
experiment.dt_ladder = 0.1, 0.05, 0.025
"""

    def test_dotted_keys(self):
        cfg = parse_config(self.TEXT)
        assert cfg.k == 3 and cfg.beta == F(6) and cfg.mode is Mode.STOKES
        assert cfg.dt_ladder == (0.1, 0.05, 0.025) and cfg.n_modes == 24

    def test_sections_equivalent(self):
        text = """
[experiment]
name = converge
dt_ladder = 0.1; 0.05; 0.025
[scheme]
k = 3
beta = 6
[run]
nu = 1.0
dt = 0.05
t_end = 1.0
n_modes = 24
mode = stokes
"""
        assert parse_config(text) == parse_config(self.TEXT)

    def test_round_trip(self):
        cfg = parse_config(self.TEXT, out_dir="elsewhere")
        again = parse_config(serialize_config(cfg))
        assert again == cfg and again.out_dir == "elsewhere"

    @given(
        k=st.integers(1, 6),
        num=st.integers(1, 40),
        den=st.integers(1, 7),
        dt=st.floats(1e-6, 1.0),
        mode=st.sampled_from(["stokes", "navier-stokes"]),
    )
    def test_round_trip_property(self, k, num, den, dt, mode):
        beta = F(num, den)
        if beta < 1:
            beta = 1 / beta
        cfg = ExperimentConfig(name="run", k=k, beta=beta, dt=dt, mode=mode)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_rational_beta(self):
        assert parse_config("scheme.beta = 7/2").beta == F(7, 2)
        assert parse_config("scheme.beta = 2.5").beta == F(5, 2)

    @pytest.mark.parametrize(
        "text",
        [
            "experiment.name = converge\nexperiment.dt_ladder = 0.1, 0.05",
            "experiment.name = converge\nexperiment.dt_ladder = 0.1, 0.1, 0.05",
            "experiment.name = converge\nexperiment.dt_ladder = 0.1, 0.2, 0.05",
            "experiment.name = converge",
            "scheme.k = 0",
            "scheme.beta = 1/2",
            "run.nu = -1",
            "run.dt = abc",
            "run.mode = euler",
            "run.problem = cavity",
            "unknown.key = 1",
            "experiment.name = launch",
            "experiment.cells = 3:1:0.01:1:maybe",
            "this is not a config line",
        ],
    )
    def test_bad_configs(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_build_run_config(self):
        cfg = parse_config(self.TEXT)
        rc = build_run_config(cfg, dt=0.02)
        assert rc.dt == 0.02 and rc.exact_solution is not None and rc.forcing is not None
        assert rc.split is not None and rc.spec.k == 3
        rc1 = build_run_config(parse_config("run.problem = example1"))
        assert rc1.initial_velocity is example1_initial and rc1.exact_solution is None

    def test_cells(self):
        cfg = parse_config("experiment.name = example1\nexperiment.cells = 3:1:5e-4:2:blowup; 4:9:0.05:5:stable:ns")
        cells = cfg.example1_cells
        assert cells[0] == Example1Cell(3, F(1), 5e-4, 2.0, "blowup", Mode.NAVIER_STOKES)
        assert cells[1].mode is Mode.NAVIER_STOKES and cells[1].beta == 9
        assert ExperimentConfig(name="example1").example1_cells == DEFAULT_EXAMPLE1_CELLS


class TestSlopeFit:
    def test_pure_powers(self):
        h = 0.1 / 2 ** np.arange(6)
        assert fit_slope(list(zip(h, h**2))) == pytest.approx(2, abs=1e-12)
        assert fit_slope(list(zip(h, 3 * h**4))) == pytest.approx(4, abs=1e-12)

    def test_cubic_with_small_floor(self):
        h = 0.1 / 2 ** np.arange(10)
        assert 2.9 <= fit_slope(list(zip(h, h**3 + 1e-12))) <= 3.1

    def test_floor_excluded(self):
        h = 0.1 / 2 ** np.arange(16)
        fit = fit_slope_detail(list(zip(h, h**3 + 1e-12)))
        assert fit.floor_detected
        assert 2.9 <= fit.slope <= 3.1
        assert len(fit.used) >= 3 and max(fit.used) < 15
        # without exclusion the flat tail drags the slope down
        assert np.polyfit(np.log(h), np.log(h**3 + 1e-12), 1)[0] < 2.5

    def test_order_independent(self):
        h = 0.1 / 2 ** np.arange(5)
        pairs = list(zip(h, 5 * h**2))
        assert fit_slope(pairs[::-1]) == pytest.approx(fit_slope(pairs))

    @given(p=st.floats(0.5, 6), c=st.floats(1e-3, 1e3))
    def test_recovers_power(self, p, c):
        h = 0.2 / 2 ** np.arange(5)
        assert fit_slope(list(zip(h, c * h**p))) == pytest.approx(p, abs=1e-9)

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_slope([(0.1, 1e-3), (0.05, 2.5e-4)])
        with pytest.raises(ValueError):
            fit_slope([(0.1, 1e-3), (0.05, 0.0), (0.025, math.inf)])


class TestConvergence:
    def test_bdf2_family(self, tmp_path):
        cfg = parse_config(
            "experiment.name = converge\nscheme.k = 2\nscheme.beta = 3\nrun.n_modes = 24\n"
            "run.t_end = 1\nexperiment.dt_ladder = 0.05, 0.025, 0.0125, 0.00625"
        )
        rep = run_convergence(cfg)
        assert rep.passed, rep.summary()
        assert rep.slopes["velocity"] == pytest.approx(2, abs=0.3)
        rep.write_csv(tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "dt,err_u_L2,err_p_L2,div_norm,diverged" and len(lines) == 5

    def test_diverged_rows_excluded(self, monkeypatch):
        import cssplit.experiments as ex

        real_run = ex.run

        def fake_run(rc, stride=1, callback=None):
            if rc.dt > 0.09:
                return RunResult([], None, Blowup(3, 0.3, 1e13))
            return real_run(rc, stride=stride)

        monkeypatch.setattr(ex, "run", fake_run)
        cfg = parse_config(
            "experiment.name = converge\nscheme.k = 2\nscheme.beta = 3\nrun.n_modes = 16\n"
            "run.t_end = 0.5\nexperiment.dt_ladder = 0.1, 0.05, 0.025, 0.0125"
        )
        rep = run_convergence(cfg)
        assert rep.rows[0].diverged and not any(r.diverged for r in rep.rows[1:])
        assert all(0 not in f.used for f in rep.fits.values())

    def test_requires_manufactured_problem(self):
        cfg = parse_config("experiment.name = converge\nrun.problem = example1\nexperiment.dt_ladder = 0.1, 0.05, 0.025")
        with pytest.raises(ConfigError):
            run_convergence(cfg)


class TestExample1Evaluation:
    def _result(self, energies, blowup=None):
        recs = [RunRecord(i, 0.1 * i, e, 0.0, 0.0) for i, e in enumerate(energies)]
        return RunResult(recs, None, blowup)

    def test_stable_cell(self):
        cell = Example1Cell(3, F(6), 0.05, 5.0, "stable")
        assert evaluate_example1(cell, self._result([0.75, 0.8, 0.7]), 0.75).passed
        assert not evaluate_example1(cell, self._result([0.75, 1.6, 0.7]), 0.75).passed
        assert not evaluate_example1(cell, self._result([0.75, 0.76]), 0.75).passed

    def test_blowup_cell(self):
        cell = Example1Cell(3, F(1), 5e-4, 2.0, "blowup")
        assert not evaluate_example1(cell, self._result([0.75, 0.7]), 0.75).passed
        out = evaluate_example1(cell, self._result([0.75], Blowup(1200, 0.6, 1e13)), 0.75)
        assert out.passed and out.verdict.startswith("blowup")
