"""Ensemble runs: statistics oracles, determinism, CSV contract."""

import math

import numpy as np
import pytest

from tracerflow import ensemble as en
from tracerflow import spectrum as sp
from tracerflow import stats as st
from tracerflow.errors import ConfigError, StepFailure
from tracerflow.integrator import SchemeConfig


def brownian_cfg(d0=0.25, scheme="sp", t_max=50.0, particles=2000, seed=7):
    return en.ExperimentConfig(
        scheme_cfg=SchemeConfig(scheme, dt=0.1, d0=d0),
        t_max=t_max, n_particles=particles, n_modes=0, dim=2, master_seed=seed)


class TestConfigValidation:
    def test_requires_two_particles(self):
        with pytest.raises(ConfigError):
            en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.1),
                                t_max=1.0, n_particles=1, n_modes=0, dim=2)

    def test_spectrum_required_with_modes(self):
        with pytest.raises(ConfigError):
            en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.1),
                                t_max=1.0, n_particles=4, n_modes=8, dim=2)

    def test_dim_conflict(self):
        with pytest.raises(ConfigError):
            en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.1),
                                t_max=1.0, n_particles=4, n_modes=8,
                                spectrum=sp.spec_from_tag("e1"), dim=3)

    def test_track_stream_needs_2d(self):
        with pytest.raises(ConfigError):
            en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.1),
                                t_max=1.0, n_particles=4, n_modes=8,
                                spectrum=sp.spec_from_tag("e3"), track_stream=True)

    def test_tmax_must_be_step_multiple(self):
        cfg = en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.3),
                                  t_max=1.0, n_particles=4, n_modes=0, dim=2)
        with pytest.raises(ConfigError):
            cfg.plan_steps()

    def test_record_times_validation(self):
        with pytest.raises(ConfigError):
            en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.1),
                                t_max=1.0, n_particles=4, n_modes=0, dim=2,
                                record_times=(0.5, 0.5))
        with pytest.raises(ConfigError):
            en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.1),
                                t_max=1.0, n_particles=4, n_modes=0, dim=2,
                                record_times=(0.5, 2.0))

    def test_record_snapping(self):
        cfg = en.ExperimentConfig(scheme_cfg=SchemeConfig("sp", dt=0.1),
                                  t_max=10.0, n_particles=4, n_modes=0, dim=2,
                                  record_times=(0.13, 0.52, 7.7))
        n_steps, steps, times = cfg.plan_steps()
        assert n_steps == 100
        assert steps.tolist() == [1, 5, 77, 100]  # snapped plus final step
        assert np.allclose(times, np.array(steps) * 0.1)
        assert np.all(np.diff(times) > 0)

    def test_default_grid_ends_at_tmax(self):
        cfg = brownian_cfg()
        _, steps, times = cfg.plan_steps()
        assert times[-1] == pytest.approx(50.0)
        assert len(times) <= 64 + 1


class TestBrownianOracle:
    def test_dispersion_matches_exact_law(self):
        # with v = 0 the displacement is exactly Gaussian: <dx_i^2> = 2 D0 t
        cfg = brownian_cfg(d0=0.25)
        series = en.run(cfg)
        for i in range(2):
            expected = 2 * 0.25 * series.times
            resid = series.second_moments[:, i, i] - expected
            assert np.all(np.abs(resid) < 3 * series.stderr[:, i] + 1e-12)

    def test_effective_diffusivity_constant(self):
        cfg = brownian_cfg(d0=0.25)
        series = en.run(cfg)
        t, d, se = en.effective_diffusivity(series)
        assert np.all(np.abs(d - 0.25) < 3 * se)

    def test_em_and_sp_agree_for_pure_noise(self):
        a = en.run(brownian_cfg(scheme="sp", seed=3))
        b = en.run(brownian_cfg(scheme="em", seed=3))
        assert np.array_equal(a.second_moments, b.second_moments)


class TestDeterminism:
    def test_worker_count_invariance(self, tmp_path):
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=0.1, d0=0.05),
            t_max=20.0, n_particles=64, n_modes=24,
            spectrum=sp.spec_from_tag("e1"), master_seed=99)
        s1 = en.run(cfg, workers=1)
        s2 = en.run(cfg, workers=2)
        assert np.array_equal(s1.second_moments, s2.second_moments)
        assert np.array_equal(s1.stderr, s2.stderr)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        en.write_csv(s1, p1, {"seed": 99})
        en.write_csv(s2, p2, {"seed": 99})
        assert p1.read_bytes() == p2.read_bytes()

    def test_rerun_identical(self):
        cfg = brownian_cfg(seed=11)
        a = en.run(cfg)
        b = en.run(cfg)
        assert np.array_equal(a.second_moments, b.second_moments)

    def test_seed_changes_output(self):
        a = en.run(brownian_cfg(seed=1))
        b = en.run(brownian_cfg(seed=2))
        assert not np.array_equal(a.second_moments, b.second_moments)

    def test_substreams_independent(self):
        g1 = en.substream(5, 0, en.PURPOSE_FIELD)
        g2 = en.substream(5, 0, en.PURPOSE_NOISE)
        g3 = en.substream(5, 1, en.PURPOSE_FIELD)
        a, b, c = (g.standard_normal(4) for g in (g1, g2, g3))
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)


class TestMomentAccumulation:
    def test_particle_permutation_stable(self):
        rng = np.random.default_rng(0)
        disp = rng.standard_normal((4001, 7, 2)) * 50
        m1, e1 = en._moments(disp)
        perm = rng.permutation(disp.shape[0])
        m2, e2 = en._moments(disp[perm])
        assert np.abs(m2 - m1).max() <= 1e-12 * np.abs(m1).max()
        assert np.abs(e2 - e1).max() <= 1e-12 * np.abs(e1).max()

    def test_moments_symmetric_and_nonnegative(self):
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=0.1, d0=0.1),
            t_max=10.0, n_particles=32, n_modes=16,
            spectrum=sp.spec_from_tag("e2"), master_seed=5)
        s = en.run(cfg)
        assert np.all(s.second_moments[:, 0, 0] >= 0)
        assert np.allclose(s.second_moments, np.swapaxes(s.second_moments, 1, 2))


class TestStepFailure:
    def test_diverging_solve_aborts_run(self):
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=10.0, fp_max_iters=20),
            t_max=100.0, n_particles=4, n_modes=16,
            spectrum=sp.spec_from_tag("e1"), master_seed=1)
        with pytest.raises(StepFailure) as err:
            en.run(cfg)
        assert err.value.particle >= 0
        assert err.value.time > 0


class TestPhysicalInvariants:
    def test_convection_enhancement(self):
        # incompressible advection can only increase the effective diffusivity
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=0.05, d0=0.1),
            t_max=120.0, n_particles=1500, n_modes=64,
            spectrum=sp.spec_from_tag("e1"), theta0=1.0, master_seed=8)
        series = en.run(cfg)
        t, d, se = en.effective_diffusivity(series)
        late = t >= 60.0
        assert np.all(d[late] >= 0.1 - 3 * se[late])

    def test_isotropy_late_time(self):
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=0.05, d0=0.1),
            t_max=120.0, n_particles=1500, n_modes=64,
            spectrum=sp.spec_from_tag("e1"), theta0=1.0, master_seed=9)
        series = en.run(cfg)
        _, d1, se1 = en.effective_diffusivity(series, 0, 0)
        _, d2, se2 = en.effective_diffusivity(series, 1, 1)
        joint = np.sqrt(se1**2 + se2**2)
        late = series.times >= 60.0
        assert np.all(np.abs(d1[late] - d2[late]) < 4 * joint[late])

    def test_shared_field_zero_noise_collapses(self):
        # shared realization, sigma = 0: all particles follow one trajectory
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=0.1),
            t_max=5.0, n_particles=8, n_modes=16,
            spectrum=sp.spec_from_tag("e1"), field_mode="shared", master_seed=4)
        s = en.run(cfg)
        assert np.allclose(s.stderr, 0.0, atol=1e-13)


class TestEffectiveDiffusivityAlgebra:
    def test_synthetic_power_law(self):
        times = np.linspace(1.0, 100.0, 40)
        moments = np.zeros((40, 2, 2))
        moments[:, 0, 0] = times ** (4.0 / 3.0)
        moments[:, 1, 1] = times ** (4.0 / 3.0)
        series = en.DispersionSeries(times=times, second_moments=moments,
                                     stderr=np.zeros((40, 2)), n_particles=10, dim=2)
        t, d, _ = en.effective_diffusivity(series)
        assert np.allclose(d, times ** (1.0 / 3.0) / 2.0)

    def test_index_bounds(self):
        series = en.DispersionSeries(times=np.array([1.0]),
                                     second_moments=np.zeros((1, 2, 2)),
                                     stderr=np.zeros((1, 2)), n_particles=2, dim=2)
        with pytest.raises(ConfigError):
            en.effective_diffusivity(series, 0, 2)


class TestCsvContract:
    def test_round_trip_exact(self, tmp_path):
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=0.1, d0=0.2),
            t_max=20.0, n_particles=300, n_modes=16,
            spectrum=sp.spec_from_tag("e1"), field_mode="shared",
            track_stream=True, master_seed=12)
        series = en.run(cfg)
        path = tmp_path / "series.csv"
        en.write_csv(series, path, {"particles": 300, "digest": series.config_digest,
                                    "psi0": f"{series.stream_initial:.17g}"})
        loaded, preamble = en.read_csv(path)
        # 17 significant digits round-trip float64 exactly
        assert np.array_equal(loaded.times, series.times)
        assert np.array_equal(loaded.second_moments, series.second_moments)
        assert np.array_equal(loaded.stderr, series.stderr)
        assert np.array_equal(loaded.mean_stream, series.mean_stream)
        assert loaded.stream_initial == series.stream_initial
        assert preamble["digest"] == series.config_digest
        assert loaded.n_particles == 300

    def test_header_layout_2d(self, tmp_path):
        series = en.run(brownian_cfg(particles=16, t_max=1.0))
        path = tmp_path / "x.csv"
        en.write_csv(series, path)
        header = [l for l in path.read_text().splitlines()
                  if not l.startswith("#")][0]
        assert header == "t,m11,m22,m12,se11,se22"

    def test_header_layout_3d(self, tmp_path):
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("em", dt=0.1, d0=0.1),
            t_max=1.0, n_particles=8, n_modes=8,
            spectrum=sp.spec_from_tag("e3"), master_seed=2)
        series = en.run(cfg)
        path = tmp_path / "y.csv"
        en.write_csv(series, path)
        header = [l for l in path.read_text().splitlines()
                  if not l.startswith("#")][0]
        assert header == "t,m11,m22,m33,m12,m13,m23,se11,se22,se33"

    def test_missing_column_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,m11,m22,m12,se11\n1.0,1,1,0,0.1\n")
        with pytest.raises(ConfigError) as err:
            en.read_csv(path)
        assert "se22" in str(err.value)


class TestStreamTracking:
    def test_psi0_matches_field_value(self):
        cfg = en.ExperimentConfig(
            scheme_cfg=SchemeConfig("sp", dt=0.1, d0=0.2),
            t_max=5.0, n_particles=50, n_modes=16,
            spectrum=sp.spec_from_tag("e1"), field_mode="shared",
            track_stream=True, master_seed=31)
        series = en.run(cfg)
        from tracerflow import field as fd
        f = fd.generate(cfg.spectrum, 16, 0.0, en.substream(31, 0, en.PURPOSE_FIELD))
        assert series.stream_initial == pytest.approx(
            float(fd.stream_function(f, np.zeros(2))), abs=1e-12)
        assert series.stream_initial_stderr == 0.0
        assert series.mean_stream is not None
        assert series.stream_stderr is not None
