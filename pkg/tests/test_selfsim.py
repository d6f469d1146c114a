import csv
from fractions import Fraction

import numpy as np
import pytest

from sqglab.data import homogeneous, random_symmetric
from sqglab.evolve import Trajectory, sample
from sqglab.field import Grid, RealField, fwd, gradient_coeffs, inv
from sqglab.nonlocal_ops import HomogeneousProfile, poisson_homogeneous
from sqglab.selfsim import (DecaySeries, Profile, SelfSimConfig, SimilarityProblem, StabilityConfig,
                            antisymmetric_seed, contamination, decay_verdict, eventually_decreasing,
                            linear_profile, similarity_rhs, solve_profile, stability_experiment,
                            sweep_amplitude)
from sqglab.symmetry import GroupElement, SymmetryGroup, act, asymmetry, project_symmetric

R4 = SymmetryGroup.rotation_reflection(4)
G3 = SymmetryGroup.rotation_reflection(3)
sin3 = HomogeneousProfile.from_function(lambda p: np.sin(3 * p), 256, G3)
sin4 = HomogeneousProfile.from_function(lambda p: np.sin(4 * p), 256, R4)
one = HomogeneousProfile(np.ones(256), SymmetryGroup.radial())
small = SelfSimConfig(n=64, L=8.0)


class TestRhs:
    def test_constant_is_steady(self):
        th = RealField(small.grid, np.full(small.grid.shape, 0.7))
        assert np.abs(similarity_rhs(th, one, 0.7, small).values).max() < 1e-14

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            similarity_rhs(RealField.zeros(Grid(32, 8.0)), one, 1.0, small)

    def test_poisson_profile_is_steady(self):
        # periodic e^{-Lambda} of the sampled 0-homogeneous datum on a large box is the oracle;
        # it solves y . grad Theta = Lambda Theta and matches the closed form used by the solver
        g = Grid(512, 32.0)
        X, Y = g.mesh
        c = fwd(g, homogeneous(g, sin3, 1.0, mollify_cells=0.0).values) * np.exp(-g.kmag)
        d1, d2 = gradient_coeffs(g, c)
        m = g.radius <= 2.0
        steady = X * inv(g, d1) + Y * inv(g, d2) - inv(g, g.kmag * c)
        assert np.abs(steady[m]).max() <= 1e-3
        assert np.abs(inv(g, c)[m] - poisson_homogeneous(sin3, X[m], Y[m])).max() <= 1e-3
        cfg = SelfSimConfig(n=64, L=8.0, disable_riesz=True)
        th = linear_profile(sin3, 1.0, cfg)
        assert np.abs(similarity_rhs(th, sin3, 1.0, cfg).values).max() < 1e-12

    @pytest.mark.parametrize("e", [GroupElement(Fraction(1, 4)), GroupElement(Fraction(0), True),
                                   GroupElement(Fraction(1, 2), True)])
    def test_equivariant(self, e):
        cfg = SelfSimConfig(n=64, L=8.0)
        g = cfg.grid
        prob = SimilarityProblem(sin4, 0.3, cfg)
        pert = RealField(g, inv(g, np.where(prob.mask, fwd(g, np.random.default_rng(1).normal(size=g.shape)), 0)))
        th = RealField(g, prob.far) + pert * 0.01
        lhs = similarity_rhs(act(e, th), sin4, 0.3, cfg).values
        rhs = act(e, similarity_rhs(th, sin4, 0.3, cfg)).values
        assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(rhs).max()


class TestSolve:
    def test_zero_amplitude(self):
        p = solve_profile(sin3, 0.0, G3, small)
        assert p.residual == 0.0 and p.asymmetry == 0.0 and p.converged
        assert not np.any(p.theta.values)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            solve_profile(sin3, -1.0, G3, small)
        cos3 = HomogeneousProfile.from_function(lambda p: np.cos(3 * p), 256)
        with pytest.raises(ValueError):
            solve_profile(cos3, 0.1, G3, small)
        with pytest.raises(ValueError):
            solve_profile(sin3, 0.1, G3, small, guess=RealField.zeros(Grid(32, 8.0)))

    def test_radial_profile_is_constant(self):
        p = solve_profile(one, 0.3, SymmetryGroup.radial(), small)
        assert p.converged
        assert np.abs(p.theta.values - 0.3).max() < 1e-12

    def test_small_amplitude_converges_consistently(self):
        cfg = SelfSimConfig(n=64, L=8.0, s_max=40.0)
        A = 0.05
        p = solve_profile(sin4, A, R4, cfg)
        assert p.converged and p.residual < cfg.tol_rel * A
        assert p.asymmetry < 1e-10
        prob = SimilarityProblem(sin4, A, cfg, R4)
        assert prob.residual(p.theta) == pytest.approx(p.residual, rel=1e-12, abs=1e-16)
        res = [r for _, r in p.history]
        assert res[-1] < res[0]
        # advection is a small correction to the linear profile at small A
        lin = linear_profile(sin4, A, cfg).values
        inner = cfg.grid.radius <= 0.5 * cfg.L
        assert np.abs(p.theta.values - lin)[inner].max() < 0.05 * A

    def test_profile_evaluation(self):
        cfg = SelfSimConfig(n=64, L=8.0)
        th = linear_profile(sin3, 1.0, cfg)
        p = Profile(th, sin3, 1.0, 0.0, 0.0, G3)
        pts = np.array([[0.5, 0.2], [1.0, -1.0]])
        assert np.allclose(p.at_time(2 * pts, 2.0), sample(th, pts))


def test_rescaled_self_similar_fields_agree():
    # theta(x, t) = F(x / t): theta(t_k x, t_k) = F(x) for every k
    g = Grid(256, 16.0)
    F = lambda x, y: np.exp(-(x * x + y * y)) * (3 * x * x * y - y**3)  # noqa: E731
    X, Y = g.mesh
    traj = Trajectory(g)
    for t in (1.0, 2.0, 4.0):
        traj.append(t, RealField(g, F(X / t, Y / t)))
    pts = np.random.default_rng(0).uniform(-1.5, 1.5, size=(200, 2))
    ref = F(pts[:, 0], pts[:, 1])
    for t in traj.times:
        assert np.abs(sample(traj.at(t), t * pts) - ref).max() <= 1e-4


class TestStability:
    def test_radial_zero_perturbation(self):
        sc = StabilityConfig(n=64, l=16.0, dt=0.05, t0=0.25, n_checkpoints=3)
        prof = solve_profile(one, 0.3, SymmetryGroup.radial(), small)
        d = stability_experiment(one, 0.3, None, [0.5, 1.0], prof, sc)
        assert d.valid.any()
        assert np.nanmax(d.errors) < 1e-12

    def test_invalid_cells(self):
        sc = StabilityConfig(n=64, l=16.0, dt=0.05, t0=0.25, n_checkpoints=3)
        prof = solve_profile(one, 0.3, SymmetryGroup.radial(), small)
        d = stability_experiment(one, 0.3, None, [0.5, 20.0], prof, sc)
        assert not d.valid[:, 1].any() and np.all(np.isnan(d.errors[:, 1]))

    def test_checkpoints_must_be_multiples_of_dt(self):
        sc = StabilityConfig(n=64, l=16.0, dt=0.3, t0=0.25, n_checkpoints=2)
        prof = solve_profile(one, 0.3, SymmetryGroup.radial(), small)
        with pytest.raises(ValueError):
            stability_experiment(one, 0.3, None, [0.5], prof, sc)

    def test_perturbation_grid(self):
        sc = StabilityConfig(n=64, l=16.0, dt=0.05, t0=0.25, n_checkpoints=2)
        prof = solve_profile(one, 0.3, SymmetryGroup.radial(), small)
        with pytest.raises(ValueError):
            stability_experiment(one, 0.3, RealField.zeros(Grid(32, 16.0)), [0.5], prof, sc)

    def test_contamination(self):
        assert contamination(1.0, 2.0, 10.0) == pytest.approx(8 / 8.5**4)

    def test_verdict(self):
        times = [0.25, 0.5, 1.0, 2.0, 4.0]
        e = np.array([[1.0], [0.8], [0.5], [0.2], [0.1]])
        s = DecaySeries(times, [2.0], e, np.ones_like(e, bool), {})
        assert decay_verdict(s, 2.0) == (True, pytest.approx(0.1))
        assert not decay_verdict(s, 2.0, max_ratio=0.05)[0]
        assert not decay_verdict(s, 2.0, min_span=20.0)[0]
        assert eventually_decreasing([3, 1, 2, 1, 0.5])
        assert not eventually_decreasing([1, 0.5, 0.7])


class TestSweep:
    def test_seed(self):
        g = Grid(64, 8.0)
        s = antisymmetric_seed(g, 4, 1e-3)
        assert s.linf() == pytest.approx(1e-3)
        assert asymmetry(s, SymmetryGroup.rotation(4)) < 1e-14
        assert np.abs(project_symmetric(s, R4).values).max() < 1e-18

    def test_rejects(self):
        with pytest.raises(ValueError):
            sweep_amplitude(sin4, [0.2, 0.1], R4, SymmetryGroup.rotation(4), small)
        with pytest.raises(ValueError):
            sweep_amplitude(sin4, [0.1, 0.2], R4, R4, small)
        with pytest.raises(ValueError):
            sweep_amplitude(sin4, [0.1, 0.2], R4, SymmetryGroup.rotation(2), small)

    def test_small_sweep(self, tmp_path):
        Gbar = SymmetryGroup.rotation(4)
        cfg = SelfSimConfig(n=64, L=8.0, s_max=30.0)
        br = sweep_amplitude(sin4, [0.0, 0.05, 0.1], R4, Gbar, cfg, out_dir=tmp_path)
        assert [e.A for e in br.entries] == [0.0, 0.05, 0.1]
        assert br.entries[0].asymmetry == 0.0
        for e in br.entries[1:]:
            assert e.asymmetry <= 1e-4
            assert asymmetry(e.profile.theta, Gbar) <= 1e-6
            assert (tmp_path / e.profile_path).exists()
        assert br.breaking_candidates == []
        br.write_csv(tmp_path / "branch.csv")
        with open(tmp_path / "branch.csv") as fh:
            rows = list(csv.DictReader(fh))
        A = [float(r["A"]) for r in rows]
        assert A == sorted(A) and len(A) == 3

    def test_random_symmetric_guess_is_accepted(self):
        cfg = SelfSimConfig(n=64, L=8.0, s_max=0.5)
        guess = RealField(cfg.grid, linear_profile(sin4, 0.1, cfg).values
                          + 0.01 * random_symmetric(cfg.grid, R4, seed=0).values)
        p = solve_profile(sin4, 0.1, R4, cfg, guess=guess)
        assert np.isfinite(p.residual) and p.asymmetry < 1e-10
