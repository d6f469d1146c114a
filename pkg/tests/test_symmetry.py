from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import j0

from sqglab.data import gaussian, random_symmetric, ring_bump
from sqglab.field import Grid, RealField, VectorField, fwd, inv, to_spectral
from sqglab.nonlocal_ops import riesz, riesz_perp
from sqglab.symmetry import (GroupElement, SymmetryGroup, act, act_vector, asymmetry, mean_drift,
                             parse_group, project_symmetric)

S = GroupElement(Fraction(0), True)
exact_elements = st.builds(GroupElement, st.sampled_from([Fraction(k, 4) for k in range(4)]), st.booleans())


def smooth_field(g, seed, n_modes=6):
    """Trigonometric polynomial in low modes, with its coefficients for oracles."""
    rng = np.random.default_rng(seed)
    X, Y = g.mesh
    a = np.pi / g.l
    terms = [(rng.integers(-3, 4), rng.integers(-3, 4), rng.normal(), rng.uniform(0, 2 * np.pi))
             for _ in range(n_modes)]
    vals = sum(c * np.cos(a * (k1 * X + k2 * Y) + ph) for k1, k2, c, ph in terms)
    return RealField(g, vals), terms


def two_blobs(g):
    X, Y = g.mesh
    return RealField(g, np.exp(-((X - 0.7) ** 2 + (Y - 0.2) ** 2) / 0.36)
                     + 0.5 * np.exp(-((X + 0.4) ** 2 + (Y - 0.9) ** 2) / 0.64))


class TestGroup:
    def test_parse(self):
        assert parse_group("rotation(3)") == SymmetryGroup.rotation(3)
        assert parse_group(" rotation_reflection(4) ") == SymmetryGroup.rotation_reflection(4)
        assert parse_group("radial").kind == "radial"
        with pytest.raises(ValueError):
            parse_group("dihedral(3)")

    @pytest.mark.parametrize("m", [0, 1, -2])
    def test_order_below_two_rejected(self, m):
        with pytest.raises(ValueError):
            SymmetryGroup.rotation(m)

    def test_grid_exact(self):
        assert SymmetryGroup.rotation(4).grid_exact
        assert SymmetryGroup.rotation_reflection(2).grid_exact
        assert not SymmetryGroup.rotation_reflection(3).grid_exact
        assert not SymmetryGroup.radial().grid_exact

    def test_no_fixed_vector(self):
        v = np.array([0.3, -1.2])
        for G in (SymmetryGroup.rotation(2), SymmetryGroup.rotation_reflection(3), SymmetryGroup.rotation(5)):
            avg = np.mean([e.matrix() @ v for e in G.elements() if not e.reflect], axis=0)
            assert np.abs(avg).max() < 1e-14

    @given(a=exact_elements, b=exact_elements)
    def test_product_matches_matrices(self, a, b):
        assert np.allclose((a * b).matrix(), a.matrix() @ b.matrix(), atol=1e-14)


class TestAct:
    g = Grid(64, 2.0)

    def test_reflection_of_y(self):
        f = RealField.from_function(self.g, lambda x, y: y)
        inner = np.abs(self.g.mesh[1]) < self.g.l  # y = -l is its own mirror node
        assert np.array_equal(act(S, f).values[inner], f.values[inner])

    def test_half_turn_parity(self):
        half = GroupElement(Fraction(1, 2))
        x = RealField.from_function(self.g, lambda x, y: x)
        x2 = RealField.from_function(self.g, lambda x, y: x**2)
        inner = self.g.radius < self.g.l
        assert np.array_equal(act(half, x).values[inner], -x.values[inner])
        assert np.array_equal(act(half, x2).values[inner], x2.values[inner])

    def test_third_turn_of_radial_bump(self):
        g = Grid(128, 4.0)
        b = gaussian(g, width=0.5)
        r = act(GroupElement(Fraction(1, 3)), b)
        assert np.abs(r.values - b.values).max() <= 1e-6

    def test_quarter_turn_maps_x_to_y(self):
        g = Grid(32, 1.0)
        x = RealField.from_function(g, lambda x, y: np.sin(np.pi * x))
        y = RealField.from_function(g, lambda x, y: np.sin(np.pi * y))
        assert np.abs(act(GroupElement(Fraction(1, 4)), x).values - y.values).max() < 1e-14

    @given(a=exact_elements, b=exact_elements, seed=st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_exact_action_law(self, a, b, seed):
        f = RealField(self.g, np.random.default_rng(seed).normal(size=self.g.shape))
        assert np.array_equal(act(a, act(b, f)).values, act(a * b, f).values)

    def test_interpolated_action_law(self):
        g = Grid(256, 8.0)
        f = two_blobs(g)
        a, b = GroupElement(Fraction(1, 3)), GroupElement(Fraction(1, 6), True)
        d = act(a, act(b, f)).values - act(a * b, f).values
        assert np.abs(d[g.radius <= 0.5 * g.l]).max() < 1e-8

    def test_vector_action_quarter_turn(self):
        g = Grid(64, np.pi)
        X, Y = g.mesh
        v = VectorField(RealField(g, np.cos(X) * np.sin(2 * Y)), RealField(g, np.sin(X) * np.cos(Y)))
        q = GroupElement(Fraction(1, 4))
        w = act_vector(q, v)
        # R_{pi/2} (a, b)(R^-1 x) = (-b, a)(y, -x)
        assert np.abs(w.v1.values + np.sin(Y) * np.cos(-X)).max() < 1e-13
        assert np.abs(w.v2.values - np.cos(Y) * np.sin(-2 * X)).max() < 1e-13


class TestProject:
    def test_four_fold_field_unchanged(self):
        g = Grid(64, 2.0)
        f = RealField.from_function(g, lambda x, y: np.cos(np.pi * x) + np.cos(np.pi * y))
        p = project_symmetric(f, SymmetryGroup.rotation(4))
        assert np.abs(p.values - f.values).max() <= 1e-12

    def test_x_under_half_turn_is_zero(self):
        g = Grid(64, 2.0)
        f = RealField.from_function(g, lambda x, y: np.sin(np.pi * x / g.l))
        assert np.abs(project_symmetric(f, SymmetryGroup.rotation(2)).values).max() < 1e-15

    def test_radial_average_matches_bessel_oracle(self):
        # angular mean of cos(k.x + p) over the circle of radius r is cos(p) J0(|k| r)
        g = Grid(128, 8.0)
        f, terms = smooth_field(g, 3)
        p = project_symmetric(f, SymmetryGroup.radial())
        a = np.pi / g.l
        r = g.radius
        oracle = sum(c * np.cos(ph) * j0(a * np.hypot(k1, k2) * r) for k1, k2, c, ph in terms)
        inner = r <= 0.9 * g.l
        assert np.abs(p.values - oracle)[inner].max() <= 1e-4

    @pytest.mark.parametrize("G", [SymmetryGroup.rotation(2), SymmetryGroup.rotation_reflection(4),
                                   SymmetryGroup.rotation(3), SymmetryGroup.rotation_reflection(3)])
    def test_idempotent(self, G):
        g = Grid(128, 8.0)
        p = project_symmetric(two_blobs(g), G)
        pp = project_symmetric(p, G)
        tol = 1e-15 if G.grid_exact else 1e-8
        assert np.abs(pp.values - p.values).max() <= tol
        assert asymmetry(p, G) <= 1e-6

    @given(seed=st.integers(0, 2**31), m=st.sampled_from([2, 4]), refl=st.booleans())
    @settings(max_examples=25, deadline=None)
    def test_contraction(self, seed, m, refl):
        g = Grid(32, 1.0)
        f = RealField(g, np.random.default_rng(seed).normal(size=g.shape))
        G = SymmetryGroup("rotation_reflection" if refl else "rotation", m)
        p = project_symmetric(f, G)
        assert p.linf() <= f.linf() * (1 + 1e-14)
        assert asymmetry(p, G) <= 1e-14


class TestAsymmetry:
    def test_y_under_dihedral_two(self):
        g = Grid(64, 2.0)
        f = RealField.from_function(g, lambda x, y: y)
        assert asymmetry(f, SymmetryGroup.rotation_reflection(2)) == pytest.approx(2.0, rel=0.05)

    def test_symmetric_random_data(self):
        g = Grid(128, 8.0)
        for G in (SymmetryGroup.rotation(2), SymmetryGroup.rotation_reflection(4)):
            assert asymmetry(random_symmetric(g, G, seed=1), G) <= 1e-6

    def test_zero_field(self):
        g = Grid(16, 1.0)
        assert asymmetry(RealField.zeros(g), SymmetryGroup.rotation(2)) == 0.0


class TestMeanDrift:
    def test_constant_vector(self):
        g = Grid(64, 4.0)
        one, zero = RealField(g, np.ones(g.shape)), RealField.zeros(g)
        for method in ("spectral", "nodes"):
            for m in mean_drift(VectorField(one, zero), [0.5, 1.0, 3.0], method):
                assert m == pytest.approx([1.0, 0.0], abs=1e-13)

    def test_radius_outside_box(self):
        g = Grid(32, 1.0)
        z = RealField.zeros(g)
        with pytest.raises(ValueError):
            mean_drift(VectorField(z, z), [0.95])

    @pytest.mark.parametrize("G", [SymmetryGroup.rotation(2), SymmetryGroup.rotation_reflection(3),
                                   SymmetryGroup.rotation(4), SymmetryGroup.radial()])
    def test_symmetric_velocity_has_no_drift(self, G):
        # periodic images of the data break m = 3 symmetry by ~ (width / l)^5; keep them small
        g = Grid(512, 32.0)
        th = random_symmetric(g, G, seed=2, width=0.5)
        v = riesz_perp(to_spectral(th))
        for m in mean_drift(v, [g.l / 8, g.l / 4, g.l / 2, 0.9 * g.l]):
            assert np.abs(m).max() <= 1e-8 * th.linf()

    def test_radial_velocity_is_azimuthal(self):
        # independent check: the polar components of R_perp(radial) have no radial part
        # zero-mass ring: the periodic images then only act through higher moments
        g = Grid(256, 16.0)
        th = ring_bump(g, 2.0, 0.5, core=1.0)
        v = riesz_perp(to_spectral(th))
        X, Y = g.mesh
        r = g.radius
        ring = (r > 1.0) & (r < 6.0)
        radial_part = (v.v1.values * X + v.v2.values * Y)[ring] / r[ring]
        assert np.abs(radial_part).max() < 1e-5 * th.linf()
        assert np.abs(v.magnitude()).max() > 0.1 * th.linf()

    def test_nodes_method_close_to_spectral(self):
        g = Grid(128, 4.0)
        X, Y = g.mesh
        v = VectorField(RealField(g, np.cos(X / 2)), RealField(g, np.sin(Y / 2) + 1))
        a = mean_drift(v, [1.5], "spectral")[0]
        b = mean_drift(v, [1.5], "nodes")[0]
        assert np.abs(a - b).max() < 5e-2
        with pytest.raises(ValueError):
            mean_drift(v, [1.0], "polar")


@pytest.mark.parametrize("e", [GroupElement(Fraction(1, 4)), GroupElement(Fraction(1, 2)), S,
                               GroupElement(Fraction(3, 4), True)])
def test_riesz_equivariance(e):
    # R commutes with the signed action; R_perp = J R picks up det g since J g = det(g) g J
    g = Grid(64, 3.0)
    th = RealField(g, inv(g, np.where(g.dealias_mask, fwd(g, np.random.default_rng(5).normal(size=g.shape)), 0)))
    F, Fg = to_spectral(th), to_spectral(act(e, th))
    for op, sign in ((riesz, 1), (riesz_perp, e.det)):
        lhs = act_vector(e, op(F))
        rhs = op(Fg)
        assert np.abs(sign * lhs.v1.values - rhs.v1.values).max() < 1e-12
        assert np.abs(sign * lhs.v2.values - rhs.v2.values).max() < 1e-12
