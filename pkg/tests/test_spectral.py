import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochwave import (
    AliasingError,
    BasisError,
    BoundaryCondition,
    Grid,
    PhysicalField,
    SpectralField,
    analyze,
    apply_cos_group,
    apply_rounded_group,
    apply_rounding_defect,
    apply_sinc_group,
    build_basis,
    default_grid,
    pair_evolve,
    spectral_projector,
    synthesize,
)
from stochwave.spectral import basis_from_json, basis_to_json

PI = math.pi
D = BoundaryCondition.DIRICHLET
N = BoundaryCondition.NEUMANN


def brute_force_modes(lx, ly, bc, cutoff):
    """Independent enumeration oracle: scan a generous index box."""
    start = 1 if bc is D else 0
    out = []
    for jx in range(start, 200):
        for jy in range(start, 200):
            lam_sq = (jx * PI / lx) ** 2 + (jy * PI / ly) ** 2
            if lam_sq <= cutoff ** 2:
                out.append((jx, jy, lam_sq))
    return sorted(out, key=lambda t: (t[2], t[0], t[1]))


class TestBuildBasis:
    def test_minimal_dirichlet(self):
        b = build_basis(PI, PI, D, 2.0)
        assert b.modes.tolist() == [[1, 1]]
        assert b.lam_sq.tolist() == [2.0]

    def test_neumann_constant_mode(self):
        b = build_basis(PI, PI, N, 0.5)
        assert b.modes.tolist() == [[0, 0]]
        assert b.lam_sq.tolist() == [0.0]

    def test_enumeration_example(self):
        b = build_basis(PI, PI, D, 3.0)
        assert b.modes.tolist() == [[1, 1], [1, 2], [2, 1], [2, 2]]
        assert b.lam_sq.tolist() == [2.0, 5.0, 5.0, 8.0]

    @pytest.mark.parametrize("lx,ly,bc,cutoff", [
        (PI, PI, D, 7.3),
        (2.0, 1.0, D, 11.0),
        (PI, 1.5, N, 6.2),
        (0.7, 0.7, N, 15.0),
    ])
    def test_against_brute_force(self, lx, ly, bc, cutoff):
        b = build_basis(lx, ly, bc, cutoff)
        oracle = brute_force_modes(lx, ly, bc, cutoff)
        assert b.size == len(oracle)
        assert np.allclose(b.lam_sq, [t[2] for t in oracle])
        assert set(map(tuple, b.modes.tolist())) == {(t[0], t[1]) for t in oracle}

    def test_sorted_nondecreasing(self):
        b = build_basis(2.0, 3.0, D, 9.0)
        assert np.all(np.diff(b.lam_sq) >= 0)

    def test_empty_basis_error(self):
        with pytest.raises(BasisError):
            build_basis(PI, PI, D, 1.0)

    def test_bad_domain(self):
        with pytest.raises(BasisError):
            build_basis(-1.0, PI, D, 3.0)

    def test_json_roundtrip(self, dirichlet_basis):
        rebuilt = basis_from_json(basis_to_json(dirichlet_basis))
        assert rebuilt == dirichlet_basis


class TestTransforms:
    def test_single_mode_values(self):
        b = build_basis(PI, PI, D, 2.0)
        f = synthesize(b.unit_field(1, 1), 12, 12)
        xs = f.grid.x
        expect = (2.0 / PI) * np.outer(np.sin(xs), np.sin(xs))
        assert np.max(np.abs(f.values - expect)) < 1e-14

    def test_zero_field(self, dirichlet_basis):
        f = synthesize(dirichlet_basis.zero_field(), 20, 20)
        assert np.all(f.values == 0.0)

    def test_linearity(self, dirichlet_basis, rng):
        a = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        b = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        fa = synthesize(a, 20, 20).values
        fb = synthesize(b, 20, 20).values
        fab = synthesize(SpectralField(dirichlet_basis, a.coeffs + b.coeffs), 20, 20).values
        assert np.max(np.abs(fab - (fa + fb))) < 1e-12

    @pytest.mark.parametrize("bc", [D, N])
    def test_roundtrip(self, bc, rng):
        b = build_basis(PI, 2.0, bc, 6.0)
        u = SpectralField(b, rng.standard_normal(b.size))
        f = synthesize(u, 2 * b.jx_max + 4, 2 * b.jy_max + 2)
        back = analyze(f, b)
        scale = max(1.0, np.max(np.abs(u.coeffs)))
        assert np.max(np.abs(back.coeffs - u.coeffs)) / scale < 1e-12

    def test_constant_on_neumann(self, neumann_basis, neumann_grid):
        f = PhysicalField(neumann_grid, np.ones((neumann_grid.nx, neumann_grid.ny)))
        c = analyze(f, neumann_basis)
        i0 = neumann_basis.mode_index(0, 0)
        assert abs(c.coeffs[i0] - PI) < 1e-12            # sqrt(Lx*Ly) = pi
        rest = np.delete(c.coeffs, i0)
        assert np.max(np.abs(rest)) < 1e-12

    def test_sampled_eigenfunction(self, dirichlet_basis, dirichlet_grid):
        e12 = dirichlet_basis.unit_field(1, 2)
        f = PhysicalField(dirichlet_grid, dirichlet_grid.synth(e12.coeffs))
        back = analyze(f, dirichlet_basis)
        assert abs(back.coeffs[dirichlet_basis.mode_index(1, 2)] - 1.0) < 1e-12

    def test_aliasing_rejected(self, dirichlet_basis):
        u = dirichlet_basis.zero_field()
        with pytest.raises(AliasingError):
            synthesize(u, 2 * dirichlet_basis.jx_max + 1, 40)

    def test_dimension_mismatch(self, dirichlet_basis, dirichlet_grid):
        with pytest.raises(BasisError):
            PhysicalField(dirichlet_grid, np.zeros((3, 3)))

    def test_discrete_orthonormality(self, neumann_basis, neumann_grid):
        # transform-matched grids make the Gram matrix exactly the identity
        eye = np.eye(neumann_basis.size)
        fields = neumann_grid.synth(eye)
        gram = np.einsum("axy,bxy,xy->ab", fields, fields, neumann_grid.weights)
        assert np.max(np.abs(gram - eye)) < 1e-12


class TestProjector:
    def test_keeps_cluster(self):
        b = build_basis(PI, PI, D, 2.0)
        u = b.unit_field(1, 1)                 # lam = sqrt(2) in [1, 2)
        assert np.array_equal(spectral_projector(u, 1).coeffs, u.coeffs)

    def test_zeroes_outside(self):
        b = build_basis(PI, PI, D, 2.0)
        u = b.unit_field(1, 1)
        assert np.all(spectral_projector(u, 2).coeffs == 0.0)

    def test_partition_of_identity(self, dirichlet_basis, rng):
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        total = np.zeros_like(u.coeffs)
        for k in range(int(math.ceil(dirichlet_basis.cutoff)) + 1):
            total += spectral_projector(u, k).coeffs
        assert np.array_equal(total, u.coeffs)

    def test_idempotent(self, dirichlet_basis, rng):
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        once = spectral_projector(u, 3)
        twice = spectral_projector(once, 3)
        assert np.array_equal(once.coeffs, twice.coeffs)

    def test_negative_bin_rejected(self, dirichlet_basis):
        with pytest.raises(ValueError):
            spectral_projector(dirichlet_basis.zero_field(), -1)


class TestPropagators:
    def test_cos_identity_at_zero(self, dirichlet_basis, rng):
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        assert np.array_equal(apply_cos_group(u, 0.0).coeffs, u.coeffs)

    def test_cos_half_period(self):
        b = build_basis(PI, PI, D, 2.0)
        u = b.unit_field(1, 1, amplitude=0.7)
        out = apply_cos_group(u, PI / math.sqrt(2.0))
        assert abs(out.coeffs[0] + 0.7) < 1e-12

    def test_cos_neumann_zero_mode(self, neumann_basis):
        u = neumann_basis.unit_field(0, 0, amplitude=1.3)
        out = apply_cos_group(u, 17.77)
        assert out.coeffs[neumann_basis.mode_index(0, 0)] == 1.3

    def test_sinc_zero_mode_is_t(self, neumann_basis):
        c = 0.4
        u = neumann_basis.unit_field(0, 0, amplitude=c)
        out = apply_sinc_group(u, 2.5)
        assert out.coeffs[neumann_basis.mode_index(0, 0)] == 2.5 * c

    def test_sinc_at_zero_time(self, dirichlet_basis, rng):
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        assert np.all(apply_sinc_group(u, 0.0).coeffs == 0.0)

    def test_sinc_unit_frequency(self):
        b = build_basis(PI, 2 * PI, N, 1.01)   # contains (0, 2): lam = 1
        idx = b.mode_index(0, 2)
        u = b.unit_field(0, 2)
        out = apply_sinc_group(u, PI / 2.0)
        assert abs(out.coeffs[idx] - 1.0) < 1e-12    # sin(pi/2)/1

    def test_rounded_group_periodic(self, dirichlet_basis, rng):
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        re, im = apply_rounded_group(u, 2.0 * PI)
        assert np.max(np.abs(re.coeffs - u.coeffs)) < 1e-12
        assert np.max(np.abs(im.coeffs)) < 1e-12

    def test_rounded_group_integer_part(self):
        b = build_basis(PI, PI, D, 2.0)        # lam = sqrt(2), [lam] = 1
        u = b.unit_field(1, 1)
        re, im = apply_rounded_group(u, PI)    # exp(i pi) = -1
        assert abs(re.coeffs[0] + 1.0) < 1e-12
        assert abs(im.coeffs[0]) < 1e-12

    def test_rounding_defect_bounded(self, dirichlet_basis, rng):
        for _ in range(25):
            u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
            d = apply_rounding_defect(u)
            assert np.linalg.norm(d.coeffs) <= np.linalg.norm(u.coeffs) + 1e-15
            # coefficient-wise: the multiplier is a fractional part
            frac = dirichlet_basis.lam - np.floor(dirichlet_basis.lam)
            assert np.all((0 <= frac) & (frac < 1))


class TestPairEvolve:
    def test_identity_at_zero(self, dirichlet_basis, rng):
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        v = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        uu, vv = pair_evolve(u, v, 0.0)
        assert np.array_equal(uu.coeffs, u.coeffs)
        assert np.array_equal(vv.coeffs, v.coeffs)

    def test_half_period_rotation(self):
        b = build_basis(PI, PI, D, 2.0)
        u = b.unit_field(1, 1)
        v = b.zero_field()
        uu, vv = pair_evolve(u, v, PI / math.sqrt(2.0))
        assert abs(uu.coeffs[0] + 1.0) < 1e-12
        assert abs(vv.coeffs[0]) < 1e-12

    def test_energy_conserved(self, dirichlet_basis, rng):
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        v = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        e0 = dirichlet_basis.lam_sq * u.coeffs ** 2 + v.coeffs ** 2
        for t in np.linspace(0.1, 10.0, 23):
            uu, vv = pair_evolve(u, v, t)
            e = dirichlet_basis.lam_sq * uu.coeffs ** 2 + vv.coeffs ** 2
            assert np.max(np.abs(e - e0)) < 1e-12 * max(1.0, np.max(e0))

    @settings(max_examples=40, deadline=None)
    @given(t=st.floats(-5, 5), s=st.floats(-5, 5))
    def test_group_law(self, dirichlet_basis, t, s):
        rng = np.random.default_rng(5)
        u = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        v = SpectralField(dirichlet_basis, rng.standard_normal(dirichlet_basis.size))
        u1, v1 = pair_evolve(*pair_evolve(u, v, s), t)
        u2, v2 = pair_evolve(u, v, t + s)
        scale = max(np.max(np.abs(u2.coeffs)), np.max(np.abs(v2.coeffs)), 1.0)
        assert np.max(np.abs(u1.coeffs - u2.coeffs)) < 1e-12 * scale
        assert np.max(np.abs(v1.coeffs - v2.coeffs)) < 5e-12 * scale

    def test_basis_mismatch(self, dirichlet_basis, neumann_basis):
        with pytest.raises(BasisError):
            pair_evolve(dirichlet_basis.zero_field(), neumann_basis.zero_field(), 1.0)


class TestGrid:
    def test_trapezoid_weights_sum_to_area(self, dirichlet_grid):
        assert abs(np.sum(dirichlet_grid.weights) - PI * PI) < 1e-12

    def test_too_coarse_rejected(self, dirichlet_basis):
        with pytest.raises(AliasingError):
            Grid(dirichlet_basis, 2 * dirichlet_basis.jx_max + 1,
                 2 * dirichlet_basis.jy_max + 2)

    def test_default_grid_minimal(self, dirichlet_basis):
        g = default_grid(dirichlet_basis)
        assert g.nx == 2 * dirichlet_basis.jx_max + 2
