import numpy as np
import pytest

from spectralab import models as M
from spectralab.errors import CouplingResonanceHit, SingularMatrix
from spectralab.resolvent import (LapReport, SpectralParameter, imaginary_part,
                                  lap_probe, sandwiched_direct,
                                  sandwiched_identity, sandwiched_t0)
from spectralab.resonance import _t_of_s

from conftest import random_model


class TestDirect:
    def test_scalar_unperturbed(self, scalar_a):
        v = sandwiched_direct(scalar_a, 0.0, SpectralParameter(0.0, 1.0))
        assert v.route == "direct"
        assert abs(v.t[0, 0] - 1j) < 1e-15

    def test_scalar_coupled(self, scalar_a):
        v = sandwiched_direct(scalar_a, 1.0, SpectralParameter(0.0, 1.0))
        assert abs(v.t[0, 0] - (1 + 1j) / 2) < 1e-15

    def test_boundary_hit_raises(self, scalar_a):
        with pytest.raises(SingularMatrix):
            sandwiched_direct(scalar_a, 0.5, SpectralParameter(0.5, 0.0))

    def test_boundary_off_spectrum_allowed(self, scalar_a):
        v = sandwiched_direct(scalar_a, 0.0, SpectralParameter(2.0, 0.0))
        assert abs(v.t[0, 0] + 0.5) < 1e-15

    def test_negative_y_rejected(self):
        with pytest.raises(ValueError):
            SpectralParameter(0.0, -1.0)


class TestIdentityRoute:
    def test_scalar_matches_algebra(self, scalar_a):
        v = sandwiched_identity(scalar_a, 1.0, SpectralParameter(0.0, 1.0))
        assert v.route == "identity"
        assert abs(v.t[0, 0] - (1 + 1j) / 2) < 1e-14

    def test_s_zero_equals_t0_exactly(self, diag02):
        z = SpectralParameter(0.7, 0.3)
        t0 = sandwiched_t0(diag02, z.z)
        v = sandwiched_identity(diag02, 0.0, z)
        assert np.array_equal(v.t, t0)

    def test_real_resonance_hit_surfaces(self, scalar_a):
        # z = 0.3 + 0i is off spec(H0); s = 0.3 is exactly the resonance
        with pytest.raises(CouplingResonanceHit):
            sandwiched_identity(scalar_a, 0.3, SpectralParameter(0.3, 0.0))

    @pytest.mark.parametrize("seed", range(8))
    def test_route_agreement_random(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, int(rng.integers(1, 9)))
        s = float(rng.uniform(-5, 5))
        z = SpectralParameter(float(rng.uniform(-3, 3)),
                              float(10 ** rng.uniform(-4, 0)))
        a = sandwiched_direct(m, s, z).t
        b = sandwiched_identity(m, s, z).t
        assert np.linalg.norm(a - b) <= 1e-9 * (1 + np.linalg.norm(a))


class TestSymmetries:
    @pytest.mark.parametrize("seed", range(5))
    def test_conjugate_symmetry(self, seed):
        rng = np.random.default_rng(seed + 50)
        m = random_model(rng, 5)
        s = float(rng.uniform(-2, 2))
        z = complex(rng.uniform(-2, 2), rng.uniform(0.05, 1.0))
        upper = _t_of_s(m, z, s, tol=__import__("spectralab.tolerances",
                                                fromlist=["DEFAULT"]).DEFAULT)
        lower = _t_of_s(m, np.conj(z), s, tol=__import__("spectralab.tolerances",
                                                         fromlist=["DEFAULT"]).DEFAULT)
        assert np.linalg.norm(lower - upper.conj().T) <= 1e-12 * (1 + np.linalg.norm(upper))

    @pytest.mark.parametrize("seed", range(5))
    def test_herglotz_positivity(self, seed):
        rng = np.random.default_rng(seed + 80)
        m = random_model(rng, 6)
        s = float(rng.uniform(-3, 3))
        t = sandwiched_direct(m, s, SpectralParameter(
            float(rng.uniform(-2, 2)), float(10 ** rng.uniform(-3, 0)))).t
        w = np.linalg.eigvalsh(imaginary_part(t))
        assert w.min() >= -1e-10

    @pytest.mark.parametrize("model_name,lam", [("diag02", 0.0), ("rank1_c", -1.0)])
    def test_blowup_rate_at_eigenvalue(self, model_name, lam, request):
        # ||T(lambda + iy)||_op * y -> ||F P F*||_op at an eigenvalue of H0
        model = request.getfixturevalue(model_name)
        w, v = np.linalg.eigh(model.h0)  # oracle eigenprojection
        k = int(np.argmin(np.abs(w - lam)))
        p = np.outer(v[:, k], v[:, k].conj())
        expect = np.linalg.norm(model.f @ p @ model.f.conj().T, 2)
        errs = []
        for y in (1e-4, 1e-5, 1e-6):
            t = sandwiched_direct(model, 0.0, SpectralParameter(lam, y)).t
            errs.append(abs(np.linalg.norm(t, 2) * y - expect))
        slack = 1e-12 * max(expect, 1.0)
        assert errs[1] <= errs[0] + slack and errs[2] <= errs[1] + slack
        assert errs[-1] <= 1e-5 * max(expect, 1.0)


class TestLapProbe:
    def test_scalar_off_spectrum_converges(self, scalar_a):
        ys = [0.1 * 0.5**k for k in range(20)]
        rep = lap_probe(scalar_a, [1.0], ys)
        assert isinstance(rep, LapReport)
        assert rep.converged[0]
        assert abs(rep.limits[0][0, 0] + 1.0) < 1e-9
        assert rep.level_spacing[0] == 1.0

    def test_scalar_at_eigenvalue_diverges(self, scalar_a):
        ys = [0.1 * 0.5**k for k in range(10)]
        rep = lap_probe(scalar_a, [0.0], ys)
        assert not rep.converged[0]
        assert rep.increments[0, -1] > rep.increments[0, 0]

    def test_diagonal_limit_entrywise(self, diag02):
        ys = [0.1 * 0.5**k for k in range(20)]
        rep = lap_probe(diag02, [1.0], ys)
        assert rep.converged[0]
        assert np.allclose(rep.limits[0], np.diag([-1.0, 1.0]), atol=1e-8)

    def test_continuity_estimate(self, diag02):
        ys = [0.1 * 0.5**k for k in range(8)]
        rep = lap_probe(diag02, [0.9, 1.0, 1.1], ys)
        assert rep.continuity > 0.0

    def test_schedule_validation(self, scalar_a):
        with pytest.raises(ValueError):
            lap_probe(scalar_a, [1.0], [0.1, 0.2])
        with pytest.raises(ValueError):
            lap_probe(scalar_a, [], [0.2, 0.1])
