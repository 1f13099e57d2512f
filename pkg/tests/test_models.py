import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectralab import models as M
from spectralab.errors import InvalidConfig, NonHermitianInput


class TestBuild:
    def test_scalar_a(self, scalar_a):
        assert scalar_a.dim == 1
        assert scalar_a.h0[0, 0] == 0.0
        assert scalar_a.f[0, 0] == 1.0
        assert scalar_a.j[0, 0] == 1.0

    def test_schrodinger_stencil(self):
        m = M.build_model(M.ModelConfig("schrodinger1d", (0, 4), {"n": 4, "alpha": 0.0}))
        expect = 2.0 * np.eye(4) - np.diag(np.ones(3), 1) - np.diag(np.ones(3), -1)
        assert np.array_equal(m.h0, expect.astype(complex))
        assert np.allclose(np.diag(m.f), 1.0)  # alpha=0 weights are all 1

    def test_schrodinger_weights_centered(self):
        m = M.build_model(M.ModelConfig("schrodinger1d", (0, 4), {"n": 4, "alpha": 0.5}))
        w = np.diag(m.f).real
        assert np.allclose(w, w[::-1])  # symmetric about the center
        sites = M.centered_sites(4)
        assert np.allclose(w, (1 + sites**2) ** -0.5)

    def test_rank1_c_perturbation_exact(self, rank1_c):
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        assert np.linalg.norm(rank1_c.v - np.outer(v, v.conj())) < 1e-14

    def test_rank1_f_invertible_with_tiny_completion(self, rank1_c):
        rep = M.validate(rank1_c)
        assert rep.passed
        assert 1e-7 < rep.f_min_pivot < 1e-5  # the 1e-6 completion rows

    def test_rank1_negative_sign(self):
        cfg = M.ModelConfig("rank_one", (-1, 1),
                            {"spectrum": [0.0, 0.0], "vector": [1.0, 2.0], "sign": -1})
        m = M.build_model(cfg)
        v = np.array([1.0, 2.0])
        assert np.linalg.norm(m.v + np.outer(v, v.conj())) < 1e-12

    def test_rank1_complex_vector(self):
        cfg = M.ModelConfig("rank_one", (-1, 1),
                            {"spectrum": [0.0, 1.0], "vector": [[0.0, 1.0], [1.0, 0.0]]})
        m = M.build_model(cfg)
        v = np.array([1j, 1.0])
        assert np.linalg.norm(m.v - np.outer(v, v.conj())) < 1e-12

    def test_jacobi(self):
        cfg = M.ModelConfig("jacobi", (0, 1),
                            {"diagonal": [1.0, 2.0, 3.0], "off_diagonal": [0.5, 0.25]})
        m = M.build_model(cfg)
        assert m.h0[0, 1] == 0.5 and m.h0[2, 1] == 0.25

    def test_explicit(self):
        cfg = M.ModelConfig("explicit", (0, 1), {
            "h0": [[0.0, [0.0, 1.0]], [[0.0, -1.0], 2.0]],
            "f": [[1.0, 0.0], [0.0, 1.0]],
            "j": [[1.0, 0.0], [0.0, -1.0]]})
        m = M.build_model(cfg)
        assert m.h0[0, 1] == 1j and m.h0[1, 0] == -1j

    def test_explicit_non_hermitian_rejected(self):
        cfg = M.ModelConfig("explicit", (0, 1), {
            "h0": [[0.0, 1.0], [0.0, 0.0]],
            "f": [[1.0, 0.0], [0.0, 1.0]],
            "j": [[1.0, 0.0], [0.0, 1.0]]})
        with pytest.raises(NonHermitianInput):
            M.build_model(cfg)

    def test_deterministic_bytes(self):
        cfg = M.ModelConfig("schrodinger1d", (0, 4), {"n": 12, "alpha": 0.5})
        a = M.build_model(cfg)
        b = M.build_model(cfg)
        assert a.h0.tobytes() == b.h0.tobytes()
        assert a.f.tobytes() == b.f.tobytes()
        assert a.j.tobytes() == b.j.tobytes()


class TestConfig:
    def test_json_roundtrip(self):
        doc = {"kind": "diagonal", "interval": [-1.0, 1.0], "seed": 3,
               "spectrum": [0.0, 2.0]}
        cfg = M.ModelConfig.from_json(json.dumps(doc))
        assert cfg.to_dict() == doc

    @pytest.mark.parametrize("doc,field", [
        ({"kind": "nope", "interval": [0, 1]}, "kind"),
        ({"kind": "diagonal", "interval": [1, 0], "spectrum": [0.0]}, "interval"),
        ({"kind": "diagonal", "interval": [0, 1], "spectrum": [0.0], "seed": -1}, "seed"),
    ])
    def test_bad_config(self, doc, field):
        with pytest.raises(InvalidConfig) as info:
            M.ModelConfig.from_dict(doc)
        assert info.value.field == field

    @pytest.mark.parametrize("params,field", [
        ({"spectrum": [0.0], "f_diag": [1.0, 2.0]}, "f_diag"),
        ({}, "spectrum"),
    ])
    def test_bad_diagonal_params(self, params, field):
        with pytest.raises(InvalidConfig) as info:
            M.build_model(M.ModelConfig("diagonal", (0, 1), params))
        assert info.value.field == field

    def test_schrodinger_size_guard(self):
        with pytest.raises(InvalidConfig):
            M.build_model(M.ModelConfig("schrodinger1d", (0, 1), {"n": 1}))
        with pytest.raises(InvalidConfig):
            M.build_model(M.ModelConfig("schrodinger1d", (0, 1),
                                        {"n": 4, "potential": [1.0, 2.0]}))

    def test_rank_one_zero_vector(self):
        with pytest.raises(InvalidConfig):
            M.build_model(M.ModelConfig("rank_one", (0, 1),
                                        {"spectrum": [0.0], "vector": [0.0]}))


class TestValidate:
    def test_scalar_a_passes(self, scalar_a):
        assert M.validate(scalar_a).passed

    def test_zero_rigging_fails(self):
        m = M.OperatorModel(2, np.zeros((2, 2)), np.zeros((2, 2)),
                            np.eye(2), (0.0, 1.0))
        rep = M.validate(m)
        assert not rep.passed
        assert any("rigging kernel nontrivial" in r for r in rep.reasons)

    def test_nilpotent_h0_fails(self):
        m = M.OperatorModel(2, np.array([[0.0, 1.0], [0.0, 0.0]]),
                            np.eye(2), np.eye(2), (0.0, 1.0))
        rep = M.validate(m)
        assert not rep.passed
        assert rep.hermiticity_h0 > 0.5


class TestPerturbed:
    def test_r_zero(self, rank1_c):
        assert np.array_equal(M.perturbed(rank1_c, 0.0).h_r, rank1_c.h0)

    def test_scalar(self, scalar_a):
        assert M.perturbed(scalar_a, 2.0).h_r[0, 0] == 2.0

    def test_rank1_c_closed_form(self, rank1_c):
        p = M.perturbed(rank1_c, -1.5)
        expect = np.array([[-1.75, -0.75], [-0.75, 0.25]])
        assert np.linalg.norm(p.h_r - expect) < 1e-14
        w = np.linalg.eigvalsh(p.h_r)
        assert np.allclose(w, [-2.0, 0.5])

    @settings(max_examples=40, deadline=None, derandomize=True)
    @given(r=st.floats(-10, 10), seed=st.integers(0, 10**6),
           kind=st.sampled_from(["diagonal", "schrodinger1d", "rank_one"]))
    def test_hermitian_for_all_couplings(self, r, seed, kind):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        if kind == "diagonal":
            params = {"spectrum": rng.normal(size=n).tolist(),
                      "f_diag": rng.uniform(0.5, 2, n).tolist(),
                      "j_diag": rng.choice([-1.0, 1.0], n).tolist()}
        elif kind == "schrodinger1d":
            n = max(n, 2)
            params = {"n": n, "alpha": 0.5, "potential": rng.normal(size=n).tolist()}
        else:
            params = {"spectrum": rng.normal(size=n).tolist(),
                      "vector": rng.normal(size=n).tolist()}
        m = M.build_model(M.ModelConfig(kind, (-1, 1), params))
        h = M.perturbed(m, r).h_r
        scale = np.linalg.norm(m.h0) + abs(r) * np.linalg.norm(m.f)**2 * np.linalg.norm(m.j)
        assert np.linalg.norm(h - h.conj().T) <= 1e-13 * max(scale, 1e-300)

    def test_distinguished_coordinate_reproduces_scalar_function(self, rank1_c):
        # (T0)[0,0] must be <v, (H0 - z)^{-1} v> for the rank-one embedding
        rng = np.random.default_rng(12)
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        for _ in range(10):
            z = complex(rng.uniform(-2, 2), rng.uniform(0.05, 1.0))
            r0 = np.linalg.inv(rank1_c.h0 - z * np.eye(2))  # oracle route
            expect = v.conj() @ r0 @ v
            from spectralab.resolvent import sandwiched_t0
            t0 = sandwiched_t0(rank1_c, z)
            assert abs(t0[0, 0] - expect) <= 1e-12 * max(1.0, abs(expect))
