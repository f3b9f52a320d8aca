"""Assembly fidelity, quadratic-form identities, and solve behavior.

The identity tests evaluate the assembled symbolic blocks on structured
vectors and compare against the decay/uncertainty coefficient matrices
recomputed numerically in the analysis module; the two routes share no
code beyond numpy.
"""

import numpy as np
import pytest

from ltvcert import analysis, cert
from ltvcert.cert import (DecayRates, beta_of_delta, build_nominal, build_robust,
                          delta_of_beta, load_certificate, save_certificate,
                          solve_nominal, solve_robust)
from tests.conftest import make_system


def rand_sym(rng, d):
    M = rng.standard_normal((d, d))
    return M + M.T


def rand_skew(rng, d):
    M = rng.standard_normal((d, d))
    return M - M.T


def rand_psd(rng, d):
    M = rng.standard_normal((d, d))
    return M @ M.T + 0.1 * np.eye(d)


def random_planar_uncertain(rng):
    A = [rng.standard_normal((2, 2)) for _ in range(3)]
    B = [rng.standard_normal((2, 2)) for _ in range(3)]
    return make_system([0.0, 0.7, 2.0], A, B)


class TestBetaDelta:
    def test_fixed_point(self):
        assert beta_of_delta(1.0) == 1.0
        assert delta_of_beta(1.0) == 1.0

    def test_beta_125_is_delta_2(self):
        assert delta_of_beta(1.25) == pytest.approx(2.0, abs=1e-12)
        assert beta_of_delta(2.0) == pytest.approx(1.25, abs=1e-15)

    def test_reference_margin_pair(self):
        assert beta_of_delta(4.5956) == pytest.approx(2.4066, abs=5e-5)
        assert 1.0 / 4.5956 == pytest.approx(0.2176, abs=5e-5)

    def test_mutually_inverse(self):
        for d in (1.0, 1.01, 2.0, 4.5956, 100.0):
            assert delta_of_beta(beta_of_delta(d)) == pytest.approx(d, abs=1e-12 * d)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            beta_of_delta(0.9)
        with pytest.raises(ValueError):
            delta_of_beta(0.99)


class TestDecayRates:
    def test_uniform_default(self):
        eps = DecayRates.uniform(3)
        assert eps.epsilon == (cert.DEFAULT_EPSILON,) * 3

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            DecayRates((0.1, 0.0))

    def test_minimum(self):
        assert DecayRates((0.3, 0.1, 0.2)).minimum == 0.1


class TestNominalAssembly:
    def test_block_matches_hand_computation(self):
        """The assembled 2n block equals [[M-G, L+G/2+S],[*, N]] built from
        the independently coded coefficient matrices, to 1e-12."""
        rng = np.random.default_rng(10)
        sys_obj = make_system([0.0, 0.7, 2.0],
                              [rng.standard_normal((2, 2)) for _ in range(3)])
        eps = DecayRates((0.3, 0.2, 0.1))
        prob = build_nominal(sys_obj, eps)
        by_name = {c.name: c for c in prob.constraints}
        for trial in range(20):
            vals = {f"P{k}": rand_sym(rng, 2) for k in range(3)}
            vals.update({f"Gamma{k}": rand_sym(rng, 2) for k in (1, 2)})
            vals.update({f"S{k}": rand_skew(rng, 2) for k in (1, 2)})
            for k in (1, 2):
                M, L, N = analysis.decay_coefficients(
                    vals[f"P{k-1}"], vals[f"P{k}"], sys_obj.A[k - 1], sys_obj.A[k],
                    eps[k], sys_obj.grid.gamma(k))
                G, S = vals[f"Gamma{k}"], vals[f"S{k}"]
                want = np.block([[M - G, L + 0.5 * G + S],
                                 [(L + 0.5 * G + S).T, N]])
                got = by_name[f"segment{k}_block"].expr.evaluate(vals)
                np.testing.assert_allclose(got, want, atol=1e-12 * max(1.0, np.abs(want).max()))

    def test_boundary_constraints(self):
        rng = np.random.default_rng(11)
        sys_obj = make_system([0.0, 1.0], [rng.standard_normal((2, 2)) for _ in range(2)])
        eps = DecayRates((0.5, 0.25))
        prob = build_nominal(sys_obj, eps)
        by_name = {c.name: c for c in prob.constraints}
        vals = {"P0": rand_sym(rng, 2), "P1": rand_sym(rng, 2),
                "Gamma1": rand_sym(rng, 2), "S1": rand_skew(rng, 2)}
        for name, idx in (("boundary_start", 0), ("boundary_end", 1)):
            P, A = vals[f"P{idx}"], sys_obj.A[idx]
            want = P @ A + A.T @ P + eps[idx] * P
            np.testing.assert_allclose(by_name[name].expr.evaluate(vals), want,
                                       atol=1e-13)

    def test_quadratic_form_identity(self):
        """z^T (block minus multiplier terms) z = x^T (a^2 M + 2 a L + N) x."""
        rng = np.random.default_rng(12)
        sys_obj = make_system([0.0, 0.7, 2.0],
                              [rng.standard_normal((2, 2)) for _ in range(3)])
        eps = DecayRates((0.3, 0.2, 0.1))
        prob = build_nominal(sys_obj, eps)
        by_name = {c.name: c for c in prob.constraints}
        zero = {f"Gamma{k}": np.zeros((2, 2)) for k in (1, 2)}
        zero.update({f"S{k}": np.zeros((2, 2)) for k in (1, 2)})
        worst = 0.0
        for trial in range(1000):
            vals = dict(zero, **{f"P{k}": rand_sym(rng, 2) for k in range(3)})
            a = rng.uniform(0, 1)
            x = rng.standard_normal(2)
            k = 1 + trial % 2
            M, L, N = analysis.decay_coefficients(
                vals[f"P{k-1}"], vals[f"P{k}"], sys_obj.A[k - 1], sys_obj.A[k],
                eps[k], sys_obj.grid.gamma(k))
            want = x @ (a * a * M + 2 * a * L + N) @ x
            z = np.concatenate([a * x, x])
            got = z @ by_name[f"segment{k}_block"].expr.evaluate(vals) @ z
            worst = max(worst, abs(got - want) / max(1.0, abs(want)))
        assert worst < 1e-10

    def test_nominal_multiplier_sign(self):
        """Gamma/S contributions on z-structured vectors are a(1-a) x'Gx >= 0
        for psd Gamma; the skew part vanishes."""
        rng = np.random.default_rng(13)
        sys_obj = make_system([0.0, 1.0], [rng.standard_normal((2, 2)) for _ in range(2)])
        prob = build_nominal(sys_obj, DecayRates((0.1, 0.1)))
        by_name = {c.name: c for c in prob.constraints}
        expr = by_name["segment1_block"].expr
        for _ in range(200):
            P = {f"P{k}": np.zeros((2, 2)) for k in range(2)}
            G, S = rand_psd(rng, 2), rand_skew(rng, 2)
            a = rng.uniform(0, 1)
            x = rng.standard_normal(2)
            z = np.concatenate([a * x, x])
            got = z @ expr.evaluate(dict(P, Gamma1=G, S1=S)) @ z
            want = a * (1 - a) * (x @ G @ x)
            assert got == pytest.approx(want, abs=1e-10 * max(1.0, abs(want)))
            assert got >= -1e-10


class TestRobustAssembly:
    def test_stacked_quadratic_form_identity(self):
        """w^T R_pure w = x^T (Q(a) + d * Nq(a)) x on w = [adx; ax; dx; x]."""
        rng = np.random.default_rng(14)
        usys = random_planar_uncertain(rng)
        eps = DecayRates((0.3, 0.2, 0.1))
        Delta = 2.5
        prob = build_robust(usys, eps, Delta)
        by_name = {c.name: c for c in prob.constraints}
        zero = {}
        for k in (1, 2):
            zero[f"Gamma{k}"] = np.zeros((2, 2))
            zero[f"Psi{k}"] = np.zeros((4, 4))
            zero[f"S1_{k}"] = np.zeros((2, 2))
            zero[f"S2_{k}"] = np.zeros((4, 4))
        worst = 0.0
        for trial in range(1000):
            vals = dict(zero, **{f"P{k}": rand_sym(rng, 2) for k in range(3)})
            a = rng.uniform(0, 1)
            d = np.exp(rng.uniform(np.log(1 / Delta), np.log(Delta)))
            x = rng.standard_normal(2)
            k = 1 + trial % 2
            M, L, N = analysis.decay_coefficients(
                vals[f"P{k-1}"], vals[f"P{k}"], usys.A[k - 1], usys.A[k],
                eps[k], usys.grid.gamma(k))
            N2, N1, N0 = analysis.uncertainty_coefficients(
                vals[f"P{k-1}"], vals[f"P{k}"], usys.B[k - 1], usys.B[k])
            Q = a * a * M + 2 * a * L + N + d * (a * a * N2 + 2 * a * N1 + N0)
            want = x @ Q @ x
            w = np.concatenate([a * d * x, a * x, d * x, x])
            got = w @ by_name[f"segment{k}_robust_block"].expr.evaluate(vals) @ w
            worst = max(worst, abs(got - want) / max(1.0, abs(want)))
        assert worst < 1e-10

    def test_multiplier_nullity_and_sign(self):
        """On structured w, the multiplier contribution is exactly
        (Delta - d)(d - 1/Delta) x'Gx + a(1-a) z2' Psi z2 >= 0 for psd G, Psi
        and d in [1/Delta, Delta]; all skew terms vanish."""
        rng = np.random.default_rng(15)
        usys = random_planar_uncertain(rng)
        Delta = 3.0
        prob = build_robust(usys, DecayRates((0.1, 0.1, 0.1)), Delta)
        by_name = {c.name: c for c in prob.constraints}
        expr = by_name["segment1_robust_block"].expr
        zeroP = {f"P{k}": np.zeros((2, 2)) for k in range(3)}
        for _ in range(1000):
            G, Psi = rand_psd(rng, 2), rand_psd(rng, 4)
            S1, S2 = rand_skew(rng, 2), rand_skew(rng, 4)
            vals = dict(zeroP, Gamma1=G, Psi1=Psi, S1_1=S1, S2_1=S2,
                        Gamma2=np.zeros((2, 2)), Psi2=np.zeros((4, 4)),
                        S1_2=np.zeros((2, 2)), S2_2=np.zeros((4, 4)))
            a = rng.uniform(0, 1)
            d = np.exp(rng.uniform(np.log(1 / Delta), np.log(Delta)))
            x = rng.standard_normal(2)
            w = np.concatenate([a * d * x, a * x, d * x, x])
            z2 = np.concatenate([d * x, x])
            got = w @ expr.evaluate(vals) @ w
            want = (Delta - d) * (d - 1.0 / Delta) * (x @ G @ x) \
                + a * (1 - a) * (z2 @ Psi @ z2)
            assert got == pytest.approx(want, abs=1e-10 * max(1.0, abs(want)))
            assert got >= -1e-8

    def test_strict_boundary_adds_vertex_constraints(self):
        rng = np.random.default_rng(16)
        usys = random_planar_uncertain(rng)
        eps = DecayRates((0.1, 0.1, 0.1))
        base = {c.name for c in build_robust(usys, eps, 2.0).constraints}
        strict = {c.name for c in build_robust(usys, eps, 2.0, True).constraints}
        added = strict - base
        assert added == {"boundary_start_vertex_lo", "boundary_start_vertex_hi",
                         "boundary_end_vertex_lo", "boundary_end_vertex_hi"}

    def test_rejects_bad_inputs(self, scalar_uncertain):
        usys, eps = scalar_uncertain
        with pytest.raises(ValueError):
            build_robust(usys, eps, 0.5)
        with pytest.raises(ValueError):
            build_robust(usys.base, eps, 2.0)
        with pytest.raises(ValueError):
            build_nominal(usys.base, DecayRates((0.1,)))


class TestSolve:
    def test_lti_stable(self):
        sys_obj = make_system([0.0], [-np.eye(2)])
        out = solve_nominal(sys_obj, DecayRates((1.0,)))
        assert out.status == "feasible"
        assert out.mu_star > 0
        assert np.linalg.eigvalsh(out.certificate.P[0]).min() > 0

    def test_scalar_unstable_infeasible(self):
        out = solve_nominal(make_system([0.0], [[[1.0]]]), DecayRates((0.1,)))
        assert out.status == "infeasible"
        assert out.certificate is None
        assert out.most_violated is not None

    def test_scalar_pw_stable(self, scalar_pw_stable):
        sys_obj, eps = scalar_pw_stable
        out = solve_nominal(sys_obj, eps)
        assert out.status == "feasible"
        g = analysis.verify_certificate_grid(out.certificate, sys_obj)
        assert g.confirmed

    def test_robust_scalar_within_boundary(self, scalar_uncertain):
        usys, eps = scalar_uncertain
        out = solve_robust(usys, eps, 1.5)
        assert out.status == "feasible"
        g = analysis.verify_certificate_grid(out.certificate, usys)
        assert g.confirmed

    def test_robust_scalar_beyond_boundary(self, scalar_uncertain):
        usys, eps = scalar_uncertain
        # delta = 3 makes -1 + 0.5*3 = +0.5 unstable
        out = solve_robust(usys, eps, 3.0)
        assert out.status == "infeasible"

    def test_certificate_beta_consistency(self, scalar_uncertain):
        usys, eps = scalar_uncertain
        c = solve_robust(usys, eps, 1.5).certificate
        assert c.beta == pytest.approx(beta_of_delta(c.Delta), abs=1e-12)


class TestCertificateIO:
    def test_nominal_round_trip(self, tmp_path, scalar_pw_stable):
        sys_obj, eps = scalar_pw_stable
        c = solve_nominal(sys_obj, eps).certificate
        p = tmp_path / "c.json"
        save_certificate(p, c)
        c2 = load_certificate(p)
        assert type(c2) is type(c)
        assert c2.mu_star == c.mu_star
        for a, b in zip(c2.P, c.P):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(c2.S, c.S):
            np.testing.assert_array_equal(a, b)

    def test_robust_round_trip(self, tmp_path, scalar_uncertain):
        usys, eps = scalar_uncertain
        c = solve_robust(usys, eps, 1.5).certificate
        p = tmp_path / "c.json"
        save_certificate(p, c)
        c2 = load_certificate(p)
        assert c2.Delta == c.Delta and c2.beta == c.beta
        for key in ("P", "Gamma", "Psi", "S1", "S2"):
            for a, b in zip(getattr(c2, key), getattr(c, key)):
                np.testing.assert_array_equal(a, b)
