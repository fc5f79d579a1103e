import numpy as np
import pytest

from sceneryscope import (Alphabet, AmbiguousPairing, BruteForceQ, CoinScenery,
                          DegenerateEndpoint, ExactPipelineQ, ExactSource,
                          NoSeparatingFunction, ObservedSource, OddWidth, ProfilePair,
                          ReconstructConfig, Scenery, SiteLaw, Tolerances, bounds,
                          brute_force_Q, canonical_bracket, center, center_value,
                          choose_r, endpoints, fair_coin_law,
                          identity_function, indicator_functions, interior_pair,
                          merge_profiles, observe, reconstruct_scenery,
                          recover_profile, recover_profile_general, resolve_pairing,
                          select_auxiliary)
from sceneryscope.scenery import brackets_close

from conftest import random_coin_scenery, random_general_scenery

TOL = Tolerances()


def coins(theta):
    return CoinScenery(theta).to_scenery()


def centered_identity():
    return center(identity_function(), fair_coin_law())


def coin_bracket(theta_seq):
    return canonical_bracket(tuple(float(x) for x in theta_seq))


class StubQ:
    """Q access with hand-cooked values, for error-path tests."""

    def __init__(self, table):
        self.table = table

    def value(self, phi0, d):
        return self.table[tuple(d)]


class TestEndpoints:
    def test_worked_example(self):
        s = coins({0: 0.6, 3: 0.3})
        got = endpoints(BruteForceQ(s), centered_identity(), 3, TOL)
        assert sorted(got) == pytest.approx([0.3, 0.6])

    def test_equal_endpoints_double_root(self):
        s = coins({0: 0.5, 2: 0.5})
        got = endpoints(BruteForceQ(s), centered_identity(), 2, TOL)
        assert got == pytest.approx((0.5, 0.5))

    def test_degenerate(self):
        stub = StubQ({(3,): 0.0, (3, 3): 0.0})
        with pytest.raises(DegenerateEndpoint):
            endpoints(stub, centered_identity(), 3, TOL)


class TestInteriorPair:
    def test_worked_example(self):
        s = coins({0: 0.6, 1: 0.2, 2: 0.5, 3: 0.3})
        q = BruteForceQ(s)
        assert q.value(centered_identity(), (3, 1)) == pytest.approx(0.126)
        assert q.value(centered_identity(), (3, 1, 1, 3, 1)) == pytest.approx(0.00648)
        got = interior_pair(q, centered_identity(), 3, 1, TOL)
        assert sorted(got) == pytest.approx([0.2, 0.5])

    def test_zero_interior(self):
        s = coins({0: 0.5, 3: 0.4})
        got = interior_pair(BruteForceQ(s), centered_identity(), 3, 1, TOL)
        assert got == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_equal_values_double_root(self):
        s = coins({0: 0.5, 1: 0.3, 4: 0.3, 5: 0.4})
        got = interior_pair(BruteForceQ(s), centered_identity(), 5, 1, TOL)
        assert got == pytest.approx((0.3, 0.3))

    def test_k_range_enforced(self):
        s = coins({0: 0.5, 3: 0.4})
        with pytest.raises(ValueError):
            interior_pair(BruteForceQ(s), centered_identity(), 3, 2, TOL)


class TestCenterValue:
    def test_worked_example(self):
        s = coins({0: 0.6, 1: 0.5, 2: 0.3})
        q = BruteForceQ(s)
        assert q.value(centered_identity(), (2, 1)) == pytest.approx(0.18)
        assert center_value(q, centered_identity(), 2, TOL) == pytest.approx(0.5)

    def test_zero_center(self):
        s = coins({0: 0.6, 2: 0.3})
        assert center_value(BruteForceQ(s), centered_identity(), 2, TOL) == \
            pytest.approx(0.0, abs=1e-12)

    def test_odd_width_rejected(self):
        s = coins({0: 0.6, 3: 0.3})
        with pytest.raises(OddWidth):
            center_value(BruteForceQ(s), centered_identity(), 3, TOL)

    def test_oracle_sweep_even_widths(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            scen = random_coin_scenery(rng, max_ell=6).to_scenery()
            a, b, ell = bounds(scen)
            if ell < 2 or ell % 2:
                continue
            true_mid = 2 * scen.law_at(a + ell // 2).probs[1] - 1
            got = center_value(BruteForceQ(scen), centered_identity(), ell, TOL)
            assert got == pytest.approx(true_mid, abs=1e-10)


class TestResolvePairing:
    def test_worked_example(self):
        # interior pair {0.2, 0.5} must attach 0.2 to the 0.6 side
        s = coins({0: 0.6, 1: 0.2, 2: 0.5, 3: 0.3})
        q = BruteForceQ(s)
        # the order-3 cross moment gives the straight cross-product
        q3 = q.value(centered_identity(), (3, 3, 1))
        assert q3 == pytest.approx(0.0486)
        assert 2 * q3 / 0.36 == pytest.approx(0.27)      # 0.6*0.2 + 0.3*0.5
        profile = ProfilePair((0.6,), (0.3,))
        got = resolve_pairing(q, centered_identity(), 3, profile, (0.5, 0.2), 1, TOL)
        assert got.left == pytest.approx((0.6, 0.2))
        assert got.right == pytest.approx((0.3, 0.5))

    def test_palindromic_new_pair(self):
        s = coins({0: 0.6, 1: 0.4, 2: 0.4, 3: 0.3})
        profile = ProfilePair((0.6,), (0.3,))
        got = resolve_pairing(BruteForceQ(s), centered_identity(), 3, profile,
                              (0.4, 0.4), 1, TOL)
        assert got.left[1] == got.right[1] == pytest.approx(0.4)

    def test_no_anchor_canonical_attachment(self):
        s = coins({0: 0.5, 1: 0.2, 2: 0.7, 3: 0.5})
        profile = ProfilePair((0.5,), (0.5,))
        got = resolve_pairing(BruteForceQ(s), centered_identity(), 3, profile,
                              (0.7, 0.2), 1, TOL)
        assert got.left[1] <= got.right[1]

    def test_ambiguous_raises(self):
        # anchor gap and pair gap both barely above the tie tolerance, so
        # the two cross-sums collide and the cooked moment sits on both
        q1 = 0.5
        f_bad = 0.5 * (0.511 * 0.3 + 0.5 * 0.311 + 0.511 * 0.311 + 0.5 * 0.3)
        stub = StubQ({(3,): q1, (3, 0, 0, 3, 1, 1, 3): f_bad * q1 ** 3 / 8.0})
        profile = ProfilePair((0.511,), (0.5,))
        with pytest.raises(AmbiguousPairing):
            resolve_pairing(stub, centered_identity(), 3, profile, (0.3, 0.311), 1,
                            Tolerances(tie=0.01))

    def test_order7_zero_leg_closed_form(self):
        # oracle gate: the crossed pairing value from the order-7 moment
        # with a zero-distance leg equals the direct cross product
        rng = np.random.default_rng(23)
        phi0 = centered_identity()
        for _ in range(20):
            scen = random_coin_scenery(rng, max_ell=6).to_scenery()
            a, b, ell = bounds(scen)
            if ell < 3:
                continue
            th = {z: 2 * scen.law_at(z).probs[1] - 1 for z in range(a, b + 1)}
            q = BruteForceQ(scen)
            q1 = q.value(phi0, (ell,))
            for k in range(1, (ell + 1) // 2):
                q7 = q.value(phi0, (ell, 0, 0, ell, k, k, ell))
                want = th[a] * th[b - k] + th[b] * th[a + k]
                assert 8 * q7 / q1 ** 3 == pytest.approx(want, abs=1e-9)


class TestRecoverProfile:
    def test_four_site_coin(self):
        s = coins({0: 0.6, 1: 0.2, 2: 0.5, 3: 0.3})
        got = recover_profile(BruteForceQ(s), centered_identity(), 3, TOL)
        assert brackets_close(got, coin_bracket((0.6, 0.2, 0.5, 0.3)), 1e-10)

    def test_single_site(self):
        s = coins({0: 0.7})
        q = BruteForceQ(s)
        assert q.value(centered_identity(), (0,)) == pytest.approx(0.49)
        got = recover_profile(q, centered_identity(), 0, TOL)
        assert got.canonical == pytest.approx((0.7,))

    def test_palindrome_equals_own_reversal(self):
        s = coins({0: 0.3, 1: 0.5, 2: 0.3})
        got = recover_profile(BruteForceQ(s), centered_identity(), 2, TOL)
        assert got.canonical == tuple(reversed(got.canonical))

    def test_even_width_with_center(self):
        # the repeated interior value is a double root of the pair
        # quadratic, so half the precision goes to the square root
        s = coins({0: 0.6, 1: 0.1, 2: 0.9, 3: 0.1, 4: 0.3})
        got = recover_profile(BruteForceQ(s), centered_identity(), 4, TOL)
        assert brackets_close(got, coin_bracket((0.6, 0.1, 0.9, 0.1, 0.3)), 1e-7)

    def test_matches_pipeline_access(self, lazy):
        # the exact-arithmetic pipeline access must agree with enumeration
        s = coins({0: 0.6, 1: 0.2, 2: 0.5, 3: 0.3})
        M = choose_r(lazy, 3)
        q = ExactPipelineQ(lazy, s, M)
        phi0 = centered_identity()
        for d in [(3,), (3, 3), (3, 1), (3, 1, 1, 3, 1), (3, 0, 0, 3, 1, 1, 3)]:
            assert q.value(phi0, d) == pytest.approx(
                brute_force_Q(s, phi0, d), abs=1e-14)
        got = recover_profile(q, phi0, 3, TOL)
        assert brackets_close(got, coin_bracket((0.6, 0.2, 0.5, 0.3)), 1e-10)

    def test_noise_monotonicity(self):
        # max error over trials grows with the Q perturbation level; a
        # recovery that aborts under noise counts as maximal error
        base = coins({0: 0.9, 1: 0.1, 2: 0.7, 3: 0.2})
        truth = coin_bracket((0.9, 0.1, 0.7, 0.2))
        clean = BruteForceQ(base)

        class NoisyQ:
            def __init__(self, eps, seed):
                self.eps = eps
                self.rng = np.random.default_rng(seed)

            def value(self, phi0, d):
                return clean.value(phi0, d) + self.eps * self.rng.uniform(-1, 1)

        worst = {}
        completed = {}
        for eps in (1e-6, 1e-4, 1e-2):
            tol = Tolerances.for_noise_floor(eps)
            errs = []
            done = 0
            for trial in range(100):
                try:
                    got = recover_profile(NoisyQ(eps, trial), centered_identity(),
                                          3, tol)
                except Exception:
                    errs.append(1.0)
                    continue
                done += 1
                a = np.asarray(got.canonical)
                b = np.asarray(truth.canonical)
                errs.append(min(np.max(np.abs(a - b)), np.max(np.abs(a[::-1] - b))))
            worst[eps] = max(errs)
            completed[eps] = done
        assert worst[1e-6] <= worst[1e-4] <= worst[1e-2]
        assert worst[1e-6] < 1e-3
        assert completed[1e-6] == completed[1e-4] == 100
        assert completed[1e-2] > 50


class TestAuxiliary:
    def setup_method(self):
        self.alph = Alphabet(("a", "b", "c"), (0.0, 1.0, 2.0))
        self.alpha = SiteLaw(self.alph, (1 / 3, 1 / 3, 1 / 3))

    def family(self):
        return [center(f, self.alpha) for f in indicator_functions(self.alph)]

    def test_finds_separating_function(self):
        # first indicator vanishes at site 0 (prob of 'a' equals the reference)
        dev = {0: SiteLaw(self.alph, (1 / 3, 0.5, 1 / 6)),
               2: SiteLaw(self.alph, (0.6, 0.1, 0.3))}
        s = Scenery(self.alpha, dev)
        fam = self.family()
        phi0 = fam[0]
        with pytest.raises(DegenerateEndpoint):
            endpoints(BruteForceQ(s), phi0, 2, TOL)
        psi0, c = select_auxiliary(BruteForceQ(s), phi0, fam, 2, TOL)
        assert abs(c) <= 0.5
        x, y = endpoints(BruteForceQ(s), psi0, 2, TOL)
        assert abs(x - y) > 1e-6 and min(abs(x), abs(y)) > 1e-6

    def test_coin_case_never_needs_auxiliary(self):
        s = coins({0: 0.6, 2: 0.3})
        x, y = endpoints(BruteForceQ(s), centered_identity(), 2, TOL)
        assert min(abs(x), abs(y)) > 1e-6

    def test_equal_endpoint_laws_exhaust_family(self):
        mu = SiteLaw(self.alph, (1 / 3 + 0.2, 1 / 3 - 0.2, 1 / 3))
        s = Scenery(self.alpha, {0: mu, 1: SiteLaw(self.alph, (0.1, 0.2, 0.7)), 2: mu})
        fam = self.family()
        phi0 = fam[2]      # indicator of 'c', vanishes at both endpoints
        with pytest.raises(NoSeparatingFunction):
            select_auxiliary(BruteForceQ(s), phi0, fam, 2, TOL)

    def test_general_recovery_through_aux_branch(self):
        dev = {0: SiteLaw(self.alph, (1 / 3, 0.5, 1 / 6)),
               2: SiteLaw(self.alph, (0.6, 0.1, 0.3))}
        s = Scenery(self.alpha, dev)
        fam = self.family()
        phi0 = fam[0]
        got = recover_profile_general(BruteForceQ(s), phi0, fam, 2, TOL)
        truth = canonical_bracket(tuple(
            sum(v * p for v, p in zip(phi0.values, s.law_at(z).probs))
            for z in range(0, 3)))
        assert brackets_close(got, truth, 1e-8)

    def test_nondegenerate_agrees_with_plain_recursion(self):
        s = coins({0: 0.6, 1: 0.2, 2: 0.5, 3: 0.3})
        fam = [centered_identity()]
        a = recover_profile(BruteForceQ(s), centered_identity(), 3, TOL)
        b = recover_profile_general(BruteForceQ(s), centered_identity(), fam, 3, TOL)
        assert a.canonical == pytest.approx(b.canonical)

    def test_function_blind_to_all_sites(self):
        dev = {0: SiteLaw(self.alph, (1 / 3, 0.5, 1 / 6)),
               2: SiteLaw(self.alph, (1 / 3, 0.1, 1 / 3 + 0.5 - 0.1 - 1 / 6))}
        s = Scenery(self.alpha, dev)
        fam = self.family()
        phi0 = fam[0]      # indicator of 'a' sees neither deviation
        got = recover_profile_general(BruteForceQ(s), phi0, fam, 2, TOL)
        assert got.canonical == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)

    def test_window_shrink_recovers_interior(self):
        mu = SiteLaw(self.alph, (1 / 3 + 0.2, 1 / 3 - 0.2, 1 / 3))
        inner = SiteLaw(self.alph, (0.1, 0.2, 0.7))
        s = Scenery(self.alpha, {0: mu, 1: inner, 2: mu})
        fam = self.family()
        phi0 = fam[2]
        got = recover_profile_general(BruteForceQ(s), phi0, fam, 2, TOL)
        want = (0.0, 0.7 - 1 / 3, 0.0)
        assert got.canonical == pytest.approx(want, abs=1e-10)


class TestMergeProfiles:
    def test_three_symbol_scenery(self, lazy, three_symbol_alphabet, uniform_alpha):
        dev = {0: SiteLaw(three_symbol_alphabet, (0.5, 0.3, 0.2)),
               1: SiteLaw(three_symbol_alphabet, (0.2, 0.5, 0.3)),
               3: SiteLaw(three_symbol_alphabet, (0.1, 0.3, 0.6))}
        s = Scenery(uniform_alpha, dev)
        got = merge_profiles(BruteForceQ(s), three_symbol_alphabet, uniform_alpha, 3)
        truth = canonical_bracket(tuple(s.law_at(z) for z in range(0, 4)))
        got_arr = np.array([lw.probs for lw in got.canonical])
        want_arr = np.array([lw.probs for lw in truth.canonical])
        err = min(np.max(np.abs(got_arr - want_arr)),
                  np.max(np.abs(got_arr[::-1] - want_arr)))
        assert err < 1e-9

    def test_palindromic_profile_in_the_mix(self, lazy, three_symbol_alphabet,
                                            uniform_alpha):
        # second symbol has a palindromic profile; alignment must still work
        dev = {0: SiteLaw(three_symbol_alphabet, (0.5, 0.2, 0.3)),
               2: SiteLaw(three_symbol_alphabet, (0.1, 0.2, 0.7))}
        s = Scenery(uniform_alpha, dev)
        got = merge_profiles(BruteForceQ(s), three_symbol_alphabet, uniform_alpha, 2)
        truth = canonical_bracket(tuple(s.law_at(z) for z in range(0, 3)))
        got_arr = np.array([lw.probs for lw in got.canonical])
        want_arr = np.array([lw.probs for lw in truth.canonical])
        err = min(np.max(np.abs(got_arr - want_arr)),
                  np.max(np.abs(got_arr[::-1] - want_arr)))
        assert err < 1e-9

    def test_all_palindromic(self, three_symbol_alphabet, uniform_alpha):
        law = SiteLaw(three_symbol_alphabet, (0.5, 0.3, 0.2))
        s = Scenery(uniform_alpha, {0: law, 2: law})
        got = merge_profiles(BruteForceQ(s), three_symbol_alphabet, uniform_alpha, 2)
        assert [lw.probs for lw in got.canonical] == \
               [lw.probs for lw in reversed(got.canonical)]


class TestReconstructScenery:
    def test_exact_coin_chain(self, lazy):
        s = coins({0: 0.6, 1: 0.2, 2: 0.5, 3: 0.3})
        res = reconstruct_scenery(ExactSource(lazy, s))
        assert res.ell == 3
        got = [2 * lw.probs[1] - 1 for lw in res.bracket.canonical]
        assert brackets_close(canonical_bracket(tuple(got)),
                              coin_bracket((0.6, 0.2, 0.5, 0.3)), 1e-8)
        assert res.diagnostics["residual"] < 1e-10

    def test_empty_scenery_verdict(self, lazy):
        res = reconstruct_scenery(ExactSource(lazy, Scenery(fair_coin_law(), {})))
        assert res.ell is None
        assert res.diagnostics["verdict"] == "all-alpha"
        assert not res.scenery.deviations

    @pytest.mark.parametrize("theta", [0.1, 0.5, 0.9])
    def test_single_coin(self, lazy, theta):
        res = reconstruct_scenery(ExactSource(lazy, coins({3: theta})))
        assert res.ell == 0
        got = 2 * res.bracket.canonical[0].probs[1] - 1
        assert got == pytest.approx(theta, abs=1e-10)

    def test_output_sits_on_sites_one_up(self, lazy):
        res = reconstruct_scenery(ExactSource(lazy, coins({-5: 0.6, -3: 0.3})))
        assert res.ell == 2
        assert set(res.scenery.deviations) <= {1, 2, 3}
        doc = res.to_json()
        assert doc["ell"] == 2 and len(doc["sites"]) == 3 and doc["bracket"] is True

    def test_shift_reflection_equivariance(self, lazy):
        base = coins({0: 0.6, 1: 0.2, 2: 0.5, 3: 0.3})
        results = []
        for s in (base, coins({4: 0.6, 5: 0.2, 6: 0.5, 7: 0.3}),
                  coins({0: 0.3, 1: 0.5, 2: 0.2, 3: 0.6})):
            res = reconstruct_scenery(ExactSource(lazy, s))
            results.append(tuple(lw.probs for lw in res.bracket.canonical))
        assert results[0] == results[1] == results[2]

    def test_estimated_mode_runs_and_is_deterministic(self, lazy):
        s = coins({0: 0.6, 2: 0.3})
        obs = observe(lazy, s, 50_000, 7)
        src = ObservedSource(lazy, obs, s.alphabet, s.alpha)
        res1 = reconstruct_scenery(src, ReconstructConfig(tau=None))
        res2 = reconstruct_scenery(src, ReconstructConfig(tau=None))
        assert res1.ell == res2.ell
        assert res1.diagnostics["mode"] == "estimated"

    def test_random_coin_round_trips(self, lazy):
        rng = np.random.default_rng(31)
        for _ in range(10):
            scen = random_coin_scenery(rng, max_ell=6).to_scenery()
            a, b, ell = bounds(scen)
            truth = coin_bracket([2 * scen.law_at(z).probs[1] - 1
                                  for z in range(a, b + 1)])
            res = reconstruct_scenery(ExactSource(lazy, scen))
            assert res.ell == ell
            got = coin_bracket([2 * lw.probs[1] - 1 for lw in res.bracket.canonical])
            assert brackets_close(got, truth, 1e-7)

    def test_constant_profile_coin(self, lazy):
        # all-equal biases: every pair is a double root, whose sqrt-level
        # splitting must not be mistaken for a distinct pair
        s = coins({-1: 0.2, 0: 0.2, 1: 0.2, 2: 0.2})
        res = reconstruct_scenery(ExactSource(lazy, s))
        assert res.ell == 3
        got = [2 * lw.probs[1] - 1 for lw in res.bracket.canonical]
        assert got == pytest.approx([0.2] * 4, abs=1e-7)

    def test_disjoint_symbol_support_endpoints(self, lazy):
        # four symbols, endpoint deviations on disjoint symbol pairs: no
        # single indicator sees both ends, so detection and recovery must
        # go through combination functions
        alph = Alphabet(("a", "b", "c", "d"), (0.0, 1.0, 2.0, 3.0))
        alpha = SiteLaw(alph, (0.25, 0.25, 0.25, 0.25))
        la = SiteLaw(alph, (0.35, 0.15, 0.25, 0.25))
        lb = SiteLaw(alph, (0.25, 0.25, 0.4, 0.1))
        scen = Scenery(alpha, {0: la, 3: lb})
        res = reconstruct_scenery(ExactSource(lazy, scen))
        assert res.ell == 3
        got = np.array([lw.probs for lw in res.bracket.canonical])
        want = np.array([scen.law_at(z).probs for z in range(0, 4)])
        err = min(np.max(np.abs(got - want)), np.max(np.abs(got[::-1] - want)))
        assert err < 1e-6

    def test_random_general_round_trips(self, lazy, three_symbol_alphabet,
                                        uniform_alpha):
        rng = np.random.default_rng(37)
        for _ in range(5):
            scen = random_general_scenery(rng, three_symbol_alphabet, uniform_alpha)
            a, b, ell = bounds(scen)
            res = reconstruct_scenery(ExactSource(lazy, scen))
            assert res.ell == ell
            got_arr = np.array([lw.probs for lw in res.bracket.canonical])
            want_arr = np.array([scen.law_at(z).probs for z in range(a, b + 1)])
            err = min(np.max(np.abs(got_arr - want_arr)),
                      np.max(np.abs(got_arr[::-1] - want_arr)))
            assert err < 1e-6
