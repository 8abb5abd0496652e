import itertools
import math

import numpy as np
import pytest

from sparse_aa import (
    BranchAndBound,
    Cut,
    CutSet,
    InvalidInputError,
    SaaConfig,
    continuation,
    eval_F,
    hull_distance,
    milp_min_cuts,
    nnz,
    norm_bound_b,
    objective,
    outer_approximation,
    solve,
    subgradient_F,
    synth_instance,
)
from sparse_aa.cli import zero_init
from oracles import milp_enum_oracle


def test_norm_bound_b_cases():
    assert norm_bound_b(np.eye(2), 2) == pytest.approx(2.0 * (1.0 + math.sqrt(2.0)) ** 2)
    X = np.array([[3.0, 4.0], [0.0, 0.0]])
    assert norm_bound_b(X, 3) == pytest.approx(3.0 * 25.0)
    rng = np.random.default_rng(0)
    Y = rng.uniform(size=(4, 3))
    assert norm_bound_b(2.5 * Y, 2) == pytest.approx(2.5**2 * norm_bound_b(Y, 2))


def test_eval_F_all_ones_is_zero():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(6, 4))
    b = norm_bound_b(X, 2)
    Z = np.ones((2, 4))
    val, H, Wt = eval_F(Z, X, b, ell=8)
    assert val <= 1e-10
    np.testing.assert_allclose(H, Wt @ X, atol=1e-5)


def test_eval_F_all_zeros_is_k_times_origin_distance():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(5, 3)) + 0.5
    b = norm_bound_b(X, 3)
    val, H, Wt = eval_F(np.zeros((3, 3)), X, b, ell=9, tol=1e-12)
    origin = hull_distance(np.zeros(3), X, tol=1e-12).sq_distance
    assert val == pytest.approx(3.0 * origin, rel=1e-5)
    assert np.all(H == 0.0)


@pytest.mark.parametrize("seed", range(8))
def test_eval_F_matches_convex_qp_solver(seed):
    cvxpy = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(seed)
    m, k, n = 4, 2, 3
    X = rng.uniform(size=(m, n))
    b = norm_bound_b(X, k)
    Z = (rng.random((k, n)) < 0.5).astype(float)
    val, H, Wt = eval_F(Z, X, b, ell=int(Z.sum()), tol=1e-13, max_iter=50_000)

    Hv = cvxpy.Variable((k, n))
    Wv = cvxpy.Variable((k, m))
    prob = cvxpy.Problem(
        cvxpy.Minimize(cvxpy.sum_squares(Hv - Wv @ X)),
        [
            Hv >= 0,
            Hv <= math.sqrt(b) * Z,
            Wv >= 0,
            cvxpy.sum(Wv, axis=1) == 1,
        ],
    )
    prob.solve(solver="CLARABEL")
    assert val == pytest.approx(prob.value, rel=1e-6, abs=1e-8)


def test_eval_F_rejects_bad_patterns():
    X = np.eye(3)
    b = norm_bound_b(X, 2)
    with pytest.raises(InvalidInputError):
        eval_F(np.full((2, 3), 2.0), X, b)  # entries above 1
    with pytest.raises(InvalidInputError):
        eval_F(np.ones((2, 3)), X, b, ell=3)  # budget exceeded


def test_eval_F_restart_invariance():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(5, 4))
    b = norm_bound_b(X, 2)
    Z = (rng.random((2, 4)) < 0.6).astype(float)
    ref, _, _ = eval_F(Z, X, b, tol=1e-12)
    for trial in range(5):
        rng2 = np.random.default_rng(trial)
        wt0 = rng2.uniform(size=(2, 5))
        wt0 /= wt0.sum(axis=1, keepdims=True)
        h0 = rng2.uniform(size=(2, 4)) * math.sqrt(b) * Z
        val, _, _ = eval_F(Z, X, b, tol=1e-12, h0=h0, wt0=wt0)
        assert val == pytest.approx(ref, rel=1e-6, abs=1e-10)


def test_subgradient_zero_at_exact_fit():
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(5, 3))
    b = norm_bound_b(X, 2)
    val, H, Wt = eval_F(np.ones((2, 3)), X, b)
    G = subgradient_F(H, Wt, X, b)
    assert np.all(G <= 0.0)
    assert np.max(np.abs(G)) <= 1e-4


def test_subgradient_formula_at_zero_pattern():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(4, 3)) + 0.2
    b = norm_bound_b(X, 2)
    _, H, Wt = eval_F(np.zeros((2, 3)), X, b, tol=1e-13)
    G = subgradient_F(H, Wt, X, b)
    resid = Wt @ X - H
    expect = -math.sqrt(b) * np.where(resid > 0, 2 * resid, 0.0)
    np.testing.assert_allclose(G, expect, atol=1e-12)
    assert np.all(G <= 0.0)


@pytest.mark.parametrize("seed", range(20))
def test_cut_inequality_binary_pairs(seed):
    rng = np.random.default_rng(seed)
    m, k, n = 4, 2, 3
    X = rng.uniform(size=(m, n))
    b = norm_bound_b(X, k)
    ell = 4
    Z1 = np.zeros(k * n)
    Z1[rng.choice(k * n, size=rng.integers(0, ell + 1), replace=False)] = 1.0
    Z1 = Z1.reshape(k, n)
    Z2 = np.zeros(k * n)
    Z2[rng.choice(k * n, size=rng.integers(0, ell + 1), replace=False)] = 1.0
    Z2 = Z2.reshape(k, n)
    f1, H1, Wt1 = eval_F(Z1, X, b, ell, tol=1e-12)
    f2, _, _ = eval_F(Z2, X, b, ell, tol=1e-12)
    G1 = subgradient_F(H1, Wt1, X, b)
    assert f2 >= f1 + float(np.sum(G1 * (Z2 - Z1))) - 1e-6


def test_cut_inequality_relaxed_perturbation():
    rng = np.random.default_rng(77)
    X = rng.uniform(size=(4, 3))
    b = norm_bound_b(X, 2)
    ell = 4
    Z = np.zeros((2, 3))
    Z[0, 0] = 1.0
    f0, H, Wt = eval_F(Z, X, b, ell, tol=1e-13)
    G = subgradient_F(H, Wt, X, b)
    for delta in (0.25, 0.5, 1.0):
        Zp = Z.copy()
        Zp[1, 2] = delta  # relaxed coordinate in [0, 1]
        fp, _, _ = eval_F(Zp, X, b, ell, tol=1e-13)
        assert fp >= f0 + float(np.sum(G * (Zp - Z))) - 1e-6


def test_milp_single_cut_greedy():
    rng = np.random.default_rng(6)
    G = -rng.uniform(0.5, 2.0, size=(2, 4))
    Z0 = np.zeros((2, 4))
    cut = Cut(pattern=Z0, value=5.0, grad=G)
    Z, eta = milp_min_cuts([cut], 2, 4, 3)
    # optimum takes the three most negative gradient entries
    order = np.argsort(G.ravel())[:3]
    expect = np.zeros(8)
    expect[order] = 1.0
    np.testing.assert_array_equal(Z.ravel(), expect)
    assert eta == pytest.approx(5.0 + G.ravel()[order].sum())


def test_milp_constant_cuts_tie_break_to_zero():
    cuts = [
        Cut(pattern=np.zeros((2, 2)), value=3.0, grad=np.zeros((2, 2))),
        Cut(pattern=np.ones((2, 2)), value=1.0, grad=np.zeros((2, 2))),
    ]
    Z, eta = milp_min_cuts(cuts, 2, 2, 2)
    np.testing.assert_array_equal(Z, np.zeros((2, 2)))
    assert eta == pytest.approx(3.0)


@pytest.mark.parametrize("seed", range(30))
def test_milp_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 3))
    n = int(rng.integers(2, 9 - 4 * (k - 1)))
    ell = int(rng.integers(1, k * n + 1))
    n_cuts = int(rng.integers(1, 6))
    cuts = []
    for _ in range(n_cuts):
        Zi = (rng.random((k, n)) < 0.4).astype(float)
        G = -(rng.random((k, n)) * 3.0) * (rng.random((k, n)) < 0.7)
        cuts.append(Cut(pattern=Zi, value=float(rng.random() * 4.0), grad=G))
    Z, eta = milp_min_cuts(cuts, k, n, ell)
    want, _ = milp_enum_oracle(
        [c.offset for c in cuts], [c.grad for c in cuts], k * n, ell
    )
    achieved = max(c.offset + float(np.sum(c.grad * Z)) for c in cuts)
    assert eta == pytest.approx(want, abs=1e-9)
    assert achieved == pytest.approx(want, abs=1e-9)


def test_milp_node_cap_gives_valid_bound():
    rng = np.random.default_rng(123)
    k, n, ell = 2, 8, 8
    cuts = []
    for _ in range(6):
        G = -rng.uniform(0.1, 3.0, size=(k, n))
        cuts.append(Cut(pattern=np.zeros((k, n)), value=float(rng.uniform(1, 5)), grad=G))
    Z_opt, eta_opt = milp_min_cuts(cuts, k, n, ell)
    backend = BranchAndBound(node_cap=5)
    Z_cap, eta_cap = milp_min_cuts(cuts, k, n, ell, backend=backend)
    assert eta_cap <= eta_opt + 1e-12
    achieved = max(c.offset + float(np.sum(c.grad * Z_cap)) for c in cuts)
    assert achieved >= eta_opt - 1e-9  # incumbent is feasible, so above optimum


def test_milp_requires_cuts():
    with pytest.raises(InvalidInputError):
        milp_min_cuts([], 2, 2, 2)


def test_outer_approximation_zero_value_terminates_immediately():
    # nonnegative data whose thresholded uniform image already fits exactly:
    # any pattern covering the support of Wt0 X gives F = 0
    X = np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    cfg = SaaConfig(k=2, ell=2, lam=1.0)
    res = outer_approximation(X, cfg)
    assert res.converged
    assert res.rounds == 1
    assert res.value <= 1e-9
    assert res.cutset.gap == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_outer_approximation_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(5, 3)) + 0.1
    cfg = SaaConfig(k=2, ell=3, lam=1.0)
    res = outer_approximation(X, cfg, max_rounds=100)
    assert res.converged
    b = norm_bound_b(X, 2)
    best = math.inf
    for count in range(0, 4):
        for comb in itertools.combinations(range(6), count):
            z = np.zeros(6)
            z[list(comb)] = 1.0
            v, _, _ = eval_F(z.reshape(2, 3), X, b, 3)
            best = min(best, v)
    assert res.value == pytest.approx(best, rel=1e-5, abs=1e-8)
    # the incumbent bounds bracket the exhaustive optimum
    assert res.cutset.best_lower <= best + 1e-8
    assert res.cutset.best_upper >= best - 1e-8


def test_outer_approximation_bounds_monotone():
    X, *_ = synth_instance(10, 5, 2, 0.1, seed=13)
    cfg = SaaConfig(k=2, ell=5, lam=1.0)
    lowers = []
    uppers = []

    class RecordingBackend(BranchAndBound):
        def minimize_cuts(self, offsets, grads, shape, ell):
            sol = super().minimize_cuts(offsets, grads, shape, ell)
            lowers.append(sol.eta)
            return sol

    res = outer_approximation(X, cfg, max_rounds=12, backend=RecordingBackend())
    cs = res.cutset
    assert cs.best_lower <= cs.best_upper + 1e-12
    assert cs.best_lower >= 0.0
    # recorded gap history non-increasing in the lower bound dimension
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(lowers, lowers[1:])) or len(lowers) < 2


def test_cut_validity_across_oa_run():
    X, *_ = synth_instance(8, 4, 2, 0.2, seed=21)
    cfg = SaaConfig(k=2, ell=4, lam=1.0)
    res = outer_approximation(X, cfg, max_rounds=10)
    cuts = res.cutset.cuts
    b = norm_bound_b(X, 2)
    for ci in cuts:
        for cj in cuts:
            # F(Z_j) >= F(Z_i) + <G_i, Z_j - Z_i>
            lhs = cj.value
            rhs = ci.value + float(np.sum(ci.grad * (cj.pattern - ci.pattern)))
            assert lhs >= rhs - 1e-6


def test_cutset_json_roundtrip():
    cs = CutSet(k=2, n=2, ell=2)
    cs.add(Cut(pattern=np.eye(2), value=1.5, grad=-np.ones((2, 2))))
    cs.best_lower = 0.5
    again = CutSet.from_json(cs.to_json())
    assert again.best_upper == cs.best_upper
    assert again.best_lower == cs.best_lower
    np.testing.assert_array_equal(again.cuts[0].pattern, cs.cuts[0].pattern)
    np.testing.assert_array_equal(again.cuts[0].grad, cs.cuts[0].grad)


def test_continuation_schedule_length_one_equals_mip_plus_solve():
    X, *_ = synth_instance(10, 6, 2, 0.1, seed=31)
    cfg1 = SaaConfig(k=2, ell=6, lam=1.0, max_iter=2_000, tol_stationary=1e-5)
    oa = outer_approximation(X, cfg1, max_rounds=5)
    fac_a, _ = continuation(X, cfg1, oa=oa)

    from sparse_aa import Factorization, step_W

    W = np.full((10, 2), 0.5)
    seeded = Factorization(H=oa.H.copy(), W=W, Wt=oa.Wt.copy())
    seeded.W = step_W(X, seeded, eps=cfg1.eps_safeguard)
    fac_b, _ = solve(X, seeded, cfg1, lam=1.0)
    np.testing.assert_array_equal(fac_a.H, fac_b.H)
    np.testing.assert_array_equal(fac_a.W, fac_b.W)


def test_continuation_default_schedule_beats_zero_init_majority():
    wins = 0
    trials = 6
    for seed in range(trials):
        X, *_ = synth_instance(15, 8, 3, 0.1, seed=seed)
        sched = tuple(np.geomspace(30.0, 1.0, 8))
        cfg = SaaConfig(
            k=3, ell=12, lam=sched, max_iter=1_500, tol_stationary=1e-4
        )
        fac_saa, _ = continuation(X, cfg, oa_kwargs={"max_rounds": 4})
        psi_saa = objective(X, fac_saa, 1.0).total

        cfg_zero = SaaConfig(
            k=3, ell=12, lam=1.0, max_iter=1_500, tol_stationary=1e-4
        )
        fac_zero, _ = solve(X, zero_init(X, cfg_zero), cfg_zero)
        psi_zero = objective(X, fac_zero, 1.0).total
        if psi_saa <= psi_zero + 1e-9:
            wins += 1
    assert wins >= (trials + 1) // 2


def test_continuation_output_feasible():
    X, *_ = synth_instance(12, 6, 2, 0.15, seed=40)
    sched = tuple(np.geomspace(30.0, 1.0, 4))
    cfg = SaaConfig(k=2, ell=6, lam=sched, max_iter=1_000, tol_stationary=1e-4)
    fac, traces = continuation(X, cfg, oa_kwargs={"max_rounds": 3})
    fac.validate(cfg.ell)
    assert len(traces) == 4
    assert nnz(fac.H, 0.0) <= cfg.ell
