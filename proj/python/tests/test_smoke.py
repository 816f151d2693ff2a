import numpy as np
import pytest

import compositeflow as cf


def small_problem(weight=0.3, mu=0.1, seed=3):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((12, 4))
    targets = rng.standard_normal(12)
    return cf.CompositeProblem(
        cf.SmoothSum(data, targets),
        cf.Regularizer.l1(weight, 4),
        cf.make_identity_operator(4),
        mu,
    ), data, targets


def test_linear_map_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 5))
    op = cf.LinearMap(a)
    x = rng.standard_normal(5)
    np.testing.assert_allclose(op.apply(x), a @ x, rtol=1e-14)
    np.testing.assert_allclose(op.gram_norm(), np.linalg.norm(a.T @ a, 2), rtol=1e-8)
    assert op.surjective()
    r = rng.standard_normal(3)
    np.testing.assert_allclose(op.apply(op.pinv_apply(r)), r, atol=1e-10)


def test_prox_is_soft_thresholding():
    reg = cf.Regularizer.l1(1.0, 5)
    y = np.array([2.0, -0.4, 0.0, 1.2, -3.0])
    expected = np.sign(y) * np.maximum(np.abs(y) - 0.5, 0.0)
    np.testing.assert_allclose(reg.prox(0.5, y), expected, atol=1e-15)


def test_envelope_gradient_finite_difference():
    env = cf.EnvelopeView(cf.Regularizer.mcp(1.0, 2.0, 3), 0.5)
    rng = np.random.default_rng(1)
    y = rng.standard_normal(3)
    step = 1e-6
    for i in range(3):
        hi, lo = y.copy(), y.copy()
        hi[i] += step
        lo[i] -= step
        fd = (env.value(hi) - env.value(lo)) / (2 * step)
        assert abs(env.grad(y)[i] - fd) < 1e-6


def test_solver_descends_and_is_deterministic():
    problem, _, _ = small_problem()
    params = cf.SolverParams()
    params.rho = 5.0
    params.iterations = 500
    params.seed = 11
    params = cf.validate_solver(params, problem, "lp_sadmm")

    out1 = cf.run("lp_sadmm", problem, params, cf.NoiseSpec.exact())
    out2 = cf.run("lp_sadmm", problem, params, cf.NoiseSpec.exact())
    assert out1["status"] == "ok"
    np.testing.assert_array_equal(out1["final_x"], out2["final_x"])
    assert out1["H_mu"][-1] < out1["H_mu"][0]
    assert out1["resid_grad"][-1] < 1e-6


def test_solver_matches_numpy_proximal_gradient():
    problem, data, targets = small_problem(weight=0.2, mu=0.05)
    params = cf.SolverParams()
    params.rho = 10.0
    params.iterations = 30000
    params = cf.validate_solver(params, problem, "lp_admm")
    out = cf.run("lp_admm", problem, params, cf.NoiseSpec.exact())

    # Independent numpy reference: proximal gradient on the convex instance.
    n = data.shape[1]
    step = 1.0 / np.linalg.norm(data.T @ data / data.shape[0], 2)
    x = np.zeros(n)
    for _ in range(200000):
        g = data.T @ (data @ x - targets) / data.shape[0]
        nxt = x - step * g
        nxt = np.sign(nxt) * np.maximum(np.abs(nxt) - step * 0.2, 0.0)
        if np.linalg.norm(nxt - x) < 1e-12:
            x = nxt
            break
        x = nxt
    assert np.linalg.norm(out["final_x"] - x) < 1e-4


def test_flow_and_criticality_pipeline():
    problem, _, _ = small_problem(weight=0.4, mu=0.02)
    cfg = cf.FlowConfig()
    cfg.lambda_ = 2.0
    cfg.dt = 0.01
    cfg.horizon = 40.0
    path = cf.simulate("flow", problem, cfg)
    assert path.status == "ok"
    assert path.resid[-1] < 1e-6
    audit = cf.descent_audit(path, "H_mu")
    assert audit["max_violation"] < 1e-6 * (1 + abs(path.H_mu[0]))

    report = cf.criticality_report(problem, np.asarray(path.states[-1]))
    assert report["pass"]


def test_config_errors_raise():
    problem, _, _ = small_problem()
    params = cf.SolverParams()
    params.rho = 10.0
    params.tau = 11.0  # boundary: strict inequality required
    with pytest.raises(cf.CompositeflowError):
        cf.validate_solver(params, problem, "lp_admm")
