"""Acceptance suite: eleven end-to-end criteria, one test each.

Every test prints one scoreboard line, ``criterion N (label): PASS|FAIL
detail``, before asserting, so ``pytest -s tests/test_acceptance.py``
shows the full tally.  Criteria 1 and 7 share a module-scoped benchmark
sweep (all eight registry methods over three problem families).
"""

import time

import numpy as np
import pytest

from _oracles import krylov_values
from polopt.barriers import (analytic_grad_hess, analytic_value,
                             newton_center, volumetric_grad,
                             volumetric_hess, volumetric_value)
from polopt.bench import REGISTRY, make_pair, performance_profile
from polopt.engine import OraclePolitician, run
from polopt.methods import BFGSMethod, CGMethod, GeometricPolitician, SDMethod
from polopt.problems import (HingeProblem, ParseError, chain_objective,
                             dataset_to_matrix, hinge_objective,
                             make_hinge_synthetic, parse_libsvm,
                             quadratic_objective, serialize_libsvm)
from polopt.region import BallRegion

CONTRACT_SLACK = 1e-12

QUADRATICS = [(10, 0, None), (20, 3, None), (30, 1, None), (50, 2, 100),
              (40, 5, 1000), (15, 7, None), (25, 11, 50), (60, 4, None),
              (80, 6, 10), (12, 9, None)]
CHAINS = [30, 50, 100, 200, 300, 500, 750, 1000]
HINGES = [(60, 20, 0, 0.5, 0.1), (100, 30, 1, 0.1, 0.01),
          (80, 25, 2, 1.0, 0.0), (120, 40, 3, 0.05, 0.1),
          (50, 15, 4, 0.5, 1.0), (90, 35, 5, 0.01, 0.01),
          (70, 20, 6, 0.2, 0.05), (110, 30, 7, 0.8, 0.001)]


def _report(num, label, ok, detail):
    line = "criterion %d (%s): %s  %s" % (num, label,
                                          "PASS" if ok else "FAIL", detail)
    print(line)
    assert ok, line


def suite_objectives():
    for n, seed, kappa in QUADRATICS:
        yield quadratic_objective(n, seed, kappa)
    for n in CHAINS:
        yield chain_objective(n)
    for rows, dim, seed, t, lam in HINGES:
        A, b = dataset_to_matrix(make_hinge_synthetic(rows, dim, seed))
        yield hinge_objective(HingeProblem(A=A, b=b, t=t, lam=lam))


@pytest.fixture(scope="module")
def suite():
    """All registry methods on the full problem grid, budget 25."""
    t0 = time.perf_counter()
    runs = []
    for obj in suite_objectives():
        for name in REGISTRY:
            method, politician = make_pair(name)
            trace = run(method, politician, obj, np.zeros(obj.dim),
                        budget=25, tol=1e-9)
            runs.append((obj, name, politician, trace))
    return {"runs": runs, "seconds": time.perf_counter() - t0}


def test_criterion_1_politician_contract(suite):
    """Every answer is at least as good as its query, across the suite."""
    worst = -np.inf
    steps = 0
    for obj, _, _, trace in suite["runs"]:
        for s in trace.steps:
            fq = obj.value(s.query)
            worst = max(worst, s.value - fq - CONTRACT_SLACK * (1 + abs(fq)))
            steps += 1
    n = len(suite["runs"])
    ok = worst <= 0.0 and n >= 200 and suite["seconds"] < 120.0
    _report(1, "politician contract", ok,
            "%d runs, %d steps, worst excess %.3e, %.1fs"
            % (n, steps, worst, suite["seconds"]))


def test_criterion_2_region_soundness():
    """With the true convexity modulus, the minimizer stays in every
    lower-bound ball at every iteration (h-form slack <= 1e-9)."""
    t0 = time.perf_counter()
    worst = -np.inf
    for seed in range(10):
        obj = quadratic_objective(50, seed, kappa=100)
        alpha = obj.alpha_true
        pol = GeometricPolitician(alpha0=alpha)
        trace = run(SDMethod(), pol, obj, np.zeros(50), budget=40)
        xs = obj.x_star
        recs = trace.history.records
        V = np.array([r.value for r in recs])
        L = np.array([r.value + r.gradient @ (xs - r.point)
                      + 0.5 * alpha * float((xs - r.point) @ (xs - r.point))
                      for r in recs])
        h = np.maximum.accumulate(L) - np.minimum.accumulate(V)
        worst = max(worst, float(h.max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30.0
    _report(2, "region soundness", ok,
            "10 runs, worst slack %.3e, %.1fs" % (worst, elapsed))


def test_criterion_3_rate_bounds():
    """SD with the geometric politician obeys both the linear-rate and
    the 2*beta*r^2/(j+4) bounds on conditioned quadratics."""
    t0 = time.perf_counter()
    worst_lin = worst_sub = -np.inf
    for kappa in (10, 100):
        for seed in range(5):
            obj = quadratic_objective(100, seed, kappa=kappa)
            f0 = obj.value(np.zeros(100))
            # radius of the starting sublevel set around the minimizer
            r2 = f0 / float(obj.problem.D.min())
            trace = run(SDMethod(), GeometricPolitician(), obj,
                        np.zeros(100), budget=200)
            for s in trace.steps:
                j = s.k - 1          # answer 1 is x0 itself
                lin = (1.0 - 1.0 / kappa) ** j * f0
                sub = 2.0 * obj.beta * r2 / (j + 4.0)
                worst_lin = max(worst_lin, s.value / lin)
                worst_sub = max(worst_sub, s.value / sub)
    elapsed = time.perf_counter() - t0
    ok = (worst_lin <= 1.0 + 1e-8 and worst_sub <= 1.0 + 1e-8
          and elapsed < 60.0)
    _report(3, "rate bounds", ok,
            "worst linear ratio %.12f, worst sublinear ratio %.6f, %.1fs"
            % (worst_lin, worst_sub, elapsed))


def test_criterion_4_krylov_optimality():
    """CG, BFGS, and BFGS+ reach the exact Krylov-subspace optimum on a
    quadratic at every step (independent Lanczos oracle)."""
    t0 = time.perf_counter()
    obj = quadratic_objective(200, 0)
    ref = krylov_values(obj.problem.D, obj.problem.c, np.zeros(200), 26)
    worst = -np.inf
    for method, politician in ((CGMethod(), OraclePolitician()),
                               (BFGSMethod(), OraclePolitician()),
                               (BFGSMethod(), GeometricPolitician())):
        trace = run(method, politician, obj, np.zeros(200), budget=26)
        for s in trace.steps:
            q = ref[s.k - 1]
            worst = max(worst, abs(s.value - q) / (1.0 + abs(q)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30.0
    _report(4, "krylov optimality", ok,
            "worst relative gap %.3e, %.1fs" % (worst, elapsed))


def random_region(rng):
    """Ball intersection (dim <= 5, <= 8 balls) with an interior point."""
    m = int(rng.integers(1, 6))
    k = int(rng.integers(1, 9))
    z0 = rng.standard_normal(m)
    offsets = rng.standard_normal((k, m))
    offsets *= (rng.uniform(0.1, 0.8, size=k)
                / np.maximum(np.linalg.norm(offsets, axis=1), 1e-12))[:, None]
    pad = rng.uniform(0.3, 1.0, size=k)
    radii_sq = (np.linalg.norm(offsets, axis=1) + pad) ** 2
    return BallRegion(z0 + offsets, radii_sq, 1.0, 0.0), z0


def fd_grad(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def fd_jacobian(fn, x, h=1e-6):
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * h))
    return np.column_stack(cols)


def test_criterion_5_barrier_derivatives():
    """Closed-form barrier gradients and Hessians agree with central
    finite differences over 100 random regions."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240500)
    errs = {"ag": 0.0, "ah": 0.0, "vg": 0.0, "vh": 0.0}
    for _ in range(100):
        reg, x = random_region(rng)
        ga, Ha = analytic_grad_hess(reg, x)
        g_fd = fd_grad(lambda z: analytic_value(reg, z), x)
        H_fd = fd_jacobian(lambda z: analytic_grad_hess(reg, z)[0], x)
        errs["ag"] = max(errs["ag"], np.linalg.norm(ga - g_fd)
                         / (1.0 + np.linalg.norm(g_fd)))
        errs["ah"] = max(errs["ah"], np.linalg.norm(Ha - H_fd)
                         / (1.0 + np.linalg.norm(H_fd)))
        gv = volumetric_grad(reg, x)
        gv_fd = fd_grad(lambda z: volumetric_value(reg, z), x)
        Hv = volumetric_hess(reg, x)
        Hv_fd = fd_jacobian(lambda z: volumetric_grad(reg, z), x)
        errs["vg"] = max(errs["vg"], np.linalg.norm(gv - gv_fd)
                         / (1.0 + np.linalg.norm(gv_fd)))
        errs["vh"] = max(errs["vh"], np.linalg.norm(Hv - Hv_fd)
                         / (1.0 + np.linalg.norm(Hv_fd)))
    elapsed = time.perf_counter() - t0
    ok = (errs["ag"] <= 1e-4 and errs["ah"] <= 1e-4
          and errs["vg"] <= 1e-4 and errs["vh"] <= 1e-3 and elapsed < 60.0)
    _report(5, "barrier derivatives", ok,
            "rel errs grad F %.1e, hess F %.1e, grad v %.1e, "
            "hess v %.1e, %.1fs"
            % (errs["ag"], errs["ah"], errs["vg"], errs["vh"], elapsed))


def test_criterion_6_rounding():
    """The unit ellipsoid of the doubled log barrier at the analytic
    center fits inside the region: sampled boundary points have
    nonnegative slack up to 1e-9."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240600)
    worst = np.inf
    centered = 0
    for _ in range(50):
        reg, z0 = random_region(rng)
        res = newton_center(reg, kind="analytic", start=z0)
        centered += bool(res.converged)
        y = res.point
        _, H = analytic_grad_hess(reg, y)
        w, V = np.linalg.eigh(2.0 * H)
        S = V @ np.diag(w ** -0.5) @ V.T
        U = rng.standard_normal((1000, reg.dim))
        U /= np.linalg.norm(U, axis=1)[:, None]
        P = y[None, :] + U @ S.T
        d2 = ((P[:, None, :] - reg.centers[None, :, :]) ** 2).sum(-1)
        margins = (reg.radii_sq[None, :] - d2) / reg.radii_sq[None, :]
        worst = min(worst, float(margins.min()))
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-9 and centered == 50 and elapsed < 30.0
    _report(6, "ellipsoid rounding", ok,
            "50 regions x 1000 boundary points, worst margin %.3e, %.1fs"
            % (worst, elapsed))


def test_criterion_7_warm_centering(suite):
    """Re-centering after one added ball always converges within 30
    damped-Newton iterations; the median count is reported."""
    warm = []
    bad = 0
    for _, _, politician, _ in suite["runs"]:
        stats = getattr(politician, "stats", None)
        if stats is None:
            continue
        for incremental, iters, converged in stats.newton:
            if not incremental:
                continue
            warm.append(iters)
            if not converged or iters > 30:
                bad += 1
    ok = len(warm) > 0 and bad == 0
    _report(7, "warm-started centering", ok,
            "%d warm updates, %d failures, median %.0f, max %d"
            % (len(warm), bad, float(np.median(warm)) if warm else -1,
               max(warm) if warm else -1))


def test_criterion_8_nonsmooth_advantage():
    """On the long flat-kink chain, the politician variants reach 1e-3
    within 100 answers while plain steepest descent stalls."""
    t0 = time.perf_counter()
    obj = chain_objective(1000)
    finals = {}
    for name in ("sd", "empty+", "gk+", "bfgs+"):
        method, politician = make_pair(name)
        trace = run(method, politician, obj, np.zeros(1000), budget=100)
        finals[name] = float(trace.values.min())
    elapsed = time.perf_counter() - t0
    ok = (all(finals[n] <= 1e-3 for n in ("empty+", "gk+", "bfgs+"))
          and finals["sd"] > 1e-3 and elapsed < 60.0)
    _report(8, "non-smooth advantage", ok,
            "finals: " + ", ".join("%s %.3e" % kv
                                   for kv in sorted(finals.items()))
            + ", %.1fs" % elapsed)


def test_criterion_9_gk_dynamics():
    """The adaptive accelerated method keeps gamma non-increasing and
    beta in (0, 1]; its alpha reset fires only in oracle mode."""
    t0 = time.perf_counter()
    mono = beta_ok = True
    stars_oracle = stars_politician = 0
    for seed in (0, 1, 2):
        obj = quadratic_objective(20, seed)
        method, politician = make_pair("gk")
        run(method, politician, obj, np.zeros(20), budget=30)
        s = method.state
        gam = np.array(s.gammas)
        mono &= bool(np.all(np.diff(gam) <= 1e-12 * (1.0 + gam[:-1])))
        beta_ok &= all(0.0 < b <= 1.0 for b in s.betas)
        stars_oracle += s.star_events
        method, politician = make_pair("gk+")
        run(method, politician, obj, np.zeros(20), budget=30)
        stars_politician += method.state.star_events
    elapsed = time.perf_counter() - t0
    ok = (mono and beta_ok and stars_oracle >= 1
          and stars_politician == 0 and elapsed < 10.0)
    _report(9, "gk learning dynamics", ok,
            "gamma monotone %s, beta in (0,1] %s, resets oracle=%d "
            "politician=%d, %.1fs"
            % (mono, beta_ok, stars_oracle, stars_politician, elapsed))


def test_criterion_10_parser_and_profiles():
    """Parse/serialize round trip on a 1000-row corpus, malformed-line
    positions, and the toy performance-profile table."""
    t0 = time.perf_counter()
    ds = make_hinge_synthetic(1000, 50, 0)
    text = serialize_libsvm(ds)
    d1 = parse_libsvm(text)
    text2 = serialize_libsvm(d1)
    d2 = parse_libsvm(text2)
    round_trip = (d1.rows == ds.rows and d1.dim == ds.dim
                  and d2 == d1 and text2 == text)

    positions = []
    for src, line, col in (("1 3:1 2:1\n", 1, 7),
                           ("# c\n\n+1 1:1\n-1 2:oops\n", 4, 6),
                           ("+1 1:1\nbad 1:1\n", 2, 1)):
        try:
            parse_libsvm(src)
            positions.append(False)
        except ParseError as e:
            positions.append((e.line, e.column) == (line, col))
    malformed = all(positions)

    grid = np.array([1.0, 1.5, 2.0, 3.0])
    curve = performance_profile({"A": [10, 20], "B": [20, 10]}, grid)
    toy = (list(curve.fractions["A"]) == [0.5, 0.5, 1.0, 1.0]
           and list(curve.fractions["B"]) == [0.5, 0.5, 1.0, 1.0])
    elapsed = time.perf_counter() - t0
    ok = round_trip and malformed and toy and elapsed < 10.0
    _report(10, "parser and profiles", ok,
            "round trip %s, malformed positions %s, toy table %s, %.1fs"
            % (round_trip, malformed, toy, elapsed))


def test_criterion_11_determinism(tmp_path):
    """Re-running a suite reproduces every output byte except the
    timing column of the trace CSVs."""
    from polopt.bench import BenchConfig, run_suite

    specs = [{"family": "quadratic", "n": 10, "seed": 0},
             {"family": "chain", "n": 30},
             {"family": "hinge", "n": 8, "seed": 1, "t": 0.5,
              "lambda": 0.01}]
    methods = ["sd+", "bfgs", "empty+", "gk"]
    m1 = run_suite(BenchConfig(problems=specs, methods=methods, budget=20,
                               out=str(tmp_path / "a")))
    m2 = run_suite(BenchConfig(problems=specs, methods=methods, budget=20,
                               out=str(tmp_path / "b")))

    def stripped(p):
        return [ln.rsplit(",", 1)[0] for ln in p.read_text().splitlines()]

    same_csv = all(stripped(tmp_path / "a" / e["csv"])
                   == stripped(tmp_path / "b" / e["csv"])
                   for e in m1["runs"])
    same_meta = ((tmp_path / "a" / "manifest.json").read_bytes()
                 == (tmp_path / "b" / "manifest.json").read_bytes()
                 and (tmp_path / "a" / "profiles.csv").read_bytes()
                 == (tmp_path / "b" / "profiles.csv").read_bytes())
    ok = m1 == m2 and same_csv and same_meta
    _report(11, "determinism", ok,
            "%d runs, traces identical %s, manifest+profiles identical %s"
            % (len(m1["runs"]), same_csv, same_meta))
