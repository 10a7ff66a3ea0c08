"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import math
import time
from fractions import Fraction

import numpy as np

from poprec.analysis import (
    a_norm,
    damped_mother_series,
    fit_envelope,
    gnorm_bound,
    hellinger_bin_shift_bound,
    hellinger_bin_shift_exact,
    hellinger_sq,
    lecam_dimension,
    lecam_pair,
    lossy_t_bounds,
    noisy_mu,
    tv_distance,
)
from poprec.estimators import (
    smoothed_bias_closed_form,
    smoothed_bias_direct,
    smoothed_coefficients_lambda,
    unbiased_coefficients,
)
from poprec.minimax import FunctionalVector, delta_of_t, delta_tilde_of_t, synthesize_estimator, t_of_delta
from poprec.model import ChannelModel, HypercubeDistribution, build_phi, build_phi_lossy, build_phi_noisy
from poprec.recovery import CachedEstimatorFactory, RecoveryConfig, certified_sample_size, recover_population, sup_error
from poprec.simharness import ExperimentConfig, apply_channel, fit_rate_slope, least_favorable_input, run_experiment, sample_hypercube

DUALITY_GRID = [
    (kind, d, eps, n)
    for kind in ("lossy", "noisy")
    for d in (5, 10, 20)
    for eps in (0.1, 0.25, 0.5, 0.6, 0.75)
    for n in (1e2, 1e4, 1e6)
]


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_strong_duality(capsys):
    start, worst = time.perf_counter(), 0.0
    for kind, d, eps, n in DUALITY_GRID:
        phi = build_phi(ChannelModel(kind, eps), d)
        h = FunctionalVector.e0(d)
        primal = synthesize_estimator(phi, h, n).value
        dual = delta_of_t(phi, h, 1 / math.sqrt(n)).value
        worst = max(worst, abs(primal - dual) / max(1.0, primal))
    elapsed = time.perf_counter() - start
    report(capsys, 1, worst <= 1e-7 and elapsed < 60,
           f"synthesis vs modulus over {len(DUALITY_GRID)} instances: worst {worst:.2e}, {elapsed:.1f}s")


def test_modulus_properties(capsys):
    worst = -math.inf
    for kind, d, eps, n in DUALITY_GRID:
        phi = build_phi(ChannelModel(kind, eps), d)
        h = FunctionalVector.e0(d)
        t = 1 / math.sqrt(n)
        full = delta_of_t(phi, h, t).value
        tilde = delta_tilde_of_t(phi, h, t).value
        gaps = [tilde - full, full - 2 * tilde, h.spread * t - tilde]
        for lam in (0.5, 0.1):
            gaps.append(lam * full - delta_of_t(phi, h, lam * t).value)
            gaps.append(lam * tilde - delta_tilde_of_t(phi, h, lam * t).value)
        worst = max(worst, *gaps)
    report(capsys, 2, worst <= 1e-9, f"scaling, sandwich and floor: largest violation {worst:.2e}")


def test_lossy_sandwich(capsys):
    start, lines = time.perf_counter(), []
    ok = True
    for eps in (0.6, 0.7, 0.75):
        for delta in (0.1, 0.05, 0.01):
            d = lecam_dimension(delta, eps)
            t = t_of_delta(build_phi_lossy(d, eps), delta).value
            b = lossy_t_bounds(delta, eps)
            inside = b.lower <= t <= b.capped_upper
            ok &= inside
            if not inside:
                lines.append(f"eps={eps} delta={delta} d={d}: {t:.3e} outside [{b.lower:.3e}, {b.capped_upper:.3e}]")
    elapsed = time.perf_counter() - start
    report(capsys, 3, ok and elapsed < 300, "; ".join(lines) or f"9 points inside bounds, {elapsed:.1f}s")


def test_low_erasure_exactness(capsys):
    worst = 0.0
    for eps in (0.0, 0.05, 0.1, 0.2, 0.25, 0.3, 0.4, 0.45, 0.5):
        for d in range(1, 31):
            for delta in (0.5, 0.1, 0.01):
                worst = max(worst, abs(t_of_delta(build_phi_lossy(d, eps), delta).value - delta))
    report(capsys, 4, worst <= 1e-9, f"|t(delta) - delta| for eps <= 1/2, d <= 30: worst {worst:.2e}")


def test_noisy_envelope(capsys):
    delta = 0.1
    dims = (5, 10, 20, 40)
    values, lower, upper = [], [], []
    growing = below = True
    for eps in (0.1, 0.25, 0.4):
        mu = noisy_mu(eps)
        ts = [t_of_delta(build_phi_noisy(d, eps), delta).value for d in dims]
        below &= all(t <= delta + 1e-12 for t in ts)
        logs = [-math.log(t) for t in ts]
        growing &= all(b > a for a, b in zip(logs, logs[1:]))
        values += logs
        lower += [(d * mu) ** (1 / 3) for d in dims]
        upper += [max((1 - 2 * eps) ** 2 * d, (d * mu * math.log(1 / delta) ** 2) ** (1 / 3)) for d in dims]
    a, b = fit_envelope(values, lower, upper)
    ok = growing and below and 0 < a and 0 < b < math.inf
    report(capsys, 5, ok, f"-log t grows in d: {growing}, t <= delta: {below}, fitted a={a:.3g} b={b:.3g}")


def test_exact_unbiasedness(capsys):
    bad = []
    for eps in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
        for d in range(26):
            g = unbiased_coefficients(d, eps, exact=True)
            phi = build_phi_lossy(d, eps, exact=True).entries
            moments = [sum(phi[i, j] * g.g[i] for i in range(d + 1)) for j in range(d + 1)]
            if moments != [1] + [0] * d:
                bad.append((d, eps))
    report(capsys, 6, not bad, f"exact inverse moments for d <= 25: {len(bad)} failures")


def test_smoothed_certificates(capsys):
    worst_bias = worst_norm = worst_route = -math.inf
    for eps in (0.6, 0.75, 0.9):
        for lam in (0.5, 2.0, 8.0):
            for d in range(1, 61):
                g = smoothed_coefficients_lambda(d, eps, lam)
                direct = smoothed_bias_direct(d, eps, lam)
                closed = smoothed_bias_closed_form(d, eps, lam)
                worst_bias = max(worst_bias, np.max(np.abs(direct)) - math.exp(-lam / 2))
                worst_norm = max(worst_norm, g.sup_norm() / math.exp(lam * (2 * eps - 1) / (1 - eps)) - 1)
                worst_route = max(worst_route, float(np.max(np.abs(direct - closed))))
    ok = worst_bias <= 0 and worst_norm <= 1e-12 and worst_route <= 1e-10
    report(capsys, 7, ok,
           f"bias margin {worst_bias:.2e}, norm ratio - 1 {worst_norm:.2e}, route gap {worst_route:.2e}")


def test_lecam_pair(capsys):
    delta, eps = 0.05, 0.7
    d = lecam_dimension(delta, eps)
    pair = lecam_pair(delta, eps, d)
    ok = d == 42 and pair.separation >= delta and pair.hellinger_sq <= pair.hellinger_bound
    report(capsys, 8, ok,
           f"d={d}, separation {pair.separation:.5f}, H^2 {pair.hellinger_sq:.3e} <= {pair.hellinger_bound:.3e}")


def test_recovery_end_to_end(capsys):
    start = time.perf_counter()
    channel, d, delta = ChannelModel("lossy", 0.4), 12, 0.02
    n = certified_sample_size(channel, d, delta / 2)
    rng = np.random.default_rng(7)
    support = set()
    while len(support) < 5:
        support.add("".join(rng.choice(["0", "1"], d)))
    P = HypercubeDistribution.uniform(sorted(support))
    factory = CachedEstimatorFactory(channel, n / 9)
    hits = 0
    for s in range(20):
        batch = apply_channel(sample_hypercube(P, n, 2 * s), channel, 2 * s + 1)
        result = recover_population(batch, channel, RecoveryConfig(delta), factory)
        hits += sup_error(P, result.estimate) <= 4 * delta
    elapsed = time.perf_counter() - start
    report(capsys, 9, hits >= 18 and elapsed < 600, f"n={n}: {hits}/20 trials within 4 delta, {elapsed:.1f}s")


def test_elbow_slopes(capsys):
    start, slopes = time.perf_counter(), {}
    for eps in (0.25, 0.75):
        channel = ChannelModel("lossy", eps)
        points = []
        for k, n in enumerate((10**3, 10**4, 10**5, 10**6)):
            pi = least_favorable_input(channel, 40, n)
            res = run_experiment(ExperimentConfig(channel, 40, pi, (n,), 2000, "lp", seed=100 + k))
            points.append((n, res.summary[0].mse))
        slopes[eps] = fit_rate_slope(points)
    elapsed = time.perf_counter() - start
    ok = abs(slopes[0.25] + 1) <= 0.15 and abs(slopes[0.75] + 1 / 3) <= 0.15 and elapsed < 1800
    report(capsys, 10, ok, f"slope {slopes[0.25]:.3f} at eps=.25, {slopes[0.75]:.3f} at eps=.75, {elapsed:.1f}s")


def test_distance_suite(capsys):
    rng = np.random.default_rng(2024)
    worst = -math.inf
    for _ in range(1000):
        k = int(rng.integers(2, 40))
        p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        tv, h2 = tv_distance(p, q), hellinger_sq(p, q)
        worst = max(worst, 0.5 * h2 - tv, tv - math.sqrt(h2 * (1 - h2 / 4)))
    shift_bad = [
        (dp, d, p)
        for p in (0.1, 0.5, 0.9)
        for d in range(1, 11)
        for dp in range(d, 201)
        if hellinger_bin_shift_exact(dp, d, p) > hellinger_bin_shift_bound(dp, d, p)
    ]
    ok = worst <= 1e-12 and not shift_bad
    report(capsys, 11, ok, f"bracket violation {worst:.2e} on 1000 pairs, {len(shift_bad)} binomial-shift failures")


def test_damped_norm(capsys):
    norms = {delta: a_norm(damped_mother_series(delta, 400)) for delta in (0.1, 0.01)}
    ok = all(v <= gnorm_bound(delta) for delta, v in norms.items())
    detail = ", ".join(f"delta={delta}: {v:.4f} <= {gnorm_bound(delta):.4f}" for delta, v in norms.items())
    report(capsys, 12, ok, f"A-norm of degree-400 truncation, {detail}")
