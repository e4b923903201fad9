"""End-to-end acceptance gate.

Each test covers one numbered criterion, runs it at its stated tolerance,
and prints one pass/fail line (visible with ``pytest -s`` or on failure).
Every configuration and threshold is frozen here; nothing is calibrated at
run time.
"""

import itertools
import json
import time

import numpy as np
import pytest

from letcc import cli
from letcc.coding import Dataset, decode, encode, encoder_training_error
from letcc.experiments import (
    CrossvalConfig,
    DEFAULT_LAMBDA_GRID,
    StragglerSweepConfig,
    SweepConfig,
    crossval_lambda,
    straggler_sweep,
    sweep_n,
)
from letcc.kernel import kernel_fit
from letcc.points import chebyshev_grid, chebyshev_second
from letcc.spline import fit
from letcc.baselines import lcc_decode, lcc_encode
from letcc.sim import make_worker

from conftest import ACCEPTANCE_LINES, quadrature_roughness


def report(number, name, passed, detail):
    status = "PASS" if passed else "FAIL"
    line = f"ACCEPTANCE {number} [{name}]: {status} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


SWEEP_N_VALUES = (32, 48, 64, 96, 128, 192, 256, 384, 512)

# Rate-optimal smoothing scale for the noisy sweep: the bias/variance
# balance gives lambda ~ (sigma0^2 / ||target''||^2)^(4/5) * (N-S)^(-4/5).
# For the sin target on identity data, ||target''||_{L2}^2 = pi^4, so with
# sigma0 = 0.1 the constant is (1e-2 / pi^4)^(4/5) ~ 6e-4.
NOISY_LAMBDA_SCALE = 6e-4


def test_criterion_1_spline_invariant_suite(rng):
    start = time.monotonic()
    failures = []

    # affine reproduction at <= 1e-10 for every lambda
    for n in (3, 8, 24, 64):
        t = chebyshev_second(n)
        y = np.column_stack([2.0 * t + 1.0, -0.7 * t + 0.3])
        for lam in (0.0, 1e-6, 1e-2, 1e3):
            err = np.abs(fit(t, y, lam).evaluate(t) - y).max()
            if err > 1e-10 * np.abs(y).max():
                failures.append(f"affine n={n} lam={lam}: {err:.2e}")

    # zero-lambda interpolation at <= 1e-8 relative
    for n in (8, 32, 64):
        t = chebyshev_second(n)
        y = rng.normal(size=(n, 3))
        err = np.abs(fit(t, y, 0.0).evaluate(t) - y).max()
        if err > 1e-8 * np.abs(y).max():
            failures.append(f"interpolation n={n}: {err:.2e}")

    # linearity in the data at <= 1e-8
    t = chebyshev_second(16)
    y1, y2 = rng.normal(size=(16, 2)), rng.normal(size=(16, 2))
    q = np.linspace(-1, 1, 101)
    for lam in (0.0, 1e-4, 1e-1):
        lhs = fit(t, 1.3 * y1 - 0.8 * y2, lam).evaluate(q)
        rhs = 1.3 * fit(t, y1, lam).evaluate(q) - 0.8 * fit(t, y2, lam).evaluate(q)
        err = np.abs(lhs - rhs).max()
        if err > 1e-8:
            failures.append(f"linearity lam={lam}: {err:.2e}")

    # cardinal-basis route vs kernel route at <= 1e-6 sup-norm, n <= 32
    for n in (8, 16, 32):
        t = chebyshev_second(n)
        y = rng.normal(size=(n, 2))
        for lam in (0.0, 1e-4, 1e-1):
            a = fit(t, y, lam).evaluate(q)
            b = kernel_fit(t, y, lam).evaluate(q)
            err = np.abs(a - b).max()
            if err > 1e-6:
                failures.append(f"kernel-agreement n={n} lam={lam}: {err:.2e}")

    # roughness against the quadrature oracle at <= 1e-6 relative
    for n, target in ((8, lambda t: t**2), (16, lambda t: np.sin(np.pi * t))):
        t = chebyshev_second(n)
        f = fit(t, target(t), 0.0)
        oracle = quadrature_roughness(f.evaluate, t)
        err = abs(f.roughness() - oracle) / oracle
        if err > 1e-6:
            failures.append(f"roughness n={n}: {err:.2e}")

    elapsed = time.monotonic() - start
    ok = not failures and elapsed < 10.0
    assert report(1, "spline invariant suite", ok,
                  f"{len(failures)} violations, {elapsed:.1f}s"), failures


def test_criterion_2_per_trial_inequalities():
    start = time.monotonic()
    rng = np.random.default_rng(2026)
    workers = {"sin_pi": make_worker("sin_pi"), "cubic": make_worker("cubic")}
    configs = 500
    eq2_violations = eq3_violations = 0
    for _ in range(configs):
        k = int(rng.integers(2, 33))
        n = int(rng.integers(8, 129))
        s = int(rng.integers(0, (n - 1) // 2 + 1))  # S < N/2
        sigma0 = float(rng.choice([0.0, 0.1]))
        func = workers[rng.choice(["sin_pi", "cubic"])]
        lam_e = 0.0 if rng.random() < 0.5 else 10.0 ** rng.uniform(-8, -2)
        lam_d = 0.0 if rng.random() < 0.25 else 10.0 ** rng.uniform(-10, -1)

        grid = chebyshev_grid(k, n)
        data = Dataset(rng.uniform(-1, 1, (k, 1)))
        batch = encode(data, grid, lam_e)
        survivors = np.sort(rng.choice(n, n - s, replace=False)).tolist()
        outs = func.evaluate(batch.coded[survivors])
        if sigma0 > 0:
            outs = outs + rng.normal(0.0, sigma0, outs.shape)
        result = decode(list(zip(survivors, outs)), grid, lam_d)

        truth = func.evaluate(data.inputs)
        through = func.evaluate(batch.encoder_fit.evaluate(grid.alphas))
        risk = float(np.mean(np.sum((result.estimates - truth) ** 2, axis=1)))
        l_dec = 2.0 * float(np.mean(np.sum((result.estimates - through) ** 2, axis=1)))
        l_enc = 2.0 * float(np.mean(np.sum((through - truth) ** 2, axis=1)))
        if risk > l_dec + l_enc + 1e-9 * (1.0 + l_dec + l_enc):
            eq2_violations += 1
        lipschitz_bound = 2.0 * func.lipschitz**2 * encoder_training_error(batch, data)
        if l_enc > lipschitz_bound + 1e-9 * (1.0 + lipschitz_bound):
            eq3_violations += 1

    elapsed = time.monotonic() - start
    ok = eq2_violations == 0 and eq3_violations == 0 and elapsed < 60.0
    assert report(2, "per-trial inequality suite", ok,
                  f"{configs} configs, {eq2_violations} decomposition / "
                  f"{eq3_violations} Lipschitz violations, {elapsed:.1f}s")


def _rate_config(**overrides):
    base = dict(schemes=("letcc",), func="sin_pi", k=16,
                n_values=SWEEP_N_VALUES, s=4, lambda_e=0.0,
                lambda_d_rule="n**-4", lambda_d_scale=1.0, sigma0=0.0,
                trials=20, master_seed=1301, data_rule="identity")
    base.update(overrides)
    return SweepConfig(**base)


def test_criterion_3_noiseless_convergence_rate():
    start = time.monotonic()
    sf = sweep_n(_rate_config()).slopes["letcc"]
    elapsed = time.monotonic() - start
    ok = sf is not None and sf.slope <= -2.2 and sf.r2 >= 0.9 and elapsed < 300
    detail = "no usable points" if sf is None else (
        f"slope={sf.slope:.2f} (<= -2.2), r2={sf.r2:.3f} (>= 0.9), "
        f"{sf.points_used} points, {elapsed:.0f}s")
    assert report(3, "noiseless convergence rate", ok, detail)


def test_criterion_4_noisy_convergence_rate():
    start = time.monotonic()
    config = _rate_config(sigma0=0.1, lambda_d_rule="survivors**-0.8",
                          lambda_d_scale=NOISY_LAMBDA_SCALE)
    sf = sweep_n(config).slopes["letcc"]
    elapsed = time.monotonic() - start
    ok = (sf is not None and -1.1 <= sf.slope <= -0.3 and sf.r2 >= 0.8
          and elapsed < 300)
    detail = "no usable points" if sf is None else (
        f"slope={sf.slope:.2f} (in [-1.1, -0.3]), r2={sf.r2:.3f} (>= 0.8), "
        f"{elapsed:.0f}s")
    assert report(4, "noisy convergence rate", ok, detail)


def test_criterion_5_beats_berrut_baseline():
    report_n = sweep_n(_rate_config(schemes=("letcc", "bacc")))
    letcc_slope = report_n.slopes["letcc"].slope
    bacc_slope = report_n.slopes["bacc"].slope

    paired = straggler_sweep(StragglerSweepConfig(
        schemes=("letcc", "bacc"), func="sin_pi", k=16, n=64,
        s_values=(4, 8, 16), lambda_e=0.0, lambda_d_rule="n**-4",
        trials=20, master_seed=1301, data_rule="identity"))
    win_fractions = [entry["letcc_wins_vs_bacc"] for entry in paired.table]
    overall = float(np.mean(win_fractions))

    ok = letcc_slope < bacc_slope and overall >= 0.8
    assert report(5, "faster and more accurate than rational baseline", ok,
                  f"slopes {letcc_slope:.2f} < {bacc_slope:.2f}, "
                  f"paired wins {overall:.0%} (>= 80%)")


def test_criterion_6_lagrange_exactness_boundary():
    start = time.monotonic()
    rng = np.random.default_rng(606)
    cases_ok = []
    for k, n in ((2, 4), (3, 7)):
        need = (k - 1) * 2 + 1
        grid = chebyshev_grid(k, n)
        data = Dataset(rng.uniform(-1, 1, (k, 1)))
        batch = lcc_encode(data, grid)
        f = lambda x: x**2
        truth = f(data.inputs)
        above_exact = True
        below_worse = False
        for r in range(1, n + 1):
            for survivors in itertools.combinations(range(n), r):
                outs = f(batch.coded[list(survivors)])
                res = lcc_decode(list(zip(survivors, outs)), grid, 2)
                err = np.abs(res.estimates - truth).max()
                if r >= need and err > 1e-8:
                    above_exact = False
                if r < need and err > 1e-6:
                    below_worse = True
        cases_ok.append(above_exact and below_worse)
    elapsed = time.monotonic() - start
    ok = all(cases_ok) and elapsed < 10.0
    assert report(6, "polynomial-code exactness boundary", ok,
                  f"cases (K=2,N=4),(K=3,N=7): {cases_ok}, {elapsed:.1f}s")


def test_criterion_7_cli_determinism(tmp_path, capsys):
    trial_args = ["trial", "--scheme", "letcc", "--f", "sin_pi", "--k", "16",
                  "--n", "64", "--s", "4", "--sigma0", "0.1",
                  "--lambda-d", "1e-5", "--seed", "7"]
    outs = []
    for threads in ("1", "2"):
        cli.main(trial_args + ["--threads", threads])
        outs.append(capsys.readouterr().out)
    trial_ok = outs[0] == outs[1] and outs[0] != ""

    sweep_cfg = tmp_path / "cfg.json"
    sweep_cfg.write_text(json.dumps({
        "kind": "n_sweep", "schemes": ["letcc", "bacc"], "f": "sin_pi",
        "k": 8, "n_values": [16, 24, 32], "s": 2, "sigma0": 0.1,
        "lambda_d_rule": "n**-4", "trials": 4, "seed": 11, "data": "identity"}))
    blobs = []
    for name, threads in (("r1", "1"), ("r2", "1"), ("r4", "4")):
        out = tmp_path / name
        cli.main(["sweep", str(sweep_cfg), "--out", str(out),
                  "--threads", threads])
        capsys.readouterr()
        blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    sweep_ok = blobs[0] == blobs[1] == blobs[2] and len(blobs[0]) == 3

    data = tmp_path / "d.mat"
    data.write_text("dims 3 1\n-0.8\n0.1\n0.9\n")
    codec_blobs = []
    for name in ("c1", "c2"):
        coded = tmp_path / f"{name}.mat"
        dec = tmp_path / f"{name}dec.mat"
        cli.main(["codec", "encode", str(data), "--n", "7", "--out", str(coded)])
        cli.main(["codec", "decode", str(coded), "--k", "3", "--n", "7",
                  "--lambda-d", "1e-6", "--out", str(dec)])
        capsys.readouterr()
        codec_blobs.append(coded.read_bytes() + dec.read_bytes())
    codec_ok = codec_blobs[0] == codec_blobs[1]

    cv_cfg = tmp_path / "cv.json"
    cv_cfg.write_text(json.dumps({
        "kind": "crossval", "f": "sin_pi", "k": 8, "n": 24, "s": 2,
        "sigma0": 0.1, "trials": 3, "seed": 9, "data": "identity",
        "lambda_d_grid": [1e-6, 1e-4, 1e-2]}))
    cv_outs = []
    for threads in ("1", "2"):
        cli.main(["crossval", str(cv_cfg), "--threads", threads])
        cv_outs.append(capsys.readouterr().out)
    cv_ok = cv_outs[0] == cv_outs[1] and cv_outs[0] != ""

    ok = trial_ok and sweep_ok and codec_ok and cv_ok
    with capsys.disabled():
        assert report(7, "CLI byte-determinism across reruns and threads", ok,
                      f"trial={trial_ok} sweep={sweep_ok} codec={codec_ok} "
                      f"crossval={cv_ok}")


def test_criterion_8_smoothing_weight_insensitive_to_stragglers():
    best = {}
    for s in (0, 2, 4):
        config = CrossvalConfig(func="sin_pi", k=16, n=64, s=s, sigma0=0.1,
                                trials=20, master_seed=2468,
                                data_rule="identity")
        best[s] = crossval_lambda((0.0,), DEFAULT_LAMBDA_GRID, config).best_lambda_d
    pairs = [(0, 2), (0, 4), (2, 4)]
    matches = sum(best[a] == best[b] for a, b in pairs)
    ok = matches >= 2
    assert report(8, "cross-validated smoothing weight stable in S", ok,
                  f"best lambda_d {best}, {matches}/3 pairwise matches")
