"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Criterion 3's spectral clause is implemented exactly as stated and is
expected to fail: the dyadic baker Ulam matrix is exactly row-splitting under
this package's sampling scheme (which the uniform-stationarity clause of the
same criterion requires), and its dense spectrum then collapses to {1} plus a
rounding-scale cloud, not a 0.5 ring.  The 0.5 ring is an artifact of
sampling noise amplified through the defective (nilpotent) block structure,
incompatible with 1e-6-exact stationarity under any single sampling scheme.
See the verification in test_criterion_3_spectral_clause_as_stated.
"""

import math
import time

import numpy as np
import pytest

import ghmlab as g
from ghmlab import stats, symbolic, transfer, vexp
from ghmlab.geometry import graph_distance
from ghmlab.symbolic import Word
from ghmlab.transfer import GridDensity


def _report(num, name, clauses, budget, elapsed):
    ok = all(c[1] for c in clauses)
    status = "PASS" if ok and elapsed < budget else "FAIL"
    print(f"[{status}] criterion {num}: {name} ({elapsed:.1f}s / budget {budget:.0f}s)")
    for label, good, detail in clauses:
        mark = "ok" if good else "FAILED"
        print(f"    - {label}: {mark} ({detail})")
    assert ok, f"criterion {num} failed: " + "; ".join(c[0] for c in clauses if not c[1])
    assert elapsed < budget, f"criterion {num} exceeded runtime budget"


@pytest.fixture(scope="module")
def baker():
    return g.build_affine_family(2, 0.5, 0.0, "stack", k=0.5)


@pytest.fixture(scope="module")
def slanted3():
    return g.build_affine_family(3, 0.35, "max", "spread")


@pytest.fixture(scope="module")
def sl3_cloud32(slanted3):
    return stats.push_cloud(slanted3, 1_000_000, 15, seed=7, m=32)


@pytest.fixture(scope="module")
def sl3_ulam32(slanted3):
    return transfer.ulam_matrix(slanted3, 32, 256, seed=7)


def test_criterion_1_axiom_suite(baker, slanted3):
    t0 = time.time()
    clauses = []
    r1 = g.validate_hyperbolicity(baker, 10_000, seed=0)
    clauses.append(("baker axioms at 1e4 samples/branch", r1.ok, f"margin {r1.worst_margin:.3g}"))
    r2 = g.validate_hyperbolicity(slanted3, 10_000, seed=0)
    clauses.append(("slanted family axioms", r2.ok, f"margin {r2.worst_margin:.3g}"))
    broken = g.single_branch_map([[0.8, 0.0], [0.0, 1.2]], k=0.5, lam=2.0)
    r3 = g.validate_hyperbolicity(broken, 1000, seed=0)
    clauses.append(("contraction-as-expansion fails H2", r3.h2_violations > 0,
                    f"{r3.h2_violations} violations"))
    _report(1, "axiom suite", clauses, 5.0, time.time() - t0)


def test_criterion_2_transfer_duality(slanted3, baker):
    t0 = time.time()
    m = 128
    rng = np.random.default_rng(2024)
    coeffs = rng.uniform(-0.3, 0.3, 3)
    kvecs = rng.integers(-3, 4, (3, 2))
    phases = rng.uniform(0, 2 * np.pi, 3)

    def trig(x, y):
        out = np.ones_like(x)
        for c, (kx, ky), p in zip(coeffs, kvecs, phases, strict=True):
            out = out + c * np.cos(2 * np.pi * (kx * x + ky * y) + p)
        return out

    tests = (("h=1", lambda x, y: np.ones_like(x)), ("h=coord_x", lambda x, y: x), ("h=trig", trig))
    clauses = []
    for ghm, tag in ((baker, "baker"), (slanted3, "slanted3")):
        for name, h in tests:
            lhs = transfer.transfer_quadrature(ghm, h, m)
            rhs = transfer.grid_quadrature(h, m)
            diff = abs(lhs - rhs)
            clauses.append((f"{tag} {name}", diff <= 2.0 / m, f"|diff|={diff:.2e} <= {2.0/m:.2e}"))
    _report(2, "transfer-operator duality", clauses, 10.0, time.time() - t0)


def test_criterion_3_baker_ground_truth(baker):
    t0 = time.time()
    clauses = []
    P32 = transfer.ulam_matrix(baker, 32, 256, seed=0)
    h = transfer.stationary_density(P32, tol=1e-9)
    dist = h.l1_distance(GridDensity.uniform(32))
    clauses.append(("stationary density uniform (L1 <= 1e-6, m=32)", dist <= 1e-6, f"L1={dist:.2e}"))
    cs = stats.correlation_series(baker, stats.coord_x, stats.coord_x, 8, 10_000_000, seed=11)
    rel = abs(cs.fitted_rate - math.log(2)) / math.log(2)
    clauses.append(("correlation rate within 15% of ln 2 at 1e7", rel <= 0.15,
                    f"rate={cs.fitted_rate:.4f}, rel err {rel:.3f}"))
    _report(3, "baker ground truth (stationary + correlation)", clauses, 60.0, time.time() - t0)


def test_criterion_3_spectral_clause_as_stated(baker):
    """Second modulus of the m=16 baker Ulam matrix equals 0.5 +/- 0.05 (as stated).

    This clause contradicts the 1e-6-uniform clause of the same criterion:
    exact dyadic splits (required for that clause and for the residual-0 and
    seed-stability properties) make the matrix nilpotent apart from the
    leading eigenvalue.  Left to fail honestly; analysis in the decisions log.
    """
    t0 = time.time()
    P16 = transfer.ulam_matrix(baker, 16, 256, seed=0)
    rep = transfer.spectral_gap(P16)
    dense = np.sort(np.abs(np.linalg.eigvals(P16.matrix.toarray())))[::-1]
    agree = abs(rep.second_modulus - dense[1]) <= 0.02
    stated = abs(rep.second_modulus - 0.5) <= 0.05
    clauses = [
        ("power iteration agrees with the dense oracle", agree,
         f"power={rep.second_modulus:.4f}, dense={dense[1]:.4f}"),
        ("second modulus equals 0.5 +/- 0.05 as stated", stated,
         f"measured {rep.second_modulus:.4f}; the honest dyadic matrix has no 0.5 ring"),
    ]
    _report("3s", "baker spectral clause (as stated)", clauses, 60.0, time.time() - t0)


def test_criterion_4_showcase_reproduction(slanted3, sl3_cloud32, sl3_ulam32):
    t0 = time.time()
    clauses = []
    h = transfer.stationary_density(sl3_ulam32, tol=1e-10)
    d = sl3_cloud32.density.l1_distance(h)
    clauses.append(("cloud histogram vs Ulam density (L1 <= 0.1, m=32)", d <= 0.1, f"L1={d:.3f}"))
    cells = symbolic.attractor_cells(slanted3, 15, 512)
    cloud512 = stats.push_cloud(slanted3, 1_000_000, 15, seed=7, m=512)
    outside = float(cloud512.density.values[~cells].sum()) / (512 * 512)
    clauses.append(("cloud support within depth-15 attractor cells (<= 1% mass)",
                    outside <= 0.01, f"escaped mass {outside:.4f}"))
    _report(4, "showcase-map reproduction (1e6 points, 15 steps)", clauses, 180.0, time.time() - t0)


def test_criterion_5_virtual_expansion(slanted3):
    t0 = time.time()
    clauses = []
    ident = g.single_branch_map(np.eye(2))
    rep_i = vexp.beta_mu_estimate(ident, 0.3, 3, 16, 16)
    flat = all(abs(b - 1.0) <= 1e-12 for b in rep_i.beta_sequence)
    clauses.append(("identity fixture has beta == 1", flat,
                    f"beta={[f'{b:.6f}' for b in rep_i.beta_sequence]}"))
    diag = g.single_branch_map([[2.0, 0.0], [0.0, 0.5]])
    rep_d = vexp.b_mu_field(diag, 0.5, 16, 16)
    covered = rep_d.field[:, 0][rep_d.field[:, 0] > 0]
    hand = bool(covered.size) and bool(np.all(np.abs(covered - 0.5) <= 1e-12))
    clauses.append(("diag(2, 1/2) fixture: b = 0.5 at v=(1,0), mu=1/2, to 1e-12", hand,
                    f"{covered[:1]}"))
    rep = vexp.beta_mu_estimate(slanted3, 0.25, 4, 64, 64)
    sub = rep.sup_per_n[1] <= rep.sup_per_n[0] ** 2 + 1e-6
    clauses.append(("submultiplicativity sup2 <= sup1^2 + 1e-6", sub,
                    f"sup2={rep.sup_per_n[1]:.6f} vs sup1^2={rep.sup_per_n[0]**2:.6f}"))
    mono = rep.monotone_within(1e-6)
    clauses.append(("beta sequence non-increasing within 1e-6 (n <= 4)", mono,
                    f"beta={[f'{b:.4f}' for b in rep.beta_sequence]}"))
    rep2 = vexp.beta_mu_estimate(slanted3, 0.25, 4, 128, 128)
    rel = abs(rep2.sup_per_n[-1] - rep.sup_per_n[-1]) / rep.sup_per_n[-1]
    clauses.append(("grid doubling moves sup b by <= 5%", rel <= 0.05, f"rel change {rel:.4f}"))
    _report(5, "virtual-expansion suite", clauses, 120.0, time.time() - t0)


def test_criterion_6_coverage_partition(baker, slanted3):
    t0 = time.time()
    clauses = []
    pieces = vexp.coverage_partition(baker, 128)
    thetas = sorted(tuple(sorted(p.theta)) for p in pieces)
    ok_baker = thetas == [(1,), (2,)] and all(p.x_interval == (0.0, 1.0) for p in pieces)
    clauses.append(("baker tiling gives pieces {1}, {2}", ok_baker, f"{thetas}"))

    branches = [
        g.AffineBranch(id=1, domain=g.StripRegion.vertical_interval(0.0, 0.5),
                       linear=[[2.0, 0.0], [0.0, 0.6]], offset=[0.0, 0.0]),
        g.AffineBranch(id=2, domain=g.StripRegion.vertical_interval(0.5, 1.0),
                       linear=[[2.0, 0.0], [0.0, 0.6]], offset=[-1.0, 0.4]),
    ]
    overlap = g.GhmMap(branches, k=0.5, lam=1.5)
    pieces_o = vexp.coverage_partition(overlap, 128)
    thetas_o = sorted(tuple(sorted(p.theta)) for p in pieces_o)
    clauses.append(("synthetic overlap gives {1}, {1,2}, {2}", thetas_o == [(1,), (1, 2), (2,)],
                    f"{thetas_o}"))

    p128 = vexp.coverage_partition(slanted3, 128)
    p256 = vexp.coverage_partition(slanted3, 256)
    stable = len(p128) == len(p256) and {frozenset(p.theta) for p in p128} == {
        frozenset(p.theta) for p in p256
    }
    clauses.append(("slanted3 pieces stable under x_res doubling", stable,
                    f"{len(p128)} vs {len(p256)} pieces"))
    _report(6, "coverage partition", clauses, 5.0, time.time() - t0)


def test_criterion_7_sobolev_threshold():
    t0 = time.time()
    vals = {
        mu: [transfer.sobolev_seminorm(transfer.half_square_indicator(m), mu) for m in (32, 64, 128)]
        for mu in (0.25, 0.75)
    }
    r_low = (vals[0.25][1] / vals[0.25][0], vals[0.25][2] / vals[0.25][1])
    r_high = (vals[0.75][1] / vals[0.75][0], vals[0.75][2] / vals[0.75][1])
    clauses = [
        ("mu=0.25: growth ratio bounded (decreasing)", r_low[1] <= r_low[0] and r_low[1] < 1.25,
         f"ratios {r_low[0]:.4f} -> {r_low[1]:.4f}"),
        ("mu=0.75: ratio at 128/64 exceeds ratio at 64/32", r_high[1] > r_high[0],
         f"ratios {r_high[0]:.4f} -> {r_high[1]:.4f}"),
    ]
    _report(7, "Sobolev regularity threshold", clauses, 10.0, time.time() - t0)


def test_criterion_8_geometry_decay(slanted3):
    t0 = time.time()
    clauses = []
    rng = np.random.default_rng(88)
    worst = 0.0
    for _ in range(4):
        syms = tuple(int(s) for s in rng.integers(1, 4, 8))
        widths = [
            symbolic.refine_strip(slanted3, Word(syms[:n], "stable")).width for n in range(1, 9)
        ]
        for a, b in zip(widths[:-1], widths[1:], strict=True):
            worst = max(worst, abs(b / a - 1.0 / 3.0) / (1.0 / 3.0))
    clauses.append(("strip width per-step factor within 5% of 1/3", worst <= 0.05,
                    f"worst rel deviation {worst:.2e}"))

    w = Word((2, 1, 3), "stable")
    dists = {}
    for n in range(3, 11):
        p = symbolic.manifold_approx(slanted3, w, n)
        q = symbolic.manifold_approx(slanted3, w, n + 2)
        dists[n] = graph_distance(p[:, 1], p[:, 0], q[:, 1], q[:, 0])
    worst_m = max(
        abs((dists[n + 3] / dists[n]) ** (1 / 3) - 1.0 / 3.0) / (1.0 / 3.0) for n in (3, 4, 5, 6, 7)
    )
    clauses.append(("manifold depth-(n, n+2) distances decay at the width rate", worst_m <= 0.05,
                    f"worst per-step deviation {worst_m:.2e}"))
    _report(8, "geometry decay rates", clauses, 10.0, time.time() - t0)


def test_criterion_9_determinism(slanted3, baker, sl3_cloud32, sl3_ulam32):
    t0 = time.time()
    clauses = []

    cloud_again = stats.push_cloud(slanted3, 1_000_000, 15, seed=7, m=32)
    bitwise_cloud = np.array_equal(cloud_again.density.values, sl3_cloud32.density.values)
    clauses.append(("cloud histogram bit-reproducible at fixed seed", bitwise_cloud, "rerun equal"))

    ulam_again = transfer.ulam_matrix(slanted3, 32, 256, seed=7)
    same_ulam = (ulam_again.matrix != sl3_ulam32.matrix).nnz == 0
    clauses.append(("Ulam matrix bit-reproducible at fixed seed", same_ulam, "rerun equal"))

    cs1 = stats.correlation_series(baker, stats.coord_x, stats.coord_x, 8, 1_000_000, seed=11)
    cs2 = stats.correlation_series(baker, stats.coord_x, stats.coord_x, 8, 1_000_000, seed=11)
    clauses.append(("correlation series bit-reproducible", np.array_equal(cs1.values, cs2.values),
                    "rerun equal"))

    rep1 = vexp.beta_mu_estimate(slanted3, 0.25, 3, 32, 32)
    rep2 = vexp.beta_mu_estimate(slanted3, 0.25, 3, 32, 32)
    clauses.append(("expansion report bit-reproducible", rep1.sup_per_n == rep2.sup_per_n,
                    "rerun equal"))

    # seed variation moves Monte Carlo quantities by < 2x their tolerances
    h7 = transfer.stationary_density(sl3_ulam32, tol=1e-10)
    cloud8 = stats.push_cloud(slanted3, 1_000_000, 15, seed=8, m=32)
    h8 = transfer.stationary_density(transfer.ulam_matrix(slanted3, 32, 256, seed=8), tol=1e-10)
    d_cross = cloud8.density.l1_distance(h7)
    clauses.append(("criterion-4 quantity at seed+1 within 2x tolerance", d_cross <= 0.2,
                    f"L1={d_cross:.3f} <= 0.2"))
    clauses.append(("Ulam stationary density seed sensitivity small",
                    h7.l1_distance(h8) <= 0.05, f"L1={h7.l1_distance(h8):.4f}"))
    cs3 = stats.correlation_series(baker, stats.coord_x, stats.coord_x, 8, 10_000_000, seed=12)
    rel = abs(cs3.fitted_rate - math.log(2)) / math.log(2)
    clauses.append(("criterion-3 rate at another seed within 2x tolerance", rel <= 0.30,
                    f"rel err {rel:.3f}"))
    _report(9, "determinism and seed stability", clauses, 120.0, time.time() - t0)
