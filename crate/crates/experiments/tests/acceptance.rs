//! Acceptance criteria 1-13, one PASS/FAIL line each.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines
//! live; they are written straight to stdout and appear either way.

use brwepi::brw::{brw_observe, brw_run, OffspringLaw, DEFAULT_GUARD};
use brwepi::family::{build_family, FamilySpec};
use brwepi::kernel::{green_convolve, KernelStepper};
use brwepi::likelihood::{a_k, martingale_functional};
use brwepi::moments::{
    brute_force_mgf, cumulant_recursion, cumulant_recursion_iterated, cumulant_time_increment, nu_recursion, second_moment, Convention,
    DEFAULT_ENUMERATION_BUDGET,
};
use brwepi::rng::StreamSeed;
use brwepi::stats::{ols_hc0, z_against, Welford};
use brwepi::testfn::TestFn;
use brwepi::{BoxGrid, KernelTable, LatticeField, Site, WalkSpec};
use brwepi_experiments::config::ExperimentConfig;
use brwepi_experiments::report::{DiagnosticReport, Verdict};
use brwepi_experiments::{run_config, Outcome};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Monte Carlo comparisons pass within this many standard errors.
const Z: f64 = 4.0;

type Verdicts = Result<(bool, String), String>;

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_shipped(name: &str) -> Result<Outcome, String> {
    let cfg = ExperimentConfig::load(&configs().join(name)).map_err(|e| e.to_string())?;
    run_config(&cfg, None).map_err(|e| e.to_string())
}

fn verdicts(report: &DiagnosticReport, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in names {
        match report.check(n) {
            Some(c) => {
                ok &= c.verdict == Verdict::Pass;
                parts.push(format!("{n}={} {}", c.verdict.label(), c.detail));
            }
            None => {
                ok = false;
                parts.push(format!("{n}=MISSING"));
            }
        }
    }
    (ok, parts.join("; "))
}

fn sites_within(d: usize, r2: i64) -> Vec<Site> {
    let r = (r2 as f64).sqrt().floor() as i32;
    WalkSpec { d }.box_sites(r).into_iter().filter(|s| s.norm2() <= r2).collect()
}

/// Per-chunk accumulation merged in chunk order, so the result does not
/// depend on the thread count.
fn parallel_welford(reps: u64, slots: usize, f: impl Fn(u64, &mut [f64]) + Sync) -> Vec<Welford> {
    const CHUNK: u64 = 2_000;
    let chunks: Vec<Vec<Welford>> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Welford::new(); slots];
            let mut buf = vec![0.0; slots];
            for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                buf.iter_mut().for_each(|v| *v = 0.0);
                f(r, &mut buf);
                for (w, v) in acc.iter_mut().zip(&buf) {
                    w.push(*v);
                }
            }
            acc
        })
        .collect();
    let mut out = vec![Welford::new(); slots];
    for c in &chunks {
        for (o, w) in out.iter_mut().zip(c) {
            o.merge(w);
        }
    }
    out
}

fn worst_z(ws: &[Welford], targets: &[f64]) -> f64 {
    ws.iter().zip(targets).map(|(w, &t)| z_against(w, t).map_or(0.0, f64::abs)).fold(0.0, f64::max)
}

// 1. Mass conservation, lattice symmetry and Chapman-Kolmogorov.
fn symmetric_images(c: [i32; 3], d: usize) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    let perms: Vec<[usize; 3]> = if d == 2 { vec![[0, 1, 2], [1, 0, 2]] } else { vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] };
    for p in perms {
        for signs in 0..(1 << d) {
            let mut v = [0; 3];
            for i in 0..3 {
                v[i] = c[p[i]];
            }
            for (i, x) in v.iter_mut().enumerate().take(d) {
                if signs >> i & 1 == 1 {
                    *x = -*x;
                }
            }
            out.push(v);
        }
    }
    out
}

fn ck_at(a: &BoxGrid, b: &BoxGrid, x: [i32; 3]) -> f64 {
    let mut acc = 0.0;
    for (y, v) in a.iter() {
        if v != 0.0 {
            acc += v * b.get([x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
        }
    }
    acc
}

fn kernel_exactness(d: usize, n_max: usize, snaps: [usize; 4]) -> (bool, String) {
    let mut st = KernelStepper::new(WalkSpec { d });
    let mut worst_mass: f64 = 0.0;
    let mut sym_ok = true;
    let mut kept: BTreeMap<usize, BoxGrid> = BTreeMap::new();
    let probes: Vec<[i32; 3]> = vec![[0, 0, 0], [1, 0, 0], [3, 2, 0], [10, -7, 0], [40, 25, 0], [2, 1, 1], [15, -4, 9]]
        .into_iter()
        .map(|mut c: [i32; 3]| {
            if d == 2 {
                c[2] = 0;
            }
            c
        })
        .collect();
    for n in 1..=n_max {
        st.step();
        let p = st.current();
        worst_mass = worst_mass.max((p.sum() - 1.0).abs());
        if n % 25 == 0 || n == n_max || n < 10 {
            for c in &probes {
                let v = p.get(*c);
                sym_ok &= symmetric_images(*c, d).iter().all(|m| p.get(*m) == v);
            }
            // Whole-grid reflection symmetry.
            sym_ok &= p.iter().all(|(c, v)| p.get([-c[0], c[1], c[2]]) == v);
        }
        if snaps.contains(&n) {
            kept.insert(n, p.clone());
        }
    }
    let mut worst_ck: f64 = 0.0;
    let [a, b, c, e] = snaps;
    for (i, j, k) in [(a, a, b), (a, c, e), (b, b, e)] {
        for x in &probes {
            let lhs = kept[&k].get(*x);
            let rhs = ck_at(&kept[&i], &kept[&j], *x);
            worst_ck = worst_ck.max((lhs - rhs).abs());
        }
    }
    let ok = worst_mass <= 1e-12 && sym_ok && worst_ck <= 1e-10;
    (ok, format!("d={d} n<={n_max}: max|mass-1|={worst_mass:.2e}, symmetry exact={sym_ok}, max CK gap={worst_ck:.2e}"))
}

fn criterion_1() -> Verdicts {
    let (a, da) = kernel_exactness(2, 2000, [500, 1000, 1500, 2000]);
    let (b, db) = kernel_exactness(3, 200, [50, 100, 150, 200]);
    Ok((a && b, format!("{da}; {db}")))
}

// 2. Closed-form anchors from path enumeration and the pgf.
fn criterion_2() -> Verdicts {
    let t = KernelTable::build(WalkSpec { d: 2 }, 3).map_err(|e| e.to_string())?;
    let t3 = KernelTable::build(WalkSpec { d: 3 }, 1).map_err(|e| e.to_string())?;
    // Path counts: P_2(0) = (1 + 4) / 25, G_3(0) = 1 + 1/5 + 1/5.
    let checks = [
        ("P_1(0) d=2", t.prob(1, Site::ORIGIN), 1.0 / 5.0),
        ("P_1(0) d=3", t3.prob(1, Site::ORIGIN), 1.0 / 7.0),
        ("P_2(0)", t.prob(2, Site::ORIGIN), 5.0 / 25.0),
        ("G_3(0)", t.green_at(3, Site::ORIGIN).map_err(|e| e.to_string())?, 7.0 / 5.0),
        ("second_moment(0,1)", second_moment(Site::ORIGIN, 1, &OffspringLaw::PoissonUnit, &t).map_err(|e| e.to_string())?, 6.0 / 25.0),
        ("second_moment(0,2)", second_moment(Site::ORIGIN, 2, &OffspringLaw::PoissonUnit, &t).map_err(|e| e.to_string())?, 7.0 / 25.0),
    ];
    let ok = checks.iter().all(|c| (c.1 - c.2).abs() <= 1e-12);
    let detail: Vec<String> = checks.iter().map(|c| format!("{}={:.15}", c.0, c.1)).collect();
    Ok((ok, detail.join(", ")))
}

// 3. E X_n = mu * P_n and E R_n = mu * G_n.
fn mean_identities(d: usize, seed: u64) -> Result<(bool, String), String> {
    let mu = LatticeField::from_pairs(d, [(Site::ORIGIN, 2), (Site::new(1, 0, 0), 1)]);
    let law = OffspringLaw::PoissonUnit;
    let ns = [1usize, 2, 3, 5, 10, 15, 20];
    let xs = sites_within(d, 9);
    let table = KernelTable::build(WalkSpec { d }, 20).map_err(|e| e.to_string())?;
    let mut targets = Vec::new();
    for &n in &ns {
        let ex = table.mu_convolve_p(&mu, n).map_err(|e| e.to_string())?;
        let er = green_convolve(&table, &mu, n).map_err(|e| e.to_string())?;
        for x in &xs {
            targets.push(ex.at(*x));
            targets.push(er.at(*x));
        }
    }
    let nx = xs.len();
    let ws = parallel_welford(100_000, targets.len(), |r, buf| {
        let mut occ = vec![0.0; nx];
        let mut ni = 0;
        brw_observe(&mu, &law, 20, StreamSeed::new(seed, r), DEFAULT_GUARD, |g, f| {
            if ni < ns.len() && g == ns[ni] {
                for (j, x) in xs.iter().enumerate() {
                    buf[2 * (ni * nx + j)] = f.get(*x) as f64;
                    buf[2 * (ni * nx + j) + 1] = occ[j];
                }
                ni += 1;
            }
            for (j, x) in xs.iter().enumerate() {
                occ[j] += f.get(*x) as f64;
            }
            true
        })
        .unwrap();
    });
    let z = worst_z(&ws, &targets);
    Ok((z <= Z, format!("d={d}: {} comparisons, max |z|={z:.2}", targets.len())))
}

fn criterion_3() -> Verdicts {
    let (a, da) = mean_identities(2, 301)?;
    let (b, db) = mean_identities(3, 302)?;
    Ok((a && b, format!("{da}; {db}")))
}

// 4. E X_n(x)^2 against the closed form.
fn criterion_4() -> Verdicts {
    let table = KernelTable::build(WalkSpec { d: 2 }, 5).map_err(|e| e.to_string())?;
    let xs = sites_within(2, 4);
    let mut ok = true;
    let mut parts = Vec::new();
    for (law, seed) in [(OffspringLaw::PoissonUnit, 401u64), (OffspringLaw::EnvelopeN(10), 402)] {
        let mut targets = Vec::new();
        for n in 1..=5 {
            for x in &xs {
                targets.push(second_moment(*x, n, &law, &table).map_err(|e| e.to_string())?);
            }
        }
        let nx = xs.len();
        let mu = LatticeField::point(2, 1);
        let ws = parallel_welford(1_000_000, targets.len(), |r, buf| {
            brw_observe(&mu, &law, 5, StreamSeed::new(seed, r), DEFAULT_GUARD, |g, f| {
                if g >= 1 {
                    for (j, x) in xs.iter().enumerate() {
                        let v = f.get(*x) as f64;
                        buf[(g - 1) * nx + j] = v * v;
                    }
                }
                !f.is_empty()
            })
            .unwrap();
        });
        let z = worst_z(&ws, &targets);
        ok &= z <= Z;
        parts.push(format!("{law:?}: {} comparisons, max |z|={z:.2}", targets.len()));
    }
    Ok((ok, parts.join("; ")))
}

// 5. Cumulant engines, enumeration and Monte Carlo.
fn test_psi() -> BoxGrid {
    let mut psi = BoxGrid::zeros(2, [-1, 0, 0], [3, 2, 1]);
    psi.set([-1, 0, 0], 0.3);
    psi.set([0, 1, 0], -0.5);
    psi.set([1, 0, 0], 0.2);
    psi
}

fn max_gap(a: &BoxGrid, b: &BoxGrid) -> f64 {
    let u = a.union_box(b);
    let bb = b.union_box(a).resized(u.lo, u.ext);
    u.data.iter().zip(&bb.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Distribution of `X_m` from `mu` under a finite-support law, by enumeration.
fn enumerate_generation(mu: &LatticeField, q: &[f64], m: usize) -> BTreeMap<Vec<Site>, f64> {
    let moves: Vec<Site> = WalkSpec { d: mu.d() }.moves().iter().map(|c| Site::new(c[0], c[1], c[2])).collect();
    let mut start = Vec::new();
    for (s, c) in mu.sorted() {
        start.extend(std::iter::repeat_n(s, c as usize));
    }
    let mut states = BTreeMap::new();
    states.insert(start, 1.0);
    for _ in 0..m {
        let mut next: BTreeMap<Vec<Site>, f64> = BTreeMap::new();
        for (cfg, w) in &states {
            let mut partial: Vec<(Vec<Site>, f64)> = vec![(Vec::new(), *w)];
            for &p in cfg {
                let mut grown = Vec::new();
                for (kids, pw) in &partial {
                    for (j, &qj) in q.iter().enumerate() {
                        if qj == 0.0 {
                            continue;
                        }
                        // j children, each placed independently and uniformly.
                        let mut placements: Vec<(Vec<Site>, f64)> = vec![(Vec::new(), 1.0)];
                        for _ in 0..j {
                            let mut more = Vec::new();
                            for (pl, w) in &placements {
                                for e in &moves {
                                    let mut v = pl.clone();
                                    v.push(p.offset(*e));
                                    more.push((v, w / moves.len() as f64));
                                }
                            }
                            placements = more;
                        }
                        for (pl, w) in placements {
                            let mut c = kids.clone();
                            c.extend(pl);
                            grown.push((c, pw * qj * w));
                        }
                    }
                }
                partial = grown;
            }
            for (mut c, w) in partial {
                c.sort_unstable();
                *next.entry(c).or_insert(0.0) += w;
            }
        }
        states = next;
    }
    states
}

fn poisson_increment_kappa2_oracle(psi: &BoxGrid, n: usize, m: usize) -> Result<Vec<BoxGrid>, String> {
    // Psi-free steps for Poisson offspring: kappa_2' = P_1 * (kappa_2 + kappa_1^2 / 2),
    // so kappa_{2,(n,m)} = sum_{i<m} P_i * P_1 * (kappa_{1,(n,m-i-1)}^2 / 2) + P_m * kappa_{2,(n,0)},
    // with kappa_{1,(n,j)} the window Green function paired with psi.
    let law = OffspringLaw::PoissonUnit;
    let full = cumulant_recursion(psi, 2, n, &law, Convention::Gen0ToNMinus1).map_err(|e| e.to_string())?;
    let table = KernelTable::build(WalkSpec { d: psi.d }, n + m).map_err(|e| e.to_string())?;
    let kappa1 = |j: usize| -> BoxGrid {
        let mut acc = psi.expanded((j + n) as i32).map(|_| 0.0);
        for l in j..j + n {
            let term = table.p(l).unwrap().convolve(psi);
            acc = acc.axpy(1.0, &term);
        }
        acc
    };
    let mut out = Vec::new();
    for mm in 0..=m {
        let mut acc = table.p(mm).unwrap().convolve(full.kappa(2, n));
        for i in 0..mm {
            let k1 = kappa1(mm - i - 1);
            let half_sq = k1.map(|v| 0.5 * v * v);
            let t = table.p(i).unwrap().convolve(&table.p(1).unwrap().convolve(&half_sq));
            acc = acc.union_box(&t).axpy(1.0, &t);
        }
        out.push(acc);
    }
    Ok(out)
}

fn criterion_5() -> Verdicts {
    let psi = test_psi();
    let laws = [OffspringLaw::PoissonUnit, OffspringLaw::custom(vec![0.25, 0.5, 0.25]).unwrap()];
    let mut parts = Vec::new();
    let mut ok = true;

    // (a) direct recursion vs Xi-convolution form.
    let mut gap_a: f64 = 0.0;
    for law in &laws {
        for conv in [Convention::Gen1ToN, Convention::Gen0ToNMinus1] {
            let a = cumulant_recursion(&psi, 4, 8, law, conv).map_err(|e| e.to_string())?;
            let b = cumulant_recursion_iterated(&psi, 4, 8, law, conv).map_err(|e| e.to_string())?;
            for h in 1..=4 {
                for i in 0..=8 {
                    gap_a = gap_a.max(max_gap(a.kappa(h, i), b.kappa(h, i)));
                }
            }
        }
    }
    let (n_inc, m_inc) = (6, 3);
    let inc = cumulant_time_increment(&psi, n_inc, m_inc, 2, &OffspringLaw::PoissonUnit).map_err(|e| e.to_string())?;
    let oracle = poisson_increment_kappa2_oracle(&psi, n_inc, m_inc)?;
    let mut gap_a_inc: f64 = 0.0;
    for mm in 0..=m_inc {
        gap_a_inc = gap_a_inc.max(max_gap(inc.kappa(2, mm), &oracle[mm]));
    }
    ok &= gap_a <= 1e-10 && gap_a_inc <= 1e-10;
    parts.push(format!("(a) engines {gap_a:.1e}, increment {gap_a_inc:.1e}"));

    // (b) exhaustive enumeration vs the log-MGF recursion.
    let mut gap_b: f64 = 0.0;
    let small = BoxGrid::delta(2, -0.4);
    let mus = [LatticeField::point(2, 1), LatticeField::from_pairs(2, [(Site::ORIGIN, 1), (Site::new(0, 1, 0), 1)])];
    let qs = [vec![0.5, 0.0, 0.5], vec![0.25, 0.5, 0.25]];
    for q in &qs {
        let law = OffspringLaw::custom(q.clone()).unwrap();
        for p in [&psi, &small] {
            for conv in [Convention::Gen1ToN, Convention::Gen0ToNMinus1] {
                let t = nu_recursion(p, 3, &law, conv).map_err(|e| e.to_string())?;
                for (i, mu) in mus.iter().enumerate() {
                    // Two particles over three full generations outgrow the enumeration budget.
                    let n_max = if i == 1 && conv == Convention::Gen1ToN { 2 } else { 3 };
                    for n in 0..=n_max {
                        let bf = brute_force_mgf(p, n, &law, mu, conv, DEFAULT_ENUMERATION_BUDGET).map_err(|e| e.to_string())?;
                        gap_b = gap_b.max((bf - t.mgf(mu, n)).abs());
                    }
                }
            }
        }
    }
    let mut gap_b_inc: f64 = 0.0;
    for q in &qs {
        let law = OffspringLaw::custom(q.clone()).unwrap();
        for n in 1..=2 {
            let inc = cumulant_time_increment(&small, n, 2, 1, &law).map_err(|e| e.to_string())?;
            let mu = LatticeField::point(2, 1);
            for m in 0..=2 {
                let dist = enumerate_generation(&mu, q, m);
                let mut want = 0.0;
                for (cfg, w) in &dist {
                    let field = LatticeField::from_pairs(2, cfg.iter().map(|&s| (s, 1)));
                    want += w * brute_force_mgf(&small, n, &law, &field, Convention::Gen0ToNMinus1, DEFAULT_ENUMERATION_BUDGET).map_err(|e| e.to_string())?;
                }
                gap_b_inc = gap_b_inc.max((want - inc.mgf(&mu, m)).abs());
            }
        }
    }
    ok &= gap_b <= 1e-10 && gap_b_inc <= 1e-10;
    parts.push(format!("(b) enumeration {gap_b:.1e}, increment {gap_b_inc:.1e}"));

    // (c) exp <mu, nu_n> against Monte Carlo, psi <= 0.
    let mut neg = BoxGrid::zeros(2, [0, 0, 0], [2, 1, 1]);
    neg.set([0, 0, 0], -0.3);
    neg.set([1, 0, 0], -0.2);
    let mu = LatticeField::point(2, 2);
    let ns = [1usize, 2, 5, 10];
    let mut worst: f64 = 0.0;
    for (li, law) in laws.iter().enumerate() {
        let g0 = nu_recursion(&neg, 10, law, Convention::Gen0ToNMinus1).map_err(|e| e.to_string())?;
        let g1 = nu_recursion(&neg, 10, law, Convention::Gen1ToN).map_err(|e| e.to_string())?;
        let inc: Vec<_> = (1..=3).map(|m| cumulant_time_increment(&neg, 5, m, 1, law).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
        let mut targets = Vec::new();
        for &n in &ns {
            targets.push(g0.mgf(&mu, n));
            targets.push(g1.mgf(&mu, n));
        }
        for (m, t) in inc.iter().enumerate() {
            targets.push(t.mgf(&mu, m + 1));
        }
        let ws = parallel_welford(100_000, targets.len(), |r, buf| {
            let mut per_gen = [0.0f64; 11];
            brw_observe(&mu, law, 10, StreamSeed::new(500 + li as u64, r), DEFAULT_GUARD, |g, f| {
                per_gen[g] = f.pair_with(|s| neg.at(s));
                !f.is_empty()
            })
            .unwrap();
            for (i, &n) in ns.iter().enumerate() {
                let gen0: f64 = per_gen[..n].iter().sum();
                let gen1: f64 = per_gen[1..=n].iter().sum();
                buf[2 * i] = gen0.exp();
                buf[2 * i + 1] = gen1.exp();
            }
            for m in 1..=3 {
                let w: f64 = per_gen[m..m + 5].iter().sum();
                buf[2 * ns.len() + m - 1] = w.exp();
            }
        });
        worst = worst.max(worst_z(&ws, &targets));
    }
    ok &= worst <= Z;
    parts.push(format!("(c) Monte Carlo max |z|={worst:.2}"));
    Ok((ok, parts.join("; ")))
}

// 6. Likelihood normalisation and the importance-sampling battery.
fn criterion_6() -> Verdicts {
    let out = run_shipped("importance_d2.toml")?;
    let (ok, detail) = verdicts(&out.report, &["importance_z"]);
    let mut norm_ok = true;
    let mut zs = Vec::new();
    for l in out.report.levels.iter().filter(|l| l.label.ends_with(",one")) {
        let z = (l.stats["rhs"] - 1.0) / l.stats["rhs_se"];
        norm_ok &= z.abs() <= Z;
        zs.push(format!("{}: E_P[LR] z={z:.2}", l.label));
    }
    Ok((ok && norm_ok && !zs.is_empty(), format!("{}; {detail}", zs.join(", "))))
}

// 7. Generator on |x|^2 and the martingale increments.
fn criterion_7() -> Verdicts {
    let mut exact = true;
    for d in [2usize, 3] {
        let want = (2 * d) as f64 / (2 * d + 1) as f64;
        for k in [1.0, 4.0, 16.0, 64.0, 256.0] {
            for x in [[0.0, 0.0, 0.0], [0.25, -1.5, 0.75], [3.0, 0.5, -2.25]] {
                exact &= a_k(&TestFn::square_norm(), k, &x[..d]) == want;
            }
        }
    }
    let k = 16u64;
    let mu = build_family(&FamilySpec::PointSpreadD2 { cap: 1 }).unwrap().generate(k);
    let psi = TestFn::smooth_bump(1.5);
    let horizon = 2 * k as usize;
    let gens: Vec<usize> = (0..horizon).step_by(4).collect();
    let rows: Vec<Vec<(Vec<f64>, f64)>> = (0..100_000u64)
        .into_par_iter()
        .map(|r| {
            let traj = brw_run(&mu, &OffspringLaw::PoissonUnit, horizon, StreamSeed::new(701, r), DEFAULT_GUARD).unwrap();
            let m = martingale_functional(&traj, &psi, k);
            gens.iter()
                .map(|&g| {
                    let x = traj.x(g);
                    let pair = x.pair_with(|s| {
                        let c = s.to_f64(2);
                        psi.eval(&[c[0] / 4.0, c[1] / 4.0])
                    }) / k as f64;
                    (vec![pair, x.total() as f64 / k as f64, g as f64 / k as f64], m[g + 1] - m[g])
                })
                .collect()
        })
        .collect();
    let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().flatten().unzip();
    let reg = ols_hc0(&xs, &ys).ok_or("singular design")?;
    let zs = reg.z();
    let worst = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    Ok((exact && worst <= Z, format!("A_k |x|^2 exact={exact}; increment regression on [1, <F X, psi>, mass, time]: z={zs:.2?}")))
}

// 8 and 10 share the threshold sweep.
fn criteria_8_10() -> (Verdicts, Verdicts) {
    match run_shipped("threshold_d2.toml") {
        Ok(out) => {
            let c8 = verdicts(&out.report, &["collisions_decreasing[alpha=0.5]", "discrepancy_decreasing[alpha=0.5]"]);
            let c10 = verdicts(&out.report, &["suppression_vanishing[alpha=0.25]", "suppression_bounded_away[alpha=0.5]"]);
            (Ok(c8), Ok(c10))
        }
        Err(e) => (Err(e.clone()), Err(e)),
    }
}

// 9. Local-time proxy in both dimensions.
fn criterion_9() -> Verdicts {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, d) in [("local_time_d2.toml", 2), ("local_time_d3.toml", 3)] {
        let out = run_shipped(name)?;
        let zero = if d == 2 { "0,0" } else { "0,0,0" };
        let ks: Vec<String> = ["0.5", "1"].iter().map(|t| format!("ks_non_increasing[t={t},x=({zero})]")).collect();
        let mut names = vec!["mean_zero", "variance_oracle"];
        names.extend(ks.iter().map(String::as_str));
        let (v, detail) = verdicts(&out.report, &names);
        // The variance oracle must have covered d=2, k=64, t=1/2.
        let covered = d != 2 || out.report.level("k=64,t=0.5,x=(0,0)").is_some_and(|l| l.stats.contains_key("variance_z"));
        ok &= v && covered;
        parts.push(format!("d={d}: {detail}"));
    }
    Ok((ok, parts.join(" | ")))
}

fn criterion_11() -> Verdicts {
    let out = run_shipped("occupation_d2.toml")?;
    Ok(verdicts(&out.report, &["r_non_increasing"]))
}

fn criterion_12() -> Verdicts {
    let names = ["lclt_bd", "p_diff", "green_bd", "dis_conv", "green_indc", "conv", "green_indc_b", "conv_b", "fg_central"];
    let mut ok = true;
    let mut parts = Vec::new();
    for f in ["bounds_d2.toml", "bounds_d3.toml"] {
        let out = run_shipped(f)?;
        let (v, _) = verdicts(&out.report, &names);
        ok &= v;
        let summary: Vec<String> = names.iter().map(|n| format!("{n}={}", out.report.check(n).map_or("MISSING", |c| c.verdict.label()))).collect();
        parts.push(format!("{f}: {}", summary.join(" ")));
    }
    Ok((ok, parts.join(" | ")))
}

// 13. Byte-identical CSV across re-runs and worker counts.
fn criterion_13() -> Verdicts {
    let cfgs = [
        "mode = \"local_time\"\nd = 2\nladder = [4, 16]\nreplicates = 2000\nks_resolution = 0.2\nseed = 5\n",
        "mode = \"local_time\"\nd = 3\nladder = [8]\nfamily = \"ball_bounded_d3\"\nreplicates = 500\nks_resolution = 0.2\nseed = 6\n",
        "mode = \"threshold_sweep\"\nd = 2\nladder = [100, 400]\nalphas = [0.25, 0.5]\nprobe_times = [0.5, 1.0]\nreplicates = 300\nseed = 7\n",
        "mode = \"occupation_time\"\nd = 2\nladder = [16, 64]\nreplicates = 300\nseed = 8\n",
        "mode = \"importance_battery\"\nd = 2\nladder = [5, 10]\nreplicates = 3000\nseed = 9\n",
        "mode = \"bounds_suite\"\nd = 2\ninequalities = [\"lclt_bd\", \"fg_central\"]\n",
    ];
    let mut ok = true;
    let mut files = 0;
    for text in cfgs {
        let mut base = ExperimentConfig::from_toml(text).map_err(|e| e.to_string())?;
        let mut runs = Vec::new();
        for w in [1usize, 3, 1] {
            base.workers = w;
            runs.push(run_config(&base, None).map_err(|e| e.to_string())?);
        }
        for r in &runs[1..] {
            ok &= r.csv == runs[0].csv && r.report.to_json() == runs[0].report.to_json();
        }
        files += runs[0].csv.len();
    }
    Ok((ok, format!("{} modes, {files} output files compared across 3 runs (workers 1, 3, 1)", cfgs.len())))
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(u32, &str, Verdicts)> = Vec::new();
    // ACCEPTANCE_ONLY=5,8 runs a subset while iterating on one criterion.
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let guard = |id: u32, f: &dyn Fn() -> Verdicts| -> Option<Verdicts> {
        wanted(id).then(|| catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into())))
    };
    let mut record = |id: u32, name: &'static str, v: Option<Verdicts>| {
        let Some(v) = v else {
            say(&format!("criterion {id:>2} SKIP {name}"));
            return;
        };
        let line = match &v {
            Ok((true, d)) => format!("criterion {id:>2} PASS {name}: {d}"),
            Ok((false, d)) => format!("criterion {id:>2} FAIL {name}: {d}"),
            Err(e) => format!("criterion {id:>2} FAIL {name}: error: {e}"),
        };
        say(&line);
        results.push((id, name, v));
    };
    record(1, "kernel exactness", guard(1, &criterion_1));
    record(2, "closed-form anchors", guard(2, &criterion_2));
    record(3, "mean identities vs Monte Carlo", guard(3, &criterion_3));
    record(4, "second moment vs Monte Carlo", guard(4, &criterion_4));
    record(5, "cumulant engines, enumeration and Monte Carlo", guard(5, &criterion_5));
    record(6, "likelihood normalisation and importance battery", guard(6, &criterion_6));
    record(7, "generator and martingale increments", guard(7, &criterion_7));
    let (c8, c10) = if wanted(8) || wanted(10) {
        let (a, b) = catch_unwind(criteria_8_10).unwrap_or_else(|_| (Err("panicked".into()), Err("panicked".into())));
        (wanted(8).then_some(a), wanted(10).then_some(b))
    } else {
        (None, None)
    };
    record(8, "coupling diagnostics", c8);
    record(9, "local-time convergence proxy", guard(9, &criterion_9));
    record(10, "threshold behaviour", c10);
    record(11, "occupation-time statistic", guard(11, &criterion_11));
    record(12, "bounds suite", guard(12, &criterion_12));
    record(13, "determinism", guard(13, &criterion_13));
    let failed: Vec<String> = results.iter().filter(|r| !matches!(r.2, Ok((true, _)))).map(|r| format!("{} ({})", r.0, r.1)).collect();
    say(&format!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len()));
    assert!(failed.is_empty(), "failing criteria: {}", failed.join(", "));
}
