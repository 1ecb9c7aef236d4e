//! Deterministic scans estimating the constants in the kernel inequalities.
//!
//! Each suite evaluates `LHS / RHS` over a finite grid and reports the exact
//! maximum together with the point attaining it. Sums over time start at
//! `l = 1` because `phi_0` is not defined.

use super::gauss::phi_r2;
use super::{KernelStepper, KernelTable};
use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::lattice::WalkSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    LcltBd,
    DisConv,
    GreenBd,
    PDiff,
    PDiffAlpha,
    GreenIndc,
    Conv,
    GreenIndcB,
    ConvB,
    FgCentral,
}

impl Inequality {
    pub const ALL: [Inequality; 10] = [
        Inequality::LcltBd,
        Inequality::DisConv,
        Inequality::GreenBd,
        Inequality::PDiff,
        Inequality::PDiffAlpha,
        Inequality::GreenIndc,
        Inequality::Conv,
        Inequality::GreenIndcB,
        Inequality::ConvB,
        Inequality::FgCentral,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Inequality::LcltBd => "lclt_bd",
            Inequality::DisConv => "dis_conv",
            Inequality::GreenBd => "green_bd",
            Inequality::PDiff => "p_diff",
            Inequality::PDiffAlpha => "p_diff_alpha",
            Inequality::GreenIndc => "green_indc",
            Inequality::Conv => "conv",
            Inequality::GreenIndcB => "green_indc_b",
            Inequality::ConvB => "conv_b",
            Inequality::FgCentral => "fg_central",
        }
    }

    pub fn parse(s: &str) -> Option<Inequality> {
        Inequality::ALL.into_iter().find(|i| i.id() == s)
    }
}

/// Scan grid and constants for the bound suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub beta: f64,
    pub gamma: f64,
    /// Time ladder for the pointwise kernel bounds.
    pub n_ladder: Vec<usize>,
    /// Box radius (sup norm) for single-point scans.
    pub radius: i32,
    /// Box radius for the two-point scans of `p_diff`.
    pub pair_radius: i32,
    /// Time ladder for the F and J suites (values >= 2).
    pub fj_ladder: Vec<usize>,
    /// Box radius for the F and J suites.
    pub fj_radius: i32,
    pub h_pairs: Vec<(usize, usize)>,
    pub m_values: Vec<usize>,
    /// Scaling index, time and radius constant for `green_bd`.
    pub green_k: usize,
    pub green_t: f64,
    pub green_a: f64,
}

impl BoundParams {
    /// The standard scan used for regression baselines.
    pub fn standard(d: usize) -> BoundParams {
        if d == 2 {
            BoundParams {
                beta: 0.4,
                gamma: 0.25,
                n_ladder: vec![1, 2, 4, 8, 16, 32, 64],
                radius: 10,
                pair_radius: 6,
                fj_ladder: vec![2, 4, 8, 16],
                fj_radius: 3,
                h_pairs: vec![(1, 1), (1, 2), (2, 2), (2, 3)],
                m_values: vec![1, 2, 4],
                green_k: 400,
                green_t: 1.0,
                green_a: 1.0,
            }
        } else {
            BoundParams {
                beta: 0.4,
                gamma: 0.25,
                n_ladder: vec![1, 2, 4, 8, 16, 32],
                radius: 6,
                pair_radius: 3,
                fj_ladder: vec![2, 4, 8],
                fj_radius: 2,
                h_pairs: vec![(1, 1), (1, 2), (2, 2)],
                m_values: vec![1, 2, 4],
                green_k: 64,
                green_t: 1.0,
                green_a: 1.0,
            }
        }
    }

    /// Largest kernel step any suite needs from the table.
    pub fn table_horizon(&self) -> usize {
        let a = self.n_ladder.iter().copied().max().unwrap_or(0);
        let b = self.fj_ladder.iter().copied().max().unwrap_or(0);
        a.max(b)
    }
}

/// Where a ratio was evaluated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub n: usize,
    pub m: usize,
    pub h: (usize, usize),
    pub x: Vec<i32>,
    pub y: Vec<i32>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inequality: Inequality,
    pub d: usize,
    pub beta: f64,
    pub gamma: f64,
    pub n_range: (usize, usize),
    pub box_radius: i32,
    /// Exact maximum of `LHS / RHS` over the scan.
    pub constant: f64,
    pub witness: Witness,
    pub points: u64,
    /// First point with `RHS = 0 < LHS`, if any.
    pub zero_rhs: Option<Witness>,
    pub passed: bool,
}

struct Scan {
    best: f64,
    witness: Witness,
    zero: Option<Witness>,
    points: u64,
}

impl Scan {
    fn new() -> Scan {
        Scan { best: 0.0, witness: Witness::default(), zero: None, points: 0 }
    }

    #[inline]
    fn offer(&mut self, lhs: f64, rhs: f64, w: impl FnOnce() -> Witness) {
        self.points += 1;
        if lhs <= 0.0 {
            return;
        }
        if rhs <= 0.0 {
            if self.zero.is_none() {
                let mut wit = w();
                wit.lhs = lhs;
                wit.rhs = rhs;
                self.zero = Some(wit);
            }
            return;
        }
        let r = lhs / rhs;
        if r > self.best {
            self.best = r;
            let mut wit = w();
            wit.lhs = lhs;
            wit.rhs = rhs;
            self.witness = wit;
        }
    }
}

fn sq_scaled(c: [i32; 3], d: usize, s: f64) -> f64 {
    (0..d).map(|i| (c[i] as f64 * s).powi(2)).sum()
}

fn ball_offsets(d: usize, h: usize) -> Vec<[i32; 3]> {
    let r = h as i32;
    let zr = if d == 3 { r } else { 0 };
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -zr..=zr {
                if ((a * a + b * b + c * c) as f64) < (h * h) as f64 {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

fn box_points(d: usize, r: i32) -> Vec<[i32; 3]> {
    WalkSpec { d }.box_sites(r).into_iter().map(|s| s.coords()).collect()
}

fn v(c: [i32; 3], d: usize) -> Vec<i32> {
    c[..d].to_vec()
}

fn add(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Runs one suite. `table` must reach `params.table_horizon()`.
pub fn verify_bounds(table: &KernelTable, which: Inequality, params: &BoundParams) -> Result<BoundReport> {
    let d = table.d();
    if !(params.beta > 0.0 && params.beta < 1.0 / (d as f64).sqrt()) {
        return Err(Error::Param(format!("beta = {} outside (0, 1/sqrt(d))", params.beta)));
    }
    if !(params.gamma > 0.0 && params.gamma < 2.0 - d as f64 / 2.0) {
        return Err(Error::Param(format!("gamma = {} outside (0, 2 - d/2)", params.gamma)));
    }
    let need = match which {
        Inequality::LcltBd | Inequality::DisConv | Inequality::PDiff | Inequality::PDiffAlpha => {
            params.n_ladder.iter().copied().max().unwrap_or(0)
        }
        Inequality::Conv | Inequality::ConvB => params.fj_ladder.iter().copied().max().unwrap_or(0),
        _ => 0,
    };
    if need > table.n_max() {
        return Err(Error::Horizon { requested: need, available: table.n_max() });
    }
    let (scan, n_range, radius) = match which {
        Inequality::LcltBd => (lclt(table, params), ladder_range(&params.n_ladder), params.radius),
        Inequality::DisConv => (dis_conv(table, params), ladder_range(&params.n_ladder), params.radius),
        Inequality::GreenBd => {
            let kt = (params.green_k as f64 * params.green_t).floor() as usize;
            let r = params.green_a * (params.green_k as f64).sqrt();
            (green_bd(table.spec(), params), (1, kt), r.floor() as i32)
        }
        Inequality::PDiff => (p_diff(table, params, None), ladder_range(&params.n_ladder), params.pair_radius),
        Inequality::PDiffAlpha => {
            (p_diff(table, params, Some(params.gamma)), ladder_range(&params.n_ladder), params.pair_radius)
        }
        Inequality::GreenIndc => (green_indc(d, params), ladder_range(&params.fj_ladder), params.fj_radius),
        Inequality::Conv => (conv(table, params), ladder_range(&params.fj_ladder), params.fj_radius),
        Inequality::GreenIndcB => (green_indc_b(d, params), ladder_range(&params.fj_ladder), params.fj_radius),
        Inequality::ConvB => (conv_b(table, params), ladder_range(&params.fj_ladder), params.fj_radius),
        Inequality::FgCentral => (fg_central_suite(d, params), ladder_range(&params.n_ladder), params.radius),
    };
    let passed = scan.zero.is_none() && (which != Inequality::FgCentral || scan.best <= 1.0 + 1e-12);
    Ok(BoundReport {
        inequality: which,
        d,
        beta: params.beta,
        gamma: params.gamma,
        n_range,
        box_radius: radius,
        constant: scan.best,
        witness: scan.witness,
        points: scan.points,
        zero_rhs: scan.zero,
        passed,
    })
}

fn ladder_range(l: &[usize]) -> (usize, usize) {
    (l.iter().copied().min().unwrap_or(0), l.iter().copied().max().unwrap_or(0))
}

fn lclt(table: &KernelTable, p: &BoundParams) -> Scan {
    let d = table.d();
    let mut s = Scan::new();
    for &n in &p.n_ladder {
        let pn = &table.steps()[n];
        for x in box_points(d, p.radius.min(n as i32)) {
            let lhs = pn.get(x);
            let rhs = phi_r2(n as f64, sq_scaled(x, d, p.beta), d);
            s.offer(lhs, rhs, || Witness { n, x: v(x, d), ..Default::default() });
        }
    }
    s
}

/// Table of `phi_n(beta z)` on a centred box.
fn phi_grid(d: usize, n: f64, beta: f64, r: i32) -> BoxGrid {
    let mut g = BoxGrid::centered(d, r);
    for i in 0..g.len() {
        let c = g.coords_of(i);
        g.data[i] = phi_r2(n, sq_scaled(c, d, beta), d);
    }
    g
}

fn dis_conv(table: &KernelTable, p: &BoundParams) -> Scan {
    let d = table.d();
    let mut s = Scan::new();
    let m_top = p.n_ladder.iter().copied().max().unwrap_or(0) as i32;
    for &n in &p.n_ladder {
        let ph = phi_grid(d, n as f64, p.beta, m_top + p.radius);
        for &m in &p.n_ladder {
            let pm = &table.steps()[m];
            for x in box_points(d, p.radius) {
                let mut lhs = 0.0;
                for (y, w) in pm.iter() {
                    if w != 0.0 {
                        lhs += w * ph.get(sub(x, y));
                    }
                }
                let rhs = phi_r2((m + n) as f64, sq_scaled(x, d, p.beta / 2.0), d);
                s.offer(lhs, rhs, || Witness { n, m, x: v(x, d), ..Default::default() });
            }
        }
    }
    s
}

fn green_bd(spec: WalkSpec, p: &BoundParams) -> Scan {
    let d = spec.d;
    let kt = (p.green_k as f64 * p.green_t).floor() as usize;
    let rmax = p.green_a * (p.green_k as f64).sqrt();
    let r = rmax.floor() as i32;
    let mut lattice_sum = BoxGrid::centered(d, r);
    let mut gauss_sum = BoxGrid::centered(d, r);
    let mut st = KernelStepper::new(spec);
    for n in 1..=kt {
        st.step_capped(Some(r + (kt - n) as i32));
        for i in 0..lattice_sum.len() {
            let c = lattice_sum.coords_of(i);
            lattice_sum.data[i] += st.current().get(c);
            gauss_sum.data[i] += phi_r2(n as f64, sq_scaled(c, d, p.beta), d);
        }
    }
    let mut s = Scan::new();
    for i in 0..lattice_sum.len() {
        let c = lattice_sum.coords_of(i);
        if (sq_scaled(c, d, 1.0)).sqrt() > rmax {
            continue;
        }
        s.offer(gauss_sum.data[i], lattice_sum.data[i], || Witness { n: kt, x: v(c, d), ..Default::default() });
    }
    s
}

fn p_diff(table: &KernelTable, p: &BoundParams, alpha: Option<f64>) -> Scan {
    let d = table.d();
    let pts = box_points(d, p.pair_radius);
    let mut s = Scan::new();
    for &n in &p.n_ladder {
        let pn = &table.steps()[n];
        let vals: Vec<f64> = pts.iter().map(|&x| pn.get(x)).collect();
        let phis: Vec<f64> = pts.iter().map(|&x| phi_r2(n as f64, sq_scaled(x, d, p.beta), d)).collect();
        let sn = (n as f64).sqrt();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let lhs = (vals[i] - vals[j]).abs();
                let dist = sq_scaled(sub(pts[i], pts[j]), d, 1.0).sqrt() / sn;
                let factor = match alpha {
                    None => dist.min(1.0),
                    Some(g) => dist.powf(g),
                };
                let rhs = factor * (phis[i] + phis[j]);
                s.offer(lhs, rhs, || Witness { n, x: v(pts[i], d), y: v(pts[j], d), ..Default::default() });
            }
        }
    }
    s
}

/// `S_{n,h}(x; beta) = sum_{|rho|<h} sum_{1<=l<n} weight(l) phi_l(beta (x + rho))`
/// on a centred box, for every `n` in `1..=n_top`.
struct SumTables {
    /// `by_n[n][h-1]` grid.
    by_n: Vec<Vec<BoxGrid>>,
}

impl SumTables {
    fn build(d: usize, n_top: usize, h_top: usize, beta: f64, r: i32, weight: impl Fn(usize) -> f64, window: Option<usize>) -> SumTables {
        let rr = r + h_top as i32;
        let mut by_n = Vec::with_capacity(n_top + 1);
        for n in 0..=n_top {
            let mut t = BoxGrid::centered(d, rr);
            let (l0, l1) = match window {
                None => (1, n),
                Some(m) => (m, m + n),
            };
            for l in l0.max(1)..l1 {
                let w = weight(l);
                for i in 0..t.len() {
                    let c = t.coords_of(i);
                    t.data[i] += w * phi_r2(l as f64, sq_scaled(c, d, beta), d);
                }
            }
            let mut per_h = Vec::with_capacity(h_top);
            for h in 1..=h_top {
                let offs = ball_offsets(d, h);
                let mut g = BoxGrid::centered(d, r);
                for i in 0..g.len() {
                    let c = g.coords_of(i);
                    g.data[i] = offs.iter().map(|&o| t.get(add(c, o))).sum();
                }
                per_h.push(g);
            }
            by_n.push(per_h);
        }
        SumTables { by_n }
    }

    #[inline]
    fn get(&self, n: usize, h: usize, x: [i32; 3]) -> f64 {
        self.by_n[n][h - 1].get(x)
    }
}

fn h_top(p: &BoundParams) -> usize {
    p.h_pairs.iter().map(|&(a, b)| a + b - 1).max().unwrap_or(1)
}

fn green_indc(d: usize, p: &BoundParams) -> Scan {
    let eta = 2.0 - (d as f64 + p.gamma) / 2.0;
    let n_top = p.fj_ladder.iter().copied().max().unwrap_or(0);
    let g = p.gamma;
    let tab = SumTables::build(d, n_top, h_top(p), p.beta, p.fj_radius, |l| (l as f64).powf(-g / 2.0), None);
    let pts = box_points(d, p.fj_radius);
    let mut s = Scan::new();
    for &n in &p.fj_ladder {
        for &(h1, h2) in &p.h_pairs {
            let h3 = h1 + h2 - 1;
            for &x in &pts {
                for &y in &pts {
                    let f1 = tab.get(n, h1, x) + tab.get(n, h1, y);
                    let f2 = tab.get(n, h2, x) + tab.get(n, h2, y);
                    let f3 = tab.get(n, h3, x) + tab.get(n, h3, y);
                    s.offer(f1 * f2, (n as f64).powf(eta) * f3, || Witness {
                        n,
                        h: (h1, h2),
                        x: v(x, d),
                        y: v(y, d),
                        ..Default::default()
                    });
                }
            }
        }
    }
    s
}

fn conv(table: &KernelTable, p: &BoundParams) -> Scan {
    let d = table.d();
    let eta = 2.0 - (d as f64 + p.gamma) / 2.0;
    let n_top = p.fj_ladder.iter().copied().max().unwrap_or(0);
    let g = p.gamma;
    let reach = p.fj_radius + n_top as i32;
    let tab = SumTables::build(d, n_top, h_top(p), p.beta, reach, |l| (l as f64).powf(-g / 2.0), None);
    let half = SumTables::build(d, n_top, h_top(p), p.beta / 2.0, p.fj_radius, |l| (l as f64).powf(-g / 2.0), None);
    let pts = box_points(d, p.fj_radius);
    let mut s = Scan::new();
    for &n in &p.fj_ladder {
        for &(h1, h2) in &p.h_pairs {
            let h3 = h1 + h2 - 1;
            for &x in &pts {
                for &y in &pts {
                    let mut lhs = 0.0;
                    for i in 0..n {
                        for (z, w) in table.steps()[i].iter() {
                            if w == 0.0 {
                                continue;
                            }
                            let (xz, yz) = (sub(x, z), sub(y, z));
                            let f1 = tab.get(n - i, h1, xz) + tab.get(n - i, h1, yz);
                            let f2 = tab.get(n - i, h2, xz) + tab.get(n - i, h2, yz);
                            lhs += w * f1 * f2;
                        }
                    }
                    let rhs = (n as f64).powf(eta) * (half.get(n, h3, x) + half.get(n, h3, y));
                    s.offer(lhs, rhs, || Witness { n, h: (h1, h2), x: v(x, d), y: v(y, d), ..Default::default() });
                }
            }
        }
    }
    s
}

fn green_indc_b(d: usize, p: &BoundParams) -> Scan {
    let eta = 2.0 - d as f64 / 2.0;
    let n_top = p.fj_ladder.iter().copied().max().unwrap_or(0);
    let pts = box_points(d, p.fj_radius);
    let mut s = Scan::new();
    for &m in &p.m_values {
        let tab = SumTables::build(d, n_top, h_top(p), p.beta, p.fj_radius, |_| 1.0, Some(m));
        for &n in &p.fj_ladder {
            for &(h1, h2) in &p.h_pairs {
                let h3 = h1 + h2 - 1;
                for &x in &pts {
                    let j1 = tab.get(n, h1, x);
                    let j2 = tab.get(n, h2, x);
                    let j3 = tab.get(n, h3, x);
                    s.offer(j1 * j2, (n as f64).powf(eta) * j3, || Witness {
                        n,
                        m,
                        h: (h1, h2),
                        x: v(x, d),
                        ..Default::default()
                    });
                }
            }
        }
    }
    s
}

fn conv_b(table: &KernelTable, p: &BoundParams) -> Scan {
    let d = table.d();
    let eta = 2.0 - d as f64 / 2.0;
    let n_top = p.fj_ladder.iter().copied().max().unwrap_or(0);
    let reach = p.fj_radius + n_top as i32;
    let pts = box_points(d, p.fj_radius);
    let mut s = Scan::new();
    for &m in &p.m_values {
        let tab = SumTables::build(d, n_top, h_top(p), p.beta, reach, |_| 1.0, Some(m));
        let half = SumTables::build(d, n_top, h_top(p), p.beta / 2.0, p.fj_radius, |_| 1.0, Some(m));
        for &n in &p.fj_ladder {
            for &(h1, h2) in &p.h_pairs {
                let h3 = h1 + h2 - 1;
                for &x in &pts {
                    let mut lhs = 0.0;
                    for i in 0..n {
                        for (z, w) in table.steps()[i].iter() {
                            if w != 0.0 {
                                let xz = sub(x, z);
                                lhs += w * tab.get(n - i, h1, xz) * tab.get(n - i, h2, xz);
                            }
                        }
                    }
                    let rhs = (n as f64).powf(eta) * half.get(n, h3, x);
                    s.offer(lhs, rhs, || Witness { n, m, h: (h1, h2), x: v(x, d), ..Default::default() });
                }
            }
        }
    }
    s
}

/// Checks `sum_y f(y) g(x - y) <= sum_y f(y) g(y)` for every `x` in `xs`.
/// Returns the largest ratio of the two sides and the `x` attaining it.
pub fn fg_central(f: &BoxGrid, g: impl Fn([i32; 3]) -> f64, xs: &[[i32; 3]]) -> (f64, [i32; 3]) {
    let centre: f64 = f.iter().map(|(y, fy)| fy * g(y)).sum();
    let mut best = (0.0, [0; 3]);
    for &x in xs {
        let lhs: f64 = f.iter().filter(|p| p.1 != 0.0).map(|(y, fy)| fy * g(sub(x, y))).sum();
        let r = if centre > 0.0 { lhs / centre } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        if r > best.0 {
            best = (r, x);
        }
    }
    best
}

fn fg_central_suite(d: usize, p: &BoundParams) -> Scan {
    let xs = box_points(d, p.radius);
    let mut s = Scan::new();
    for rf in 0..=3i32 {
        // f: a radially decreasing cone of radius rf.
        let mut f = BoxGrid::centered(d, rf);
        for i in 0..f.len() {
            let c = f.coords_of(i);
            let r = sq_scaled(c, d, 1.0).sqrt();
            f.data[i] = (rf as f64 + 1.0 - r).max(0.0);
        }
        for &n in &p.n_ladder {
            let g = |c: [i32; 3]| phi_r2(n as f64, sq_scaled(c, d, p.beta), d);
            let centre: f64 = f.iter().map(|(y, fy)| fy * g(y)).sum();
            for &x in &xs {
                let lhs: f64 = f.iter().map(|(y, fy)| fy * g(sub(x, y))).sum();
                s.offer(lhs, centre, || Witness { n, m: rf as usize, x: v(x, d), ..Default::default() });
            }
        }
    }
    s
}
