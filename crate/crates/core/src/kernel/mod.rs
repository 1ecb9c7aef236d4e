//! Transition probabilities `P_n` and Green's functions `G_n = sum_{i<n} P_i`
//! of the lazy nearest-neighbour walk.

pub mod bounds;
pub mod cache;
pub mod gauss;
pub mod rescaled;

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::BoxGrid;
use crate::lattice::{Site, WalkSpec};

/// Default memory budget for a full [`KernelTable`].
pub const DEFAULT_BUDGET_BYTES: u64 = 2 << 30;

/// Streams `P_0, P_1, ...` keeping only the current step.
///
/// The box is trimmed of exactly-zero outer shells (far tails underflow), and
/// may be cropped to a radius cap when only a light cone is needed.
#[derive(Clone, Debug)]
pub struct KernelStepper {
    spec: WalkSpec,
    n: usize,
    cur: BoxGrid,
}

impl KernelStepper {
    pub fn new(spec: WalkSpec) -> KernelStepper {
        KernelStepper { spec, n: 0, cur: BoxGrid::delta(spec.d, 1.0) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn current(&self) -> &BoxGrid {
        &self.cur
    }

    pub fn spec(&self) -> WalkSpec {
        self.spec
    }

    pub fn step(&mut self) {
        self.step_capped(None);
    }

    /// Advances one step; values beyond radius `cap` are discarded afterwards.
    pub fn step_capped(&mut self, cap: Option<i32>) {
        let next = self.cur.stencil_step();
        self.cur = next.trimmed_centered(cap);
        self.n += 1;
    }
}

fn table_bytes(d: usize, n_max: usize) -> u64 {
    (0..=n_max as u64).map(|i| (2 * i + 1).pow(d as u32) * 8).sum()
}

/// All of `P_0..=P_{n_max}`, each on the box `|x|_inf <= i` (or smaller where
/// the tail is exactly zero).
#[derive(Clone, Debug)]
pub struct KernelTable {
    spec: WalkSpec,
    steps: Vec<BoxGrid>,
}

impl KernelTable {
    pub fn build(spec: WalkSpec, n_max: usize) -> Result<KernelTable> {
        KernelTable::build_with_budget(spec, n_max, DEFAULT_BUDGET_BYTES)
    }

    pub fn build_with_budget(spec: WalkSpec, n_max: usize, budget: u64) -> Result<KernelTable> {
        let needed = table_bytes(spec.d, n_max);
        if needed > budget {
            return Err(Error::Capacity { d: spec.d, n_max, needed, budget });
        }
        let mut st = KernelStepper::new(spec);
        let mut steps = Vec::with_capacity(n_max + 1);
        steps.push(st.current().clone());
        for _ in 0..n_max {
            st.step();
            steps.push(st.current().clone());
        }
        Ok(KernelTable { spec, steps })
    }

    pub(crate) fn from_steps(spec: WalkSpec, steps: Vec<BoxGrid>) -> KernelTable {
        KernelTable { spec, steps }
    }

    pub fn spec(&self) -> WalkSpec {
        self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn n_max(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn steps(&self) -> &[BoxGrid] {
        &self.steps
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.n_max() {
            Err(Error::Horizon { requested: n, available: self.n_max() })
        } else {
            Ok(())
        }
    }

    /// `P_i` as a grid.
    pub fn p(&self, i: usize) -> Result<&BoxGrid> {
        self.check(i)?;
        Ok(&self.steps[i])
    }

    /// `P_i(x)`; zero outside the support.
    pub fn prob(&self, i: usize, x: Site) -> f64 {
        self.steps[i].at(x)
    }

    /// `G_n = sum_{i<n} P_i` on the box of radius `n - 1` (`n <= n_max + 1`).
    pub fn green(&self, n: usize) -> Result<BoxGrid> {
        if n > self.n_max() + 1 {
            return Err(Error::Horizon { requested: n, available: self.n_max() + 1 });
        }
        if n == 0 {
            return Ok(BoxGrid::centered(self.d(), 0));
        }
        let mut g = BoxGrid::centered(self.d(), n as i32 - 1);
        for p in &self.steps[..n] {
            for (c, v) in p.iter() {
                g.add(c, v);
            }
        }
        Ok(g)
    }

    /// `G_n(x)` computed directly.
    pub fn green_at(&self, n: usize, x: Site) -> Result<f64> {
        if n > self.n_max() + 1 {
            return Err(Error::Horizon { requested: n, available: self.n_max() + 1 });
        }
        Ok(self.steps[..n].iter().map(|p| p.at(x)).sum())
    }

    /// `(mu * P_n)` on the bounding box of `supp(mu)` fattened by `n`.
    pub fn mu_convolve_p(&self, mu: &LatticeField, n: usize) -> Result<BoxGrid> {
        Ok(convolve_field(mu, self.p(n)?))
    }
}

/// `(mu * g)(x) = sum_y mu(y) g(x - y)`.
pub fn convolve_field(mu: &LatticeField, g: &BoxGrid) -> BoxGrid {
    if mu.is_empty() {
        return BoxGrid::zeros(g.d, [0; 3], [1, 1, 1]);
    }
    mu.to_grid().convolve(g)
}

/// `(mu * G_n)(x)` on `supp(mu)` plus the box of radius `n`.
pub fn green_convolve(table: &KernelTable, mu: &LatticeField, n: usize) -> Result<BoxGrid> {
    Ok(convolve_field(mu, &table.green(n)?))
}

/// `mu * G` evaluated at a real time `t` and point `x` by linear interpolation
/// in `t` between integer horizons and multilinear interpolation in `x`.
pub fn green_convolve_interp(table: &KernelTable, mu: &LatticeField, t: f64, x: &[f64]) -> Result<f64> {
    let n0 = t.floor() as usize;
    let w = t - n0 as f64;
    let a = green_convolve(table, mu, n0)?.interp(x);
    if w == 0.0 {
        return Ok(a);
    }
    let b = green_convolve(table, mu, n0 + 1)?.interp(x);
    Ok((1.0 - w) * a + w * b)
}

/// Green's functions `G_n` for a set of horizons, optionally stored only on
/// `|x|_inf <= radius`.
///
/// With a radius the walk is propagated only inside the light cone that can
/// still influence the stored box, which is exact and keeps three-dimensional
/// horizons in the hundreds affordable.
#[derive(Clone, Debug)]
pub struct GreenTable {
    spec: WalkSpec,
    ns: Vec<usize>,
    radius: Option<i32>,
    grids: Vec<BoxGrid>,
}

impl GreenTable {
    pub fn build(spec: WalkSpec, ns: &[usize], radius: Option<i32>) -> GreenTable {
        let mut ns: Vec<usize> = ns.to_vec();
        ns.sort_unstable();
        ns.dedup();
        let n_top = ns.last().copied().unwrap_or(0);
        let store_r = |n: usize| -> i32 {
            let full = n.saturating_sub(1) as i32;
            radius.map_or(full, |r| r.min(full))
        };
        let mut grids = Vec::with_capacity(ns.len());
        let mut acc = BoxGrid::centered(spec.d, store_r(n_top));
        let mut st = KernelStepper::new(spec);
        let mut next = 0;
        for i in 0..=n_top {
            while next < ns.len() && ns[next] == i {
                let r = store_r(i);
                let e = (2 * r + 1) as usize;
                grids.push(acc.resized([-r, -r, -r], [e, e, e]));
                next += 1;
            }
            if i == n_top {
                break;
            }
            for (c, v) in st.current().iter() {
                if let Some(j) = acc.index(c) {
                    acc.data[j] += v;
                }
            }
            let cap = radius.map(|r| r + (n_top - i - 1) as i32);
            st.step_capped(cap);
        }
        GreenTable { spec, ns, radius, grids }
    }

    pub fn spec(&self) -> WalkSpec {
        self.spec
    }

    pub fn horizons(&self) -> &[usize] {
        &self.ns
    }

    pub fn radius(&self) -> Option<i32> {
        self.radius
    }

    pub fn get(&self, n: usize) -> Result<&BoxGrid> {
        match self.ns.binary_search(&n) {
            Ok(i) => Ok(&self.grids[i]),
            Err(_) => Err(Error::Horizon { requested: n, available: self.ns.last().copied().unwrap_or(0) }),
        }
    }

    /// `(mu * G_n)(x)` at one site. Errors if the stored radius is too small.
    pub fn mu_green_at(&self, mu: &LatticeField, n: usize, x: Site) -> Result<f64> {
        let g = self.get(n)?;
        let xc = x.coords();
        let r = (g.ext[0] as i32 - 1) / 2;
        let full = n.saturating_sub(1) as i32;
        let mut acc = 0.0;
        for (y, m) in mu.sorted() {
            let yc = y.coords();
            let z = [xc[0] - yc[0], xc[1] - yc[1], xc[2] - yc[2]];
            let zi = z.iter().map(|c| c.abs()).max().unwrap();
            if zi > r && zi <= full {
                return Err(Error::Domain(format!("offset {z:?} beyond stored Green radius {r}")));
            }
            acc += m as f64 * g.get(z);
        }
        Ok(acc)
    }
}
