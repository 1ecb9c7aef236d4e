use super::Convention;
use crate::brw::OffspringLaw;
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::BoxGrid;
use crate::lattice::{Site, WalkSpec};
use std::collections::BTreeMap;

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 5_000_000;

type Config = Vec<Site>;

/// Every multiset of `j` moves with its multinomial weight `j! / prod c_e! / (2d+1)^j`.
fn placements(moves: &[Site], j: usize) -> Vec<(Vec<Site>, f64)> {
    let k = moves.len();
    let mut out = Vec::new();
    let mut counts = vec![0usize; k];
    fn rec(i: usize, left: usize, counts: &mut Vec<usize>, moves: &[Site], j: usize, out: &mut Vec<(Vec<Site>, f64)>) {
        let k = moves.len();
        if i == k - 1 {
            counts[i] = left;
            let mut w = (1..=j).map(|v| v as f64).product::<f64>();
            let mut sites = Vec::with_capacity(j);
            for (e, &c) in counts.iter().enumerate() {
                w /= (1..=c).map(|v| v as f64).product::<f64>();
                sites.extend(std::iter::repeat_n(moves[e], c));
            }
            w /= (k as f64).powi(j as i32);
            out.push((sites, w));
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, moves, j, out);
        }
    }
    rec(0, j, &mut counts, moves, j, &mut out);
    out
}

/// `E^mu exp <occupation_n, psi>` by exhaustive enumeration of the
/// generation-by-generation configurations, for finite-support laws.
///
/// Configurations that coincide are merged, which is exact because the
/// future depends only on the present configuration.
pub fn brute_force_mgf(psi: &BoxGrid, n: usize, law: &OffspringLaw, mu: &LatticeField, convention: Convention, budget: u64) -> Result<f64> {
    let q = match law {
        OffspringLaw::Custom(q) => q,
        _ => return Err(Error::Param("enumeration needs a finite-support offspring law".into())),
    };
    if n == 0 {
        return Ok(1.0);
    }
    let d = mu.d();
    let moves: Vec<Site> = WalkSpec { d }.moves().iter().map(|m| Site::new(m[0], m[1], m[2])).collect();
    let table: Vec<Vec<(Vec<Site>, f64)>> = (0..q.len()).map(|j| placements(&moves, j)).collect();
    let score = |c: &Config| -> f64 { c.iter().map(|&s| psi.at(s)).sum::<f64>().exp() };

    let mut start = Vec::new();
    for (s, c) in mu.sorted() {
        start.extend(std::iter::repeat_n(s, c as usize));
    }
    let w0 = if convention == Convention::Gen0ToNMinus1 { score(&start) } else { 1.0 };
    let mut states: BTreeMap<Config, f64> = BTreeMap::new();
    states.insert(start, w0);
    let generations = match convention {
        Convention::Gen1ToN => n,
        Convention::Gen0ToNMinus1 => n - 1,
    };
    let mut work = 0u64;
    // All but the last transition are enumerated; the last one only enters
    // through E[exp <X_next, psi> | current], a product over particles since
    // each draws and places its children independently.
    for _ in 0..generations.saturating_sub(1) {
        let mut next: BTreeMap<Config, f64> = BTreeMap::new();
        for (cfg, w) in &states {
            // Offspring of each particle, combined one particle at a time.
            let mut partial: BTreeMap<Config, f64> = BTreeMap::new();
            partial.insert(Vec::new(), *w);
            for &parent in cfg {
                let mut grown: BTreeMap<Config, f64> = BTreeMap::new();
                for (kids, pw) in &partial {
                    for (j, &qj) in q.iter().enumerate() {
                        if qj == 0.0 {
                            continue;
                        }
                        for (offs, mw) in &table[j] {
                            work += 1;
                            if work > budget {
                                return Err(Error::Budget(budget));
                            }
                            let mut c = kids.clone();
                            c.extend(offs.iter().map(|&o| parent.offset(o)));
                            c.sort_unstable();
                            *grown.entry(c).or_insert(0.0) += pw * qj * mw;
                        }
                    }
                }
                partial = grown;
            }
            for (c, pw) in partial {
                let s = score(&c);
                *next.entry(c).or_insert(0.0) += pw * s;
            }
        }
        states = next;
    }
    if generations == 0 {
        return Ok(states.values().sum());
    }
    let child = |p: Site| -> f64 {
        let m = moves.iter().map(|&e| psi.at(p.offset(e)).exp()).sum::<f64>() / moves.len() as f64;
        q.iter().rev().fold(0.0, |acc, &qj| acc * m + qj)
    };
    let mut total = 0.0;
    for (cfg, w) in &states {
        work += cfg.len() as u64;
        if work > budget {
            return Err(Error::Budget(budget));
        }
        total += w * cfg.iter().map(|&p| child(p)).product::<f64>();
    }
    Ok(total)
}
