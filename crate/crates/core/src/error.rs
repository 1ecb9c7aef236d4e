use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel table d={d} n_max={n_max} needs {needed} bytes, budget is {budget}")]
    Capacity {
        d: usize,
        n_max: usize,
        needed: u64,
        budget: u64,
    },
    #[error("requested horizon {requested} exceeds available horizon {available}")]
    Horizon { requested: usize, available: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("population {population} exceeds explosion guard {limit} at step {step}")]
    Explosion {
        population: u64,
        limit: u64,
        step: usize,
    },
    #[error("divergence guard tripped: |nu| = {value} > {ceiling} at step {step}")]
    Divergence {
        value: f64,
        ceiling: f64,
        step: usize,
    },
    #[error("enumeration budget of {0} tree states exceeded")]
    Budget(u64),
    #[error("probability-zero path: {y} arrivals at {site:?} (t={t}) with zero intensity")]
    ImpossiblePath { t: usize, site: [i32; 3], y: u64 },
    #[error("cache format: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
