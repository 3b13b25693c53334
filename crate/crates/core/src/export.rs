//! CSV and JSON dumps.
//!
//! Floats are written with `Display`, which gives the shortest decimal that
//! parses back to the same value, so dumps are stable and round-trip.

use std::io::{self, Write};

use serde::Serialize;

use crate::boundary::BoundaryOutcome;
use crate::partition::TimePartition;
use crate::scalar::Real;
use crate::surface::ValueSurface;

/// Marker line written instead of boundary rows when there is no boundary.
pub const NO_BOUNDARY_MARKER: &str = "# no boundary (q = 0)";

/// `n,t_n,dt_n,sigma_n,r_n,q_n,rho_n,eta_n`, one row per step.
pub fn write_partition_csv<T: Real, W: Write>(
    out: &mut W,
    partition: &TimePartition<T>,
) -> io::Result<()> {
    writeln!(out, "n,t_n,dt_n,sigma_n,r_n,q_n,rho_n,eta_n")?;
    for (n, (s, t)) in partition.steps().iter().zip(partition.nodes()).enumerate() {
        writeln!(
            out,
            "{n},{t},{},{},{},{},{},{}",
            s.dt, s.sigma, s.r, s.q, s.rho, s.eta
        )?;
    }
    Ok(())
}

/// `n,t_n,j,x_j,S_j,V,is_exercise` for every stored node.
///
/// `x_j` is the log price `ln S0 + j dx`. Needs a fully stored surface.
pub fn write_surface_csv<T: Real, S: ValueSurface<T> + ?Sized, W: Write>(
    out: &mut W,
    sol: &S,
) -> io::Result<()> {
    if !sol.has_surface() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "surface dump needs a solution with full storage",
        ));
    }
    writeln!(out, "n,t_n,j,x_j,S_j,V,is_exercise")?;
    let nodes = sol.partition().nodes();
    for (n, &t) in nodes.iter().enumerate().take(sol.levels()) {
        let Some(range) = sol.index_range(n) else {
            continue;
        };
        for j in range {
            let Some(v) = sol.value(n, j) else { continue };
            let ex = sol.is_exercise(n, j).unwrap_or(false);
            writeln!(
                out,
                "{n},{t},{j},{},{},{v},{}",
                sol.log_price(j),
                sol.node_price(j),
                u8::from(ex)
            )?;
        }
    }
    Ok(())
}

/// `t,x_boundary,S_boundary` in increasing time, or the marker line alone.
pub fn write_boundary_csv<T: Real, W: Write>(
    out: &mut W,
    outcome: &BoundaryOutcome<T>,
) -> io::Result<()> {
    match outcome.boundary() {
        None => writeln!(out, "{NO_BOUNDARY_MARKER}"),
        Some(b) => {
            writeln!(out, "t,x_boundary,S_boundary")?;
            for node in &b.nodes {
                writeln!(out, "{},{},{}", node.time, node.log_price, node.price)?;
            }
            Ok(())
        }
    }
}

/// Summary of one solve, written next to the CSV dumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub engine: String,
    pub price: f64,
    pub dx: f64,
    pub alpha: f64,
    /// Number of time steps `N`.
    pub steps: usize,
    /// `T - t_N`.
    pub gap: f64,
    pub snapped: bool,
    /// Order of the grid's symmetry residual; absent for the tree.
    pub delta: Option<u32>,
    /// Truncation half-width `W`; absent for the tree.
    pub half_width: Option<f64>,
}

impl RunMetadata {
    pub fn from_solved(sol: &crate::analysis::Solved) -> Self {
        let p = sol.partition();
        Self {
            engine: sol.engine().to_string(),
            price: sol.root(),
            dx: p.dx(),
            alpha: p.alpha(),
            steps: p.len(),
            gap: p.gap(),
            snapped: p.is_snapped(),
            delta: sol.delta(),
            half_width: sol.as_grid().map(|g| g.half_width()),
        }
    }
}
