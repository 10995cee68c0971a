use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub mann_residual: f64,
    /// `‖F_j(v_j) − ⟨x⟩‖` for sensor, data and image agents.
    pub gaps: [f64; 3],
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mann_residual).collect()
    }

    pub const CSV_HEADER: &'static str = "iter,mann_residual,gap_s,gap_d,gap_i,psnr";

    /// CSV with header `iter,mann_residual,gap_s,gap_d,gap_i,psnr`; the psnr
    /// column is empty without a ground truth.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let psnr = r.psnr.map(|p| format!("{p:e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                r.iter, r.mann_residual, r.gaps[0], r.gaps[1], r.gaps[2], psnr
            );
        }
        out
    }
}
