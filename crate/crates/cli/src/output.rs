//! CSV writers. Reals use 17 significant digits so they re-parse to the
//! same bits.

use nllr_core::harness::AggregateResult;

pub const TRAJECTORY_HEADER: &str = "sweep_value,trial,iter,error,elapsed_ms";
pub const SUMMARY_HEADER: &str = "sweep_value,trials,failures,mean_final_error,median_final_error,std_final_error";
pub const PROBE_HEADER: &str = "dist,residual";

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per recorded iteration of every successful trial. The
/// `elapsed_ms` column stays empty unless `timing` is set, so repeated runs
/// produce identical bytes.
pub fn trajectory_csv(res: &AggregateResult, timing: bool) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for p in &res.points {
        let sv = real(p.sweep_value);
        for r in &p.records {
            let Some(t) = &r.trajectory else { continue };
            for (k, (&it, &e)) in t.iters.iter().zip(&t.errors).enumerate() {
                let elapsed = if timing { real(t.elapsed_ms[k]) } else { String::new() };
                out.push_str(&format!("{sv},{},{it},{},{elapsed}\n", r.trial, real(e)));
            }
        }
    }
    out
}

pub fn summary_csv(res: &AggregateResult) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for p in &res.points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            real(p.sweep_value),
            p.trials,
            p.failures,
            real(p.mean_final_error),
            real(p.median_final_error),
            real(p.std_final_error)
        ));
    }
    out
}

pub fn probe_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from(PROBE_HEADER);
    out.push('\n');
    for (d, r) in pairs {
        out.push_str(&format!("{},{}\n", real(*d), real(*r)));
    }
    out
}
