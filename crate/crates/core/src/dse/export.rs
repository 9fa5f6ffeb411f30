use std::io::Write;

use super::eval::Evaluation;
use super::pareto::ParetoPoint;
use super::DseError;

/// Writes one row per evaluation: `pn,pm,tn,tm,feasible,latency_s,from_cache`.
pub fn evaluations_to_csv<W: Write>(evals: &[Evaluation], out: W) -> Result<(), DseError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pn", "pm", "tn", "tm", "feasible", "latency_s", "from_cache"])?;
    for e in evals {
        let t = e.tiles;
        w.write_record([
            t.pn.to_string(),
            t.pm.to_string(),
            t.tn.to_string(),
            t.tm.to_string(),
            e.latency.is_feasible().to_string(),
            e.latency.seconds().map(|s| format!("{s:e}")).unwrap_or_default(),
            e.from_cache.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per configuration on the front.
pub fn pareto_to_csv<W: Write>(front: &[ParetoPoint], out: W) -> Result<(), DseError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["latency_s", "parallelism", "pn", "pm", "tn", "tm"])?;
    for p in front {
        for t in &p.tiles {
            w.write_record([
                format!("{:e}", p.latency_s),
                p.parallelism.to_string(),
                t.pn.to_string(),
                t.pm.to_string(),
                t.tn.to_string(),
                t.tm.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
