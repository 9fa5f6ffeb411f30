use serde::{Deserialize, Serialize};

use super::eval::Evaluation;
use crate::hw::TileParams;

/// One non-dominated objective pair with every configuration that attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub latency_s: f64,
    /// `P_n * P_m`.
    pub parallelism: u64,
    pub tiles: Vec<TileParams>,
}

impl ParetoPoint {
    /// Lower-or-equal latency and higher-or-equal parallelism, strictly better in one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        dominates((self.latency_s, self.parallelism), (other.latency_s, other.parallelism))
    }
}

fn dominates(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0 <= b.0 && a.1 >= b.1 && (a.0 < b.0 || a.1 > b.1)
}

/// Non-dominated set over (latency ascending, parallelism descending).
///
/// Infeasible evaluations are ignored. Configurations with identical
/// objectives are grouped; the result is sorted by latency.
pub fn pareto_front(evals: &[Evaluation]) -> Vec<ParetoPoint> {
    let mut pts: Vec<(f64, u64, TileParams)> = evals
        .iter()
        .filter_map(|e| e.latency.seconds().map(|l| (l, e.tiles.parallelism(), e.tiles)))
        .collect();
    // latency ascending, parallelism descending
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    pts.dedup_by(|a, b| a.2 == b.2);

    let mut front: Vec<ParetoPoint> = Vec::new();
    let mut best_par: Option<u64> = None;
    for (lat, par, tiles) in pts {
        if let Some(last) = front.last_mut() {
            if last.latency_s == lat && last.parallelism == par {
                last.tiles.push(tiles);
                continue;
            }
        }
        // Anything earlier has lower-or-equal latency; this point survives only
        // by strictly exceeding every earlier parallelism.
        if best_par.is_none_or(|b| par > b) {
            front.push(ParetoPoint { latency_s: lat, parallelism: par, tiles: vec![tiles] });
            best_par = Some(par);
        }
    }
    front
}

/// Index pairs `(i, j)` where point `i` dominates point `j`. Empty for a valid front.
pub fn domination_violations(front: &[ParetoPoint]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in front.iter().enumerate() {
        for (j, b) in front.iter().enumerate() {
            if i != j && a.dominates(b) {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::Latency;

    fn ev(pn: u64, lat: Option<f64>) -> Evaluation {
        Evaluation {
            tiles: TileParams::new(pn, 1, 1, 64),
            latency: lat.map_or(Latency::Infeasible, Latency::Feasible),
            from_cache: false,
        }
    }

    #[test]
    fn textbook_front() {
        let evals = [
            ev(1, Some(10.0)),
            ev(2, Some(8.0)),
            ev(3, Some(9.0)),
            ev(4, Some(12.0)),
            ev(5, Some(15.0)),
            ev(6, None),
        ];
        let front = pareto_front(&evals);
        let pairs: Vec<_> = front.iter().map(|p| (p.latency_s, p.parallelism)).collect();
        assert_eq!(pairs, vec![(8.0, 2), (9.0, 3), (12.0, 4), (15.0, 5)]);
        assert!(domination_violations(&front).is_empty());
    }

    #[test]
    fn ties_are_grouped() {
        let mut a = ev(2, Some(5.0));
        let mut b = ev(2, Some(5.0));
        a.tiles.tn = 3;
        b.tiles.tn = 7;
        let front = pareto_front(&[b, a, ev(1, Some(6.0))]);
        assert_eq!(front.len(), 1);
        assert_eq!(front[0].tiles.len(), 2);
    }

    #[test]
    fn violation_check_flags_dominated() {
        let front = vec![
            ParetoPoint { latency_s: 1.0, parallelism: 4, tiles: vec![] },
            ParetoPoint { latency_s: 2.0, parallelism: 3, tiles: vec![] },
        ];
        assert_eq!(domination_violations(&front), vec![(0, 1)]);
    }
}
