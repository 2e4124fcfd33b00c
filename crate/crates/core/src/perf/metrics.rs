use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::RankTiming;

/// A ratio that may be infinite (no denominator work at all) or undefined.
///
/// Serialized as a JSON number, the string `"inf"`, or `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
    Undefined,
}

impl Ratio {
    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Finite(v) => Some(v),
            Ratio::Infinite => Some(f64::INFINITY),
            Ratio::Undefined => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(v) => write!(f, "{v:.3}"),
            Ratio::Infinite => f.write_str("inf"),
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(v) => s.serialize_f64(*v),
            Ratio::Infinite => s.serialize_str("inf"),
            Ratio::Undefined => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
            Null(()),
        }
        match Option::<Repr>::deserialize(d)? {
            None | Some(Repr::Null(())) => Ok(Ratio::Undefined),
            Some(Repr::Num(v)) => Ok(Ratio::Finite(v)),
            Some(Repr::Str(s)) if s == "inf" => Ok(Ratio::Infinite),
            Some(Repr::Str(s)) => Err(serde::de::Error::custom(format!("bad ratio '{s}'"))),
        }
    }
}

/// Total time to solution: the slowest rank's `t_n`.
pub fn total_time(timings: &[RankTiming]) -> Result<f64> {
    timings
        .iter()
        .map(|t| t.t_n)
        .reduce(f64::max)
        .ok_or_else(|| Error::invalid("total time of an empty rank set"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Speedup {
    pub n_workers: usize,
    pub t_total: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

/// Strong-scaling speed-up `t_serial / t_total(N)` and efficiency `S / N`.
pub fn speedup_efficiency(t_serial: f64, points: &[(usize, f64)]) -> Result<Vec<Speedup>> {
    if !(t_serial > 0.0) {
        return Err(Error::invalid(format!("serial time must be positive, got {t_serial}")));
    }
    points
        .iter()
        .map(|&(n, t_total)| {
            if !(t_total > 0.0) {
                return Err(Error::invalid(format!("t_total({n}) must be positive, got {t_total}")));
            }
            if n == 0 {
                return Err(Error::invalid("worker count must be at least 1"));
            }
            let speedup = t_serial / t_total;
            Ok(Speedup {
                n_workers: n,
                t_total,
                speedup,
                efficiency: speedup / n as f64,
            })
        })
        .collect()
}

/// Serial compute-to-read-I/O ratio. No read time at all gives
/// [`Ratio::Infinite`].
pub fn ratio_comp_io(t_comp: f64, t_io: f64) -> Result<Ratio> {
    if !(t_comp >= 0.0) || !(t_io >= 0.0) {
        return Err(Error::invalid(format!("times must be non-negative: comp {t_comp}, io {t_io}")));
    }
    Ok(if t_io == 0.0 {
        Ratio::Infinite
    } else {
        Ratio::Finite(t_comp / t_io)
    })
}

/// Mean rank compute time over mean rank communication time; undefined when
/// no rank communicated.
pub fn ratio_comp_comm(timings: &[RankTiming]) -> Result<Ratio> {
    if timings.is_empty() {
        return Err(Error::invalid("ratio of an empty rank set"));
    }
    let comp = mean(timings.iter().map(|t| t.t_comp));
    let comm = mean(timings.iter().map(|t| t.t_comm));
    Ok(if comm > 0.0 {
        Ratio::Finite(comp / comm)
    } else {
        Ratio::Undefined
    })
}

/// Expected compute-to-I/O ratio when the compute work is repeated
/// `workload` times and the read work is unchanged.
pub fn theoretical_ratio(workload: usize, ratio_at_one: f64) -> f64 {
    workload as f64 * ratio_at_one
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values.iter().copied());
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

/// Per-rank timing components averaged over the ranks of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    pub t_comp: f64,
    pub t_io: f64,
    pub t_comm: f64,
    pub t_opening_trajectory: f64,
    pub t_end_loop: f64,
    pub t_overhead1: f64,
    pub t_overhead2: f64,
}

impl Components {
    pub fn rank_average(timings: &[RankTiming]) -> Self {
        let m = |f: fn(&RankTiming) -> f64| mean(timings.iter().map(f));
        Self {
            t_comp: m(|t| t.t_comp),
            t_io: m(|t| t.t_io),
            t_comm: m(|t| t.t_comm),
            t_opening_trajectory: m(|t| t.t_opening_trajectory),
            t_end_loop: m(|t| t.t_end_loop),
            t_overhead1: m(|t| t.t_overhead1),
            t_overhead2: m(|t| t.t_overhead2),
        }
    }

    fn to_array(self) -> [f64; 7] {
        [
            self.t_comp,
            self.t_io,
            self.t_comm,
            self.t_opening_trajectory,
            self.t_end_loop,
            self.t_overhead1,
            self.t_overhead2,
        ]
    }

    fn from_array(a: [f64; 7]) -> Self {
        Self {
            t_comp: a[0],
            t_io: a[1],
            t_comm: a[2],
            t_opening_trajectory: a[3],
            t_end_loop: a[4],
            t_overhead1: a[5],
            t_overhead2: a[6],
        }
    }

    /// Field-wise mean and population standard deviation over repeats.
    pub fn mean_std(samples: &[Components]) -> (Components, Components) {
        let mut means = [0.0; 7];
        let mut stds = [0.0; 7];
        for k in 0..7 {
            let col: Vec<f64> = samples.iter().map(|c| c.to_array()[k]).collect();
            means[k] = mean(col.iter().copied());
            stds[k] = std_dev(&col);
        }
        (Self::from_array(means), Self::from_array(stds))
    }
}

/// Ordinary least-squares line through `(x, y)`: `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs.iter().copied());
    let my = mean(ys.iter().copied());
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((slope, intercept, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RawTiming;

    fn rank(rank: usize, t_rmsd: f64, t_comp: f64, t_comm: f64) -> RankTiming {
        RankTiming::from_raw(
            rank,
            RawTiming {
                t_comp,
                t_all_frame: t_comp,
                t_rmsd,
                ..RawTiming::default()
            },
            t_comm,
        )
    }

    #[test]
    fn total_time_is_max() {
        let ts = [rank(0, 10.0, 0.0, 0.0), rank(1, 12.0, 0.0, 0.0), rank(2, 60.0, 0.0, 0.0)];
        assert_eq!(total_time(&ts).unwrap(), 60.0);
        assert_eq!(total_time(&ts[..1]).unwrap(), 10.0);
        let eq = [rank(0, 5.0, 0.0, 0.0), rank(1, 5.0, 0.0, 0.0)];
        assert_eq!(total_time(&eq).unwrap(), 5.0);
        assert!(total_time(&[]).is_err());
    }

    #[test]
    fn speedup_examples() {
        let p = speedup_efficiency(100.0, &[(4, 25.0), (10, 50.0)]).unwrap();
        assert_eq!((p[0].speedup, p[0].efficiency), (4.0, 1.0));
        assert_eq!((p[1].speedup, p[1].efficiency), (2.0, 0.2));
        assert!(speedup_efficiency(0.0, &[(1, 1.0)]).is_err());
        assert!(speedup_efficiency(1.0, &[(1, 0.0)]).is_err());
        assert!(speedup_efficiency(1.0, &[(1, -2.0)]).is_err());
    }

    #[test]
    fn subfiling_table_shape() {
        // One node (24 cores) as baseline, two nodes at 46.8 s.
        let p = speedup_efficiency(89.9, &[(2, 46.8)]).unwrap();
        assert!((p[0].speedup - 1.9).abs() < 0.05);
        assert!((p[0].efficiency - 0.96).abs() < 0.005);
    }

    #[test]
    fn comp_io_ratio_examples() {
        let r = ratio_comp_io(225.0, 791.0).unwrap().value().unwrap();
        assert!((r - 0.284).abs() < 0.001);
        let r = ratio_comp_io(8655.0, 791.0).unwrap().value().unwrap();
        assert!((r - 10.94).abs() < 0.01);
        assert_eq!(ratio_comp_io(3.0, 0.0).unwrap(), Ratio::Infinite);
        assert!(ratio_comp_io(-1.0, 1.0).is_err());
        assert!(ratio_comp_io(1.0, -1.0).is_err());
    }

    #[test]
    fn comp_comm_ratio() {
        let ts = [rank(0, 1.0, 0.4, 0.4), rank(1, 1.0, 0.2, 0.2)];
        assert_eq!(ratio_comp_comm(&ts).unwrap(), Ratio::Finite(1.0));
        let ts = [rank(0, 1.0, 0.6, 0.1), rank(1, 1.0, 0.3, 0.2)];
        let r = ratio_comp_comm(&ts).unwrap().value().unwrap();
        assert!((r - 3.0).abs() < 1e-12);
        let serial = [rank(0, 1.0, 0.5, 0.0)];
        assert_eq!(ratio_comp_comm(&serial).unwrap(), Ratio::Undefined);
        assert!(ratio_comp_comm(&[]).is_err());
    }

    #[test]
    fn theoretical_ratio_examples() {
        assert!((theoretical_ratio(40, 0.29) - 11.6).abs() < 1e-12);
        assert!((theoretical_ratio(100, 0.29) - 29.0).abs() < 1e-12);
        assert_eq!(theoretical_ratio(1, 0.37), 0.37);
    }

    #[test]
    fn ratio_json_forms() {
        assert_eq!(serde_json::to_string(&Ratio::Finite(0.5)).unwrap(), "0.5");
        assert_eq!(serde_json::to_string(&Ratio::Infinite).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Ratio::Undefined).unwrap(), "null");
        for r in [Ratio::Finite(2.25), Ratio::Infinite, Ratio::Undefined] {
            let back: Ratio = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn statistics() {
        assert_eq!(std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]), 2.0);
        assert_eq!(std_dev(&[3.0; 5]), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[20.0, 20.0, 60.0, 20.0]), Some(20.0));
        assert_eq!(median(&[]), None);
        let (slope, intercept, r2) = linear_fit(&[1.0, 10.0, 40.0], &[3.0, 21.0, 81.0]).unwrap();
        assert!((slope - 2.0).abs() < 1e-12 && (intercept - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
