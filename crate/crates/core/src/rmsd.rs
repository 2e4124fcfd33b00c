//! Minimal RMSD after optimal rigid-body superposition.
//!
//! [`rmsd_qcp`] solves for the largest eigenvalue of the 4×4 quaternion key
//! matrix by Newton iteration on its characteristic quartic.
//! [`rmsd_kabsch_oracle`] reaches the same quantity through a singular value
//! decomposition of the covariance matrix and is kept independent of the QCP
//! path so the two can check each other.

use std::hint::black_box;
use std::time::Instant;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockAssignment, RawTiming, System, Vec3};
use crate::trjio::FrameSource;

/// Newton iteration limit for the characteristic quartic.
pub const QCP_MAX_ITERATIONS: usize = 50;
/// Absolute convergence tolerance on the eigenvalue.
pub const QCP_TOLERANCE: f64 = 1e-11;

/// RMSD of one frame, nanometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsdResult {
    pub frame_index: usize,
    pub time: f64,
    pub rmsd: f64,
}

/// Result of one QCP evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcpOutcome {
    pub rmsd: f64,
    pub iterations: usize,
    /// The Newton iteration did not converge or the point sets were
    /// degenerate, and the value came from the SVD path.
    pub used_fallback: bool,
}

struct Centered {
    inner_mobile: f64,
    inner_reference: f64,
    /// `corr[i][j] = Σ mobile_i · reference_j` over centered coordinates.
    corr: [[f64; 3]; 3],
    degenerate: bool,
}

fn check_inputs(mobile: &[Vec3], reference: &[Vec3]) -> Result<()> {
    if mobile.len() != reference.len() {
        return Err(Error::invalid(format!(
            "coordinate sets differ in size: {} vs {}",
            mobile.len(),
            reference.len()
        )));
    }
    if mobile.len() < 3 {
        return Err(Error::invalid(format!(
            "superposition needs at least 3 points, got {}",
            mobile.len()
        )));
    }
    if mobile.iter().chain(reference).flatten().any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite coordinate"));
    }
    Ok(())
}

fn centroid(points: &[Vec3]) -> Vec3 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        c[0] += p[0];
        c[1] += p[1];
        c[2] += p[2];
    }
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Rank of the centered point scatter is below 2 when the second invariant of
/// the 3×3 scatter matrix vanishes relative to its squared trace.
fn scatter_is_degenerate(s: &[[f64; 3]; 3]) -> bool {
    let trace = s[0][0] + s[1][1] + s[2][2];
    if trace <= 0.0 {
        return true;
    }
    let minors = s[0][0] * s[1][1] - s[0][1] * s[1][0] + s[0][0] * s[2][2] - s[0][2] * s[2][0]
        + s[1][1] * s[2][2]
        - s[1][2] * s[2][1];
    minors <= 1e-10 * trace * trace
}

fn center_and_correlate(mobile: &[Vec3], reference: &[Vec3]) -> Centered {
    let cm = centroid(mobile);
    let cr = centroid(reference);
    let mut inner_mobile = 0.0;
    let mut inner_reference = 0.0;
    let mut corr = [[0.0; 3]; 3];
    let mut scatter_m = [[0.0; 3]; 3];
    let mut scatter_r = [[0.0; 3]; 3];
    for (m, r) in mobile.iter().zip(reference) {
        let a = [m[0] - cm[0], m[1] - cm[1], m[2] - cm[2]];
        let b = [r[0] - cr[0], r[1] - cr[1], r[2] - cr[2]];
        inner_mobile += a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        inner_reference += b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
        for i in 0..3 {
            for j in 0..3 {
                corr[i][j] += a[i] * b[j];
                scatter_m[i][j] += a[i] * a[j];
                scatter_r[i][j] += b[i] * b[j];
            }
        }
    }
    Centered {
        inner_mobile,
        inner_reference,
        corr,
        degenerate: scatter_is_degenerate(&scatter_m) || scatter_is_degenerate(&scatter_r),
    }
}

/// Coefficients `(c2, c1, c0)` of the monic quartic `λ⁴ + c2 λ² + c1 λ + c0`
/// whose largest root is the largest eigenvalue of the key matrix.
fn characteristic_quartic(s: &[[f64; 3]; 3]) -> (f64, f64, f64) {
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = *s;

    let sxx2 = sxx * sxx;
    let syy2 = syy * syy;
    let szz2 = szz * szz;
    let sxy2 = sxy * sxy;
    let syz2 = syz * syz;
    let sxz2 = sxz * sxz;
    let syx2 = syx * syx;
    let szy2 = szy * szy;
    let szx2 = szx * szx;

    let syz_szy_m_syy_szz2 = 2.0 * (syz * szy - syy * szz);
    let sxx2_syy2_szz2_syz2_szy2 = syy2 + szz2 - sxx2 + syz2 + szy2;

    let c2 = -2.0 * (sxx2 + syy2 + szz2 + sxy2 + syx2 + sxz2 + szx2 + syz2 + szy2);
    let c1 = 8.0
        * (sxx * syz * szy + syy * szx * sxz + szz * sxy * syx
            - sxx * syy * szz
            - syz * szx * sxy
            - szy * syx * sxz);

    let sxz_p_szx = sxz + szx;
    let syz_p_szy = syz + szy;
    let sxy_p_syx = sxy + syx;
    let syz_m_szy = syz - szy;
    let sxz_m_szx = sxz - szx;
    let sxy_m_syx = sxy - syx;
    let sxx_p_syy = sxx + syy;
    let sxx_m_syy = sxx - syy;
    let sxy2_sxz2_syx2_szx2 = sxy2 + sxz2 - syx2 - szx2;

    let c0 = sxy2_sxz2_syx2_szx2 * sxy2_sxz2_syx2_szx2
        + (sxx2_syy2_szz2_syz2_szy2 + syz_szy_m_syy_szz2)
            * (sxx2_syy2_szz2_syz2_szy2 - syz_szy_m_syy_szz2)
        + (-sxz_p_szx * syz_m_szy + sxy_m_syx * (sxx_m_syy - szz))
            * (-sxz_m_szx * syz_p_szy + sxy_m_syx * (sxx_m_syy + szz))
        + (-sxz_p_szx * syz_p_szy - sxy_p_syx * (sxx_p_syy - szz))
            * (-sxz_m_szx * syz_m_szy - sxy_p_syx * (sxx_p_syy + szz))
        + (sxy_p_syx * syz_p_szy + sxz_p_szx * (sxx_m_syy + szz))
            * (-sxy_m_syx * syz_m_szy + sxz_p_szx * (sxx_p_syy + szz))
        + (sxy_p_syx * syz_m_szy + sxz_m_szx * (sxx_m_syy - szz))
            * (-sxy_m_syx * syz_p_szy + sxz_m_szx * (sxx_p_syy - szz));

    (c2, c1, c0)
}

/// Minimal RMSD between `mobile` and `reference` over all proper rotations
/// and translations.
pub fn rmsd_qcp(mobile: &[Vec3], reference: &[Vec3]) -> Result<f64> {
    qcp_detailed(mobile, reference).map(|o| o.rmsd)
}

pub fn qcp_detailed(mobile: &[Vec3], reference: &[Vec3]) -> Result<QcpOutcome> {
    check_inputs(mobile, reference)?;
    let c = center_and_correlate(mobile, reference);
    let n = mobile.len() as f64;

    if c.degenerate {
        return Ok(QcpOutcome {
            rmsd: kabsch_unchecked(mobile, reference),
            iterations: 0,
            used_fallback: true,
        });
    }

    let (c2, c1, c0) = characteristic_quartic(&c.corr);
    let e0 = 0.5 * (c.inner_mobile + c.inner_reference);
    let mut lambda = e0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < QCP_MAX_ITERATIONS {
        iterations += 1;
        let previous = lambda;
        let x2 = lambda * lambda;
        let b = (x2 + c2) * lambda;
        let a = b + c1;
        let f = a * lambda + c0;
        let df = 2.0 * x2 * lambda + b + a;
        if df == 0.0 {
            break;
        }
        lambda -= f / df;
        if !lambda.is_finite() {
            break;
        }
        if (lambda - previous).abs() < QCP_TOLERANCE {
            converged = true;
            break;
        }
    }

    if !converged {
        log::warn!("QCP Newton iteration did not converge after {iterations} steps; using SVD path");
        return Ok(QcpOutcome {
            rmsd: kabsch_unchecked(mobile, reference),
            iterations,
            used_fallback: true,
        });
    }

    let mut msd = (2.0 * (e0 - lambda) / n).max(0.0);
    // Near a perfect fit the eigenvalue gap e0 - λ is lost to cancellation;
    // evaluate the residual of the optimal rotation directly instead.
    if msd <= SMALL_MSD_FRACTION * e0 / n {
        if let Some(direct) = rotation_residual(mobile, reference, &c.corr, lambda) {
            msd = direct;
        }
    }
    Ok(QcpOutcome {
        rmsd: msd.sqrt(),
        iterations,
        used_fallback: false,
    })
}

/// Below this fraction of the mean squared radius the RMSD is recomputed from
/// the explicit rotation.
const SMALL_MSD_FRACTION: f64 = 1e-6;

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Unit eigenvector of the key matrix for eigenvalue `lambda`, taken as the
/// largest column of the adjugate of `K - λI`.
fn key_eigenvector(s: &[[f64; 3]; 3], lambda: f64) -> Option<[f64; 4]> {
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = *s;
    let k = [
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ];
    let mut a = k;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let mut best = [0.0; 4];
    let mut best_norm = 0.0;
    for col in 0..4 {
        let mut v = [0.0; 4];
        for (row, out) in v.iter_mut().enumerate() {
            // Cofactor C[col][row] = adj[row][col].
            let mut minor = [[0.0; 3]; 3];
            let rows = (0..4).filter(|&r| r != col);
            for (mi, r) in rows.enumerate() {
                let cols = (0..4).filter(|&c| c != row);
                for (mj, c) in cols.enumerate() {
                    minor[mi][mj] = a[r][c];
                }
            }
            let sign = if (row + col) % 2 == 0 { 1.0 } else { -1.0 };
            *out = sign * det3(minor);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>();
        if norm > best_norm {
            best_norm = norm;
            best = v;
        }
    }
    if !(best_norm > 0.0) || !best_norm.is_finite() {
        return None;
    }
    let inv = 1.0 / best_norm.sqrt();
    Some(best.map(|x| x * inv))
}

fn quaternion_rotation([q0, q1, q2, q3]: [f64; 4]) -> [[f64; 3]; 3] {
    [
        [
            q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3,
            2.0 * (q1 * q2 - q0 * q3),
            2.0 * (q1 * q3 + q0 * q2),
        ],
        [
            2.0 * (q1 * q2 + q0 * q3),
            q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3,
            2.0 * (q2 * q3 - q0 * q1),
        ],
        [
            2.0 * (q1 * q3 - q0 * q2),
            2.0 * (q2 * q3 + q0 * q1),
            q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3,
        ],
    ]
}

/// Mean squared residual after applying the key-matrix rotation (or its
/// inverse, whichever fits better) to the centered mobile set.
fn rotation_residual(mobile: &[Vec3], reference: &[Vec3], corr: &[[f64; 3]; 3], lambda: f64) -> Option<f64> {
    let r = quaternion_rotation(key_eigenvector(corr, lambda)?);
    let cm = centroid(mobile);
    let cr = centroid(reference);
    let mut forward = 0.0;
    let mut backward = 0.0;
    for (m, p) in mobile.iter().zip(reference) {
        let a = [m[0] - cm[0], m[1] - cm[1], m[2] - cm[2]];
        let b = [p[0] - cr[0], p[1] - cr[1], p[2] - cr[2]];
        for i in 0..3 {
            let f = r[i][0] * a[0] + r[i][1] * a[1] + r[i][2] * a[2] - b[i];
            let t = r[0][i] * a[0] + r[1][i] * a[1] + r[2][i] * a[2] - b[i];
            forward += f * f;
            backward += t * t;
        }
    }
    Some(forward.min(backward) / mobile.len() as f64)
}

/// Minimal RMSD through the SVD of the covariance matrix, restricted to
/// proper rotations.
pub fn rmsd_kabsch_oracle(mobile: &[Vec3], reference: &[Vec3]) -> Result<f64> {
    check_inputs(mobile, reference)?;
    Ok(kabsch_unchecked(mobile, reference))
}

fn kabsch_unchecked(mobile: &[Vec3], reference: &[Vec3]) -> f64 {
    let cm = centroid(mobile);
    let cr = centroid(reference);
    let centered = |p: &Vec3, c: &Vec3| nalgebra::Vector3::new(p[0] - c[0], p[1] - c[1], p[2] - c[2]);

    let mut h = Matrix3::<f64>::zeros();
    for (m, r) in mobile.iter().zip(reference) {
        h += centered(m, &cm) * centered(r, &cr).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("V^T requested");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();

    let sum_sq: f64 = mobile
        .iter()
        .zip(reference)
        .map(|(m, r)| (rotation * centered(m, &cm) - centered(r, &cr)).norm_squared())
        .sum();
    (sum_sq / mobile.len() as f64).sqrt()
}

/// Output of one rank's block computation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutput {
    pub results: Vec<RmsdResult>,
    pub timing: RawTiming,
    /// Frames for which the QCP path fell back to SVD.
    pub fallback_frames: usize,
}

/// Computes the RMSD of every frame in `block` against the system reference.
///
/// `open` is timed as trajectory opening. Each frame read is timed into
/// `t_io`; selecting the mobile atoms and running the RMSD `workload` times is
/// timed into `t_comp`. Sources that do no I/O report zero opening and read
/// time.
pub fn block_rmsd<S, F>(
    open: F,
    system: &System,
    block: BlockAssignment,
    workload: usize,
) -> Result<BlockOutput>
where
    S: FrameSource,
    F: FnOnce() -> Result<S>,
{
    if workload == 0 {
        return Err(Error::invalid("workload factor must be at least 1"));
    }
    let t_start = Instant::now();
    let mut source = open()?;
    let performs_io = source.performs_io();
    let t_opening = if performs_io {
        t_start.elapsed().as_secs_f64()
    } else {
        0.0
    };

    if source.n_frames() > 0 && source.n_atoms() != system.n_atoms() {
        return Err(Error::invalid(format!(
            "trajectory has {} atoms, topology expects {}",
            source.n_atoms(),
            system.n_atoms()
        )));
    }
    if block.stop > source.n_frames() {
        return Err(Error::FrameOutOfRange {
            index: block.stop.saturating_sub(1),
            n_frames: source.n_frames(),
        });
    }

    let reference = system.reference_positions();
    let indices = system.mobile_indices();
    let mut results = Vec::with_capacity(block.len());
    let mut selection = Vec::with_capacity(indices.len());
    let mut t_io = 0.0;
    let mut t_comp = 0.0;
    let mut fallback_frames = 0;

    let loop_start = Instant::now();
    for frame_index in block.frames() {
        let t0 = Instant::now();
        let frame = source.read_frame(frame_index).map_err(|e| Error::BlockRead {
            rank: block.rank,
            frame: frame_index,
            cause: Box::new(e),
        })?;
        let t1 = Instant::now();
        if performs_io {
            t_io += (t1 - t0).as_secs_f64();
        }

        frame.select_into(indices, &mut selection);
        let mut outcome = None;
        for _ in 0..workload {
            outcome = Some(qcp_detailed(black_box(&selection), black_box(reference))?);
        }
        let outcome = outcome.expect("workload >= 1");
        t_comp += t1.elapsed().as_secs_f64();

        fallback_frames += usize::from(outcome.used_fallback);
        results.push(RmsdResult {
            frame_index,
            time: frame.time,
            rmsd: outcome.rmsd,
        });
    }
    let loop_exit = Instant::now();
    drop(source);
    let t_end_loop = loop_exit.elapsed().as_secs_f64();
    let t_all_frame = loop_start.elapsed().as_secs_f64();
    let t_rmsd = t_start.elapsed().as_secs_f64();

    Ok(BlockOutput {
        results,
        timing: RawTiming {
            t_opening_trajectory: t_opening,
            t_io,
            t_comp,
            t_end_loop,
            t_all_frame,
            t_rmsd,
            n_frames_processed: block.len(),
        },
        fallback_frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut impl Rng, n: usize, half_width: f64) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(-half_width..half_width),
                    rng.gen_range(-half_width..half_width),
                    rng.gen_range(-half_width..half_width),
                ]
            })
            .collect()
    }

    fn rotate(points: &[Vec3], r: &Matrix3<f64>, shift: Vec3) -> Vec<Vec3> {
        points
            .iter()
            .map(|p| {
                let v = r * nalgebra::Vector3::new(p[0], p[1], p[2]);
                [v[0] + shift[0], v[1] + shift[1], v[2] + shift[2]]
            })
            .collect()
    }

    fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
        let axis = nalgebra::Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0f64),
        );
        let axis = nalgebra::Unit::new_normalize(axis + nalgebra::Vector3::new(1e-3, 0.0, 0.0));
        *nalgebra::Rotation3::from_axis_angle(&axis, rng.gen_range(-3.1..3.1)).matrix()
    }

    #[test]
    fn identity_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_points(&mut rng, 146, 5.0);
        assert!(rmsd_qcp(&a, &a).unwrap() <= 1e-7);
        assert!(rmsd_kabsch_oracle(&a, &a).unwrap() <= 1e-7);
    }

    #[test]
    fn translation_is_removed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_points(&mut rng, 146, 5.0);
        let b = rotate(&a, &Matrix3::identity(), [1.0, -2.0, 0.5]);
        assert!(rmsd_qcp(&b, &a).unwrap() <= 1e-7);
    }

    #[test]
    fn rotation_about_z_is_absorbed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_points(&mut rng, 146, 5.0);
        let rz = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let b = rotate(&a, &rz, [0.0; 3]);
        assert!(rmsd_qcp(&b, &a).unwrap() <= 1e-7);
    }

    #[test]
    fn reflection_is_not_a_rotation() {
        let a: Vec<Vec3> = vec![
            [1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 3.0],
            [1.5, 1.0, -0.5],
            [-0.7, 0.3, 2.2],
        ];
        let mirrored: Vec<Vec3> = a.iter().map(|p| [-p[0], p[1], p[2]]).collect();
        let oracle = rmsd_kabsch_oracle(&mirrored, &a).unwrap();
        assert!(oracle > 1e-3, "oracle {oracle}");
        let qcp = rmsd_qcp(&mirrored, &a).unwrap();
        assert!((qcp - oracle).abs() <= 1e-9);
    }

    #[test]
    fn too_few_points_and_shape_mismatch() {
        let a = vec![[0.0; 3]; 2];
        assert!(matches!(rmsd_qcp(&a, &a), Err(Error::InvalidArgument(_))));
        assert!(matches!(rmsd_kabsch_oracle(&a, &a), Err(Error::InvalidArgument(_))));
        let b = vec![[0.0; 3]; 4];
        let c = vec![[0.0; 3]; 5];
        assert!(rmsd_qcp(&b, &c).is_err());
        let nan = vec![[f64::NAN, 0.0, 0.0], [1.0; 3], [2.0, 0.0, 1.0]];
        assert!(rmsd_qcp(&nan, &nan).is_err());
    }

    #[test]
    fn collinear_points_use_fallback() {
        let a: Vec<Vec3> = (0..6).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        let b: Vec<Vec3> = (0..6).map(|i| [0.0, 0.0, 1.1 * i as f64]).collect();
        let out = qcp_detailed(&a, &b).unwrap();
        assert!(out.used_fallback);
        assert!((out.rmsd - rmsd_kabsch_oracle(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn oracle_agreement_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let a = random_points(&mut rng, 146, 5.0);
            let b = random_points(&mut rng, 146, 5.0);
            let q = qcp_detailed(&a, &b).unwrap();
            assert!(!q.used_fallback);
            let k = rmsd_kabsch_oracle(&a, &b).unwrap();
            assert!((q.rmsd - k).abs() <= 1e-9, "qcp {} oracle {}", q.rmsd, k);
        }
    }

    #[test]
    fn oracle_agreement_on_perturbed_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for scale in [1e-4, 1e-2, 0.1, 1.0] {
            let a = random_points(&mut rng, 146, 5.0);
            let noise = random_points(&mut rng, 146, scale);
            let r = random_rotation(&mut rng);
            let b: Vec<Vec3> = rotate(&a, &r, [0.3, 0.1, -4.0])
                .iter()
                .zip(&noise)
                .map(|(p, n)| [p[0] + n[0], p[1] + n[1], p[2] + n[2]])
                .collect();
            let q = rmsd_qcp(&b, &a).unwrap();
            let k = rmsd_kabsch_oracle(&b, &a).unwrap();
            assert!((q - k).abs() <= 1e-9, "scale {scale}: qcp {q} oracle {k}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rigid_motion_invariance(seed in any::<u64>(), shift in prop::array::uniform3(-20.0f64..20.0)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_points(&mut rng, 40, 5.0);
            let b = random_points(&mut rng, 40, 5.0);
            let r = random_rotation(&mut rng);
            let moved = rotate(&a, &r, shift);
            let base = rmsd_qcp(&a, &b).unwrap();
            prop_assert!((rmsd_qcp(&moved, &b).unwrap() - base).abs() <= 1e-9);
        }

        #[test]
        fn symmetric_and_bounded(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_points(&mut rng, 30, 5.0);
            let b = random_points(&mut rng, 30, 5.0);
            let ab = rmsd_qcp(&a, &b).unwrap();
            let ba = rmsd_qcp(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9);

            let (ca, cb) = (centroid(&a), centroid(&b));
            let plain: f64 = a.iter().zip(&b).map(|(p, q)| {
                (0..3).map(|k| ((p[k] - ca[k]) - (q[k] - cb[k])).powi(2)).sum::<f64>()
            }).sum::<f64>() / a.len() as f64;
            prop_assert!(ab <= plain.sqrt() + 1e-12);
        }
    }
}
