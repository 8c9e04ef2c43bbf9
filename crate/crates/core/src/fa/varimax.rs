use nalgebra::DMatrix;

use super::fix_column_signs;

#[derive(Debug, Clone, PartialEq)]
pub struct Varimax {
    pub loadings: DMatrix<f64>,
    /// Orthogonal I x I matrix with `loadings = input * rotation`.
    pub rotation: DMatrix<f64>,
    /// Criterion value after each sweep, starting with the input's.
    pub criterion_trace: Vec<f64>,
}

/// Raw varimax criterion: sum over columns of the variance of squared
/// loadings.
pub fn varimax_criterion(l: &DMatrix<f64>) -> f64 {
    let p = l.nrows() as f64;
    l.column_iter()
        .map(|c| {
            let sq: f64 = c.iter().map(|x| x * x).sum();
            let quad: f64 = c.iter().map(|x| x.powi(4)).sum();
            (p * quad - sq * sq) / (p * p)
        })
        .sum()
}

const MAX_SWEEPS: usize = 1000;
const GAIN_TOL: f64 = 1e-8;

/// Varimax rotation by sweeps of optimal plane rotations over every column
/// pair. Fewer than two columns yields the identity rotation.
pub fn varimax(l: &DMatrix<f64>) -> Varimax {
    let (p, k) = l.shape();
    let mut out = l.clone();
    let mut rot = DMatrix::identity(k, k);
    let mut trace = vec![varimax_criterion(&out)];
    if k >= 2 {
        let pf = p as f64;
        for _ in 0..MAX_SWEEPS {
            for a in 0..k {
                for b in a + 1..k {
                    let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
                    for i in 0..p {
                        let (x, y) = (out[(i, a)], out[(i, b)]);
                        let u = x * x - y * y;
                        let v = 2.0 * x * y;
                        sa += u;
                        sb += v;
                        sc += u * u - v * v;
                        sd += 2.0 * u * v;
                    }
                    let num = sd - 2.0 * sa * sb / pf;
                    let den = sc - (sa * sa - sb * sb) / pf;
                    let phi = num.atan2(den) / 4.0;
                    if phi.abs() < 1e-15 {
                        continue;
                    }
                    let (s, c) = phi.sin_cos();
                    for m in [&mut out, &mut rot] {
                        for i in 0..m.nrows() {
                            let (x, y) = (m[(i, a)], m[(i, b)]);
                            m[(i, a)] = c * x + s * y;
                            m[(i, b)] = -s * x + c * y;
                        }
                    }
                }
            }
            let v = varimax_criterion(&out);
            let gain = v - trace.last().copied().unwrap_or(v);
            trace.push(v);
            if gain < GAIN_TOL {
                break;
            }
        }
    }
    let flips = fix_column_signs(&mut out);
    for (j, f) in flips.into_iter().enumerate() {
        if f {
            rot.column_mut(j).neg_mut();
        }
    }
    Varimax { loadings: out, rotation: rot, criterion_trace: trace }
}
