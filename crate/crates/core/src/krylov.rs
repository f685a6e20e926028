//! Restarted GMRES on state matrices (Frobenius inner product).

use nalgebra::DMatrix;

use crate::error::Result;

pub(crate) struct GmresOutcome {
    pub x: DMatrix<f64>,
    /// `‖b − A x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let h = a.hypot(b);
        (a / h, b / h)
    }
}

pub(crate) fn gmres(
    apply: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    b: &DMatrix<f64>,
    mut x: DMatrix<f64>,
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresOutcome> {
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            x: b.clone(),
            relative_residual: 0.0,
        });
    }
    let mut iterations = 0;
    loop {
        let r = b - apply(&x)?;
        let beta = r.norm();
        let rel = beta / b_norm;
        if rel <= rtol || iterations >= max_iter || !rel.is_finite() {
            return Ok(GmresOutcome {
                x,
                relative_residual: rel,
            });
        }
        let mut basis = vec![r / beta];
        let mut h = DMatrix::<f64>::zeros(restart + 1, restart);
        let mut rot: Vec<(f64, f64)> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..restart {
            let mut v = apply(&basis[j])?;
            for (i, q) in basis.iter().enumerate() {
                h[(i, j)] = dot(&v, q);
                v -= q * h[(i, j)];
            }
            // one reorthogonalization pass
            for (i, q) in basis.iter().enumerate() {
                let c = dot(&v, q);
                h[(i, j)] += c;
                v -= q * c;
            }
            let norm = v.norm();
            h[(j + 1, j)] = norm;
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a, b): (f64, f64) = (h[(i, j)], h[(i + 1, j)]);
                h[(i, j)] = c * a + s * b;
                h[(i + 1, j)] = -s * a + c * b;
            }
            let (c, s) = givens(h[(j, j)], h[(j + 1, j)]);
            h[(j, j)] = c * h[(j, j)] + s * h[(j + 1, j)];
            h[(j + 1, j)] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            rot.push((c, s));
            used = j + 1;
            iterations += 1;
            if g[j + 1].abs() <= rtol * b_norm || norm == 0.0 || iterations >= max_iter {
                break;
            }
            basis.push(v / norm);
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for k in i + 1..used {
                acc -= h[(i, k)] * y[k];
            }
            y[i] = acc / h[(i, i)];
        }
        for (q, c) in basis.iter().zip(&y) {
            x += q * *c;
        }
    }
}
