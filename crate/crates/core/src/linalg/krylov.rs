use super::csr::{dot, norm2, CsrMatrix};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrylovMethod {
    Cg,
    /// Restarted GMRES with the given restart length.
    Gmres(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovConfig<T> {
    pub rtol: T,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    pub method: KrylovMethod,
}

impl<T: Real> Default for KrylovConfig<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-8),
            max_iter: 10_000,
            preconditioner: Preconditioner::Jacobi,
            method: KrylovMethod::Cg,
        }
    }
}

impl<T: Real> KrylovConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > T::zero() && self.rtol < T::one()) {
            return Err(invalid(format!("rtol {} outside (0, 1)", self.rtol)));
        }
        if let KrylovMethod::Gmres(0) = self.method {
            return Err(invalid("GMRES restart length must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct KrylovOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖` at exit.
    pub relative_residual: T,
    pub converged: bool,
    pub breakdown: bool,
}

/// Iterative solve from a zero initial guess. Breakdown and stagnation are
/// reported in the outcome rather than raised.
pub fn krylov_solve<T: Real>(a: &CsrMatrix<T>, b: &[T], config: &KrylovConfig<T>) -> Result<KrylovOutcome<T>> {
    config.validate()?;
    if !a.is_square() || a.n_rows() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix with rhs of length {}",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return Ok(KrylovOutcome {
            solution: vec![T::zero(); n],
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
            breakdown: false,
        });
    }
    let inv_diag: Vec<T> = match config.preconditioner {
        Preconditioner::None => vec![T::one(); n],
        Preconditioner::Jacobi => a
            .diagonal()
            .into_iter()
            .map(|d| if d == T::zero() { T::one() } else { T::one() / d })
            .collect(),
    };
    let mut out = match config.method {
        KrylovMethod::Cg => cg(a, b, &inv_diag, config),
        KrylovMethod::Gmres(m) => gmres(a, b, &inv_diag, m, config),
    };
    let r: Vec<T> = a.matvec(&out.solution).iter().zip(b).map(|(&ax, &bi)| bi - ax).collect();
    out.relative_residual = norm2(&r) / bnorm;
    Ok(out)
}

fn cg<T: Real>(a: &CsrMatrix<T>, b: &[T], inv_diag: &[T], config: &KrylovConfig<T>) -> KrylovOutcome<T> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let outcome = |x: Vec<T>, iterations, converged, breakdown| KrylovOutcome {
        solution: x,
        iterations,
        relative_residual: T::one(),
        converged,
        breakdown,
    };
    for it in 1..=config.max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) || !pap.is_finite() {
            return outcome(x, it - 1, false, true);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= config.rtol * bnorm {
            return outcome(x, it, true, false);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    outcome(x, config.max_iter, false, false)
}

/// Right-preconditioned restarted GMRES; the Arnoldi residual equals the true one.
fn gmres<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    inv_diag: &[T],
    restart: usize,
    config: &KrylovConfig<T>,
) -> KrylovOutcome<T> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    let mut iterations = 0;
    let mut breakdown = false;
    let mut w = vec![T::zero(); n];
    'outer: while iterations < config.max_iter {
        let ax = a.matvec(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &axi)| bi - axi).collect();
        let beta = norm2(&r);
        if beta <= config.rtol * bnorm {
            return KrylovOutcome { solution: x, iterations, relative_residual: T::one(), converged: true, breakdown };
        }
        let m = restart.min(config.max_iter - iterations);
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|&ri| ri / beta).collect()];
        let mut h = vec![vec![T::zero(); m]; m + 1];
        let (mut cs, mut sn) = (vec![T::zero(); m], vec![T::zero(); m]);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let zj: Vec<T> = v[j].iter().zip(inv_diag).map(|(&vi, &di)| vi * di).collect();
            a.matvec_into(&zj, &mut w);
            for (i, vi) in v.iter().enumerate() {
                h[i][j] = dot(&w, vi);
                for (wk, &vk) in w.iter_mut().zip(vi) {
                    *wk -= h[i][j] * vk;
                }
            }
            h[j + 1][j] = norm2(&w);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == T::zero() || !denom.is_finite() {
                breakdown = true;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            let hj1 = h[j + 1][j];
            h[j][j] = cs[j] * h[j][j] + sn[j] * hj1;
            h[j + 1][j] = T::zero();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            used = j + 1;
            iterations += 1;
            let happy = hj1 <= T::epsilon() * bnorm;
            if g[j + 1].abs() <= config.rtol * bnorm || happy {
                break;
            }
            v.push(w.iter().map(|&wi| wi / hj1).collect());
        }
        let mut y = vec![T::zero(); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (k, &yk) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yk * v[k][i] * inv_diag[i];
            }
        }
        if breakdown {
            break 'outer;
        }
        if used > 0 && g[used].abs() <= config.rtol * bnorm {
            return KrylovOutcome { solution: x, iterations, relative_residual: T::one(), converged: true, breakdown };
        }
        if used == 0 {
            break;
        }
    }
    let r: Vec<T> = a.matvec(&x).iter().zip(b).map(|(&ax, &bi)| bi - ax).collect();
    let converged = norm2(&r) <= config.rtol * bnorm;
    KrylovOutcome { solution: x, iterations, relative_residual: T::one(), converged, breakdown }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LdltFactorization;

    fn config(method: KrylovMethod, rtol: f64) -> KrylovConfig<f64> {
        KrylovConfig { rtol, max_iter: 500, preconditioner: Preconditioner::Jacobi, method }
    }

    #[test]
    fn diagonal_one_iteration() {
        let a = CsrMatrix::from_diagonal(&[1.0, 4.0, 9.0, 0.5]);
        let out = krylov_solve(&a, &[1.0, 2.0, 3.0, 4.0], &config(KrylovMethod::Cg, 1e-12)).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn matches_direct_solver() {
        let a = CsrMatrix::from_dense(&[vec![3.0, -1.0], vec![-1.0, 3.0]]);
        let direct = LdltFactorization::factorize(&a, None).unwrap().solve(&[2.0, 0.0]).unwrap();
        for method in [KrylovMethod::Cg, KrylovMethod::Gmres(10)] {
            let out = krylov_solve(&a, &[2.0, 0.0], &config(method, 1e-12)).unwrap();
            assert!(out.converged, "{method:?}");
            for (u, v) in out.solution.iter().zip(&direct) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_iterations_reports_initial_guess() {
        let a = CsrMatrix::from_diagonal(&[2.0, 2.0]);
        let mut c = config(KrylovMethod::Cg, 1e-8);
        c.max_iter = 0;
        let out = krylov_solve(&a, &[1.0, 1.0], &c).unwrap();
        assert_eq!(out.solution, vec![0.0, 0.0]);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.relative_residual, 1.0);
        assert!(!out.converged);
    }

    #[test]
    fn gmres_restarts_converge() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
                t.push((i + 1, i, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b = vec![1.0; n];
        let out = krylov_solve(&a, &b, &config(KrylovMethod::Gmres(5), 1e-10)).unwrap();
        assert!(out.converged);
        assert!(out.relative_residual < 1e-9);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let a = CsrMatrix::from_diagonal(&[1.0]);
        assert!(krylov_solve(&a, &[1.0], &config(KrylovMethod::Cg, 2.0)).is_err());
    }
}
