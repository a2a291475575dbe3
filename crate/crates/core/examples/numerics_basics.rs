//! The dense kernels underneath the receivers: SPD solve, log-determinant
//! and dominant eigenpair.
//!
//! ```bash
//! cargo run -p mimo-ee --example numerics_basics
//! ```

use mimo_ee::numerics::{dominant_eigenpair, log_det_spd, spd_solve, Matrix, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Matrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
    let b = Vector::from(vec![1.0, 2.0, 3.0]);
    let x = spd_solve(&a, &b)?;
    println!("x = {:?}", x.as_slice());
    println!("residual = {:.2e}", a.mul_vec(&x).sub(&b).norm());
    println!("log det = {:.12}", log_det_spd(&a)?);

    let eig = dominant_eigenpair(&a)?;
    println!("λ_max = {:.12}, v = {:?}", eig.value, eig.vector.as_slice());

    // repeated top eigenvalue: any unit vector of the eigenspace is valid, the
    // result is still deterministic and sign-normalized
    let d = Matrix::diag(&[2.0, 2.0, 1.0]);
    let eig = dominant_eigenpair(&d)?;
    println!(
        "diag(2,2,1): λ = {}, v = {:?}",
        eig.value,
        eig.vector.as_slice()
    );

    let not_pd = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
    println!(
        "indefinite input: {}",
        spd_solve(&not_pd, &Vector::from(vec![1.0, 0.0])).unwrap_err()
    );
    Ok(())
}
