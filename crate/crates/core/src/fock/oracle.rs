//! Dense-matrix verification path for the Fock engine.
//!
//! Builds `a`, `b` explicitly on the truncated product space and evaluates
//! moments by matrix algebra. Shares nothing with the sparse evaluation in
//! the parent module beyond the state container.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{clamp_variance, MomentReport, PolarizationRotation, TwoModeFockState};
use crate::error::{Error, Result};

/// Maximum product-space dimension `(n_max + 1)^2` the oracle will build.
pub const DENSE_DIM_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservableSpec {
    /// `cos2θ (a†a - b†b) + sin2θ (a†b + ab†)`
    NumberDifference(PolarizationRotation),
    /// `a†a - b†b`
    IntensityDifference,
    /// `a†b + ab†`
    BeatQuadrature,
}

fn annihilation(dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = (n as f64).sqrt();
    }
    m
}

pub fn dense_oracle(state: &TwoModeFockState, observable: ObservableSpec) -> Result<MomentReport> {
    let dim = state.dim();
    if dim > DENSE_DIM_CAP {
        return Err(Error::ResourceLimit {
            dim,
            cap: DENSE_DIM_CAP,
        });
    }
    let single = state.n_max() + 1;
    let id = DMatrix::<f64>::identity(single, single);
    let ann = annihilation(single);
    let a = ann.kronecker(&id);
    let b = id.kronecker(&ann);
    let ad = a.transpose();
    let bd = b.transpose();

    let diff = &ad * &a - &bd * &b;
    let beat = &ad * &b + &a * &bd;
    let obs = match observable {
        ObservableSpec::NumberDifference(r) => {
            let (s2, c2) = (2.0 * r.theta).sin_cos();
            diff * c2 + beat * s2
        }
        ObservableSpec::IntensityDifference => diff,
        ObservableSpec::BeatQuadrature => beat,
    };
    let obs2 = &obs * &obs;

    let re = DVector::from_iterator(dim, state.amplitudes().iter().map(|z| z.re));
    let im = DVector::from_iterator(dim, state.amplitudes().iter().map(|z| z.im));
    let expect = |m: &DMatrix<f64>| -> Complex64 {
        let mre = m * &re;
        let mim = m * &im;
        Complex64::new(re.dot(&mre) + im.dot(&mim), re.dot(&mim) - im.dot(&mre))
    };

    let mean = expect(&obs).re;
    let second = expect(&obs2).re;
    let variance = clamp_variance(second - mean * mean, second)?;
    let beat_mean = expect(&(&ad * &b));
    Ok(MomentReport {
        mean,
        variance,
        beat_mean,
    })
}
