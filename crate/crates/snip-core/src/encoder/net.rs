//! Dense batch math for the encoder/decoder MLPs, generic over f32/f64.
//!
//! Everything here is sequential with a fixed accumulation order, so a given
//! float width produces bitwise-reproducible results.

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, Modality};

/// Scalar type the encoder math is generic over.
pub trait Real:
    Float + FromPrimitive + Default + core::ops::AddAssign + std::fmt::Debug + Send + Sync + 'static
{
}
impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("constant conversion")
}

/// Row-major dense matrix used for batches and latents.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F> {
    pub n: usize,
    pub d: usize,
    pub data: Vec<F>,
}

impl<F: Real> Mat<F> {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![F::zero(); n * d] }
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn from_features(m: &FeatureMatrix) -> Self {
        Self {
            n: m.n(),
            d: m.d(),
            data: m.data().iter().map(|&v| real::<F>(v as f64)).collect(),
        }
    }

    pub fn from_feature_rows(m: &FeatureMatrix, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * m.d());
        for &i in rows {
            data.extend(m.row(i).iter().map(|&v| real::<F>(v as f64)));
        }
        Self { n: rows.len(), d: m.d(), data }
    }

    pub fn to_features(&self, modality: Modality) -> Result<FeatureMatrix> {
        let data: Vec<f32> = self.data.iter().map(|v| v.to_f64().unwrap_or(f64::NAN) as f32).collect();
        FeatureMatrix::new(self.n, self.d, modality, data)
    }

    /// Row-wise L2 normalization; zero rows are left untouched.
    pub fn normalized_rows(&self) -> Mat<F> {
        let mut out = self.clone();
        for i in 0..self.n {
            let row = out.row_mut(i);
            let mut sq = F::zero();
            for &v in row.iter() {
                sq += v * v;
            }
            if sq > F::zero() {
                let inv = F::one() / sq.sqrt();
                for v in row.iter_mut() {
                    *v = *v * inv;
                }
            }
        }
        out
    }
}

/// tanh-form GELU; saturates exactly for large inputs, which the
/// constructed-identity parameter sets rely on.
pub(crate) fn gelu<F: Real>(x: F) -> F {
    let c = real::<F>(0.7978845608028654); // sqrt(2/pi)
    let a = real::<F>(0.044715);
    let half = real::<F>(0.5);
    let u = c * (x + a * x * x * x);
    half * x * (F::one() + u.tanh())
}

pub(crate) fn gelu_grad<F: Real>(x: F) -> F {
    let c = real::<F>(0.7978845608028654);
    let a = real::<F>(0.044715);
    let half = real::<F>(0.5);
    let three = real::<F>(3.0);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * a * x * x)
}

/// Fully connected layer; `w` is `out_dim x in_dim`, row per output unit.
#[derive(Clone, Debug)]
pub(crate) struct Linear<F> {
    pub out_dim: usize,
    pub in_dim: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Real> Linear<F> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self { out_dim, in_dim, w: vec![F::zero(); out_dim * in_dim], b: vec![F::zero(); out_dim] }
    }

    pub fn forward(&self, x: &Mat<F>) -> Mat<F> {
        debug_assert_eq!(x.d, self.in_dim);
        let mut y = Mat::zeros(x.n, self.out_dim);
        for i in 0..x.n {
            let xi = x.row(i);
            let yi = y.row_mut(i);
            for o in 0..self.out_dim {
                let wo = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.b[o];
                for (wv, xv) in wo.iter().zip(xi.iter()) {
                    acc += *wv * *xv;
                }
                yi[o] = acc;
            }
        }
        y
    }

    /// Accumulate parameter gradients into `grad`; optionally return dL/dx.
    pub fn backward(&self, x: &Mat<F>, dy: &Mat<F>, grad: &mut Linear<F>, want_dx: bool) -> Option<Mat<F>> {
        for i in 0..x.n {
            let xi = x.row(i);
            let dyi = dy.row(i);
            for o in 0..self.out_dim {
                let g = dyi[o];
                grad.b[o] += g;
                let gw = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
                for (gv, xv) in gw.iter_mut().zip(xi.iter()) {
                    *gv += g * *xv;
                }
            }
        }
        if !want_dx {
            return None;
        }
        let mut dx = Mat::zeros(x.n, self.in_dim);
        for i in 0..x.n {
            let dyi = dy.row(i);
            let dxi = dx.row_mut(i);
            for o in 0..self.out_dim {
                let g = dyi[o];
                let wo = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                for (dv, wv) in dxi.iter_mut().zip(wo.iter()) {
                    *dv += g * *wv;
                }
            }
        }
        Some(dx)
    }
}

/// Per-feature affine applied at the encoder input.
#[derive(Clone, Debug)]
pub(crate) struct Affine<F> {
    pub scale: Vec<F>,
    pub shift: Vec<F>,
}

impl<F: Real> Affine<F> {
    pub fn zeros(dim: usize) -> Self {
        Self { scale: vec![F::zero(); dim], shift: vec![F::zero(); dim] }
    }

    pub fn unit(dim: usize) -> Self {
        Self { scale: vec![F::one(); dim], shift: vec![F::zero(); dim] }
    }

    pub fn forward(&self, x: &Mat<F>) -> Mat<F> {
        let mut y = x.clone();
        for i in 0..y.n {
            let row = y.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale[j] * *v + self.shift[j];
            }
        }
        y
    }

    pub fn backward(&self, x: &Mat<F>, dy: &Mat<F>, grad: &mut Affine<F>) {
        for i in 0..x.n {
            let xi = x.row(i);
            let dyi = dy.row(i);
            for j in 0..xi.len() {
                grad.scale[j] += dyi[j] * xi[j];
                grad.shift[j] += dyi[j];
            }
        }
    }
}

/// Three linear layers with GELU between them, plus an optional input affine
/// (encoders have one, the decoder does not).
#[derive(Clone, Debug)]
pub(crate) struct Mlp<F> {
    pub affine: Option<Affine<F>>,
    pub l1: Linear<F>,
    pub l2: Linear<F>,
    pub l3: Linear<F>,
}

pub(crate) struct MlpCache<F> {
    pub input: Mat<F>,
    pub affined: Mat<F>,
    pub a1: Mat<F>,
    pub z1: Mat<F>,
    pub a2: Mat<F>,
    pub z2: Mat<F>,
    pub out: Mat<F>,
}

impl<F: Real> Mlp<F> {
    pub fn zeros_like(&self) -> Mlp<F> {
        Mlp {
            affine: self.affine.as_ref().map(|a| Affine::zeros(a.scale.len())),
            l1: Linear::zeros(self.l1.out_dim, self.l1.in_dim),
            l2: Linear::zeros(self.l2.out_dim, self.l2.in_dim),
            l3: Linear::zeros(self.l3.out_dim, self.l3.in_dim),
        }
    }

    pub fn forward(&self, input: Mat<F>) -> MlpCache<F> {
        let affined = match &self.affine {
            Some(a) => a.forward(&input),
            None => input.clone(),
        };
        let a1 = self.l1.forward(&affined);
        let mut z1 = a1.clone();
        for v in z1.data.iter_mut() {
            *v = gelu(*v);
        }
        let a2 = self.l2.forward(&z1);
        let mut z2 = a2.clone();
        for v in z2.data.iter_mut() {
            *v = gelu(*v);
        }
        let out = self.l3.forward(&z2);
        MlpCache { input, affined, a1, z1, a2, z2, out }
    }

    /// Accumulate parameter gradients; optionally return dL/d(input).
    pub fn backward(&self, cache: &MlpCache<F>, dout: &Mat<F>, grad: &mut Mlp<F>, want_dx: bool) -> Option<Mat<F>> {
        let dz2 = self.l3.backward(&cache.z2, dout, &mut grad.l3, true).unwrap();
        let mut da2 = dz2;
        for (v, a) in da2.data.iter_mut().zip(cache.a2.data.iter()) {
            *v = *v * gelu_grad(*a);
        }
        let dz1 = self.l2.backward(&cache.z1, &da2, &mut grad.l2, true).unwrap();
        let mut da1 = dz1;
        for (v, a) in da1.data.iter_mut().zip(cache.a1.data.iter()) {
            *v = *v * gelu_grad(*a);
        }
        let need_dx = want_dx || self.affine.is_some();
        let daff = self.l1.backward(&cache.affined, &da1, &mut grad.l1, need_dx);
        match (&self.affine, grad.affine.as_mut()) {
            (Some(_), Some(ga)) => {
                let daff = daff.expect("input grad requested");
                ga.scale
                    .iter_mut()
                    .zip(ga.shift.iter_mut())
                    .for_each(|_| {});
                // Accumulate affine grads against the pre-affine input.
                for i in 0..cache.input.n {
                    let xi = cache.input.row(i);
                    let dyi = daff.row(i);
                    for j in 0..xi.len() {
                        ga.scale[j] += dyi[j] * xi[j];
                        ga.shift[j] += dyi[j];
                    }
                }
                if want_dx {
                    let a = self.affine.as_ref().unwrap();
                    let mut dx = daff;
                    for i in 0..dx.n {
                        let row = dx.row_mut(i);
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = *v * a.scale[j];
                        }
                    }
                    return Some(dx);
                }
                None
            }
            _ => daff,
        }
    }
}

pub(crate) fn dim_check(actual: usize, expected: usize, what: &str) -> Result<()> {
    if actual != expected {
        return Err(Error::DimMismatch(format!("{what}: got {actual}, expected {expected}")));
    }
    Ok(())
}
