//! Synthetic paired-modality corpus generator.
//!
//! Stands in for paired image/caption embeddings: a Gaussian mixture with
//! class prototypes shared across modalities, plus planted near-duplicates
//! whose provenance is recorded so de-duplication has an exact ground truth.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, Modality};

#[derive(Clone, Debug)]
pub struct CorpusSpec {
    pub n_samples: usize,
    pub n_classes: usize,
    pub raw_dim: usize,
    /// Fraction of rows planted as duplicates of earlier rows, in `[0, 1]`.
    pub duplicate_fraction: f64,
    /// Additive noise applied to planted duplicates; 0 plants bitwise copies.
    pub duplicate_noise_sigma: f64,
    /// Per-sample noise around the class prototype, drawn independently per
    /// modality; this is what limits cross-modal alignment.
    pub cross_modal_noise_sigma: f64,
    pub rng_seed: u64,
}

impl CorpusSpec {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_classes == 0 || self.raw_dim == 0 {
            return Err(Error::Config("corpus counts must be positive".into()));
        }
        if self.n_classes > self.n_samples {
            return Err(Error::Config(format!(
                "n_classes {} exceeds n_samples {}",
                self.n_classes, self.n_samples
            )));
        }
        if !(0.0..=1.0).contains(&self.duplicate_fraction) {
            return Err(Error::Config("duplicate_fraction must be in [0, 1]".into()));
        }
        if self.duplicate_noise_sigma < 0.0 || self.cross_modal_noise_sigma < 0.0 {
            return Err(Error::Config("noise sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// A positive-pair corpus: row `i` of `image` and row `i` of `text` describe
/// the same underlying sample.
#[derive(Clone, Debug)]
pub struct PairedCorpus {
    pub image: FeatureMatrix,
    pub text: FeatureMatrix,
    pub class_label: Vec<usize>,
    /// For planted duplicates, the index of the earlier row they copy.
    pub duplicate_of: Vec<Option<usize>>,
}

fn sample_prototypes(rng: &mut ChaCha8Rng, n_classes: usize, d: usize) -> Vec<f32> {
    let mut protos = vec![0.0f32; n_classes * d];
    for c in 0..n_classes {
        let mut row = vec![0.0f64; d];
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for (dst, v) in protos[c * d..(c + 1) * d].iter_mut().zip(row.iter()) {
            *dst = (v / norm) as f32;
        }
    }
    protos
}

/// The unit-norm class prototypes implied by `spec`, regenerated from its
/// seed. Shared across modalities; the returned matrix carries `modality`.
pub fn class_prototypes(spec: &CorpusSpec, modality: Modality) -> Result<FeatureMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let protos = sample_prototypes(&mut rng, spec.n_classes, spec.raw_dim);
    FeatureMatrix::new(spec.n_classes, spec.raw_dim, modality, protos)
}

/// Generate a deterministic paired corpus.
///
/// `round(n_samples * duplicate_fraction)` rows (never row 0) are planted as
/// copies of a uniformly chosen earlier row with additive Gaussian noise of
/// scale `duplicate_noise_sigma`; with zero noise the copy is bitwise. Sources
/// may themselves be duplicates, so provenance can chain.
pub fn synth_paired_corpus(spec: &CorpusSpec) -> Result<PairedCorpus> {
    spec.validate()?;
    let n = spec.n_samples;
    let d = spec.raw_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    // Draw order is fixed: prototypes, labels, duplicate positions, rows.
    let protos = sample_prototypes(&mut rng, spec.n_classes, d);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..spec.n_classes)).collect();

    let n_dup = ((n as f64 * spec.duplicate_fraction).round() as usize).min(n.saturating_sub(1));
    let mut candidates: Vec<usize> = (1..n).collect();
    for i in 0..n_dup {
        let j = rng.gen_range(i..candidates.len());
        candidates.swap(i, j);
    }
    let mut is_dup = vec![false; n];
    for &i in &candidates[..n_dup] {
        is_dup[i] = true;
    }

    let mut image = vec![0.0f32; n * d];
    let mut text = vec![0.0f32; n * d];
    let mut duplicate_of: Vec<Option<usize>> = vec![None; n];

    for i in 0..n {
        if is_dup[i] {
            let src = rng.gen_range(0..i);
            duplicate_of[i] = Some(src);
            labels[i] = labels[src];
            let (img_lo, img_hi) = image.split_at_mut(i * d);
            img_hi[..d].copy_from_slice(&img_lo[src * d..(src + 1) * d]);
            let (txt_lo, txt_hi) = text.split_at_mut(i * d);
            txt_hi[..d].copy_from_slice(&txt_lo[src * d..(src + 1) * d]);
            if spec.duplicate_noise_sigma > 0.0 {
                for v in &mut image[i * d..(i + 1) * d] {
                    let g: f64 = rng.sample(StandardNormal);
                    *v += (spec.duplicate_noise_sigma * g) as f32;
                }
                for v in &mut text[i * d..(i + 1) * d] {
                    let g: f64 = rng.sample(StandardNormal);
                    *v += (spec.duplicate_noise_sigma * g) as f32;
                }
            }
        } else {
            let c = labels[i];
            let proto = &protos[c * d..(c + 1) * d];
            image[i * d..(i + 1) * d].copy_from_slice(proto);
            text[i * d..(i + 1) * d].copy_from_slice(proto);
            if spec.cross_modal_noise_sigma > 0.0 {
                for v in &mut image[i * d..(i + 1) * d] {
                    let g: f64 = rng.sample(StandardNormal);
                    *v += (spec.cross_modal_noise_sigma * g) as f32;
                }
                for v in &mut text[i * d..(i + 1) * d] {
                    let g: f64 = rng.sample(StandardNormal);
                    *v += (spec.cross_modal_noise_sigma * g) as f32;
                }
            }
        }
    }

    Ok(PairedCorpus {
        image: FeatureMatrix::new(n, d, Modality::Image, image)?,
        text: FeatureMatrix::new(n, d, Modality::Text, text)?,
        class_label: labels,
        duplicate_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{dot, l2sq};

    fn spec(n: usize, classes: usize) -> CorpusSpec {
        CorpusSpec {
            n_samples: n,
            n_classes: classes,
            raw_dim: 16,
            duplicate_fraction: 0.0,
            duplicate_noise_sigma: 0.0,
            cross_modal_noise_sigma: 0.1,
            rng_seed: 0,
        }
    }

    #[test]
    fn no_duplicates_requested() {
        let c = synth_paired_corpus(&spec(10, 10)).unwrap();
        assert!(c.duplicate_of.iter().all(|x| x.is_none()));
    }

    #[test]
    fn zero_noise_copies_are_bitwise() {
        let mut s = spec(100, 5);
        s.duplicate_fraction = 0.2;
        let c = synth_paired_corpus(&s).unwrap();
        let dups: Vec<usize> =
            (0..100).filter(|&i| c.duplicate_of[i].is_some()).collect();
        assert_eq!(dups.len(), 20);
        let mut bitwise = 0;
        for i in 1..100 {
            let row = c.image.row(i);
            if (0..i).any(|j| c.image.row(j) == row) {
                bitwise += 1;
            }
        }
        assert_eq!(bitwise, 20);
        for &i in &dups {
            let src = c.duplicate_of[i].unwrap();
            assert!(src < i);
            assert_eq!(l2sq(c.image.row(i), c.image.row(src)), 0.0);
            assert_eq!(l2sq(c.text.row(i), c.text.row(src)), 0.0);
            assert_eq!(c.class_label[i], c.class_label[src]);
        }
    }

    #[test]
    fn determinism() {
        let mut s = spec(64, 4);
        s.rng_seed = 3;
        s.duplicate_fraction = 0.3;
        s.duplicate_noise_sigma = 0.01;
        let a = synth_paired_corpus(&s).unwrap();
        let b = synth_paired_corpus(&s).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.text, b.text);
        assert_eq!(a.class_label, b.class_label);
        assert_eq!(a.duplicate_of, b.duplicate_of);
    }

    #[test]
    fn prototypes_are_co_indexed_at_zero_noise() {
        let mut s = spec(40, 8);
        s.cross_modal_noise_sigma = 0.0;
        let c = synth_paired_corpus(&s).unwrap();
        for i in 0..c.image.n() {
            let qi = c.image.row(i);
            let norm_q = dot(qi, qi).sqrt();
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for j in 0..c.text.n() {
                let tj = c.text.row(j);
                let norm_t = dot(tj, tj).sqrt();
                let sim = dot(qi, tj) / (norm_q * norm_t);
                if sim > best.0 {
                    best = (sim, j);
                }
            }
            assert_eq!(c.class_label[best.1], c.class_label[i]);
        }
    }

    #[test]
    fn prototypes_regenerate_identically() {
        let s = spec(20, 6);
        let protos = class_prototypes(&s, Modality::Text).unwrap();
        let c = synth_paired_corpus(&CorpusSpec { cross_modal_noise_sigma: 0.0, ..s.clone() })
            .unwrap();
        // With zero noise, each non-duplicate row equals its class prototype.
        for i in 0..c.image.n() {
            assert_eq!(c.image.row(i), protos.row(c.class_label[i]));
        }
        for r in protos.rows() {
            let norm = dot(r, r).sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn too_many_classes_rejected() {
        assert!(synth_paired_corpus(&spec(4, 10)).is_err());
    }
}
