//! Class augmentation by cross-class interpolation, and two-view input
//! augmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Rng;
use crate::sample::{group_by_label, Image, Payload, Sample};

pub const LAMBDA_MIN: f64 = 0.4;
pub const LAMBDA_MAX: f64 = 0.6;

/// Ids of synthesized samples have this bit set.
pub const SYNTHETIC_ID_BIT: u64 = 1 << 63;

/// `lambda * x_i + (1 - lambda) * x_j`, elementwise.
pub fn mix_pair(x_i: &Payload, x_j: &Payload, lambda: f64) -> Result<Payload> {
    if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    if !x_i.same_shape(x_j) {
        return Err(Error::ShapeMismatch(format!(
            "cannot mix {} with {}",
            x_i.describe(),
            x_j.describe()
        )));
    }
    let rest = 1.0 - lambda;
    let mut out = x_i.clone();
    for (o, (a, b)) in out
        .values_mut()
        .iter_mut()
        .zip(x_i.values().iter().zip(x_j.values()))
    {
        *o = lambda * a + rest * b;
    }
    Ok(out)
}

pub fn sample_lambda(rng: &mut Rng) -> f64 {
    rng.uniform(LAMBDA_MIN, LAMBDA_MAX)
        .expect("constant lambda range is valid")
}

/// Label space of `C` original classes plus one synthetic class per unordered
/// pair. Pairs are numbered lexicographically: `(0,1), (0,2), …, (1,2), …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedLabelSpace {
    classes: usize,
    pairs: Vec<(usize, usize)>,
}

impl AugmentedLabelSpace {
    pub fn new(classes: usize) -> Self {
        let mut pairs = Vec::with_capacity(classes * classes.saturating_sub(1) / 2);
        for i in 0..classes {
            for j in i + 1..classes {
                pairs.push((i, j));
            }
        }
        Self { classes, pairs }
    }

    pub fn original_classes(&self) -> usize {
        self.classes
    }

    pub fn synthetic_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn total(&self) -> usize {
        self.classes + self.pairs.len()
    }

    /// Synthetic label for the unordered pair `{i, j}`; `None` if `i == j` or out of range.
    pub fn encode(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if i == j || j >= self.classes {
            return None;
        }
        let c = self.classes;
        // pairs starting with a < i: sum_{a<i} (c - 1 - a)
        let before = i * (2 * c - i - 1) / 2;
        Some(c + before + (j - i - 1))
    }

    pub fn decode(&self, label: usize) -> Option<(usize, usize)> {
        label
            .checked_sub(self.classes)
            .and_then(|k| self.pairs.get(k).copied())
    }
}

pub fn build_augmented_label_space(classes: usize) -> AugmentedLabelSpace {
    AugmentedLabelSpace::new(classes)
}

/// Draws `count` mixed samples from pairs of distinct classes.
pub(crate) fn draw_mixed(
    base_data: &[Sample],
    groups: &[Vec<usize>],
    space: &AugmentedLabelSpace,
    count: usize,
    next_id: &mut u64,
    rng: &mut Rng,
) -> Result<Vec<Sample>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let present: Vec<usize> = (0..groups.len()).filter(|&c| !groups[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::InsufficientClasses {
            needed: 2,
            found: present.len(),
        });
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let ia = rng.below(present.len());
        let mut ib = rng.below(present.len() - 1);
        if ib >= ia {
            ib += 1;
        }
        let (i, j) = (present[ia].min(present[ib]), present[ia].max(present[ib]));
        let label = space.encode(i, j).ok_or(Error::BadTarget {
            target: j,
            classes: space.original_classes(),
        })?;
        let xi = &base_data[groups[i][rng.below(groups[i].len())]];
        let xj = &base_data[groups[j][rng.below(groups[j].len())]];
        let lambda = sample_lambda(rng);
        out.push(Sample {
            id: SYNTHETIC_ID_BIT | *next_id,
            label,
            payload: mix_pair(&xi.payload, &xj.payload, lambda)?,
        });
        *next_id += 1;
    }
    Ok(out)
}

pub(crate) fn check_base_labels(base_data: &[Sample], space: &AugmentedLabelSpace) -> Result<()> {
    match base_data.iter().find(|s| s.label >= space.original_classes()) {
        Some(s) => Err(Error::BadTarget {
            target: s.label,
            classes: space.original_classes(),
        }),
        None => Ok(()),
    }
}

/// A batch of `batch_size` samples: `floor(mix_fraction * batch_size)` mixed
/// samples labeled by the pair map, the rest drawn from `base_data` (without
/// replacement while possible).
pub fn sample_class_augmented_batch(
    base_data: &[Sample],
    space: &AugmentedLabelSpace,
    batch_size: usize,
    mix_fraction: f64,
    rng: &mut Rng,
) -> Result<Vec<Sample>> {
    if !(0.0..=1.0).contains(&mix_fraction) {
        return Err(Error::InvalidTrainConfig(format!(
            "mix_fraction must lie in [0, 1], got {mix_fraction}"
        )));
    }
    if base_data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_base_labels(base_data, space)?;
    let n_mix = (mix_fraction * batch_size as f64).floor() as usize;
    let groups = group_by_label(base_data);
    let mut next_id = 0;
    let mut batch = draw_mixed(base_data, &groups, space, n_mix, &mut next_id, rng)?;
    let n_real = batch_size - n_mix;
    if n_real <= base_data.len() {
        batch.extend(
            rng.sample_indices(base_data.len(), n_real)
                .into_iter()
                .map(|i| base_data[i].clone()),
        );
    } else {
        batch.extend((0..n_real).map(|_| base_data[rng.below(base_data.len())].clone()));
    }
    Ok(batch)
}

/// Feature-vector analog of image augmentation: additive Gaussian noise, then
/// each coordinate zeroed with probability `mask_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorViews {
    pub noise_sigma: f64,
    pub mask_prob: f64,
}

impl Default for VectorViews {
    fn default() -> Self {
        Self {
            noise_sigma: 0.1,
            mask_prob: 0.1,
        }
    }
}

/// Image view transforms. A transform with probability 0 (or `None`) is off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageViews {
    /// Area fraction range of the random sub-window, rescaled bilinearly.
    pub crop_scale: Option<(f64, f64)>,
    pub flip_prob: f64,
    /// Per-channel multiplicative jitter range.
    pub jitter: Option<(f64, f64)>,
    pub grayscale_prob: f64,
}

impl Default for ImageViews {
    fn default() -> Self {
        Self {
            crop_scale: Some((0.6, 1.0)),
            flip_prob: 0.5,
            jitter: Some((0.8, 1.2)),
            grayscale_prob: 0.2,
        }
    }
}

impl ImageViews {
    pub fn flip_only(prob: f64) -> Self {
        Self {
            crop_scale: None,
            flip_prob: prob,
            jitter: None,
            grayscale_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ViewTransformSpec {
    Identity,
    Vector(VectorViews),
    Image(ImageViews),
}

impl Default for ViewTransformSpec {
    fn default() -> Self {
        ViewTransformSpec::Vector(VectorViews::default())
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidViewSpec(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

impl ViewTransformSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ViewTransformSpec::Identity => Ok(()),
            ViewTransformSpec::Vector(v) => {
                check_prob("mask_prob", v.mask_prob)?;
                if !(v.noise_sigma >= 0.0) {
                    return Err(Error::InvalidViewSpec(format!(
                        "noise_sigma = {} must be nonnegative",
                        v.noise_sigma
                    )));
                }
                Ok(())
            }
            ViewTransformSpec::Image(v) => {
                check_prob("flip_prob", v.flip_prob)?;
                check_prob("grayscale_prob", v.grayscale_prob)?;
                if let Some((lo, hi)) = v.crop_scale {
                    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                        return Err(Error::InvalidViewSpec(format!(
                            "crop_scale ({lo}, {hi}) must lie in (0, 1]"
                        )));
                    }
                }
                if let Some((lo, hi)) = v.jitter {
                    if !(lo > 0.0 && lo <= hi) {
                        return Err(Error::InvalidViewSpec(format!(
                            "jitter ({lo}, {hi}) must be a positive range"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            ViewTransformSpec::Identity => true,
            ViewTransformSpec::Vector(v) => v.noise_sigma == 0.0 && v.mask_prob == 0.0,
            ViewTransformSpec::Image(v) => {
                v.crop_scale.is_none()
                    && v.flip_prob == 0.0
                    && v.jitter.is_none()
                    && v.grayscale_prob == 0.0
            }
        }
    }
}

fn draw_in(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo < hi {
        rng.uniform(lo, hi).expect("range checked")
    } else {
        lo
    }
}

fn vector_view(x: &[f64], spec: &VectorViews, rng: &mut Rng) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let noisy = if spec.noise_sigma > 0.0 {
                v + spec.noise_sigma * rng.normal()
            } else {
                v
            };
            if spec.mask_prob > 0.0 && rng.bernoulli(spec.mask_prob) {
                0.0
            } else {
                noisy
            }
        })
        .collect()
}

fn bilinear(img: &Image, c: usize, y: f64, x: f64) -> f64 {
    let y0 = y.floor().max(0.0) as usize;
    let x0 = x.floor().max(0.0) as usize;
    let y0 = y0.min(img.height - 1);
    let x0 = x0.min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let x1 = (x0 + 1).min(img.width - 1);
    let fy = (y - y0 as f64).clamp(0.0, 1.0);
    let fx = (x - x0 as f64).clamp(0.0, 1.0);
    let top = img.at(c, y0, x0) * (1.0 - fx) + img.at(c, y0, x1) * fx;
    let bot = img.at(c, y1, x0) * (1.0 - fx) + img.at(c, y1, x1) * fx;
    top * (1.0 - fy) + bot * fy
}

fn resized_crop(img: &Image, area: f64, rng: &mut Rng) -> Image {
    let side = area.sqrt();
    let cw = ((img.width as f64 * side).round() as usize).clamp(1, img.width);
    let ch = ((img.height as f64 * side).round() as usize).clamp(1, img.height);
    let ox = rng.below(img.width - cw + 1);
    let oy = rng.below(img.height - ch + 1);
    let mut out = img.clone();
    // align corners of the window with corners of the output
    let sx = if img.width > 1 { (cw - 1) as f64 / (img.width - 1) as f64 } else { 0.0 };
    let sy = if img.height > 1 { (ch - 1) as f64 / (img.height - 1) as f64 } else { 0.0 };
    for c in 0..img.channels {
        for y in 0..img.height {
            for x in 0..img.width {
                *out.at_mut(c, y, x) =
                    bilinear(img, c, oy as f64 + y as f64 * sy, ox as f64 + x as f64 * sx);
            }
        }
    }
    out
}

fn hflip(img: &Image) -> Image {
    let mut out = img.clone();
    for c in 0..img.channels {
        for y in 0..img.height {
            for x in 0..img.width {
                *out.at_mut(c, y, x) = img.at(c, y, img.width - 1 - x);
            }
        }
    }
    out
}

fn image_view(img: &Image, spec: &ImageViews, rng: &mut Rng) -> Image {
    let mut out = match spec.crop_scale {
        Some(range) => {
            let area = draw_in(rng, range);
            resized_crop(img, area, rng)
        }
        None => img.clone(),
    };
    if spec.flip_prob > 0.0 && rng.bernoulli(spec.flip_prob) {
        out = hflip(&out);
    }
    if let Some(range) = spec.jitter {
        let plane = out.width * out.height;
        for c in 0..out.channels {
            let k = draw_in(rng, range);
            for v in &mut out.data[c * plane..(c + 1) * plane] {
                *v *= k;
            }
        }
    }
    if spec.grayscale_prob > 0.0 && rng.bernoulli(spec.grayscale_prob) {
        let plane = out.width * out.height;
        for p in 0..plane {
            let mean = (0..out.channels).map(|c| out.data[c * plane + p]).sum::<f64>()
                / out.channels as f64;
            for c in 0..out.channels {
                out.data[c * plane + p] = mean;
            }
        }
    }
    out
}

fn one_view(x: &Payload, spec: &ViewTransformSpec, rng: &mut Rng) -> Result<Payload> {
    match (spec, x) {
        (ViewTransformSpec::Identity, _) => Ok(x.clone()),
        (ViewTransformSpec::Vector(v), Payload::Vector(data)) => {
            Ok(Payload::Vector(vector_view(data, v, rng)))
        }
        (ViewTransformSpec::Image(v), Payload::Image(img)) => {
            Ok(Payload::Image(image_view(img, v, rng)))
        }
        (ViewTransformSpec::Vector(_), other) | (ViewTransformSpec::Image(_), other) => {
            Err(Error::UnsupportedPayload(format!(
                "{} transforms cannot be applied to {}",
                match spec {
                    ViewTransformSpec::Vector(_) => "vector",
                    _ => "image",
                },
                other.describe()
            )))
        }
    }
}

/// Two independent stochastic views of `x`.
pub fn two_view(x: &Payload, spec: &ViewTransformSpec, rng: &mut Rng) -> Result<(Payload, Payload)> {
    spec.validate()?;
    let a = one_view(x, spec, rng)?;
    let b = one_view(x, spec, rng)?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::math::Rng;

    fn v(x: &[f64]) -> Payload {
        Payload::Vector(x.to_vec())
    }

    #[test]
    fn mix_pair_examples() {
        assert_eq!(mix_pair(&v(&[2.0, 0.0]), &v(&[0.0, 2.0]), 0.5).unwrap(), v(&[1.0, 1.0]));
        assert_eq!(mix_pair(&v(&[1.0, 1.0]), &v(&[0.0, 0.0]), 0.6).unwrap(), v(&[0.6, 0.6]));
        assert_eq!(
            mix_pair(&v(&[1.0]), &v(&[0.0]), 0.9),
            Err(Error::LambdaOutOfRange(0.9))
        );
        assert!(matches!(
            mix_pair(&v(&[1.0]), &v(&[0.0, 1.0]), 0.5),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn lambda_draws() {
        let mut rng = Rng::new(123);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_lambda(&mut rng)).collect();
        assert!(draws.iter().all(|l| (LAMBDA_MIN..=LAMBDA_MAX).contains(l)));
        // uniform on [0.4, 0.6]: sd of the mean is 0.2/sqrt(12e4) ~ 5.8e-4
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
        let mut again = Rng::new(123);
        assert!(draws.iter().take(100).all(|&l| l == sample_lambda(&mut again)));
    }

    #[test]
    fn label_space_examples() {
        // 60 classes: 60 * 59 / 2 = 1770 pairs, 1830 labels in total
        let s = build_augmented_label_space(60);
        assert_eq!(s.synthetic_count(), 1770);
        assert_eq!(s.total(), 1830);

        let s = build_augmented_label_space(3);
        assert_eq!(s.encode(0, 1), Some(3));
        assert_eq!(s.encode(0, 2), Some(4));
        assert_eq!(s.encode(1, 2), Some(5));
        assert_eq!(s.encode(2, 1), Some(5));
        assert_eq!(s.encode(1, 1), None);
        assert_eq!(s.decode(4), Some((0, 2)));
        assert_eq!(s.decode(2), None);

        let s = build_augmented_label_space(1);
        assert_eq!((s.synthetic_count(), s.total()), (0, 1));
    }

    #[test]
    fn pair_map_is_bijective() {
        for c in 1..=200 {
            let s = AugmentedLabelSpace::new(c);
            for label in c..s.total() {
                let (i, j) = s.decode(label).unwrap();
                assert!(i < j);
                assert_eq!(s.encode(i, j), Some(label));
            }
        }
    }

    fn blobs() -> Vec<Sample> {
        (0..12)
            .map(|i| Sample::vector(i as u64, i % 3, vec![(i % 3) as f64, 1.0 + i as f64]))
            .collect()
    }

    #[test]
    fn batch_without_mixing_is_real_data() {
        let data = blobs();
        let space = AugmentedLabelSpace::new(3);
        let b = sample_class_augmented_batch(&data, &space, 8, 0.0, &mut Rng::new(1)).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.iter().all(|s| data.contains(s)));
    }

    #[test]
    fn full_mixing_two_classes_uses_single_label() {
        let data: Vec<Sample> = blobs().into_iter().filter(|s| s.label < 2).collect();
        let space = AugmentedLabelSpace::new(2);
        let b = sample_class_augmented_batch(&data, &space, 6, 1.0, &mut Rng::new(2)).unwrap();
        assert_eq!(b.len(), 6);
        assert!(b.iter().all(|s| s.label == 2 && s.id & SYNTHETIC_ID_BIT != 0));
    }

    #[test]
    fn mixing_needs_two_classes() {
        let data: Vec<Sample> = blobs().into_iter().filter(|s| s.label == 0).collect();
        let space = AugmentedLabelSpace::new(1);
        assert!(matches!(
            sample_class_augmented_batch(&data, &space, 4, 0.5, &mut Rng::new(2)),
            Err(Error::InsufficientClasses { .. })
        ));
    }

    #[test]
    fn mixed_samples_lie_between_parents() {
        let data = blobs();
        let space = AugmentedLabelSpace::new(3);
        let b = sample_class_augmented_batch(&data, &space, 40, 0.5, &mut Rng::new(3)).unwrap();
        let mixed: Vec<&Sample> = b.iter().filter(|s| s.label >= 3).collect();
        assert_eq!(mixed.len(), 20);
        for s in mixed {
            let (i, j) = space.decode(s.label).unwrap();
            // first coordinate is the class index, so the mix lies strictly between
            let x = s.payload.values()[0];
            assert!(x >= i as f64 && x <= j as f64);
            assert!(x > i as f64 && x < j as f64);
        }
    }

    #[test]
    fn identity_views() {
        let x = v(&[1.0, -2.0, 3.0]);
        let (a, b) = two_view(&x, &ViewTransformSpec::Identity, &mut Rng::new(0)).unwrap();
        assert_eq!((a, b), (x.clone(), x.clone()));
        let off = ViewTransformSpec::Vector(VectorViews { noise_sigma: 0.0, mask_prob: 0.0 });
        assert!(off.is_identity());
        let (a, b) = two_view(&x, &off, &mut Rng::new(0)).unwrap();
        assert_eq!((a, b), (x.clone(), x));
    }

    fn test_image() -> Image {
        Image::new(3, 2, 2, (0..12).map(|i| i as f64 / 12.0).collect()).unwrap()
    }

    #[test]
    fn certain_flip_mirrors_both_views() {
        let img = test_image();
        let spec = ViewTransformSpec::Image(ImageViews::flip_only(1.0));
        let (a, b) = two_view(&Payload::Image(img.clone()), &spec, &mut Rng::new(4)).unwrap();
        let mirror = hflip(&img);
        assert_eq!(a, Payload::Image(mirror.clone()));
        assert_eq!(b, Payload::Image(mirror));
        assert_eq!(img.at(1, 0, 0), hflip(&img).at(1, 0, 2));
    }

    #[test]
    fn views_are_seed_deterministic() {
        let x = Payload::Image(test_image());
        let spec = ViewTransformSpec::Image(ImageViews::default());
        let first = two_view(&x, &spec, &mut Rng::new(8)).unwrap();
        let second = two_view(&x, &spec, &mut Rng::new(8)).unwrap();
        assert_eq!(first, second);
        let vspec = ViewTransformSpec::default();
        let y = v(&[0.5; 6]);
        assert_eq!(
            two_view(&y, &vspec, &mut Rng::new(8)).unwrap(),
            two_view(&y, &vspec, &mut Rng::new(8)).unwrap()
        );
    }

    #[test]
    fn full_crop_is_identity() {
        let img = test_image();
        let out = resized_crop(&img, 1.0, &mut Rng::new(1));
        for (a, b) in out.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_payload_kind_is_rejected() {
        let spec = ViewTransformSpec::Image(ImageViews::default());
        assert!(matches!(
            two_view(&v(&[1.0]), &spec, &mut Rng::new(0)),
            Err(Error::UnsupportedPayload(_))
        ));
        let spec = ViewTransformSpec::default();
        assert!(matches!(
            two_view(&Payload::Image(test_image()), &spec, &mut Rng::new(0)),
            Err(Error::UnsupportedPayload(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        let bad = ViewTransformSpec::Image(ImageViews { crop_scale: Some((0.0, 1.0)), ..Default::default() });
        assert!(bad.validate().is_err());
        let bad = ViewTransformSpec::Vector(VectorViews { noise_sigma: 0.1, mask_prob: 1.5 });
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn mix_is_convex_and_swap_symmetric(
            a in prop::collection::vec(-5f64..5.0, 6),
            b in prop::collection::vec(-5f64..5.0, 6),
            step in 0u32..=(1 << 18),
        ) {
            // dyadic lambdas make 1 - (1 - lambda) exact
            let lambda = 0.4 + step as f64 * (0.2 / (1u64 << 18) as f64);
            let lambda = (lambda * (1u64 << 20) as f64).round() / (1u64 << 20) as f64;
            prop_assume!((LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda));
            let m = mix_pair(&v(&a), &v(&b), lambda).unwrap();
            for ((x, y), z) in a.iter().zip(&b).zip(m.values()) {
                prop_assert!(*z >= x.min(*y) - 1e-12 && *z <= x.max(*y) + 1e-12);
            }
            let swapped = mix_pair(&v(&b), &v(&a), 1.0 - lambda).unwrap();
            prop_assert_eq!(m, swapped);
        }

        #[test]
        fn views_keep_dimensionality(seed in 0u64..1000, len in 1usize..40) {
            let x = v(&vec![0.3; len]);
            let (p, q) = two_view(&x, &ViewTransformSpec::default(), &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(p.len(), len);
            prop_assert_eq!(q.len(), len);
            let img = Payload::Image(test_image());
            let (p, q) = two_view(&img, &ViewTransformSpec::Image(ImageViews::default()), &mut Rng::new(seed)).unwrap();
            prop_assert!(p.same_shape(&img) && q.same_shape(&img));
        }
    }
}
