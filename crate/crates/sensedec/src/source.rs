//! Sources of labelled observations.
//!
//! Two families are provided: synthetic Gaussian classes for controlled
//! experiments, and IDX-format image files (the classic big-endian layout
//! with magic 2051 for images and 2049 for labels). Samples are row-major
//! `f64` vectors; image pixels are scaled to `[0, 1]`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const IDX_IMAGE_MAGIC: u32 = 2051;
const IDX_LABEL_MAGIC: u32 = 2049;

/// Which split a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Validation,
}

/// A labelled dataset: `samples[i]` is a `dim()`-vector with class `labels[i]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
    split_tag: SplitTag,
}

impl Dataset {
    /// Build a dataset, validating that samples and labels line up, all
    /// sample vectors share one dimension, and labels lie in `0..num_classes`.
    pub fn new(
        samples: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        split_tag: SplitTag,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("dataset must be non-empty".into()));
        }
        if samples.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        let dim = samples[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("samples must have dimension >= 1".into()));
        }
        if let Some(i) = samples.iter().position(|s| s.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "sample {i} has dimension {} but sample 0 has {dim}",
                samples[i].len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {} at index {i} out of range for {num_classes} classes",
                labels[i]
            )));
        }
        Ok(Dataset { samples, labels, num_classes, split_tag })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample dimension `d_s`.
    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    /// Per-class sample counts.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// The dataset restricted to the given indices, keeping class count and tag.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "subset index {i} out of range for {} samples",
                self.len()
            )));
        }
        Dataset::new(
            indices.iter().map(|&i| self.samples[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.num_classes,
            self.split_tag,
        )
    }
}

/// How a flat sample vector is carved into per-agent views.
///
/// Views are contiguous slices in sample order; `view_dims[q]` is the width
/// of view `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewSplit {
    view_dims: Vec<usize>,
}

impl ViewSplit {
    pub fn new(view_dims: Vec<usize>) -> Result<Self> {
        if view_dims.is_empty() {
            return Err(Error::InvalidArgument("view split needs at least one view".into()));
        }
        if view_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("view dimensions must be >= 1".into()));
        }
        Ok(ViewSplit { view_dims })
    }

    /// `num_views` equal slices of a `total_dim`-vector.
    pub fn equal(num_views: usize, total_dim: usize) -> Result<Self> {
        if num_views == 0 || total_dim == 0 {
            return Err(Error::InvalidArgument("views and total dimension must be >= 1".into()));
        }
        if total_dim % num_views != 0 {
            return Err(Error::InvalidArgument(format!(
                "total dimension {total_dim} not divisible into {num_views} equal views"
            )));
        }
        ViewSplit::new(vec![total_dim / num_views; num_views])
    }

    pub fn num_views(&self) -> usize {
        self.view_dims.len()
    }

    pub fn view_dims(&self) -> &[usize] {
        &self.view_dims
    }

    pub fn total_dim(&self) -> usize {
        self.view_dims.iter().sum()
    }
}

/// Slice `sample` into the views described by `split`.
pub fn split_views<'a>(sample: &'a [f64], split: &ViewSplit) -> Result<Vec<&'a [f64]>> {
    if split.total_dim() != sample.len() {
        return Err(Error::InvalidArgument(format!(
            "view split covers {} dims but sample has {}",
            split.total_dim(),
            sample.len()
        )));
    }
    let mut views = Vec::with_capacity(split.num_views());
    let mut offset = 0;
    for &d in &split.view_dims {
        views.push(&sample[offset..offset + d]);
        offset += d;
    }
    Ok(views)
}

/// Draw `n` samples from `num_classes` unit-variance isotropic Gaussians.
///
/// Class means sit on the first axis at `0, separation, 2*separation, ...`,
/// so every pair of means is at least `separation` apart and coordinates
/// beyond the first carry no class information. Labels are balanced to
/// within one sample and shuffled deterministically by `seed`.
pub fn generate_gaussian_source(
    num_classes: usize,
    dim: usize,
    separation: f64,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if n < num_classes {
        return Err(Error::InvalidArgument(format!(
            "need at least one sample per class: n={n} < num_classes={num_classes}"
        )));
    }
    if !(separation >= 0.0) {
        return Err(Error::InvalidArgument(format!("separation must be >= 0, got {separation}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(n);
    for k in 0..num_classes {
        let count = n / num_classes + usize::from(k < n % num_classes);
        labels.extend(std::iter::repeat(k).take(count));
    }
    labels.shuffle(&mut rng);

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let samples = labels
        .iter()
        .map(|&k| {
            let mut x: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            x[0] += k as f64 * separation;
            x
        })
        .collect();
    Dataset::new(samples, labels, num_classes, SplitTag::Train)
}

/// Synthetic 28x28 image source: each class is a Gaussian intensity bump at
/// a class-specific position, plus pixel noise, clipped to `[0, 1]`.
///
/// Serves as an image-shaped stand-in wherever IDX-format data is exercised
/// without shipping real scans.
pub fn generate_image_source(
    num_classes: usize,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    const SIDE: usize = 28;
    if num_classes < 2 || num_classes > 10 {
        return Err(Error::InvalidArgument("image source supports 2..=10 classes".into()));
    }
    if n < num_classes {
        return Err(Error::InvalidArgument(format!(
            "need at least one sample per class: n={n} < num_classes={num_classes}"
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }

    // Bump centres on a circle; neighbouring templates overlap but remain
    // comfortably distinguishable at this radius.
    let templates: Vec<Vec<f64>> = (0..num_classes)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / num_classes as f64;
            let (ci, cj) = (13.5 + 8.0 * angle.sin(), 13.5 + 8.0 * angle.cos());
            (0..SIDE * SIDE)
                .map(|p| {
                    let (i, j) = ((p / SIDE) as f64, (p % SIDE) as f64);
                    let d2 = (i - ci).powi(2) + (j - cj).powi(2);
                    (-d2 / (2.0 * 2.5f64.powi(2))).exp()
                })
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(n);
    for k in 0..num_classes {
        let count = n / num_classes + usize::from(k < n % num_classes);
        labels.extend(std::iter::repeat(k).take(count));
    }
    labels.shuffle(&mut rng);

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let samples = labels
        .iter()
        .map(|&k| {
            templates[k]
                .iter()
                .map(|&t| (t + noise_sigma * normal.sample(&mut rng)).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    Dataset::new(samples, labels, num_classes, SplitTag::Train)
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path, field: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Format(format!(
            "{}: truncated while reading {field}",
            path.display()
        )));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().expect("4 bytes")))
}

/// Load an IDX image/label file pair.
///
/// Pixels are scaled to `[0, 1]` by dividing by 255 and flattened row-major;
/// the class count is inferred from the largest label present.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let magic = read_be_u32(&image_bytes, 0, images_path, "magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {magic} in image file (expected {IDX_IMAGE_MAGIC})",
            images_path.display()
        )));
    }
    let count = read_be_u32(&image_bytes, 4, images_path, "count")? as usize;
    let rows = read_be_u32(&image_bytes, 8, images_path, "rows")? as usize;
    let cols = read_be_u32(&image_bytes, 12, images_path, "cols")? as usize;
    let pixels = &image_bytes[16..];
    if pixels.len() != count * rows * cols {
        return Err(Error::Format(format!(
            "{}: pixel payload is {} bytes, expected {} ({count} x {rows} x {cols})",
            images_path.display(),
            pixels.len(),
            count * rows * cols
        )));
    }

    let label_magic = read_be_u32(&label_bytes, 0, labels_path, "magic")?;
    if label_magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {label_magic} in label file (expected {IDX_LABEL_MAGIC})",
            labels_path.display()
        )));
    }
    let label_count = read_be_u32(&label_bytes, 4, labels_path, "count")? as usize;
    let labels_raw = &label_bytes[8..];
    if labels_raw.len() != label_count {
        return Err(Error::Format(format!(
            "{}: label payload is {} bytes, expected {label_count}",
            labels_path.display(),
            labels_raw.len()
        )));
    }
    if label_count != count {
        return Err(Error::Format(format!(
            "image file has {count} items but label file has {label_count}"
        )));
    }

    let dim = rows * cols;
    let samples = (0..count)
        .map(|i| pixels[i * dim..(i + 1) * dim].iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    let labels: Vec<usize> = labels_raw.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    Dataset::new(samples, labels, num_classes, SplitTag::Train)
}

/// Write a dataset as an IDX image/label file pair with the given image shape.
///
/// Pixels are mapped back to bytes by `round(x * 255)`; loading a file and
/// re-serializing it reproduces the original byte streams.
pub fn write_idx(
    dataset: &Dataset,
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    if rows * cols != dataset.dim() {
        return Err(Error::InvalidArgument(format!(
            "{rows} x {cols} does not match sample dimension {}",
            dataset.dim()
        )));
    }
    if dataset.num_classes() > 256 {
        return Err(Error::InvalidArgument("IDX labels are single bytes (max 256 classes)".into()));
    }

    let mut image_bytes = Vec::with_capacity(16 + dataset.len() * dataset.dim());
    image_bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    image_bytes.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for sample in dataset.samples() {
        for &x in sample {
            image_bytes.push((x * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }

    let mut label_bytes = Vec::with_capacity(8 + dataset.len());
    label_bytes.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    label_bytes.extend(dataset.labels().iter().map(|&l| l as u8));

    fs::write(images_path, image_bytes).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, label_bytes).map_err(|e| Error::io(labels_path, e))?;
    Ok(())
}

/// Split a dataset into train and validation parts by a seeded shuffle.
///
/// The train part receives `round(fraction * n)` samples; both parts must
/// come out non-empty.
pub fn train_val_split(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = dataset.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} leaves an empty split for {n} samples"
        )));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let take = |idx: &[usize], tag| {
        Dataset::new(
            idx.iter().map(|&i| dataset.samples[i].clone()).collect(),
            idx.iter().map(|&i| dataset.labels[i]).collect(),
            dataset.num_classes,
            tag,
        )
    };
    let train = take(&indices[..n_train], SplitTag::Train)?;
    let val = take(&indices[n_train..], SplitTag::Validation)?;
    Ok((train, val))
}

/// Choose `size` sample indices without replacement, guaranteeing at least
/// one index per class whenever `size >= num_classes` and every class is
/// present.
pub fn sample_knowledge_indices(
    dataset: &Dataset,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    if size == 0 || size > dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "knowledge base size {size} out of range for {} samples",
            dataset.len()
        )));
    }
    let mut chosen: Vec<usize>;
    if size >= dataset.num_classes() {
        // One forced draw per class, remainder uniform from the rest.
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
        for (i, &l) in dataset.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        if let Some(k) = by_class.iter().position(|c| c.is_empty()) {
            return Err(Error::State(format!("class {k} absent from the dataset")));
        }
        chosen = by_class
            .iter()
            .map(|c| c[rng.random_range(0..c.len())])
            .collect();
        let mut rest: Vec<usize> = (0..dataset.len()).filter(|i| !chosen.contains(i)).collect();
        rest.shuffle(rng);
        chosen.extend_from_slice(&rest[..size - chosen.len()]);
    } else {
        let mut all: Vec<usize> = (0..dataset.len()).collect();
        all.shuffle(rng);
        chosen = all[..size].to_vec();
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_basic_shape_and_balance() {
        let ds = generate_gaussian_source(2, 2, 10.0, 4, 0).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.class_histogram(), vec![2, 2]);
        // Unit-variance classes: every sample within a generous radius of its mean.
        for (x, &l) in ds.samples().iter().zip(ds.labels()) {
            let mean0 = l as f64 * 10.0;
            let d = ((x[0] - mean0).powi(2) + x[1].powi(2)).sqrt();
            assert!(d < 6.0, "sample at distance {d} from class mean");
        }
    }

    #[test]
    fn gaussian_balance_with_remainder() {
        let ds = generate_gaussian_source(3, 1, 1.0, 8, 1).unwrap();
        let mut hist = ds.class_histogram();
        hist.sort_unstable();
        assert_eq!(hist, vec![2, 3, 3]);
    }

    #[test]
    fn gaussian_determinism() {
        let a = generate_gaussian_source(3, 4, 2.0, 30, 9).unwrap();
        let b = generate_gaussian_source(3, 4, 2.0, 30, 9).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.labels(), b.labels());
        let c = generate_gaussian_source(3, 4, 2.0, 30, 10).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn gaussian_rejects_bad_arguments() {
        assert!(generate_gaussian_source(1, 2, 1.0, 10, 0).is_err());
        assert!(generate_gaussian_source(2, 0, 1.0, 10, 0).is_err());
        assert!(generate_gaussian_source(4, 2, 1.0, 3, 0).is_err());
        assert!(generate_gaussian_source(2, 2, -1.0, 10, 0).is_err());
    }

    /// Least-squares linear classifier, used as an independent separability
    /// oracle: solves the normal equations for (w, b) against targets +-1.
    fn least_squares_accuracy(ds: &Dataset) -> f64 {
        let d = ds.dim() + 1; // weights plus bias
        let mut ata = vec![vec![0.0f64; d]; d];
        let mut aty = vec![0.0f64; d];
        for (x, &l) in ds.samples().iter().zip(ds.labels()) {
            let t = if l == 0 { -1.0 } else { 1.0 };
            let mut row = x.clone();
            row.push(1.0);
            for i in 0..d {
                aty[i] += row[i] * t;
                for j in 0..d {
                    ata[i][j] += row[i] * row[j];
                }
            }
        }
        // Gaussian elimination with partial pivoting.
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&a, &b| ata[a][col].abs().partial_cmp(&ata[b][col].abs()).unwrap())
                .unwrap();
            ata.swap(col, pivot);
            aty.swap(col, pivot);
            for r in col + 1..d {
                let f = ata[r][col] / ata[col][col];
                for c in col..d {
                    ata[r][c] -= f * ata[col][c];
                }
                aty[r] -= f * aty[col];
            }
        }
        let mut w = vec![0.0f64; d];
        for r in (0..d).rev() {
            let mut s = aty[r];
            for c in r + 1..d {
                s -= ata[r][c] * w[c];
            }
            w[r] = s / ata[r][r];
        }
        let correct = ds
            .samples()
            .iter()
            .zip(ds.labels())
            .filter(|(x, &l)| {
                let score: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[d - 1];
                (score >= 0.0) == (l == 1)
            })
            .count();
        correct as f64 / ds.len() as f64
    }

    #[test]
    fn gaussian_tiny_separation_is_chance_level() {
        let ds = generate_gaussian_source(2, 2, 0.01, 1000, 1).unwrap();
        let acc = least_squares_accuracy(&ds);
        assert!((acc - 0.5).abs() < 0.05, "linear accuracy {acc} far from chance");
    }

    #[test]
    fn gaussian_wide_separation_is_nearly_separable() {
        let ds = generate_gaussian_source(2, 3, 10.0, 500, 2).unwrap();
        // Nearest-class-mean oracle.
        let mut means = vec![vec![0.0f64; ds.dim()]; 2];
        let hist = ds.class_histogram();
        for (x, &l) in ds.samples().iter().zip(ds.labels()) {
            for (m, &v) in means[l].iter_mut().zip(x) {
                *m += v / hist[l] as f64;
            }
        }
        let correct = ds
            .samples()
            .iter()
            .zip(ds.labels())
            .filter(|(x, &l)| {
                let d: Vec<f64> = means
                    .iter()
                    .map(|m| x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum())
                    .collect();
                (d[0] <= d[1]) == (l == 0)
            })
            .count();
        assert!(correct as f64 / ds.len() as f64 >= 0.99);
    }

    #[test]
    fn image_source_shapes_and_range() {
        let ds = generate_image_source(10, 50, 0.25, 3).unwrap();
        assert_eq!(ds.dim(), 784);
        assert_eq!(ds.num_classes(), 10);
        assert!(ds.samples().iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
        let again = generate_image_source(10, 50, 0.25, 3).unwrap();
        assert_eq!(ds.samples(), again.samples());
    }

    #[test]
    fn split_views_contiguous() {
        let sample: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let split = ViewSplit::equal(4, 12).unwrap();
        let views = split_views(&sample, &split).unwrap();
        assert_eq!(views.len(), 4);
        assert_eq!(views[0], &[0.0, 1.0, 2.0]);
        assert_eq!(views[3], &[9.0, 10.0, 11.0]);

        let uneven = ViewSplit::new(vec![5, 7]).unwrap();
        assert_eq!(split_views(&sample, &uneven).unwrap()[1].len(), 7);
        let wrong = ViewSplit::new(vec![5, 5]).unwrap();
        assert!(split_views(&sample, &wrong).is_err());
    }

    #[test]
    fn view_split_validation() {
        assert!(ViewSplit::new(vec![]).is_err());
        assert!(ViewSplit::new(vec![3, 0]).is_err());
        assert!(ViewSplit::equal(4, 10).is_err());
        assert_eq!(ViewSplit::equal(4, 784).unwrap().view_dims(), &[196; 4]);
    }

    #[test]
    fn train_val_split_sizes_and_determinism() {
        let ds = generate_gaussian_source(2, 2, 1.0, 100, 0).unwrap();
        let (tr, va) = train_val_split(&ds, 0.85, 5).unwrap();
        assert_eq!((tr.len(), va.len()), (85, 15));
        assert_eq!(tr.split_tag(), SplitTag::Train);
        assert_eq!(va.split_tag(), SplitTag::Validation);

        let (tr2, va2) = train_val_split(&ds, 0.85, 5).unwrap();
        assert_eq!(tr.samples(), tr2.samples());
        assert_eq!(va.labels(), va2.labels());

        // Disjoint cover: every original sample appears exactly once.
        let mut seen: Vec<Vec<u64>> = tr
            .samples()
            .iter()
            .chain(va.samples())
            .map(|s| s.iter().map(|x| x.to_bits()).collect())
            .collect();
        seen.sort();
        let mut orig: Vec<Vec<u64>> =
            ds.samples().iter().map(|s| s.iter().map(|x| x.to_bits()).collect()).collect();
        orig.sort();
        assert_eq!(seen, orig);
    }

    #[test]
    fn train_val_split_rejects_empty_side() {
        let ds = generate_gaussian_source(2, 1, 1.0, 2, 0).unwrap();
        let (tr, va) = train_val_split(&ds, 0.5, 0).unwrap();
        assert_eq!((tr.len(), va.len()), (1, 1));
        assert!(train_val_split(&ds, 0.01, 0).is_err());
        assert!(train_val_split(&ds, 1.5, 0).is_err());
    }

    #[test]
    fn idx_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_image_source(4, 12, 0.2, 7).unwrap();
        let ip = dir.path().join("images.idx");
        let lp = dir.path().join("labels.idx");
        write_idx(&ds, 28, 28, &ip, &lp).unwrap();

        let loaded = load_idx(&ip, &lp).unwrap();
        assert_eq!(loaded.len(), 12);
        assert_eq!(loaded.dim(), 784);
        assert_eq!(loaded.labels(), ds.labels());

        // Re-serialize and compare raw bytes.
        let ip2 = dir.path().join("images2.idx");
        let lp2 = dir.path().join("labels2.idx");
        write_idx(&loaded, 28, 28, &ip2, &lp2).unwrap();
        assert_eq!(fs::read(&ip).unwrap(), fs::read(&ip2).unwrap());
        assert_eq!(fs::read(&lp).unwrap(), fs::read(&lp2).unwrap());
    }

    #[test]
    fn idx_pixel_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i.idx");
        let lp = dir.path().join("l.idx");
        let mut image_bytes = Vec::new();
        image_bytes.extend_from_slice(&2051u32.to_be_bytes());
        image_bytes.extend_from_slice(&2u32.to_be_bytes());
        image_bytes.extend_from_slice(&2u32.to_be_bytes());
        image_bytes.extend_from_slice(&2u32.to_be_bytes());
        image_bytes.extend_from_slice(&[0, 255, 128, 64, 255, 0, 0, 32]);
        fs::write(&ip, &image_bytes).unwrap();
        let mut label_bytes = Vec::new();
        label_bytes.extend_from_slice(&2049u32.to_be_bytes());
        label_bytes.extend_from_slice(&2u32.to_be_bytes());
        label_bytes.extend_from_slice(&[1, 0]);
        fs::write(&lp, &label_bytes).unwrap();

        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.samples()[0], vec![0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn idx_bad_magic_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i.idx");
        let lp = dir.path().join("l.idx");
        let ds = generate_image_source(2, 4, 0.1, 0).unwrap();
        write_idx(&ds, 28, 28, &ip, &lp).unwrap();

        // Corrupt the label magic to 2052.
        let mut label_bytes = fs::read(&lp).unwrap();
        label_bytes[..4].copy_from_slice(&2052u32.to_be_bytes());
        fs::write(&lp, &label_bytes).unwrap();
        let err = load_idx(&ip, &lp).unwrap_err();
        assert!(err.to_string().contains("bad magic 2052"), "got: {err}");
    }

    #[test]
    fn idx_truncation_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i.idx");
        let lp = dir.path().join("l.idx");
        let ds = generate_image_source(2, 4, 0.1, 0).unwrap();
        write_idx(&ds, 28, 28, &ip, &lp).unwrap();

        let image_bytes = fs::read(&ip).unwrap();
        let truncated = &image_bytes[..image_bytes.len() - 10];
        fs::write(&ip, truncated).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format(_))));

        // Restore images, shrink the label payload but not its count field.
        fs::write(&ip, &image_bytes).unwrap();
        let label_bytes = fs::read(&lp).unwrap();
        fs::write(&lp, &label_bytes[..label_bytes.len() - 1]).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format(_))));
    }

    #[test]
    fn knowledge_sampling_covers_classes() {
        let ds = generate_gaussian_source(5, 2, 1.0, 60, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = sample_knowledge_indices(&ds, 5, &mut rng).unwrap();
        assert_eq!(idx.len(), 5);
        let mut classes: Vec<usize> = idx.iter().map(|&i| ds.labels()[i]).collect();
        classes.sort_unstable();
        assert_eq!(classes, vec![0, 1, 2, 3, 4]);

        let big = sample_knowledge_indices(&ds, 40, &mut rng).unwrap();
        assert_eq!(big.len(), 40);
        let unique: std::collections::BTreeSet<_> = big.iter().collect();
        assert_eq!(unique.len(), 40, "sampling must be without replacement");

        assert!(sample_knowledge_indices(&ds, 0, &mut rng).is_err());
        assert!(sample_knowledge_indices(&ds, 61, &mut rng).is_err());
    }
}
