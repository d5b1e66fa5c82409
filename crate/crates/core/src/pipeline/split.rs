use crate::error::{Error, Result};
use crate::numcore::RandSource;
use crate::pipeline::preprocess::FeatureMatrix;

pub(crate) const TEST_SPLIT_STREAM: u64 = 1;

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    Ok(())
}

/// Per class, `round(fraction · n_c)` shuffled members go to the second
/// set, clamped to `[1, n_c − 1]` so both sides see every class. Classes
/// with fewer than two members are an error when `strict`, and otherwise
/// stay entirely in the first set. Both index lists are sorted.
pub(crate) fn split_indices(
    labels: &[usize],
    num_classes: usize,
    fraction: f64,
    seed: u64,
    stream: u64,
    strict: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(fraction)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        let bucket = by_class
            .get_mut(c)
            .ok_or_else(|| Error::InvalidArgument(format!("label {c} out of range for {num_classes} classes")))?;
        bucket.push(i);
    }
    let mut rng = RandSource::with_stream(seed, stream);
    let mut first = Vec::with_capacity(labels.len());
    let mut second = Vec::new();
    for (c, mut members) in by_class.into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n == 1 {
            if strict {
                return Err(Error::Data(format!(
                    "class {c} has a single sample and cannot be split"
                )));
            }
            first.extend(members);
            continue;
        }
        rng.shuffle(&mut members);
        let take = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        second.extend_from_slice(&members[..take]);
        first.extend_from_slice(&members[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Seeded stratified partition of `0..labels.len()` into `(train, test)`.
pub fn stratified_indices(
    labels: &[usize],
    num_classes: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    split_indices(labels, num_classes, test_fraction, seed, TEST_SPLIT_STREAM, true)
}

pub fn stratified_split(fm: &FeatureMatrix, test_fraction: f64, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (train, test) = stratified_indices(&fm.y, fm.num_classes(), test_fraction, seed)?;
    Ok((fm.select_rows(&train), fm.select_rows(&test)))
}
