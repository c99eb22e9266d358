use super::{ClusterDataset, ModelError};

/// Chronological train/test split.
///
/// The training segment covers the first `⌊T·fraction⌋` estimation periods; the
/// test segment keeps the `M` rows preceding its first period as lag history.
pub fn split_dataset(dataset: &ClusterDataset, train_fraction: f64) -> Result<(ClusterDataset, ClusterDataset), ModelError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ModelError::InvalidArgument(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let t = dataset.horizon();
    let m = dataset.order();
    let train_len = (t as f64 * train_fraction).floor() as usize;
    let test_len = t - train_len;
    for len in [train_len, test_len] {
        if len < m + 1 {
            return Err(ModelError::TooShort { periods: len, required: m + 1 });
        }
    }
    let offset = dataset.period_offset();
    let train = dataset.slice_rows(0, train_len + m, offset);
    let test = dataset.slice_rows(train_len, test_len + m, offset + train_len);
    Ok((train, test))
}
