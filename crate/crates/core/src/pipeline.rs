//! Glue between stored corpora, models and score records.

use crate::autodiff::Scalar;
use crate::data::manifest::Sample;
use crate::data::{read_ppm, resize_square, select_video_frames};
use crate::error::Result;
use crate::metrics::FrameRecord;
use crate::model::Model;
use crate::train::batch_tensor;

/// Frame scores (mean of the predicted map) for `n` uniformly selected frames
/// of every video, computed in eval mode in batches of `batch_size`.
pub fn score_frames<T: Scalar>(
    model: &Model<T>,
    samples: &[Sample],
    frames_per_video: usize,
    batch_size: usize,
) -> Result<Vec<FrameRecord>> {
    let picked = select_video_frames(samples, frames_per_video);
    let (h, w) = model.config().input_size;
    let mut out = Vec::with_capacity(picked.len());
    for chunk in picked.chunks(batch_size.max(1)) {
        let images = chunk
            .iter()
            .map(|s| resize_square(&read_ppm(&s.path)?, h, w))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = images.iter().collect();
        let scores = model.score(&batch_tensor::<T>(&refs)?)?;
        for (s, score) in chunk.iter().zip(scores) {
            out.push(FrameRecord {
                video_id: s.video_id.clone(),
                frame_index: s.frame_index,
                label: s.label,
                pai: s.pai,
                score: score.as_f64() as f32 as f64,
            });
        }
    }
    Ok(out)
}
