use crate::error::{Error, Result};
use crate::matcher::MatchResult;

fn split_face(id: &str) -> Option<(&str, bool)> {
    let lower = id.to_ascii_lowercase();
    for (suffix, front) in [("front", true), ("back", false)] {
        if lower.ends_with(suffix) {
            let prefix = id[..id.len() - suffix.len()].trim_end_matches(['_', '-', '.', ' ']);
            return Some((prefix, front));
        }
    }
    None
}

/// True when `front` and `back` name the two faces of one design, i.e. they
/// share a prefix and end in `front` and `back` respectively
/// (`hsbc_front` / `hsbc_back`).
pub fn face_pair(front: &str, back: &str) -> bool {
    match (split_face(front), split_face(back)) {
        (Some((pf, true)), Some((pb, false))) => pf == pb,
        _ => false,
    }
}

/// Distance between the front placement and the back placement mirrored
/// across the note's vertical axis (`x -> note_width - 1 - x`). Small values
/// mean both faces agree on where the piece came from.
pub fn two_sided_consistency(front: &MatchResult, back: &MatchResult, note_width: usize) -> Result<f64> {
    if !face_pair(&front.ground_truth_id, &back.ground_truth_id) {
        return Err(Error::UnpairedFaces {
            front: front.ground_truth_id.clone(),
            back: back.ground_truth_id.clone(),
        });
    }
    let mirrored_x = note_width as f64 - 1.0 - back.unrotated_center_x;
    Ok((front.unrotated_center_x - mirrored_x).hypot(front.unrotated_center_y - back.unrotated_center_y))
}
