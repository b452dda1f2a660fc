//! Rotation-swept template localisation on the reference faces.
//!
//! Every template is scored by ZNCC against every rotated view of every
//! ground-truth face. With `pyramid_levels > 1` the sweep runs on
//! downsampled views first and only the best coarse candidates are refined
//! at full resolution in a small position/rotation neighbourhood.

mod annotate;
mod consistency;
mod search;
mod zncc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundtruth::GroundTruthSet;
use crate::rectfit::{check_step, TemplateChoice};
use crate::scalar::Scalar;

pub use annotate::{annotate, BOX_THICKNESS};
pub use consistency::{face_pair, two_sided_consistency};
pub use zncc::{
    zncc_score_map, zncc_score_map_pair, zncc_score_map_with, zncc_score_region, PreparedTemplate, ScoreMap,
    ScoreMethod,
};

/// Search settings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Degrees between searched rotations; a multiple of the set's step
    /// that divides 360.
    pub rotation_step: u32,
    /// Smaller templates are rejected as unreliable.
    pub min_template_pixels: usize,
    /// 1 searches exhaustively at full resolution; each extra level halves
    /// the coarse search resolution.
    pub pyramid_levels: usize,
    /// Results reported per template.
    pub top_k: usize,
    /// Coarse candidates refined at full resolution.
    pub beam_width: usize,
    /// Half-width, in full-resolution pixels, of the refinement window.
    pub refine_radius: usize,
    /// Rotations within this many degrees of a coarse candidate are refined.
    pub refine_degrees: u32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            rotation_step: 1,
            min_template_pixels: 1024,
            pyramid_levels: 1,
            top_k: 1,
            beam_width: 4,
            refine_radius: 4,
            refine_degrees: 2,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        check_step(self.rotation_step)?;
        if self.pyramid_levels == 0 || self.top_k == 0 || self.beam_width == 0 {
            return Err(Error::InvalidConfig(
                "pyramid_levels, top_k and beam_width must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A scored pose of one template on one rotated face.
///
/// `x` and `y` are the template's top-left in the rotated view. The
/// unrotated centre is the fragment's reference point carried into the
/// face's own frame: the piece centroid when the template came from a
/// piece, otherwise the template centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub piece_id: String,
    pub ground_truth_id: String,
    pub rotation: u32,
    pub x: usize,
    pub y: usize,
    pub match_value: f64,
    pub unrotated_center_x: f64,
    pub unrotated_center_y: f64,
}

impl MatchResult {
    pub fn unrotated_center(&self) -> (f64, f64) {
        (self.unrotated_center_x, self.unrotated_center_y)
    }
}

/// Best poses of one template over the whole set, best first.
pub fn match_piece<T: Scalar>(set: &GroundTruthSet<T>, choice: &TemplateChoice, cfg: &MatchConfig) -> Result<Vec<MatchResult>> {
    Ok(match_pieces(set, std::slice::from_ref(choice), cfg)?.remove(0))
}

/// [`match_piece`] for many templates, sharing each rotated view between
/// them. Output order follows `choices`.
///
/// Results are ordered by `match_value` descending, then ground-truth id,
/// rotation, `y`, and `x` ascending; this total order makes the output
/// independent of how the work is scheduled across threads.
pub fn match_pieces<T: Scalar>(
    set: &GroundTruthSet<T>,
    choices: &[TemplateChoice],
    cfg: &MatchConfig,
) -> Result<Vec<Vec<MatchResult>>> {
    cfg.validate()?;
    if cfg.rotation_step % set.step() != 0 {
        return Err(Error::InvalidConfig(format!(
            "rotation step {} is not a multiple of the ground truth step {}",
            cfg.rotation_step,
            set.step()
        )));
    }
    for c in choices {
        let pixels = c.template.width() * c.template.height();
        if pixels < cfg.min_template_pixels {
            return Err(Error::TemplateTooSmall {
                pixels,
                min: cfg.min_template_pixels,
            });
        }
    }
    if choices.is_empty() {
        return Ok(Vec::new());
    }
    search::run(set, choices, cfg)
}
