//! Bipartite matching of predicted planes to ground truth, and the training loss.
//!
//! Matching uses a classification + mask cost. After matching, every loss term is a
//! plain average so it can be recomputed by hand:
//!
//! ```text
//! L = λ_c·L_c + λ_m·L_m + λ_n_c·L_n_c + λ_n_r·L_n_r + λ_d_c·L_d_c + λ_d_r·L_d_r
//!   + λ_p_d·L_p_d + λ_p_n_l1·L_p_n_l1 + λ_p_n_cos·L_p_n_cos
//! ```

mod hungarian;
mod losses;

pub use hungarian::{assignment_cost, hungarian};
pub use losses::{
    binary_cross_entropy, compute_losses, dice_loss, mask_bce, matching_cost, sigmoid,
    softmax_cross_entropy, LossBreakdown, LossInputs, LossWeights, PredictionSet, QueryPrediction,
    DICE_SMOOTH, PROB_CLAMP,
};
