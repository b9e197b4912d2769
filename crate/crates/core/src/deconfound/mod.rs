//! Offline estimation: spectral trimming, lasso, doubly debiased estimates
//! with standard errors, threshold selection and masking.

mod cv;
mod ddl;
mod lasso;
mod mask;
mod trim;

pub use cv::{fold_assignment, log_grid, select_lambda_cv, CvOutcome, GRID_RATIO};
pub use ddl::{ddl_fit, Correction, DdlEstimate, DdlOptions, LambdaRule};
pub use lasso::{
    kkt_violation, lasso_cd, lasso_objective, soft_threshold, GramLasso, LassoFit,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use mask::{apply_mask, build_mask, choose_kappa_theoretical, KappaRule, Mask};
pub use trim::{trim_transform, TrimTransform, DEFAULT_TRIM_QUANTILE};
