//! Bayesian reduced-rank regression with a mixture-of-ranks prior and
//! Dirichlet-Laplace shrinkage, plus the SAVS-based selection layer and a
//! simulation harness.

pub mod dist;
pub mod error;
pub mod geweke;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use gibbs::{run_chain, run_chains, GibbsSampler, SamplerConfig, UpdateCounters};
pub use linalg::SpdMatrix;
pub use model::{
    ChainState, DlColumnState, FactorCollection, HyperParams, Parametrization, PosteriorDraws,
    RankComponent, RegressionData,
};
pub use pipeline::{fit, FitOptions, FitResult};
pub use rng::RngHandle;
pub use selection::{SelectionReport, SparseDrawArchive};
