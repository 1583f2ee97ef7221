//! The two policies: the portfolio-weight policy (softmax mean, Dirichlet
//! sampling, entropy-augmented policy gradient) and the execution policy
//! (branching dueling Q-network with double-Q temporal-difference targets).

mod dirichlet;
pub mod high;
pub mod low;
mod replay;

pub use dirichlet::Dirichlet;
pub use high::{
    entropy, returns_to_go, HighAction, HighPolicy, HighState, HighStep, HighTrainConfig,
    HighTrajectory, PolicyMode, ReinforceStats,
};
pub use low::{to_limit_order, ActionGrid, BranchingQNet, LowAgent, LowTrainConfig};
pub use replay::{ReplayBuffer, Transition};
