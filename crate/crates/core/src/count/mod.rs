//! Count loss: the probability that the predicted number of instances of each
//! class falls inside the interval allowed by the candidate sets.

mod logspace;
mod loss;
mod pmf;

pub use logspace::{log1mexp, log_add_exp, logsumexp};
pub use loss::{count_loss, count_loss_logits, CountLoss, CountMode, LOG_PROB_FLOOR};
pub use pmf::{
    batch_intervals, count_log_pmf, interval_log_prob, CountDistribution, CountInterval,
};
