//! Attitude estimation on SO(3) from scalar measurements `y_i = a_i^T R^T b_i`.
//!
//! The crate provides a Riccati observer with gyro-bias compensation, a constant-gain
//! complementary filter baseline, numerical checks of the uniform-observability and
//! persistence-of-excitation conditions, a synthetic trajectory generator, and CSV
//! ingestion plus RMSE evaluation for recorded IMU sequences.

pub mod dataset;
pub mod error;
pub mod measurement;
pub mod observability;
pub mod observer;
pub mod series;
pub mod sim;
pub mod so3;

pub use error::{Error, Result};
