pub mod fusion;
pub mod geometry;
pub mod kinematics;
pub mod metrics;
pub mod neural;
pub mod norms;
pub mod oracle;
pub mod orca;
pub mod rewards;
pub mod scenario;
pub mod sim;
pub mod train;
