//! Comparison systems: QPSK with estimated CSI, and CAEs trained from
//! scratch or jointly on past pilots.

mod cae;
mod qpsk;

pub use self::cae::{
    joint_cae_sequence, joint_run, joint_train, qpsk_run, scratch_cae_sequence, scratch_run, JointConfig,
    JointTrainState,
};
pub use qpsk::{
    estimate_from_pilots, mle_channel_estimate, qpsk_mle_ser, qpsk_perfect_csi, qpsk_transmit, QpskConfig,
    QpskCounts, GRAY_MAP, PILOT,
};
