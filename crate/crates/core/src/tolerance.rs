//! Numerical tolerances shared by every module.
//!
//! Tests refer to these by name, so changing one here changes the contract
//! everywhere at once.

/// Maximum `|K - K^T|` entry accepted as symmetric.
pub const SYMMETRY: f64 = 1e-9;

/// Jacobi sweeps stop once every off-diagonal entry is below this multiple of
/// `max |K|`.
pub const JACOBI_OFF_DIAGONAL: f64 = 1e-12;

/// Upper bound on cyclic Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// QR pivot threshold relative to the Frobenius norm of the input.
pub const QR_RANK: f64 = 1e-10;

/// LU pivots smaller than this are treated as an exact zero determinant.
pub const DET_UNDERFLOW: f64 = 1e-300;

/// Eigenvalues in `(-EIGEN_CLAMP, 0)` are clamped to zero; anything more
/// negative makes a kernel indefinite.
pub const EIGEN_CLAMP: f64 = 1e-9;

/// An eigenvalue counts toward the rank of a kernel above this value.
pub const RANK: f64 = 1e-10;

/// Eigenvalues below this are zeroed when forming a pseudo-inverse.
pub const PINV: f64 = 1e-10;

/// Two greedy scores closer than this are a tie, resolved by lowest index.
pub const ARGMAX_TIE: f64 = 1e-12;

/// Above this many eigenvalues the elementary symmetric polynomials are
/// carried in log space.
pub const ESP_LOG_SPACE_ABOVE: usize = 50;

/// Accepted deviation of `|x|` from one for loader inputs.
pub const UNIT_NORM: f64 = 1e-9;

/// Accepted deviation of `A^T A` from the identity for circuit inputs.
pub const ORTHONORMAL: f64 = 1e-8;
