//! AWGN and 2×2 i.i.d. Rayleigh fading channels, plus the seeded stream
//! derivation that makes simulations independent of worker count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::modem::complex_gaussian;

/// What a random stream is used for within one simulated block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamRole {
    Data = 1,
    Noise = 2,
    Fading = 3,
}

/// Generator for `(seed, point, block, role)`.
///
/// The four words form the ChaCha key directly, so distinct tuples never
/// share a stream.
pub fn stream_rng(seed: u64, point: u64, block: u64, role: StreamRole) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point.to_le_bytes());
    key[16..24].copy_from_slice(&block.to_le_bytes());
    key[24..].copy_from_slice(&(role as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// `N0` for unit-energy symbols, `10^(-snr_db / 10)`.
pub fn awgn_noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// `N0` for the 2×2 channel, where each receive antenna collects the unit
/// energy of both transmit antennas: `SNR = E‖Hx‖² / (2 N0) = 2 / N0`.
pub fn mimo_noise_variance(snr_db: f64) -> f64 {
    2.0 * awgn_noise_variance(snr_db)
}

/// `y = x + w`, `w ~ CN(0, N0)`. Returns the received samples and `N0`.
pub fn awgn<R: Rng + ?Sized>(x: &[Complex64], snr_db: f64, rng: &mut R) -> (Vec<Complex64>, f64) {
    let n0 = awgn_noise_variance(snr_db);
    let y = x.iter().map(|&s| s + complex_gaussian(rng, n0)).collect();
    (y, n0)
}

/// One use of the 2×2 channel with the realization known at the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MimoUse {
    pub y: [Complex64; 2],
    pub h: [[Complex64; 2]; 2],
}

/// Fast-fading 2×2 channel: a fresh `H` with i.i.d. `CN(0, 1)` entries per
/// channel use. Returns the uses and `N0`.
pub fn rayleigh_2x2<R: Rng + ?Sized>(
    x_pairs: &[[Complex64; 2]],
    snr_db: f64,
    fading: &mut R,
    noise: &mut R,
) -> (Vec<MimoUse>, f64) {
    let n0 = mimo_noise_variance(snr_db);
    let uses = x_pairs
        .iter()
        .map(|x| {
            let h = [
                [complex_gaussian(fading, 1.0), complex_gaussian(fading, 1.0)],
                [complex_gaussian(fading, 1.0), complex_gaussian(fading, 1.0)],
            ];
            transmit(x, h, n0, noise)
        })
        .collect();
    (uses, n0)
}

/// The 2×2 channel with a fixed, caller-chosen `H`.
pub fn fixed_2x2<R: Rng + ?Sized>(
    x_pairs: &[[Complex64; 2]],
    h: [[Complex64; 2]; 2],
    snr_db: f64,
    noise: &mut R,
) -> (Vec<MimoUse>, f64) {
    let n0 = mimo_noise_variance(snr_db);
    let uses = x_pairs.iter().map(|x| transmit(x, h, n0, noise)).collect();
    (uses, n0)
}

fn transmit<R: Rng + ?Sized>(x: &[Complex64; 2], h: [[Complex64; 2]; 2], n0: f64, noise: &mut R) -> MimoUse {
    let y = [
        h[0][0] * x[0] + h[0][1] * x[1] + complex_gaussian(noise, n0),
        h[1][0] * x[0] + h[1][1] * x[1] + complex_gaussian(noise, n0),
    ];
    MimoUse { y, h }
}
