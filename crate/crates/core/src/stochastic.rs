//! Keyed normal streams and path simulation for the Black-Scholes and Heston
//! models.
//!
//! Every chunk of paths draws from its own ChaCha8 stream keyed by
//! `(base_seed, fnv1a(task id), chunk_index)`. Normals come from the
//! inverse-CDF transform of one uniform each, so a path consumes a fixed,
//! known number of variates: `steps` for Black-Scholes and `2 * steps` for
//! Heston (`steps` on the spot channel plus `steps` on the auxiliary channel).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

use crate::findomain::UnderlyingSpec;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Separates this key space from any other use of the same seed material.
const DOMAIN_TAG: u64 = 0x6865_746d_635f_7631;

const SPOT_CHANNEL: u64 = 0;
const AUX_CHANNEL: u64 = 1;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub task_id_hash: u64,
    pub chunk_index: u64,
    pub base_seed: u64,
}

impl StreamKey {
    pub fn new(task_id: &str, base_seed: u64, chunk_index: u64) -> Self {
        StreamKey {
            task_id_hash: fnv1a64(task_id.as_bytes()),
            chunk_index,
            base_seed,
        }
    }

    fn seed(&self) -> [u8; 32] {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.base_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.task_id_hash.to_le_bytes());
        seed[16..24].copy_from_slice(&self.chunk_index.to_le_bytes());
        seed[24..32].copy_from_slice(&DOMAIN_TAG.to_le_bytes());
        seed
    }
}

pub trait NormalSource {
    fn next_normal(&mut self) -> f64;
}

/// Uniform `(m + 1/2) / 2^53` on the top 53 bits `m`, mapped through the
/// inverse normal CDF. The upper half is evaluated through the exact
/// complement `1 - u`, so the map is antisymmetric and never infinite.
#[inline]
fn normal_from_bits(bits: u64) -> f64 {
    const HALF: u64 = 1 << 52;
    let m = bits >> 11;
    // (2m + 1) / 2^54 is exact while 2m + 1 fits in 53 bits
    let tail = |j: u64| (2 * j + 1) as f64 * (1.0 / (1u64 << 54) as f64);
    if m < HALF {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * tail(m))
    } else {
        std::f64::consts::SQRT_2 * erfc_inv(2.0 * tail((1 << 53) - 1 - m))
    }
}

#[derive(Debug, Clone)]
pub struct NormalChannel {
    rng: ChaCha8Rng,
    drawn: u64,
}

impl NormalChannel {
    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}

impl NormalSource for NormalChannel {
    #[inline]
    fn next_normal(&mut self) -> f64 {
        self.drawn += 1;
        normal_from_bits(self.rng.next_u64())
    }
}

/// A deterministic source of i.i.d. standard normals with two independent
/// channels: `spot` drives the asset, `aux` the Heston variance factor.
#[derive(Debug, Clone)]
pub struct NormalStream {
    pub spot: NormalChannel,
    pub aux: NormalChannel,
}

impl NormalStream {
    /// Total variates consumed so far across both channels.
    pub fn drawn(&self) -> u64 {
        self.spot.drawn + self.aux.drawn
    }
}

impl NormalSource for NormalStream {
    fn next_normal(&mut self) -> f64 {
        self.spot.next_normal()
    }
}

pub fn open_stream(key: StreamKey) -> NormalStream {
    let channel = |id| {
        let mut rng = ChaCha8Rng::from_seed(key.seed());
        rng.set_stream(id);
        NormalChannel { rng, drawn: 0 }
    };
    NormalStream {
        spot: channel(SPOT_CHANNEL),
        aux: channel(AUX_CHANNEL),
    }
}

/// Spot values `S(t_k)` at the grid points `k = 1..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    pub spots: Vec<f64>,
}

impl PathSkeleton {
    pub fn terminal(&self) -> f64 {
        *self.spots.last().expect("paths have at least one step")
    }
}

pub fn simulate_path(
    underlying: &UnderlyingSpec,
    maturity: f64,
    steps: u32,
    stream: &mut NormalStream,
) -> PathSkeleton {
    let mut spots = Vec::with_capacity(steps as usize);
    let NormalStream { spot, aux } = stream;
    fill_path(underlying, maturity, steps, spot, aux, &mut spots);
    PathSkeleton { spots }
}

/// Writes one path into `out` (cleared first) drawing spot shocks from
/// `spot_src` and, for Heston, the independent variance shock from `aux_src`.
pub fn fill_path<S: NormalSource, A: NormalSource>(
    underlying: &UnderlyingSpec,
    maturity: f64,
    steps: u32,
    spot_src: &mut S,
    aux_src: &mut A,
    out: &mut Vec<f64>,
) {
    debug_assert!(steps >= 1 && maturity > 0.0);
    out.clear();
    let dt = maturity / f64::from(steps);
    match *underlying {
        UnderlyingSpec::BlackScholes {
            spot,
            rate,
            volatility,
        } => {
            let drift = (rate - 0.5 * volatility * volatility) * dt;
            let diffusion = volatility * dt.sqrt();
            let mut s = spot;
            for _ in 0..steps {
                s *= (drift + diffusion * spot_src.next_normal()).exp();
                out.push(s);
            }
        }
        UnderlyingSpec::Heston {
            spot,
            rate,
            v0,
            kappa,
            theta,
            xi,
            rho,
        } => {
            let rho_perp = (1.0 - rho * rho).max(0.0).sqrt();
            let mut s = spot;
            let mut v = v0;
            for _ in 0..steps {
                let z_s = spot_src.next_normal();
                let z_v = rho * z_s + rho_perp * aux_src.next_normal();
                // full truncation: negative variance is floored inside drift and diffusion only
                let v_plus = v.max(0.0);
                let var_dt = v_plus * dt;
                debug_assert!(var_dt >= 0.0);
                let vol_dt = var_dt.sqrt();
                s *= ((rate - 0.5 * v_plus) * dt + vol_dt * z_s).exp();
                v += kappa * (theta - v_plus) * dt + xi * vol_dt * z_v;
                out.push(s);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Replay(std::vec::IntoIter<f64>);

    impl NormalSource for Replay {
        fn next_normal(&mut self) -> f64 {
            self.0.next().expect("replay exhausted")
        }
    }

    fn key(chunk: u64) -> StreamKey {
        StreamKey::new("task", 2024, chunk)
    }

    #[test]
    fn fnv1a_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn same_key_same_draws() {
        let mut a = open_stream(key(3));
        let mut b = open_stream(key(3));
        for _ in 0..1000 {
            assert_eq!(a.next_normal().to_bits(), b.next_normal().to_bits());
        }
    }

    #[test]
    fn chunk_streams_are_uncorrelated() {
        let n = 1_000_000;
        let mut a = open_stream(key(0));
        let mut b = open_stream(key(1));
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.next_normal();
            let y = b.next_normal();
            sa += x;
            sb += y;
            saa += x * x;
            sbb += y * y;
            sab += x * y;
        }
        let n = n as f64;
        let cov = sab / n - (sa / n) * (sb / n);
        let corr = cov / ((saa / n - (sa / n).powi(2)) * (sbb / n - (sb / n).powi(2))).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn normal_moments() {
        let n = 1_000_000;
        let mut s = open_stream(key(9));
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.next_normal();
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = (sum_sq - sum * sum / n as f64) / (n as f64 - 1.0);
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn extreme_uniforms_map_to_finite_normals() {
        assert!(normal_from_bits(0).is_finite());
        assert!(normal_from_bits(u64::MAX).is_finite());
        assert!(normal_from_bits(0) < -8.0);
        assert!(normal_from_bits(1u64 << 63) > 0.0);
        assert!(normal_from_bits((1u64 << 63) - (1 << 11)) < 0.0);
        assert_eq!(normal_from_bits(u64::MAX), -normal_from_bits(0));
    }

    #[test]
    fn zero_volatility_is_deterministic_growth() {
        let u = UnderlyingSpec::BlackScholes {
            spot: 100.0,
            rate: 0.05,
            volatility: 0.0,
        };
        let mut s = open_stream(key(0));
        let path = simulate_path(&u, 2.0, 8, &mut s);
        for (k, spot) in path.spots.iter().enumerate() {
            let t = 2.0 * (k + 1) as f64 / 8.0;
            let expected = 100.0 * (0.05 * t).exp();
            assert!(
                (spot - expected).abs() <= 1e-12 * expected,
                "{spot} vs {expected}"
            );
        }
    }

    #[test]
    fn consumption_counts_are_exact() {
        let bs = UnderlyingSpec::BlackScholes {
            spot: 100.0,
            rate: 0.0,
            volatility: 0.3,
        };
        let heston = UnderlyingSpec::Heston {
            spot: 100.0,
            rate: 0.0,
            v0: 0.04,
            kappa: 1.5,
            theta: 0.04,
            xi: 0.5,
            rho: -0.5,
        };
        let mut s = open_stream(key(0));
        simulate_path(&bs, 1.0, 17, &mut s);
        assert_eq!((s.spot.drawn(), s.aux.drawn()), (17, 0));
        let mut s = open_stream(key(0));
        simulate_path(&heston, 1.0, 17, &mut s);
        assert_eq!((s.spot.drawn(), s.aux.drawn()), (17, 17));
        assert_eq!(s.drawn(), 34);
    }

    #[test]
    fn constant_variance_heston_matches_black_scholes() {
        let draws: Vec<f64> = {
            let mut s = open_stream(key(5));
            (0..64).map(|_| s.next_normal()).collect()
        };
        let aux: Vec<f64> = {
            let mut s = open_stream(key(6));
            (0..64).map(|_| s.next_normal()).collect()
        };
        let bs = UnderlyingSpec::BlackScholes {
            spot: 100.0,
            rate: 0.03,
            volatility: 0.2,
        };
        let heston = UnderlyingSpec::Heston {
            spot: 100.0,
            rate: 0.03,
            v0: 0.04,
            kappa: 3.0,
            theta: 0.04,
            xi: 0.0,
            rho: 0.4,
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut unused = Replay(Vec::new().into_iter());
        fill_path(
            &bs,
            1.0,
            64,
            &mut Replay(draws.clone().into_iter()),
            &mut unused,
            &mut a,
        );
        fill_path(
            &heston,
            1.0,
            64,
            &mut Replay(draws.into_iter()),
            &mut Replay(aux.into_iter()),
            &mut b,
        );
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn full_truncation_keeps_spots_finite_under_extreme_vol_of_vol() {
        let heston = UnderlyingSpec::Heston {
            spot: 100.0,
            rate: 0.02,
            v0: 0.01,
            kappa: 0.5,
            theta: 0.01,
            xi: 2.0,
            rho: -0.9,
        };
        let mut s = open_stream(key(11));
        for _ in 0..2000 {
            let p = simulate_path(&heston, 1.0, 50, &mut s);
            assert!(p.spots.iter().all(|x| x.is_finite() && *x >= 0.0));
        }
    }

    #[test]
    fn black_scholes_terminal_mean_is_forward() {
        let u = UnderlyingSpec::BlackScholes {
            spot: 100.0,
            rate: 0.05,
            volatility: 0.2,
        };
        let n = 1_000_000;
        let mut s = open_stream(key(1));
        let mut buf = Vec::new();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut unused = Replay(Vec::new().into_iter());
        for _ in 0..n {
            fill_path(&u, 1.0, 1, &mut s, &mut unused, &mut buf);
            sum += buf[0];
            sum_sq += buf[0] * buf[0];
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        let forward = 100.0 * 0.05f64.exp();
        assert!((forward - 105.127).abs() < 1e-3);
        assert!((mean - forward).abs() < 3.0 * se, "mean {mean} se {se}");
    }
}
