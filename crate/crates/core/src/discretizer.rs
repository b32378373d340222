//! Bucketing of continuous observations and actions for tabular methods.
//!
//! Ranges are fitted from sampled observations and clipped to a global
//! interval. Buckets are half-open `[edge_j, edge_{j+1})` except the last,
//! which is closed, so a value exactly at `hi` lands in bucket `K - 1`.
//! Flat indices are base-`K` with the last dimension varying fastest.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::spaces::BoxSpace;

pub const DEFAULT_CLIP: f64 = 25.0;
pub const DEFAULT_SAMPLE_BUDGET: usize = 10_000;
/// Half-width used to widen a dimension whose samples are all equal.
pub const DEGENERATE_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub dims: Vec<DimRange>,
    pub k: usize,
}

impl RangeSpec {
    pub fn new(dims: Vec<DimRange>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidInput("bucket count must be at least 1".into()));
        }
        for (i, d) in dims.iter().enumerate() {
            if !(d.lo < d.hi) || !d.lo.is_finite() || !d.hi.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "dimension {i}: range [{}, {}] must be finite with lo < hi",
                    d.lo, d.hi
                )));
            }
        }
        Ok(Self { dims, k })
    }

    /// Ranges taken directly from a bounded box space.
    pub fn from_space(space: &BoxSpace, k: usize) -> Result<Self> {
        if !space.is_bounded() {
            return Err(Error::UnsupportedSpace("space must have finite bounds".into()));
        }
        let dims = space
            .low()
            .iter()
            .zip(space.high())
            .map(|(&lo, &hi)| DimRange { lo, hi })
            .collect();
        Self::new(dims, k)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Number of flat states when only the first `dims` dimensions are keyed.
    pub fn state_count(&self, dims: usize) -> Result<usize> {
        checked_pow(self.k, dims.min(self.dim()))
    }
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc
            .checked_mul(base)
            .ok_or_else(|| Error::Capacity(format!("{base}^{exp} overflows the index type")))?;
    }
    Ok(acc)
}

/// Per-dimension `[max(min, clip_lo), min(max, clip_hi)]` over `samples`.
pub fn fit_ranges(samples: &[Vec<f64>], clip_lo: f64, clip_hi: f64, k: usize) -> Result<RangeSpec> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "range fitting needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(clip_lo < clip_hi) {
        return Err(Error::InvalidInput("clip interval must satisfy lo < hi".into()));
    }
    if k < 2 {
        return Err(Error::InvalidInput("fitted ranges need at least 2 buckets".into()));
    }
    let dim = samples[0].len();
    let mut lo = alloc::vec![f64::INFINITY; dim];
    let mut hi = alloc::vec![f64::NEG_INFINITY; dim];
    for s in samples {
        Error::check_dim(dim, s.len())?;
        for (i, &v) in s.iter().enumerate() {
            if v.is_nan() {
                return Err(Error::InvalidInput(format!("sample contains NaN in dimension {i}")));
            }
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    let dims = lo
        .into_iter()
        .zip(hi)
        .map(|(l, h)| {
            let mut l = l.max(clip_lo).min(clip_hi);
            let mut h = h.min(clip_hi).max(clip_lo);
            if l >= h {
                l = (l - DEGENERATE_HALF_WIDTH).max(clip_lo);
                h = (h + DEGENERATE_HALF_WIDTH).min(clip_hi);
            }
            DimRange { lo: l, hi: h }
        })
        .collect();
    RangeSpec::new(dims, k)
}

pub fn bucket_index(range: &DimRange, k: usize, v: f64) -> usize {
    let v = v.max(range.lo).min(range.hi);
    let t = (v - range.lo) / (range.hi - range.lo);
    let idx = libm::floor(k as f64 * t);
    // NaN maps to bucket 0 through the saturating cast.
    (idx as usize).min(k - 1)
}

/// Bucket indices for every dimension and their base-`K` flat index.
pub fn encode_obs(spec: &RangeSpec, obs: &[f64]) -> Result<(Vec<usize>, usize)> {
    encode_prefix(spec, obs, spec.dim())
}

/// Like [`encode_obs`], but the flat index covers only the first `dims` dimensions.
pub fn encode_prefix(spec: &RangeSpec, obs: &[f64], dims: usize) -> Result<(Vec<usize>, usize)> {
    Error::check_dim(spec.dim(), obs.len())?;
    let indices: Vec<usize> = spec
        .dims
        .iter()
        .zip(obs)
        .map(|(r, &v)| bucket_index(r, spec.k, v))
        .collect();
    let flat = flatten(&indices[..dims.min(indices.len())], spec.k)?;
    Ok((indices, flat))
}

pub fn flatten(indices: &[usize], k: usize) -> Result<usize> {
    indices.iter().try_fold(0usize, |acc, &i| {
        acc.checked_mul(k)
            .and_then(|a| a.checked_add(i))
            .ok_or_else(|| Error::Capacity("flat index overflows the index type".into()))
    })
}

pub fn unflatten(mut flat: usize, k: usize, dim: usize) -> Vec<usize> {
    let mut out = alloc::vec![0; dim];
    for slot in out.iter_mut().rev() {
        *slot = flat % k;
        flat /= k;
    }
    out
}

/// Bucket centers: `lo + (i + 0.5) * (hi - lo) / K` per dimension.
pub fn decode_action(space: &BoxSpace, k: usize, indices: &[usize]) -> Result<Vec<f64>> {
    Error::check_dim(space.dim(), indices.len())?;
    if k < 1 {
        return Err(Error::InvalidInput("bucket count must be at least 1".into()));
    }
    if !space.is_bounded() {
        return Err(Error::UnsupportedSpace("action space must have finite bounds".into()));
    }
    indices
        .iter()
        .zip(space.low().iter().zip(space.high()))
        .map(|(&i, (&lo, &hi))| {
            if i >= k {
                Err(Error::InvalidInput(format!("bucket index {i} out of range for K={k}")))
            } else {
                Ok(lo + (i as f64 + 0.5) * (hi - lo) / k as f64)
            }
        })
        .collect()
}

/// `K^dim`, or a capacity error if it exceeds `cap`.
pub fn joint_action_count(action_dim: usize, k: usize, cap: usize) -> Result<usize> {
    if k < 1 || action_dim < 1 {
        return Err(Error::InvalidInput("action_dim and K must be at least 1".into()));
    }
    match checked_pow(k, action_dim) {
        Ok(n) if n <= cap => Ok(n),
        _ => Err(Error::Capacity(format!(
            "{k}^{action_dim} joint actions exceed the table cap of {cap}; \
             reduce the bucket count or use a continuous-action method"
        ))),
    }
}

/// Observations gathered under a uniform-random action policy, including
/// every reset observation, until `budget` samples are collected.
pub fn collect_observations<E: Environment + ?Sized>(
    env: &mut E,
    budget: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<f64>>> {
    let action_space = env.spec().action_space.clone();
    let mut out = Vec::with_capacity(budget);
    let mut episode_live = false;
    while out.len() < budget {
        if !episode_live {
            out.push(env.reset(rng.next_u64())?);
            episode_live = true;
            continue;
        }
        let a = action_space.sample_uniform(rng)?;
        let r = env.step(&a)?;
        out.push(r.observation);
        episode_live = !r.done;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn one_dim(lo: f64, hi: f64, k: usize) -> RangeSpec {
        RangeSpec::new(vec![DimRange { lo, hi }], k).unwrap()
    }

    #[test]
    fn fit_clips_to_global_interval() {
        let spec = fit_ranges(&[vec![-30.0], vec![30.0]], -25.0, 25.0, 2).unwrap();
        assert_eq!(spec.dims, vec![DimRange { lo: -25.0, hi: 25.0 }]);
        let spec = fit_ranges(&[vec![1.0], vec![3.0]], -25.0, 25.0, 2).unwrap();
        assert_eq!(spec.dims, vec![DimRange { lo: 1.0, hi: 3.0 }]);
    }

    #[test]
    fn fit_widens_degenerate_dimension() {
        let spec = fit_ranges(&[vec![5.0], vec![5.0]], -25.0, 25.0, 2).unwrap();
        assert_eq!(spec.dims, vec![DimRange { lo: 4.5, hi: 5.5 }]);
        let spec = fit_ranges(&[vec![40.0], vec![40.0]], -25.0, 25.0, 2).unwrap();
        assert_eq!(spec.dims, vec![DimRange { lo: 24.5, hi: 25.0 }]);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_ranges(&[], -25.0, 25.0, 2).is_err());
        assert!(fit_ranges(&[vec![1.0]], -25.0, 25.0, 2).is_err());
        assert!(fit_ranges(&[vec![1.0], vec![1.0, 2.0]], -25.0, 25.0, 2).is_err());
    }

    #[test]
    fn encode_examples() {
        let spec = one_dim(-25.0, 25.0, 2);
        assert_eq!(encode_obs(&spec, &[-25.0]).unwrap().0, vec![0]);
        assert_eq!(encode_obs(&spec, &[25.0]).unwrap().0, vec![1]);
        assert_eq!(encode_obs(&spec, &[0.0]).unwrap().0, vec![1]);
        let spec = one_dim(0.0, 1.0, 4);
        assert_eq!(encode_obs(&spec, &[0.3]).unwrap(), (vec![1], 1));
    }

    #[test]
    fn flat_index_last_dimension_fastest() {
        let spec = RangeSpec::new(vec![DimRange { lo: 0.0, hi: 1.0 }; 3], 4).unwrap();
        let (idx, flat) = encode_obs(&spec, &[0.3, 0.6, 0.9]).unwrap();
        assert_eq!(idx, vec![1, 2, 3]);
        assert_eq!(flat, 16 + 2 * 4 + 3);
        assert_eq!(unflatten(flat, 4, 3), idx);
    }

    #[test]
    fn decode_examples() {
        let s = BoxSpace::uniform(1, -1.0, 1.0).unwrap();
        assert_eq!(decode_action(&s, 2, &[0]).unwrap(), vec![-0.5]);
        assert_eq!(decode_action(&s, 2, &[1]).unwrap(), vec![0.5]);
        let s = BoxSpace::new(vec![-2.0, 0.0], vec![4.0, 1.0]).unwrap();
        assert_eq!(decode_action(&s, 1, &[0, 0]).unwrap(), vec![1.0, 0.5]);
        assert!(decode_action(&s, 2, &[2, 0]).is_err());
    }

    #[test]
    fn joint_action_counts() {
        assert_eq!(joint_action_count(6, 2, 1 << 20).unwrap(), 64);
        assert_eq!(joint_action_count(1, 2, 1 << 20).unwrap(), 2);
        assert_eq!(joint_action_count(8, 2, 1 << 20).unwrap(), 256);
        assert!(matches!(joint_action_count(8, 2, 100), Err(Error::Capacity(_))));
        assert!(matches!(joint_action_count(100, 10, usize::MAX), Err(Error::Capacity(_))));
    }

    #[test]
    fn collect_observations_fills_budget() {
        let mut env = crate::envs::ChainWalk::new(5, 3).unwrap();
        let mut rng = SeededRng::new(1);
        let obs = collect_observations(&mut env, 100, &mut rng).unwrap();
        assert_eq!(obs.len(), 100);
        let spec = fit_ranges(&obs, -DEFAULT_CLIP, DEFAULT_CLIP, 5).unwrap();
        assert_eq!(spec.dims[0].lo, 0.0);
        assert_eq!(spec.dims[0].hi, 4.0);
    }

    proptest! {
        #[test]
        fn encode_bounds_and_monotonicity(
            lo in -20.0f64..0.0, width in 0.1f64..20.0, k in 2usize..8,
            v in -50.0f64..50.0, w in -50.0f64..50.0,
        ) {
            let spec = one_dim(lo, lo + width, k);
            let (iv, fv) = encode_obs(&spec, &[v]).unwrap();
            let (iw, _) = encode_obs(&spec, &[w]).unwrap();
            prop_assert!(iv[0] < k && fv < k);
            if v <= w {
                prop_assert!(iv[0] <= iw[0]);
            }
            let clipped = v.max(lo).min(lo + width);
            prop_assert_eq!(encode_obs(&spec, &[clipped]).unwrap().0, iv);
        }

        #[test]
        fn decode_then_encode_is_identity(
            lo in -5.0f64..0.0, width in 0.1f64..10.0, k in 1usize..9,
        ) {
            let space = BoxSpace::uniform(1, lo, lo + width).unwrap();
            let spec = RangeSpec::from_space(&space, k).unwrap();
            for j in 0..k {
                let center = decode_action(&space, k, &[j]).unwrap();
                prop_assert_eq!(encode_obs(&spec, &center).unwrap().0, vec![j]);
            }
        }
    }
}
