use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Images analyzed when `--images` is not given.
pub const DEFAULT_IMAGE_COUNT: usize = 100;

/// Which records of the dataset a run uses.
///
/// Text forms: `all`, a bare count such as `100`, or a comma-separated id
/// list such as `3,17,42`. A single id is written with a trailing comma
/// (`7,`) so it is not read as a count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageSelection {
    All,
    Count(usize),
    Ids(Vec<usize>),
}

impl FromStr for ImageSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(ImageSelection::All);
        }
        let bad = || Error::arg(format!("cannot parse image selection `{s}`"));
        if !s.contains(',') {
            let n: usize = s.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(Error::arg("image count must be positive"));
            }
            return Ok(ImageSelection::Count(n));
        }
        let ids = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        if ids.is_empty() {
            return Err(bad());
        }
        Ok(ImageSelection::Ids(ids))
    }
}

impl fmt::Display for ImageSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageSelection::All => f.write_str("all"),
            ImageSelection::Count(n) => write!(f, "{n}"),
            ImageSelection::Ids(ids) => {
                let parts: Vec<String> = ids.iter().map(usize::to_string).collect();
                write!(f, "{},", parts.join(","))
            }
        }
    }
}

impl ImageSelection {
    /// Resolves to ascending record indices out of `available`.
    ///
    /// Counts are sampled without replacement from a ChaCha8 stream seeded by
    /// `seed`. An id list must name distinct, existing records.
    pub fn resolve(&self, available: usize, seed: u64) -> Result<Vec<usize>> {
        if available == 0 {
            return Err(Error::arg("the dataset contains no records"));
        }
        match self {
            ImageSelection::All => Ok((0..available).collect()),
            ImageSelection::Count(n) if *n > available => Err(Error::arg(format!(
                "requested {n} images but the dataset has only {available}"
            ))),
            ImageSelection::Count(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut ids = rand::seq::index::sample(&mut rng, available, *n).into_vec();
                ids.sort_unstable();
                Ok(ids)
            }
            ImageSelection::Ids(ids) => {
                let mut sorted = ids.clone();
                sorted.sort_unstable();
                if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                    return Err(Error::arg(format!("image {} is listed twice", w[0])));
                }
                if let Some(&bad) = sorted.iter().find(|&&i| i >= available) {
                    return Err(Error::arg(format!(
                        "image {bad} is out of range, the dataset has {available} records"
                    )));
                }
                Ok(sorted)
            }
        }
    }

    /// `None` means the default: up to [`DEFAULT_IMAGE_COUNT`] sampled images.
    pub fn resolve_default(sel: Option<&ImageSelection>, available: usize, seed: u64) -> Result<Vec<usize>> {
        match sel {
            Some(s) => s.resolve(available, seed),
            None => ImageSelection::Count(DEFAULT_IMAGE_COUNT.min(available.max(1))).resolve(available, seed),
        }
    }
}
