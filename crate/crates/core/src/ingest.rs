//! MovieLens 1M ingestion: `ratings.dat` parsing and conversion of frequently
//! rated movies into arms with empirical five-point reward distributions.
//!
//! A rating `r` becomes the reward `r / 5`, placing rewards in `[0.2, 1.0]`.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::model::{validate_instance, ArmConfig, BanditInstance, ModelError, RewardDist};

/// Largest tolerated share of malformed lines.
pub const MAX_MALFORMED_FRACTION: f64 = 0.001;

pub const RATING_REWARDS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read ratings file {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{malformed} of {lines} lines are malformed (limit {:.1}%)", MAX_MALFORMED_FRACTION * 100.0)]
    TooManyMalformed { malformed: usize, lines: usize },
    #[error("no movie has more than {min_count} ratings")]
    NoArmsSurvive { min_count: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingRecord {
    pub user_id: u32,
    pub movie_id: u32,
    pub rating: u8,
    pub timestamp: i64,
}

impl RatingRecord {
    /// Parses `UserID::MovieID::Rating::Timestamp`.
    pub fn parse(line: &str) -> Option<RatingRecord> {
        let mut fields = line.trim_end_matches(['\r', '\n']).split("::");
        let user_id = fields.next()?.trim().parse().ok()?;
        let movie_id = fields.next()?.trim().parse().ok()?;
        let rating: u8 = fields.next()?.trim().parse().ok()?;
        let timestamp = fields.next()?.trim().parse().ok()?;
        if fields.next().is_some() || !(1..=5).contains(&rating) {
            return None;
        }
        Some(RatingRecord {
            user_id,
            movie_id,
            rating,
            timestamp,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRatings {
    pub records: Vec<RatingRecord>,
    pub malformed: usize,
}

pub fn parse_ratings_reader(reader: impl BufRead) -> Result<ParsedRatings, std::io::Error> {
    let mut records = Vec::new();
    let mut malformed = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match RatingRecord::parse(&line) {
            Some(r) => records.push(r),
            None => malformed += 1,
        }
    }
    Ok(ParsedRatings { records, malformed })
}

/// Reads a `ratings.dat` file. Malformed lines are skipped and counted; the
/// read fails when they exceed [`MAX_MALFORMED_FRACTION`] of all lines.
pub fn parse_ratings(path: &Path) -> Result<ParsedRatings, IngestError> {
    let unreadable = |source| IngestError::FileUnreadable {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(unreadable)?;
    let parsed = parse_ratings_reader(std::io::BufReader::new(file)).map_err(unreadable)?;
    let lines = parsed.records.len() + parsed.malformed;
    if lines == 0 {
        log::warn!("{} contains no ratings", path.display());
    } else if parsed.malformed as f64 > MAX_MALFORMED_FRACTION * lines as f64 {
        return Err(IngestError::TooManyMalformed {
            malformed: parsed.malformed,
            lines,
        });
    } else if parsed.malformed > 0 {
        log::warn!(
            "{}: skipped {} malformed lines",
            path.display(),
            parsed.malformed
        );
    }
    Ok(parsed)
}

/// How the rating-count threshold `m_0` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountFilter {
    /// Keep movies with strictly more than `m_0` ratings.
    #[default]
    Greater,
    /// Keep movies with at least `m_0` ratings.
    AtLeast,
}

impl CountFilter {
    fn keeps(self, count: u64, min_count: u64) -> bool {
        match self {
            CountFilter::Greater => count > min_count,
            CountFilter::AtLeast => count >= min_count,
        }
    }
}

/// Rating histogram of one retained movie.
#[derive(Debug, Clone, PartialEq)]
pub struct MovieArm {
    pub movie_id: u32,
    /// Ratings 1..=5.
    pub histogram: [u64; 5],
}

impl MovieArm {
    pub fn count(&self) -> u64 {
        self.histogram.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.count() as f64;
        self.histogram.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn dist(&self) -> RewardDist {
        RewardDist::Categorical {
            values: RATING_REWARDS.to_vec(),
            probs: self.probabilities(),
        }
    }
}

/// Movies passing the count filter, sorted by movie id.
pub fn movie_arms(records: &[RatingRecord], min_count: u64, filter: CountFilter) -> Vec<MovieArm> {
    let mut histograms: BTreeMap<u32, [u64; 5]> = BTreeMap::new();
    for r in records {
        histograms.entry(r.movie_id).or_default()[(r.rating - 1) as usize] += 1;
    }
    histograms
        .into_iter()
        .map(|(movie_id, histogram)| MovieArm {
            movie_id,
            histogram,
        })
        .filter(|m| filter.keeps(m.count(), min_count))
        .collect()
}

/// Fairness fractions for ingested arms.
#[derive(Debug, Clone, PartialEq)]
pub enum TauRule {
    /// `tau_k = total / K`.
    Uniform {
        total: f64,
    },
    PerArm(Vec<f64>),
}

impl TauRule {
    fn taus(&self, k: usize) -> Vec<f64> {
        match self {
            TauRule::Uniform { total } => vec![total / k as f64; k],
            TauRule::PerArm(t) => t.clone(),
        }
    }
}

/// Builds a bandit instance in which every movie rated more than `min_count`
/// times is an arm.
pub fn build_instance(
    records: &[RatingRecord],
    min_count: u64,
    filter: CountFilter,
    penalty: f64,
    tau_rule: &TauRule,
) -> Result<(BanditInstance, Vec<u32>), IngestError> {
    let movies = movie_arms(records, min_count, filter);
    if movies.is_empty() {
        return Err(IngestError::NoArmsSurvive { min_count });
    }
    let taus = tau_rule.taus(movies.len());
    if taus.len() != movies.len() {
        return Err(ModelError::Parse(format!(
            "{} fairness fractions for {} arms",
            taus.len(),
            movies.len()
        ))
        .into());
    }
    let arms = movies
        .iter()
        .zip(taus)
        .map(|(m, tau)| ArmConfig::new(m.dist(), tau, penalty))
        .collect();
    let instance = validate_instance(arms)?;
    Ok((instance, movies.iter().map(|m| m.movie_id).collect()))
}
