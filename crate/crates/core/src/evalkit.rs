//! Scoring summaries against viewer surveys.
//!
//! A survey asks several participants per segment to pick the four images
//! they consider most representative, to point out images they skipped
//! because an equivalent one was already picked, and to rate summary quality
//! and their topic familiarity on 1 (best) to 4 (worst) scales.
//!
//! From the pooled responses this module derives ground-truth target sets in
//! four formulations (top-4 / all-selected, each with or without similarity
//! grouping), standard confusion-matrix scores, and two stricter diagnostics:
//! the rate of algorithm picks no participant chose (orphans) and the rate of
//! strong-consensus images the algorithm missed.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One participant's answers for one segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyResponse {
    pub participant_id: String,
    /// Picked image ids: exactly four, or every image when the segment has
    /// fewer than four.
    pub selected: Vec<usize>,
    /// Unpicked image -> the picked image that made it redundant.
    pub similarity_statements: BTreeMap<usize, usize>,
    /// 1 (very good) ..= 4 (poor).
    pub quality: u8,
    /// 1 (very familiar) ..= 4 (unfamiliar).
    pub familiarity: u8,
}

/// All responses collected for one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SurveySegment {
    pub segment_id: String,
    pub n_images: usize,
    /// Segment length, when the survey records it. Only used by
    /// [`dataset_stats`].
    pub duration_s: Option<f64>,
    pub responses: Vec<SurveyResponse>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Survey {
    pub segments: Vec<SurveySegment>,
}

impl Survey {
    pub fn segment(&self, segment_id: &str) -> Option<&SurveySegment> {
        self.segments.iter().find(|s| s.segment_id == segment_id)
    }
}

#[derive(Deserialize)]
struct RawSurvey {
    segments: Vec<RawSegment>,
}

#[derive(Deserialize)]
struct RawSegment {
    segment_id: String,
    n_images: i64,
    #[serde(default)]
    duration_s: Option<f64>,
    responses: Vec<RawResponse>,
}

#[derive(Deserialize)]
struct RawResponse {
    participant_id: String,
    selected: Vec<i64>,
    #[serde(default)]
    similar: BTreeMap<String, String>,
    quality: i64,
    familiarity: i64,
}

fn parse_image_id(raw: i64, n_images: usize, location: &str) -> Result<usize> {
    if raw < 0 || raw as usize >= n_images {
        return Err(Error::schema(
            location,
            format!("image id {raw} out of range for {n_images} images"),
        ));
    }
    Ok(raw as usize)
}

fn parse_rating(raw: i64, location: &str) -> Result<u8> {
    if !(1..=4).contains(&raw) {
        return Err(Error::schema(
            location,
            format!("rating {raw} outside 1..=4"),
        ));
    }
    Ok(raw as u8)
}

/// Parses and validates a survey file. Every reported problem names the
/// segment, participant, and field it was found in.
pub fn load_survey(path: &Path) -> Result<Survey> {
    let text = std::fs::read_to_string(path)?;
    parse_survey(&text)
}

pub fn parse_survey(text: &str) -> Result<Survey> {
    let raw: RawSurvey = serde_json::from_str(text)?;
    let mut segments = Vec::with_capacity(raw.segments.len());
    let mut seen_segments = BTreeSet::new();
    for seg in raw.segments {
        let seg_loc = format!("segments[{}]", seg.segment_id);
        if seg.segment_id.is_empty() {
            return Err(Error::schema("segments[].segment_id", "empty segment id"));
        }
        if !seen_segments.insert(seg.segment_id.clone()) {
            return Err(Error::schema(
                format!("{seg_loc}.segment_id"),
                "duplicate segment id",
            ));
        }
        if seg.n_images < 1 {
            return Err(Error::schema(
                format!("{seg_loc}.n_images"),
                format!("{} is not a positive image count", seg.n_images),
            ));
        }
        let n_images = seg.n_images as usize;
        if let Some(d) = seg.duration_s {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::schema(
                    format!("{seg_loc}.duration_s"),
                    format!("{d} is not a positive duration"),
                ));
            }
        }

        let mut responses = Vec::with_capacity(seg.responses.len());
        for resp in seg.responses {
            let resp_loc = format!("{seg_loc}.responses[{}]", resp.participant_id);
            let expected = 4.min(n_images);
            if resp.selected.len() != expected {
                return Err(Error::schema(
                    format!("{resp_loc}.selected"),
                    format!("{} images picked, expected {expected}", resp.selected.len()),
                ));
            }
            let mut selected = Vec::with_capacity(expected);
            let mut seen = BTreeSet::new();
            for raw_id in &resp.selected {
                let id = parse_image_id(*raw_id, n_images, &format!("{resp_loc}.selected"))?;
                if !seen.insert(id) {
                    return Err(Error::schema(
                        format!("{resp_loc}.selected"),
                        format!("image {id} picked twice"),
                    ));
                }
                selected.push(id);
            }

            let mut similarity_statements = BTreeMap::new();
            for (key, value) in &resp.similar {
                let loc = format!("{resp_loc}.similar[{key}]");
                let from: i64 = key
                    .parse()
                    .map_err(|_| Error::schema(&loc, "key is not an image id"))?;
                let to: i64 = value
                    .parse()
                    .map_err(|_| Error::schema(&loc, "value is not an image id"))?;
                let from = parse_image_id(from, n_images, &loc)?;
                let to = parse_image_id(to, n_images, &loc)?;
                if seen.contains(&from) {
                    return Err(Error::schema(
                        &loc,
                        format!("image {from} was picked, so it cannot be marked redundant"),
                    ));
                }
                if !seen.contains(&to) {
                    return Err(Error::schema(
                        &loc,
                        format!("image {to} was not picked, so it cannot justify a skip"),
                    ));
                }
                similarity_statements.insert(from, to);
            }

            responses.push(SurveyResponse {
                quality: parse_rating(resp.quality, &format!("{resp_loc}.quality"))?,
                familiarity: parse_rating(resp.familiarity, &format!("{resp_loc}.familiarity"))?,
                participant_id: resp.participant_id,
                selected,
                similarity_statements,
            });
        }
        segments.push(SurveySegment {
            segment_id: seg.segment_id,
            n_images,
            duration_s: seg.duration_s,
            responses,
        });
    }
    Ok(Survey { segments })
}

/// Partition of a segment's images into similarity groups: images linked by
/// any participant's redundancy statement share a group, everything else is
/// a singleton. A group's id is its smallest member id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageGroups {
    n_images: usize,
    group_of: Vec<usize>,
    members: BTreeMap<usize, Vec<usize>>,
}

impl ImageGroups {
    pub fn n_images(&self) -> usize {
        self.n_images
    }

    pub fn group_id_of(&self, image: usize) -> usize {
        self.group_of[image]
    }

    pub fn total_groups(&self) -> usize {
        self.members.len()
    }

    /// Group id -> ascending member ids.
    pub fn members(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.members
    }
}

/// Pools every response's redundancy statements into transitive similarity
/// groups over `n_images` images.
pub fn build_groups(responses: &[SurveyResponse], n_images: usize) -> Result<ImageGroups> {
    if n_images == 0 {
        return Err(Error::EmptyInput("grouping over zero images".into()));
    }
    let mut parent: Vec<usize> = (0..n_images).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for resp in responses {
        for (&from, &to) in &resp.similarity_statements {
            if from >= n_images || to >= n_images {
                return Err(Error::InvalidInput(format!(
                    "similarity statement {from}->{to} out of range for {n_images} images"
                )));
            }
            let a = find(&mut parent, from);
            let b = find(&mut parent, to);
            if a != b {
                // Root at the smaller id so representatives are stable.
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
    }
    let mut group_of = vec![0usize; n_images];
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n_images {
        let root = find(&mut parent, i);
        group_of[i] = root;
        members.entry(root).or_default().push(i);
    }
    Ok(ImageGroups {
        n_images,
        group_of,
        members,
    })
}

/// How ground-truth targets are derived from pooled selections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// The four individually most-selected images.
    Top4,
    /// Every image anyone selected.
    All,
    /// The four groups whose members were selected most often.
    Top4Grouped,
    /// Every group containing a selected image.
    AllGrouped,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::Top4,
        Formulation::All,
        Formulation::Top4Grouped,
        Formulation::AllGrouped,
    ];

    pub fn is_grouped(&self) -> bool {
        matches!(self, Formulation::Top4Grouped | Formulation::AllGrouped)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Top4 => "top4",
            Formulation::All => "all",
            Formulation::Top4Grouped => "top4_grouped",
            Formulation::AllGrouped => "all_grouped",
        }
    }
}

/// Target set for one segment and formulation. Ungrouped formulations target
/// image ids; grouped formulations target group ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub formulation: Formulation,
    pub targets: BTreeSet<usize>,
}

/// Image id -> how many participants picked it.
pub fn selection_counts(responses: &[SurveyResponse]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for resp in responses {
        for &id in &resp.selected {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    counts
}

/// Top entries by count descending, id ascending; all of them when fewer
/// than `limit` have a nonzero count.
fn rank_targets(counts: &BTreeMap<usize, usize>, limit: usize) -> BTreeSet<usize> {
    let mut ranked: Vec<(usize, usize)> = counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&id, &c)| (id, c))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(limit).map(|(id, _)| id).collect()
}

pub fn ground_truth(
    responses: &[SurveyResponse],
    groups: &ImageGroups,
    formulation: Formulation,
) -> Result<GroundTruth> {
    let image_counts = selection_counts(responses);
    if image_counts.is_empty() {
        return Err(Error::EmptyInput(
            "ground truth from a segment with no responses".into(),
        ));
    }
    let targets = match formulation {
        Formulation::Top4 => rank_targets(&image_counts, 4),
        Formulation::All => rank_targets(&image_counts, usize::MAX),
        Formulation::Top4Grouped | Formulation::AllGrouped => {
            let mut group_counts: BTreeMap<usize, usize> = BTreeMap::new();
            for (&id, &c) in &image_counts {
                *group_counts.entry(groups.group_id_of(id)).or_insert(0) += c;
            }
            let limit = if formulation == Formulation::Top4Grouped {
                4
            } else {
                usize::MAX
            };
            rank_targets(&group_counts, limit)
        }
    };
    Ok(GroundTruth {
        formulation,
        targets,
    })
}

/// Confusion-matrix scores for one segment and formulation.
///
/// Ungrouped formulations count over the segment's images. Grouped
/// formulations count over its similarity groups, except that precision stays
/// per selected image: a pick is a hit iff its group is a target group, so
/// picking either of two grouped-equivalent images scores identically.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    pub formulation: Formulation,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn score(
    selected: &[usize],
    truth: &GroundTruth,
    groups: &ImageGroups,
) -> Result<ScoreReport> {
    let n = groups.n_images();
    if selected.is_empty() {
        return Err(Error::EmptyInput("scoring an empty selection".into()));
    }
    let mut sel_set = BTreeSet::new();
    for &id in selected {
        if id >= n {
            return Err(Error::InvalidInput(format!(
                "selected image {id} out of range for {n} images"
            )));
        }
        if !sel_set.insert(id) {
            return Err(Error::InvalidInput(format!("selected image {id} repeated")));
        }
    }
    if truth.targets.is_empty() {
        return Err(Error::EmptyInput("scoring against no targets".into()));
    }

    let report = if !truth.formulation.is_grouped() {
        if let Some(&bad) = truth.targets.iter().find(|&&t| t >= n) {
            return Err(Error::InvalidInput(format!(
                "target image {bad} out of range for {n} images"
            )));
        }
        let tp = sel_set.intersection(&truth.targets).count();
        let fp = sel_set.len() - tp;
        let fn_count = truth.targets.len() - tp;
        let tn = n - tp - fp - fn_count;
        let precision = ratio(tp, sel_set.len());
        let recall = ratio(tp, truth.targets.len());
        ScoreReport {
            formulation: truth.formulation,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_count,
            true_negatives: tn,
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1: f1_of(precision, recall),
        }
    } else {
        for &gid in &truth.targets {
            if gid >= n || groups.group_id_of(gid) != gid {
                return Err(Error::InvalidInput(format!(
                    "target {gid} is not a group id of this segment"
                )));
            }
        }
        let sel_gids: Vec<usize> = selected.iter().map(|&s| groups.group_id_of(s)).collect();
        let image_hits = sel_gids
            .iter()
            .filter(|g| truth.targets.contains(g))
            .count();
        let distinct_sel: BTreeSet<usize> = sel_gids.iter().copied().collect();
        let hit_groups: BTreeSet<usize> = distinct_sel
            .intersection(&truth.targets)
            .copied()
            .collect();
        let total = groups.total_groups();
        let tp = hit_groups.len();
        let fp = distinct_sel.len() - tp;
        let fn_count = truth.targets.len() - tp;
        let tn = total - tp - fp - fn_count;
        let precision = ratio(image_hits, selected.len());
        let recall = ratio(tp, truth.targets.len());
        ScoreReport {
            formulation: truth.formulation,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_count,
            true_negatives: tn,
            accuracy: ratio(tp + tn, total),
            precision,
            recall,
            f1: f1_of(precision, recall),
        }
    };
    Ok(report)
}

/// Algorithm output for one surveyed segment, as fed to the corpus-level
/// metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSummary {
    pub segment_id: String,
    pub selected: Vec<usize>,
}

fn join_segments<'a>(
    survey: &'a Survey,
    summaries: &'a [SegmentSummary],
) -> Result<Vec<(&'a SurveySegment, &'a SegmentSummary)>> {
    let mut pairs = Vec::with_capacity(summaries.len());
    for summary in summaries {
        let segment = survey.segment(&summary.segment_id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "summary references unknown segment {}",
                summary.segment_id
            ))
        })?;
        for &id in &summary.selected {
            if id >= segment.n_images {
                return Err(Error::InvalidInput(format!(
                    "segment {}: selected image {id} out of range for {} images",
                    summary.segment_id, segment.n_images
                )));
            }
        }
        pairs.push((segment, summary));
    }
    Ok(pairs)
}

/// Share of algorithm picks that no participant picked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrphanRate {
    /// Fraction of picks no participant selected.
    pub strict_unselected: f64,
    /// Fraction of picks no participant selected whose whole group also went
    /// unselected.
    pub orphan: f64,
}

pub fn orphan_rate(survey: &Survey, summaries: &[SegmentSummary]) -> Result<OrphanRate> {
    let pairs = join_segments(survey, summaries)?;
    let mut universe = 0usize;
    let mut strict = 0usize;
    let mut orphans = 0usize;
    for (segment, summary) in pairs {
        let counts = selection_counts(&segment.responses);
        let groups = build_groups(&segment.responses, segment.n_images)?;
        for &pick in &summary.selected {
            universe += 1;
            if counts.get(&pick).copied().unwrap_or(0) > 0 {
                continue;
            }
            strict += 1;
            let gid = groups.group_id_of(pick);
            let group_selected = groups.members()[&gid]
                .iter()
                .any(|m| counts.get(m).copied().unwrap_or(0) > 0);
            if !group_selected {
                orphans += 1;
            }
        }
    }
    if universe == 0 {
        return Err(Error::EmptyInput("orphan rate over zero picks".into()));
    }
    Ok(OrphanRate {
        strict_unselected: ratio(strict, universe),
        orphan: ratio(orphans, universe),
    })
}

/// Share of strong-consensus images (picked by at least
/// [`CONSENSUS_THRESHOLD`] participants) the algorithm left out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConsensusMiss {
    /// Fraction of consensus images absent from the summary.
    pub strict: f64,
    /// Fraction absent from the summary with no group member in it either.
    pub similarity_adjusted: f64,
}

pub const CONSENSUS_THRESHOLD: usize = 3;

/// `None` when no image reaches the consensus threshold anywhere.
pub fn consensus_miss(
    survey: &Survey,
    summaries: &[SegmentSummary],
) -> Result<Option<ConsensusMiss>> {
    let pairs = join_segments(survey, summaries)?;
    let mut universe = 0usize;
    let mut strict = 0usize;
    let mut adjusted = 0usize;
    for (segment, summary) in pairs {
        let counts = selection_counts(&segment.responses);
        let groups = build_groups(&segment.responses, segment.n_images)?;
        let picked: BTreeSet<usize> = summary.selected.iter().copied().collect();
        let picked_groups: BTreeSet<usize> = summary
            .selected
            .iter()
            .map(|&p| groups.group_id_of(p))
            .collect();
        for (&image, &count) in &counts {
            if count < CONSENSUS_THRESHOLD {
                continue;
            }
            universe += 1;
            if picked.contains(&image) {
                continue;
            }
            strict += 1;
            if !picked_groups.contains(&groups.group_id_of(image)) {
                adjusted += 1;
            }
        }
    }
    if universe == 0 {
        return Ok(None);
    }
    Ok(Some(ConsensusMiss {
        strict: ratio(strict, universe),
        similarity_adjusted: ratio(adjusted, universe),
    }))
}

/// Share of responses (or segments) at each 1..=4 rating. Keys "1".."4" are
/// always present.
pub type RatingDistribution = BTreeMap<u8, f64>;

fn distribution(ratings: &[u8]) -> RatingDistribution {
    let mut dist: RatingDistribution = (1..=4).map(|r| (r, 0.0)).collect();
    if ratings.is_empty() {
        return dist;
    }
    for &r in ratings {
        *dist.get_mut(&r).expect("ratings validated to 1..=4") += 1.0;
    }
    for v in dist.values_mut() {
        *v /= ratings.len() as f64;
    }
    dist
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatingSummary {
    /// All quality ratings pooled across segments.
    pub quality_distribution: RatingDistribution,
    /// Best (lowest) quality rating each segment received.
    pub best_per_segment_distribution: RatingDistribution,
    /// All familiarity ratings pooled across segments.
    pub familiarity_distribution: RatingDistribution,
}

pub fn rating_summary(survey: &Survey) -> Result<RatingSummary> {
    let mut quality = Vec::new();
    let mut familiarity = Vec::new();
    let mut best_per_segment = Vec::new();
    for segment in &survey.segments {
        let mut best: Option<u8> = None;
        for resp in &segment.responses {
            quality.push(resp.quality);
            familiarity.push(resp.familiarity);
            best = Some(best.map_or(resp.quality, |b| b.min(resp.quality)));
        }
        if let Some(b) = best {
            best_per_segment.push(b);
        }
    }
    if quality.is_empty() {
        return Err(Error::EmptyInput("rating summary over zero responses".into()));
    }
    Ok(RatingSummary {
        quality_distribution: distribution(&quality),
        best_per_segment_distribution: distribution(&best_per_segment),
        familiarity_distribution: distribution(&familiarity),
    })
}

/// Five-number-ish spread of a per-segment quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StatsSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

fn stats_of(values: &[f64]) -> StatsSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    StatsSummary {
        min: sorted[0],
        max: sorted[n - 1],
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
    }
}

/// Corpus shape: image-count spread always, duration spread when every
/// segment carries one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub segments: usize,
    pub images: StatsSummary,
    pub duration_s: Option<StatsSummary>,
}

pub fn dataset_stats(survey: &Survey) -> Result<DatasetStats> {
    if survey.segments.is_empty() {
        return Err(Error::EmptyInput("stats over zero segments".into()));
    }
    let images: Vec<f64> = survey.segments.iter().map(|s| s.n_images as f64).collect();
    let durations: Option<Vec<f64>> = survey.segments.iter().map(|s| s.duration_s).collect();
    Ok(DatasetStats {
        segments: survey.segments.len(),
        images: stats_of(&images),
        duration_s: durations.map(|d| stats_of(&d)),
    })
}
