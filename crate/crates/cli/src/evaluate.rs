//! Score algorithm summaries against a viewer survey.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use lectsum::evalkit::{
    self, ConsensusMiss, DatasetStats, Formulation, OrphanRate, RatingSummary, ScoreReport,
    SegmentSummary, Survey,
};
use lectsum::types::Summary;
use serde::Serialize;

use crate::summarize::write_json;
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    Top4,
    All,
    Top4Grouped,
    AllGrouped,
}

impl FormulationArg {
    fn to_formulation(self) -> Formulation {
        match self {
            FormulationArg::Top4 => Formulation::Top4,
            FormulationArg::All => Formulation::All,
            FormulationArg::Top4Grouped => Formulation::Top4Grouped,
            FormulationArg::AllGrouped => Formulation::AllGrouped,
        }
    }
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Survey JSON file.
    #[arg(long, value_name = "FILE")]
    pub survey: PathBuf,

    /// Directory of summaries: <id>/summary.json or <id>.json per surveyed
    /// segment.
    #[arg(long, value_name = "DIR")]
    pub summaries: PathBuf,

    /// Report JSON path.
    #[arg(long, value_name = "FILE", default_value = "report.json")]
    pub report: PathBuf,

    /// Also write per-segment scores as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,

    /// Ground-truth formulation to score (repeatable); default all four.
    #[arg(long = "formulation", value_enum, value_name = "NAME")]
    pub formulations: Vec<FormulationArg>,
}

#[derive(Serialize)]
struct SegmentScores {
    segment_id: String,
    n_images: usize,
    responses: usize,
    scores: Vec<ScoreReport>,
}

#[derive(Serialize)]
struct FormulationMean {
    formulation: Formulation,
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
}

#[derive(Serialize)]
struct Report {
    segments: Vec<SegmentScores>,
    means: Vec<FormulationMean>,
    orphan_rate: OrphanRate,
    consensus_miss: Option<ConsensusMiss>,
    ratings: RatingSummary,
    dataset: DatasetStats,
}

pub fn run(args: EvaluateArgs) -> Result<(), Failure> {
    let formulations: Vec<Formulation> = if args.formulations.is_empty() {
        Formulation::ALL.to_vec()
    } else {
        let requested: Vec<Formulation> = args
            .formulations
            .iter()
            .map(|f| f.to_formulation())
            .collect();
        Formulation::ALL
            .into_iter()
            .filter(|f| requested.contains(f))
            .collect()
    };

    let survey = evalkit::load_survey(&args.survey)
        .with_context(|| format!("survey {}", args.survey.display()))?;

    let summaries = locate_summaries(&survey, &args.summaries)?;
    let report = build_report(&survey, &summaries, &formulations)?;

    write_json(&args.report, &report)?;
    if let Some(csv_path) = &args.csv {
        write_csv(csv_path, &report)?;
    }

    for mean in &report.means {
        println!(
            "{}: accuracy {:.3}, precision {:.3}, recall {:.3}, f1 {:.3}",
            mean.formulation.name(),
            mean.accuracy,
            mean.precision,
            mean.recall,
            mean.f1
        );
    }
    println!(
        "evaluated {} segments -> {}",
        report.segments.len(),
        args.report.display()
    );
    Ok(())
}

/// Finds one summary manifest per surveyed segment. Every missing segment is
/// reported before failing so a batch problem surfaces in one run.
fn locate_summaries(survey: &Survey, dir: &Path) -> Result<Vec<Summary>, Failure> {
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for segment in &survey.segments {
        let nested = dir.join(&segment.segment_id).join("summary.json");
        let flat = dir.join(format!("{}.json", segment.segment_id));
        let path = if nested.exists() {
            nested
        } else if flat.exists() {
            flat
        } else {
            missing.push(segment.segment_id.clone());
            continue;
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let summary: Summary = serde_json::from_str(&text)
            .with_context(|| format!("summary {}", path.display()))?;
        if summary.segment_id != segment.segment_id {
            return Err(Failure::Stage(anyhow!(
                "{} declares segment {}, expected {}",
                path.display(),
                summary.segment_id,
                segment.segment_id
            )));
        }
        found.push(summary);
    }
    if !missing.is_empty() {
        for id in &missing {
            eprintln!(
                "missing summary for segment {id}: expected {}/{id}/summary.json or {}/{id}.json",
                dir.display(),
                dir.display()
            );
        }
        return Err(Failure::Stage(anyhow!(
            "{} of {} surveyed segments have no summary",
            missing.len(),
            survey.segments.len()
        )));
    }
    Ok(found)
}

fn build_report(
    survey: &Survey,
    summaries: &[Summary],
    formulations: &[Formulation],
) -> anyhow::Result<Report> {
    let mut segments = Vec::with_capacity(summaries.len());
    for summary in summaries {
        let segment = survey
            .segment(&summary.segment_id)
            .expect("summaries located from survey segments");
        let groups = evalkit::build_groups(&segment.responses, segment.n_images)?;
        let mut scores = Vec::with_capacity(formulations.len());
        for &formulation in formulations {
            let truth = evalkit::ground_truth(&segment.responses, &groups, formulation)?;
            scores.push(evalkit::score(&summary.selected, &truth, &groups)?);
        }
        segments.push(SegmentScores {
            segment_id: summary.segment_id.clone(),
            n_images: segment.n_images,
            responses: segment.responses.len(),
            scores,
        });
    }

    let means = formulations
        .iter()
        .enumerate()
        .map(|(i, &formulation)| {
            let count = segments.len().max(1) as f64;
            let sum = |pick: fn(&ScoreReport) -> f64| {
                segments.iter().map(|s| pick(&s.scores[i])).sum::<f64>() / count
            };
            FormulationMean {
                formulation,
                accuracy: sum(|s| s.accuracy),
                precision: sum(|s| s.precision),
                recall: sum(|s| s.recall),
                f1: sum(|s| s.f1),
            }
        })
        .collect();

    let segment_summaries: Vec<SegmentSummary> = summaries
        .iter()
        .map(|s| SegmentSummary {
            segment_id: s.segment_id.clone(),
            selected: s.selected.clone(),
        })
        .collect();

    Ok(Report {
        segments,
        means,
        orphan_rate: evalkit::orphan_rate(survey, &segment_summaries)?,
        consensus_miss: evalkit::consensus_miss(survey, &segment_summaries)?,
        ratings: evalkit::rating_summary(survey)?,
        dataset: evalkit::dataset_stats(survey)?,
    })
}

fn write_csv(path: &Path, report: &Report) -> anyhow::Result<()> {
    let mut text = String::from(
        "segment_id,formulation,true_positives,false_positives,false_negatives,true_negatives,accuracy,precision,recall,f1\n",
    );
    for segment in &report.segments {
        for score in &segment.scores {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                segment.segment_id,
                score.formulation.name(),
                score.true_positives,
                score.false_positives,
                score.false_negatives,
                score.true_negatives,
                score.accuracy,
                score.precision,
                score.recall,
                score.f1
            ));
        }
    }
    lectsum::compose::write_atomic(path, text.as_bytes())?;
    Ok(())
}
