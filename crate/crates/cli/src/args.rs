use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dae_core::semantics::LogBase;

#[derive(Debug, Parser)]
#[command(
    name = "dae",
    version,
    about = "Distinctive-attribute extraction and attribute-conditioned captioning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the attribute vocabulary and ground-truth attribute vectors.
    Extract(ExtractArgs),
    /// Vocabulary size for a list of IDF thresholds.
    VocabReport(VocabReportArgs),
    /// Train an ensemble of attribute predictors.
    TrainAttr(TrainAttrArgs),
    /// Predict attribute vectors from image features.
    PredictAttr(PredictAttrArgs),
    /// Train an ensemble of attribute-conditioned captioners.
    TrainCaptioner(TrainCaptionerArgs),
    /// Decode captions with beam search.
    Caption(CaptionArgs),
    /// Binned F1 of predicted against ground-truth attributes.
    EvalAttr(EvalAttrArgs),
    /// BLEU, ROUGE-L and CIDEr-D of generated captions.
    EvalCaptions(EvalCaptionsArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Extract(a) => &a.common,
            Command::VocabReport(a) => &a.common,
            Command::TrainAttr(a) => &a.common,
            Command::PredictAttr(a) => &a.common,
            Command::TrainCaptioner(a) => &a.common,
            Command::Caption(a) => &a.common,
            Command::EvalAttr(a) => &a.common,
            Command::EvalCaptions(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Root seed; every random stream of the command derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file of default flag values, keyed by subcommand name.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogBaseArg {
    Ten,
    Natural,
}

impl From<LogBaseArg> for LogBase {
    fn from(b: LogBaseArg) -> Self {
        match b {
            LogBaseArg::Ten => LogBase::Ten,
            LogBaseArg::Natural => LogBase::Natural,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ExtractArgs {
    /// COCO caption annotation file.
    #[arg(long)]
    pub captions: PathBuf,
    /// Porter-stem tokens before counting.
    #[arg(long)]
    pub stem: bool,
    /// Keep words whose IDF is strictly below this value.
    #[arg(long, default_value_t = 7.0)]
    pub idf_threshold: f64,
    #[arg(long, value_enum, default_value = "ten")]
    pub log_base: LogBaseArg,
    #[arg(long)]
    pub out_vocab: PathBuf,
    #[arg(long)]
    pub out_attrs: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct VocabReportArgs {
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long)]
    pub stem: bool,
    #[arg(long, value_delimiter = ',', default_value = "5,6,7,8,9,10,11")]
    pub thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value = "ten")]
    pub log_base: LogBaseArg,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainAttrArgs {
    /// Feature file (DAEF).
    #[arg(long)]
    pub features: PathBuf,
    /// Ground-truth attribute file.
    #[arg(long)]
    pub attrs: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2048)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.3)]
    pub dropout: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Number of independently initialized members.
    #[arg(long, default_value_t = 5)]
    pub ensemble: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PredictAttrArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Attribute-predictor checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainCaptionerArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Attribute vectors conditioning the decoder, one per image.
    #[arg(long)]
    pub attrs: PathBuf,
    /// COCO caption annotation file of the training images.
    #[arg(long)]
    pub captions: PathBuf,
    /// COCO caption annotation file of held-out images for early stopping.
    #[arg(long)]
    pub val_captions: Option<PathBuf>,
    /// Word vectors in word2vec text format for the embedding layer.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum count of a caption word to enter the decoder vocabulary.
    #[arg(long, default_value_t = 5)]
    pub min_count: usize,
    #[arg(long, default_value_t = 300)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 512)]
    pub hidden: usize,
    #[arg(long, default_value_t = 512)]
    pub factor: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 20)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    /// Train for all epochs even with validation captions.
    #[arg(long)]
    pub no_early_stop: bool,
    #[arg(long, default_value_t = 5)]
    pub ensemble: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CaptionArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Attribute vectors of the images to caption.
    #[arg(long)]
    pub attrs: PathBuf,
    /// Captioner checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub beam: usize,
    /// Maximum number of tokens after BOS, EOS included.
    #[arg(long, default_value_t = 20)]
    pub max_len: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalAttrArgs {
    /// Predicted attribute file.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth attribute file.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Bleu,
    RougeL,
    CiderD,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalCaptionsArgs {
    /// Generated caption records.
    #[arg(long)]
    pub captions: PathBuf,
    /// COCO caption annotation file with the reference captions.
    #[arg(long)]
    pub references: PathBuf,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "bleu,rouge-l,cider-d"
    )]
    pub metrics: Vec<Metric>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}
