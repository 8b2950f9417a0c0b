use std::path::PathBuf;

use clap::Args;

use boosted_cvar::data::{load_csv, split, LabelColumn, SplitSpec, SynthSpec};
use boosted_cvar::Dataset;

use crate::{CliError, CliResult};

/// Where samples come from and how validation rows are held out.
#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// CSV file with one sample per row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column: header name, zero-based index, or `last`.
    #[arg(long, default_value = "last")]
    pub label: String,
    /// The CSV has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Synthetic data, e.g. n=2000,groups=0.9:0.1,noise=0:0,d=2,seed=1
    #[arg(long)]
    pub synth: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Validate on the training set itself.
    #[arg(long)]
    pub reuse_train_as_val: bool,
    /// Seed for the split and the learner.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    pub fn is_set(&self) -> bool {
        self.data.is_some() || self.synth.is_some()
    }

    /// All rows, unsplit.
    pub fn load(&self) -> CliResult<Dataset> {
        match (&self.data, &self.synth) {
            (Some(_), Some(_)) => Err(CliError::Flag("give either --data or --synth, not both".into())),
            (None, None) => Err(CliError::Flag("one of --data or --synth is required".into())),
            (Some(path), None) => {
                let label: LabelColumn = self.label.parse()?;
                Ok(load_csv(path, &label, !self.no_header)?)
            }
            (None, Some(spec)) => {
                let spec: SynthSpec = spec.parse()?;
                Ok(spec.generate()?.0)
            }
        }
    }

    pub fn split_spec(&self) -> CliResult<SplitSpec> {
        if self.reuse_train_as_val {
            return Ok(SplitSpec::reuse());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(CliError::Flag(format!("--val-fraction {} not in [0, 1)", self.val_fraction)));
        }
        Ok(SplitSpec::holdout(self.val_fraction, self.seed))
    }

    pub fn load_split(&self) -> CliResult<(Dataset, Dataset)> {
        let data = self.load()?;
        Ok(split(&data, &self.split_spec()?)?)
    }

    /// Settings recorded in a saved ensemble so the split can be rebuilt.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![];
        if let Some(p) = &self.data {
            out.push(("data".into(), p.display().to_string()));
            out.push(("label".into(), self.label.clone()));
            out.push(("header".into(), (!self.no_header).to_string()));
        }
        if let Some(s) = &self.synth {
            out.push(("synth".into(), s.clone()));
        }
        out.push(("val_fraction".into(), format!("{:?}", self.val_fraction)));
        out.push(("reuse_train_as_val".into(), self.reuse_train_as_val.to_string()));
        out.push(("seed".into(), self.seed.to_string()));
        out
    }

    pub fn from_echo(config: &[(String, String)]) -> CliResult<Self> {
        let get = |k: &str| config.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
        let bad = |k: &str| CliError::Flag(format!("ensemble file records an invalid {k}"));
        let mut args = DataArgs {
            data: get("data").map(PathBuf::from),
            label: get("label").unwrap_or_else(|| "last".into()),
            no_header: get("header").is_some_and(|h| h == "false"),
            synth: get("synth"),
            ..Default::default()
        };
        if let Some(v) = get("val_fraction") {
            args.val_fraction = v.parse().map_err(|_| bad("val_fraction"))?;
        }
        if let Some(v) = get("reuse_train_as_val") {
            args.reuse_train_as_val = v.parse().map_err(|_| bad("reuse_train_as_val"))?;
        }
        if let Some(v) = get("seed") {
            args.seed = v.parse().map_err(|_| bad("seed"))?;
        }
        if !args.is_set() {
            return Err(CliError::Flag(
                "ensemble file does not record its data; pass --data or --synth".into(),
            ));
        }
        Ok(args)
    }
}
