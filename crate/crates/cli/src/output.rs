use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use tvgroup::simulation::gen_panel;
use tvgroup::spline::unit_grid;
use tvgroup::{SplineBasis, SplineConfig};

use crate::{CmdResult, DesignArgs, Failure};

/// Everything needed to rerun a command: the resolved settings with every
/// default filled in.
#[derive(Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: &'a C,
}

impl<'a, C: Serialize> RunManifest<'a, C> {
    pub fn new(command: &'a str, config: &'a C, seed: Option<u64>) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
        }
    }

    pub fn inputs(mut self, paths: &[&PathBuf]) -> Self {
        self.inputs = paths.iter().map(|p| p.display().to_string()).collect();
        self
    }

    pub fn outputs(mut self, dir: &Path, files: &[&str]) -> Self {
        self.outputs = files
            .iter()
            .map(|f| dir.join(f).display().to_string())
            .collect();
        self
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn open_output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

#[derive(Args, Debug)]
pub struct BasisArgs {
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Interior knots.
    #[arg(long, default_value_t = 2)]
    pub knots: usize,
    /// Number of evenly spaced points on [0, 1].
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_basis(args: &BasisArgs) -> CmdResult {
    if args.grid == 0 {
        return Err(Failure::Input(anyhow::anyhow!("--grid must be positive")));
    }
    let basis = SplineBasis::new(SplineConfig::new(args.degree, args.knots)?)?;
    let v = unit_grid(args.grid);
    let values = basis.eval_grid(&v)?;
    let mut w = csv::Writer::from_writer(open_output(args.out.as_ref())?);
    let mut header = vec!["v".to_string()];
    header.extend((1..=basis.size()).map(|m| format!("b{m}")));
    w.write_record(&header).map_err(anyhow::Error::from)?;
    for (r, &vr) in v.iter().enumerate() {
        let mut row = vec![format!("{vr:?}")];
        row.extend(values.row(r).iter().map(|x| format!("{x:?}")));
        w.write_record(&row).map_err(anyhow::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Panel CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of true group labels and fixed effects per unit.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

pub fn run_generate(args: &GenerateArgs) -> CmdResult {
    let spec = args.design.spec()?;
    let tp = gen_panel(&spec, args.design.seed)?;
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    tp.panel.write_csv(BufWriter::new(file))?;
    if let Some(path) = &args.truth {
        let mut w = csv::Writer::from_path(path).map_err(anyhow::Error::from)?;
        w.write_record(["unit_id", "group", "fixed_effect"])
            .map_err(anyhow::Error::from)?;
        for (i, unit) in tp.panel.units().iter().enumerate() {
            w.write_record([
                unit.id.clone(),
                (tp.groups[i] + 1).to_string(),
                format!("{:?}", tp.fixed_effects[i]),
            ])
            .map_err(anyhow::Error::from)?;
        }
        w.flush()?;
    }
    Ok(())
}
