use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cloudprint::attacksim::{self, AttackKind, AttackSpec};
use cloudprint::geometry::{self, isoclinic_rotation, random_unit_direction, RotationMatrix};
use cloudprint::synth::{self, ReferenceMode, SynthConfig};
use cloudprint::verifier::{self, Verdict, DEFAULT_THRESHOLD};
use cloudprint::wmvuln::{self, EmbMarkerScheme, LinearDecoderScheme, MatrixKeyScheme};
use cloudprint::{PointCloud, RstOrder, RstParams};
use nalgebra::DVector;

use crate::report::{
    AttackParamsFile, ReportFile, WmAttack, WmReport, WmStatistics, SCHEMA_VERSION,
};
use crate::{csvio, ecf, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "cloudprint",
    version,
    about = "Embedding-model ownership verification under rotation, scaling and translation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic victim, suspect and reference clouds.
    Synth(SynthArgs),
    /// Apply a seeded RST attack to a cloud.
    Attack(AttackArgs),
    /// Align a suspect to the victim and test it against references.
    Verify(VerifyArgs),
    /// Show how an RST attack moves a watermark scheme's detection statistic.
    WmAnalyze(WmArgs),
    /// Convert a CSV cloud to ECF.
    CsvImport(ConvertArgs),
    /// Convert an ECF cloud to CSV.
    CsvExport(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of points.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    /// Per-coordinate std of the suspect's noise.
    #[arg(long, default_value_t = 0.01)]
    pub suspect_noise: f64,
    /// Per-row noise norm of the references.
    #[arg(long, default_value_t = 0.3)]
    pub ref_noise: f64,
    /// Number of reference clouds.
    #[arg(long, default_value_t = 3)]
    pub refs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Spread of the per-reference noise multiplier.
    #[arg(long, default_value_t = synth::DEFAULT_HETEROGENEITY)]
    pub heterogeneity: f64,
    /// Draw references as unrelated clouds instead of victim variants.
    #[arg(long)]
    pub independent_refs: bool,
    /// Also write innocent.ecf, a fresh cloud from the reference population.
    #[arg(long)]
    pub innocent: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Rotation,
    Scaling,
    Translation,
    Mixed,
}

impl From<KindArg> for AttackKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Rotation => AttackKind::Rotation,
            KindArg::Scaling => AttackKind::Scaling,
            KindArg::Translation => AttackKind::Translation,
            KindArg::Mixed => AttackKind::Mixed,
        }
    }
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Rotation angle in [-180, 180]; sampled when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub degrees: Option<f64>,
    /// Scale factor in [0.1, 10]; sampled when omitted.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Translation length in [0, 10] along a seeded direction; per-component
    /// uniform in [-10, 10] when omitted.
    #[arg(long)]
    pub translate_len: Option<f64>,
    /// Application order such as R-S-T or T-S-R.
    #[arg(long, default_value = "R-S-T")]
    pub order: RstOrder,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the ground-truth parameters; defaults to
    /// `<output>.params.json`.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub suspect: PathBuf,
    #[arg(long)]
    pub victim: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub refs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scheme {
    Embmarker,
    Linear,
    Matrixkey,
}

#[derive(Debug, Args)]
pub struct WmArgs {
    #[arg(long, value_enum)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rotation angle; embmarker and matrixkey rotate every 2-plane of a
    /// seeded basis by this much, so 180 is exactly -I in even dimensions.
    #[arg(long, allow_hyphen_values = true)]
    pub degrees: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub translate_len: Option<f64>,
    /// Monte-Carlo rotations for the linear scheme.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Watermark bits for the linear scheme.
    #[arg(long, default_value_t = 32)]
    pub bits: usize,
    /// Trigger mix weight for embmarker.
    #[arg(long, default_value_t = 0.3)]
    pub weight: f64,
    /// Normal and triggered samples for embmarker.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Output rows of the matrix key; defaults to a square key.
    #[arg(long)]
    pub key_rows: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write an `x0,x1,...` header line.
    #[arg(long)]
    pub header: bool,
}

/// What a successful command wants the process to exit with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Verdict(Verdict),
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Synth(a) => synth_cmd(&a).map(|_| Outcome::Done),
        Command::Attack(a) => attack_cmd(&a).map(|_| Outcome::Done),
        Command::Verify(a) => verify_cmd(&a).map(|r| Outcome::Verdict(r.verdict)),
        Command::WmAnalyze(a) => wm_cmd(&a).map(|_| Outcome::Done),
        Command::CsvImport(a) => csv_import(&a).map(|_| Outcome::Done),
        Command::CsvExport(a) => csv_export(&a).map(|_| Outcome::Done),
    }
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

pub fn synth_cmd(a: &SynthArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = SynthConfig {
        count: a.n,
        dim: a.dim,
        clusters: a.clusters,
        suspect_noise: a.suspect_noise,
        ref_noise: a.ref_noise,
        heterogeneity: a.heterogeneity,
        reference_mode: if a.independent_refs {
            ReferenceMode::Independent
        } else {
            ReferenceMode::Family
        },
        seed: a.seed,
        ..SynthConfig::default()
    };
    cfg.validate()?;
    if a.refs < 2 {
        return Err(cloudprint::Error::TooFewReferences(a.refs).into());
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let sc = synth::gen_scenario(&cfg, a.refs)?;
    let mut written = Vec::new();
    let mut put = |name: String, cloud: &PointCloud| -> Result<(), CliError> {
        let path = a.out_dir.join(name);
        ecf::write(&path, cloud)?;
        written.push(path);
        Ok(())
    };
    put("victim.ecf".into(), &sc.victim)?;
    put("suspect.ecf".into(), &sc.suspect)?;
    for (i, r) in sc.references.iter().enumerate() {
        put(format!("ref_{}.ecf", i + 1), r)?;
    }
    if a.innocent {
        put("innocent.ecf".into(), &sc.innocent)?;
    }
    Ok(written)
}

pub fn attack_cmd(a: &AttackArgs) -> Result<RstParams, CliError> {
    let cloud = ecf::read(&a.input)?;
    let kind = AttackKind::from(a.kind);
    let spec = AttackSpec {
        kind,
        degrees: a.degrees,
        scale: a.scale,
        translation_len: a.translate_len,
        order: a.order,
        seed: a.seed,
    };
    let (attacked, params) = attacksim::attack(&cloud, &spec)?;
    ecf::write(&a.output, &attacked)?;
    let sidecar = a.params_out.clone().unwrap_or_else(|| {
        let mut name = a.output.clone().into_os_string();
        name.push(".params.json");
        PathBuf::from(name)
    });
    write_json(
        &AttackParamsFile::new(kind, a.seed, &params),
        Some(&sidecar),
    )?;
    Ok(params)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub fn verify_cmd(a: &VerifyArgs) -> Result<ReportFile, CliError> {
    if a.refs.len() < 2 {
        return Err(cloudprint::Error::TooFewReferences(a.refs.len()).into());
    }
    let start = Instant::now();
    let suspect = ecf::read(&a.suspect)?;
    let victim = ecf::read(&a.victim)?;
    let refs = a
        .refs
        .iter()
        .map(|p| ecf::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    let read_ms = ms(start);
    let t = Instant::now();
    let report = verifier::verify(&suspect, &victim, &refs, a.threshold)?;
    let verify_ms = ms(t);
    let timings = BTreeMap::from([
        ("read".to_string(), read_ms),
        ("verify".to_string(), verify_ms),
        ("total".to_string(), ms(start)),
    ]);
    let file = ReportFile::from_report(&report, BTreeMap::new(), timings);
    write_json(&file, a.out.as_deref())?;
    Ok(file)
}

fn wm_attack(a: &WmArgs, dim: usize) -> Result<RstParams, CliError> {
    let rotation = match a.degrees {
        Some(d) => {
            if !(d.abs() <= attacksim::MAX_DEGREES) {
                return Err(CliError::Usage(format!(
                    "--degrees must lie in [-180, 180] (got {d})"
                )));
            }
            isoclinic_rotation(dim, d, a.seed)?
        }
        None => RotationMatrix::identity(dim),
    };
    let translation = match a.translate_len {
        Some(len) => {
            let dir = random_unit_direction(dim, a.seed)?;
            DVector::from_iterator(dim, dir.into_iter().map(|x| x * len))
        }
        None => DVector::zeros(dim),
    };
    Ok(RstParams::new(
        rotation,
        a.scale.unwrap_or(1.0),
        translation,
        RstOrder::Rst,
    )?)
}

pub fn wm_cmd(a: &WmArgs) -> Result<WmReport, CliError> {
    let mut seeds = BTreeMap::from([("seed".to_string(), a.seed)]);
    let statistics = match a.scheme {
        Scheme::Embmarker => {
            let scheme = EmbMarkerScheme::random(a.dim, a.weight, a.seed)?;
            let cfg = SynthConfig {
                count: a.samples.max(a.dim + 1),
                dim: a.dim,
                seed: a.seed,
                ..SynthConfig::default()
            };
            let normal = synth::gen_victim(&cfg)?;
            let triggered = PointCloud::from_rows(
                &normal
                    .rows()
                    .map(|r| wmvuln::embmarker_insert(r, &scheme))
                    .collect::<Result<Vec<_>, _>>()?,
            )?;
            let attack = wm_attack(a, a.dim)?;
            let before = wmvuln::distribution_distance(&normal, &triggered, scheme.target())?;
            let after = wmvuln::distribution_distance(
                &geometry::apply_rst(&normal, &attack)?,
                &geometry::apply_rst(&triggered, &attack)?,
                scheme.target(),
            )?;
            WmStatistics::Embmarker {
                weight: a.weight,
                samples: normal.count(),
                distance_before: before,
                distance_after: after,
            }
        }
        Scheme::Linear => {
            let scheme = LinearDecoderScheme::random(a.dim, a.bits, a.seed)?;
            let e_m = random_unit_direction(a.dim, a.seed.wrapping_add(1))?;
            let rotation_seed = a.seed.wrapping_add(2);
            seeds.insert("rotations".into(), rotation_seed);
            let rate = wmvuln::rotation_bit_flip_rate(&scheme, &e_m, a.trials, rotation_seed)?;
            WmStatistics::Linear {
                bits: a.bits,
                trials: a.trials,
                flip_rate: rate,
                mean_hamming: rate * a.bits as f64,
            }
        }
        Scheme::Matrixkey => {
            let rows = a.key_rows.unwrap_or(a.dim);
            let scheme = MatrixKeyScheme::random_rectangular(rows, a.dim, a.seed)?;
            let e_o = random_unit_direction(a.dim, a.seed.wrapping_add(1))?;
            let e_norm = e_o.iter().map(|x| x * x).sum::<f64>().sqrt();
            let attack = wm_attack(a, rows)?;
            let residual = wmvuln::matrixkey_residual(&scheme, &e_o, &attack)?;
            let only = |rotation: RotationMatrix, scale: f64, d: DVector<f64>| {
                RstParams::new(rotation, scale, d, RstOrder::Rst)
                    .and_then(|p| wmvuln::matrixkey_residual(&scheme, &e_o, &p))
            };
            let id = || RotationMatrix::identity(rows);
            let zero = || DVector::zeros(rows);
            let (mut rs, mut ps, mut rt, mut pt, mut rr) = (None, None, None, None, None);
            if let Some(alpha) = a.scale {
                rs = Some(only(id(), alpha, zero())?);
                ps = Some((alpha - 1.0).abs() * e_norm);
            }
            if a.translate_len.is_some() {
                rt = Some(only(id(), 1.0, attack.translation.clone())?);
                pt = Some((scheme.pinv() * &attack.translation).norm());
            }
            if a.degrees.is_some() {
                rr = Some(only(attack.rotation.clone(), 1.0, zero())?);
            }
            WmStatistics::Matrixkey {
                key_rows: rows,
                residual,
                residual_scale_only: rs,
                predicted_scale_only: ps,
                residual_translation_only: rt,
                predicted_translation_only: pt,
                residual_rotation_only: rr,
            }
        }
    };
    let report = WmReport {
        schema_version: SCHEMA_VERSION,
        dim: a.dim,
        attack: WmAttack {
            degrees: a.degrees,
            scale: a.scale,
            translate_len: a.translate_len,
        },
        statistics,
        seeds,
    };
    write_json(&report, a.out.as_deref())?;
    Ok(report)
}

pub fn csv_import(a: &ConvertArgs) -> Result<PointCloud, CliError> {
    let file = File::open(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let cloud = csvio::parse(BufReader::new(file)).map_err(|e| e.in_file(&a.input))?;
    ecf::write(&a.output, &cloud)?;
    Ok(cloud)
}

pub fn csv_export(a: &ExportArgs) -> Result<(), CliError> {
    let cloud = ecf::read(&a.input)?;
    match &a.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            csvio::render(&cloud, BufWriter::new(file), a.header)
        }
        None => csvio::render(&cloud, io::stdout().lock(), a.header),
    }
}
