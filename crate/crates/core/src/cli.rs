//! Command-line front end.
//!
//! Every subcommand reads optional defaults from the `--config` TOML file
//! (one table per subcommand); flags given on the command line win. Exit
//! codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::geometry::{MagneticField, UnitVector};
use crate::inversion::{
    detect_peaks, fit_lorentzians, fit_power_curve, invert_field, DipEstimate, DirectionClass, InvertOptions,
    PeakOptions,
};
use crate::io::{format_number, parse_gap, resolve_profile, Column, DataTable, Profile};
use crate::photodynamics::{pdmr_contrast, photocurrent_model, solve_with_drive, FamilySpin, MwTarget};
use crate::spectra::{distance_for_field, field_map, linear_grid, synth_spectrum, MagnetModel, SpectrumConfig, Sweep, SynthesisPath};
use crate::transport::{iv_curve, junction_current, Generation};

#[derive(Debug, Parser)]
#[command(name = "pdmr", version, about = "Photoelectrically detected magnetic resonance simulator and inversion toolkit")]
struct Cli {
    /// TOML file with per-command defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Calibration profile: built-in name, file path, or name in $PDMR_PROFILE_DIR.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a CW-PDMR spectrum.
    Spectrum(SpectrumArgs),
    /// Magnet sweep map in long format.
    Fieldmap(FieldmapArgs),
    /// Current-voltage curve of the junction.
    Iv(IvArgs),
    /// Photocurrent and contrast versus optical power.
    PowerSweep(PowerSweepArgs),
    /// Fit Lorentzian dips to a spectrum table.
    FitSpectrum(FitSpectrumArgs),
    /// Fit the power law to a power-sweep table.
    FitPower(FitPowerArgs),
    /// Reconstruct the magnetic field from a spectrum table.
    InvertField(InvertFieldArgs),
    /// Inspect calibration profiles.
    Calibration {
        #[command(subcommand)]
        action: CalibrationAction,
    },
}

#[derive(Debug, Subcommand)]
enum CalibrationAction {
    /// Print every parameter with its provenance.
    Show,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumArgs {
    /// Field magnitude, T.
    #[arg(long)]
    b_mag: Option<f64>,
    /// Field direction as comma-separated crystal components, e.g. 1,0,0.
    #[arg(long)]
    b_dir: Option<String>,
    /// Optical power, W.
    #[arg(long)]
    power: Option<f64>,
    /// Hz.
    #[arg(long)]
    f_min: Option<f64>,
    /// Hz.
    #[arg(long)]
    f_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Gaussian current noise, A.
    #[arg(long)]
    noise: Option<f64>,
    /// Add excited-state lines.
    #[arg(long)]
    excited: Option<bool>,
    /// `fast` or `full`.
    #[arg(long)]
    path: Option<String>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldmapArgs {
    /// Largest field of the sweep, T.
    #[arg(long)]
    b_max: Option<f64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    b_dir: Option<String>,
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    f_min: Option<f64>,
    #[arg(long)]
    f_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Residual transverse field, T.
    #[arg(long)]
    transverse: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    excited: Option<bool>,
    /// Sweep the magnet distance instead of the field (`field` or `distance`).
    #[arg(long)]
    sweep: Option<String>,
    /// Magnet field at the reference distance, T.
    #[arg(long)]
    surface_field: Option<f64>,
    /// m.
    #[arg(long)]
    reference_distance: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct IvArgs {
    /// Electrode gap: preset (5um, 7.5um, 10um, 20um) or metres.
    #[arg(long)]
    gap: Option<String>,
    /// V.
    #[arg(long)]
    vmax: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Optical power, W.
    #[arg(long)]
    power: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSweepArgs {
    /// W.
    #[arg(long)]
    p_min: Option<f64>,
    /// W.
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitSpectrumArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of dips; the detected count when absent.
    #[arg(long)]
    dips: Option<usize>,
    /// Detection threshold in noise standard deviations.
    #[arg(long)]
    k: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitPowerArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column holding the current.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct InvertFieldArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// `axis100`, `axis111` or `free`.
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    dips: Option<usize>,
    /// Also match excited-state lines.
    #[arg(long)]
    excited: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    seed: Option<u64>,
    profile: Option<String>,
    output: Option<PathBuf>,
    #[serde(default)]
    spectrum: SpectrumArgs,
    #[serde(default)]
    fieldmap: FieldmapArgs,
    #[serde(default)]
    iv: IvArgs,
    #[serde(default)]
    power_sweep: PowerSweepArgs,
    #[serde(default)]
    fit_spectrum: FitSpectrumArgs,
    #[serde(default)]
    fit_power: FitPowerArgs,
    #[serde(default)]
    invert_field: InvertFieldArgs,
}

/// Fills unset fields of `$cli` from `$cfg`.
macro_rules! overlay {
    ($cli:expr, $cfg:expr, [$($f:ident),*]) => {
        $( if $cli.$f.is_none() { $cli.$f = $cfg.$f.take(); } )*
    };
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_direction(s: &str) -> Result<UnitVector> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid("b_dir", format!("`{s}` is not a comma-separated vector")))?;
    if parts.len() != 3 {
        return Err(Error::invalid("b_dir", "needs three components"));
    }
    UnitVector::new(parts[0], parts[1], parts[2])
}

fn parse_path(s: &str) -> Result<SynthesisPath> {
    match s {
        "fast" => Ok(SynthesisPath::Fast),
        "full" => Ok(SynthesisPath::Full),
        other => Err(Error::invalid("path", format!("`{other}` is not `fast` or `full`"))),
    }
}

fn parse_class(s: &str) -> Result<DirectionClass> {
    match s {
        "axis100" => Ok(DirectionClass::Axis100),
        "axis111" => Ok(DirectionClass::Axis111),
        "free" => Ok(DirectionClass::Free),
        other => Err(Error::invalid("class", format!("`{other}` is not axis100, axis111 or free"))),
    }
}

fn vector_text(v: [f64; 3]) -> String {
    v.map(format_number).join(",")
}

struct Context {
    profile: Profile,
    seed: u64,
}

impl Context {
    fn model(&self) -> &Calibration {
        &self.profile.calibration
    }

    fn header(&self, command: &str) -> DataTable {
        DataTable::default()
            .with_meta("command", command)
            .with_meta("profile", &self.profile.name)
            .with_meta("seed", self.seed)
    }
}

fn spectrum_table(ctx: &Context, mut a: SpectrumArgs) -> Result<DataTable> {
    let b = a.b_mag.unwrap_or(0.0);
    let dir = parse_direction(a.b_dir.get_or_insert_with(|| "1,0,0".into()))?;
    let points = a.points.unwrap_or(1081);
    if points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    let grid = linear_grid(a.f_min.unwrap_or(2.6e9), a.f_max.unwrap_or(3.14e9), points);
    let mut cfg = SpectrumConfig::new(grid, MagneticField::new(b, dir)?, a.power.unwrap_or(0.1));
    cfg.noise_rms = a.noise.unwrap_or(0.0);
    cfg.include_excited = a.excited.unwrap_or(false);
    cfg.path = parse_path(a.path.as_deref().unwrap_or("fast"))?;
    cfg.seed = ctx.seed;
    cfg.model = *ctx.model();
    let s = synth_spectrum(&cfg)?;
    let mut t = ctx.header("spectrum");
    t.set_meta("field", vector_text(s.meta.field));
    t.set_meta("power", format_number(s.meta.power));
    t.set_meta("noise_rms", format_number(s.meta.noise_rms));
    t.set_meta("path", a.path.as_deref().unwrap_or("fast"));
    t.set_meta("include_excited", cfg.include_excited);
    t.set_meta("baseline", format_number(s.baseline));
    t.columns = vec![Column::new("frequency", "Hz"), Column::new("current", "A"), Column::new("contrast", "1")];
    for i in 0..s.freqs.len() {
        t.push_row(vec![s.freqs[i], s.current[i], s.contrast[i]])?;
    }
    Ok(t)
}

fn fieldmap_table(ctx: &Context, a: FieldmapArgs) -> Result<DataTable> {
    let dir = parse_direction(a.b_dir.as_deref().unwrap_or("1,1,1"))?;
    let rows = a.rows.unwrap_or(200);
    let points = a.points.unwrap_or(2000);
    let b_max = a.b_max.unwrap_or(0.135);
    if rows < 1 || points < 2 {
        return Err(Error::invalid("rows", "need at least one row and two points"));
    }
    let grid = linear_grid(a.f_min.unwrap_or(0.0), a.f_max.unwrap_or(6.8e9), points);
    let mut cfg = SpectrumConfig::new(grid, MagneticField::new(0.0, dir)?, a.power.unwrap_or(0.1));
    cfg.noise_rms = a.noise.unwrap_or(0.0);
    cfg.include_excited = a.excited.unwrap_or(true);
    cfg.seed = ctx.seed;
    cfg.model = *ctx.model();
    let magnet = MagnetModel {
        surface_field: a.surface_field.unwrap_or(MagnetModel::default().surface_field),
        reference_distance: a.reference_distance.unwrap_or(MagnetModel::default().reference_distance),
    };
    let sweep = match a.sweep.as_deref().unwrap_or("field") {
        "field" => Sweep::Field(linear_grid(0.0, b_max, rows)),
        "distance" => {
            magnet.validate()?;
            // from far away to the distance giving b_max
            let near = distance_for_field(&magnet, b_max)?;
            Sweep::Distance {
                distances: linear_grid(4.0 * near, near, rows),
                magnet,
            }
        }
        other => return Err(Error::invalid("sweep", format!("`{other}` is not `field` or `distance`"))),
    };
    let transverse = a.transverse.unwrap_or(0.5e-3);
    let map = field_map(&sweep, &cfg, transverse)?;
    let mut t = ctx.header("fieldmap");
    t.set_meta("direction", vector_text(dir.to_array()));
    t.set_meta("power", format_number(cfg.optical_power));
    t.set_meta("transverse", format_number(transverse));
    t.set_meta("noise_rms", format_number(cfg.noise_rms));
    t.set_meta("include_excited", cfg.include_excited);
    let with_distance = map.distances.is_some();
    t.columns = vec![
        Column::new("field", "T"),
        Column::new("frequency", "Hz"),
        Column::new("current", "A"),
        Column::new("contrast", "1"),
    ];
    if with_distance {
        t.columns.insert(0, Column::new("distance", "m"));
    }
    for (r, b) in map.fields.iter().enumerate() {
        for (k, f) in map.freqs.iter().enumerate() {
            let mut row = vec![*b, *f, map.current[r][k], map.contrast[r][k]];
            if let Some(d) = &map.distances {
                row.insert(0, d[r]);
            }
            t.push_row(row)?;
        }
    }
    Ok(t)
}

fn zero_field_generation(model: &Calibration, power: f64) -> Result<Generation> {
    let r = solve_with_drive(&model.photophysics, power, [0.0, 0.0], &FamilySpin::zero_field())?;
    Ok(Generation::new(r.gamma_e, r.gamma_h))
}

fn iv_table(ctx: &Context, a: IvArgs) -> Result<DataTable> {
    let mut transport = ctx.model().transport;
    if let Some(g) = &a.gap {
        transport.gap = parse_gap(g)?;
    }
    let points = a.points.unwrap_or(121);
    if points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    let vmax = a.vmax.unwrap_or(60.0);
    let power = a.power.unwrap_or(0.1);
    let generation = zero_field_generation(ctx.model(), power)?;
    let curve = iv_curve(&linear_grid(0.0, vmax, points), generation, &transport)?;
    let mut t = ctx.header("iv");
    t.set_meta("gap", format_number(transport.gap));
    t.set_meta("power", format_number(power));
    t.set_meta("regime_codes", "0 = ohmic, 1 = saturated");
    t.columns = vec![
        Column::new("voltage", "V"),
        Column::new("field", "V/m"),
        Column::new("current", "A"),
        Column::new("regime", "1"),
    ];
    for p in curve {
        t.push_row(vec![p.voltage, p.field, p.current, f64::from(p.regime.code())])?;
    }
    Ok(t)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    linear_grid(a, b, n).into_iter().map(f64::exp).collect()
}

fn power_sweep_table(ctx: &Context, a: PowerSweepArgs) -> Result<DataTable> {
    let (lo, hi) = (a.p_min.unwrap_or(1e-3), a.p_max.unwrap_or(1.0));
    let points = a.points.unwrap_or(31);
    if !(lo > 0.0 && hi > lo) || points < 3 {
        return Err(Error::invalid("p_min", "need 0 < p_min < p_max and at least 3 points"));
    }
    let model = ctx.model();
    let spin = FamilySpin::zero_field();
    let mut t = ctx.header("power-sweep");
    t.set_meta("alpha", format_number(model.power_curve.alpha));
    t.set_meta("beta", format_number(model.power_curve.beta));
    t.set_meta("bias", format_number(model.readout.bias));
    t.columns = vec![
        Column::new("power", "W"),
        Column::new("current", "A"),
        Column::new("rate_current", "A"),
        Column::new("contrast", "1"),
    ];
    for p in log_grid(lo, hi, points) {
        let closed = photocurrent_model(p, &model.power_curve);
        let g = zero_field_generation(model, p)?;
        let rate = junction_current(model.readout.bias, g, &model.transport)?.current + model.readout.background_current;
        let drive = model.drive.drive(model.spin.d_gs, p, MwTarget::Both);
        let contrast = pdmr_contrast(&model.photophysics, p, &drive, &spin)?;
        t.push_row(vec![p, closed, rate, contrast])?;
    }
    Ok(t)
}

fn required_input(input: Option<PathBuf>) -> Result<DataTable> {
    let path = input.ok_or_else(|| Error::invalid("input", "an input table is required"))?;
    DataTable::read(&path)
}

fn spectrum_columns(t: &DataTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = t
        .column("frequency")
        .ok_or_else(|| Error::invalid("input", "missing `frequency` column"))?;
    let c = t
        .column("current")
        .ok_or_else(|| Error::invalid("input", "missing `current` column"))?;
    Ok((f, c))
}

fn peak_options(t: &DataTable, k: Option<f64>) -> PeakOptions {
    PeakOptions {
        k: k.unwrap_or(3.0),
        noise_rms: t
            .meta("noise_rms")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| *v > 0.0),
        ..PeakOptions::default()
    }
}

struct Report(Vec<(String, String)>);

impl Report {
    fn new(ctx: &Context, command: &str) -> Self {
        Report(vec![
            ("command".into(), command.into()),
            ("profile".into(), ctx.profile.name.clone()),
            ("seed".into(), ctx.seed.to_string()),
        ])
    }

    fn num(&mut self, k: impl Into<String>, v: f64) {
        self.0.push((k.into(), format_number(v)));
    }

    fn text(&mut self, k: impl Into<String>, v: impl ToString) {
        self.0.push((k.into(), v.to_string()));
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn push_dips(r: &mut Report, dips: &[DipEstimate]) {
    r.text("n_dips", dips.len());
    for (i, d) in dips.iter().enumerate() {
        r.num(format!("dip.{i}.center"), d.center);
        r.num(format!("dip.{i}.center_ci95"), d.center_ci);
        r.num(format!("dip.{i}.fwhm"), d.fwhm);
        r.num(format!("dip.{i}.fwhm_ci95"), d.fwhm_ci);
        r.num(format!("dip.{i}.depth"), d.depth);
        r.num(format!("dip.{i}.depth_ci95"), d.depth_ci);
    }
}

fn fit_spectrum_report(ctx: &Context, a: FitSpectrumArgs) -> Result<Report> {
    let t = required_input(a.input)?;
    let (f, c) = spectrum_columns(&t)?;
    let opts = peak_options(&t, a.k);
    let n = match a.dips {
        Some(n) => n,
        None => detect_peaks(&f, &c, &opts).len().max(1),
    };
    let fit = fit_lorentzians(&f, &c, n, &opts)?;
    let mut r = Report::new(ctx, "fit-spectrum");
    r.num("baseline", fit.baseline);
    r.num("baseline_ci95", fit.baseline_ci);
    push_dips(&mut r, &fit.dips);
    r.text("converged", fit.fit.converged);
    r.text("iterations", fit.fit.iterations);
    r.text("singular", fit.fit.singular);
    r.num("residual_norm", fit.fit.residual_norm);
    Ok(r)
}

fn fit_power_report(ctx: &Context, a: FitPowerArgs) -> Result<Report> {
    let t = required_input(a.input)?;
    let column = a.column.unwrap_or_else(|| "current".into());
    let p = t
        .column("power")
        .ok_or_else(|| Error::invalid("input", "missing `power` column"))?;
    let i = t
        .column(&column)
        .ok_or_else(|| Error::invalid("column", format!("missing `{column}` column")))?;
    let fit = fit_power_curve(&p, &i)?;
    let mut r = Report::new(ctx, "fit-power");
    r.text("column", &column);
    r.num("alpha", fit.params.alpha);
    r.num("alpha_ci95", fit.alpha_ci);
    r.num("beta", fit.params.beta);
    r.num("beta_ci95", fit.beta_ci);
    r.num("r_squared", fit.r_squared);
    r.text("wide_intervals", fit.wide_intervals);
    r.text("converged", fit.fit.converged);
    r.text("iterations", fit.fit.iterations);
    r.num("residual_norm", fit.fit.residual_norm);
    Ok(r)
}

fn invert_field_report(ctx: &Context, a: InvertFieldArgs) -> Result<Report> {
    let t = required_input(a.input)?;
    let (f, c) = spectrum_columns(&t)?;
    let class = parse_class(a.class.as_deref().unwrap_or("axis100"))?;
    let opts = peak_options(&t, None);
    let n = match a.dips {
        Some(n) => n,
        None => detect_peaks(&f, &c, &opts).len(),
    };
    if n == 0 {
        return Err(Error::Underdetermined("no dips detected".into()));
    }
    let fit = fit_lorentzians(&f, &c, n, &opts)?;
    let options = InvertOptions {
        constants: ctx.model().spin,
        include_excited: a.excited.unwrap_or(false),
        window: Some((f[0], f[f.len() - 1])),
        ..InvertOptions::default()
    };
    let inv = invert_field(&fit.dips, class, &options)?;
    let mut r = Report::new(ctx, "invert-field");
    r.text("class", format!("{class:?}").to_lowercase());
    r.num("magnitude", inv.field.magnitude);
    r.num("magnitude_ci95", inv.magnitude_ci);
    r.text("direction", vector_text(inv.field.direction.to_array()));
    if let Some(fam) = inv.aligned_family {
        r.text("aligned_family", fam);
    }
    push_dips(&mut r, &fit.dips);
    let excluded: Vec<String> = inv.excluded.iter().map(|i| i.to_string()).collect();
    r.text("excluded", if excluded.is_empty() { "none".into() } else { excluded.join(",") });
    r.text("converged", inv.fit.converged);
    r.num("residual_norm", inv.fit.residual_norm);
    Ok(r)
}

fn calibration_report(ctx: &Context) -> Result<String> {
    let mut s = format!("# profile: {}\n", ctx.profile.name);
    for (k, v, p) in ctx.profile.describe()? {
        s.push_str(&format!("{k} = {v}  # {p}\n"));
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<(String, Option<PathBuf>)> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let profile = resolve_profile(cli.profile.as_deref().or(cfg.profile.as_deref()))?;
    let ctx = Context {
        profile,
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
    };
    let output = cli.output.or(cfg.output.take());
    let text = match cli.command {
        Command::Spectrum(mut a) => {
            overlay!(a, cfg.spectrum, [b_mag, b_dir, power, f_min, f_max, points, noise, excited, path]);
            spectrum_table(&ctx, a)?.to_text()
        }
        Command::Fieldmap(mut a) => {
            overlay!(
                a,
                cfg.fieldmap,
                [b_max, rows, b_dir, power, f_min, f_max, points, transverse, noise, excited, sweep, surface_field, reference_distance]
            );
            fieldmap_table(&ctx, a)?.to_text()
        }
        Command::Iv(mut a) => {
            overlay!(a, cfg.iv, [gap, vmax, points, power]);
            iv_table(&ctx, a)?.to_text()
        }
        Command::PowerSweep(mut a) => {
            overlay!(a, cfg.power_sweep, [p_min, p_max, points]);
            power_sweep_table(&ctx, a)?.to_text()
        }
        Command::FitSpectrum(mut a) => {
            overlay!(a, cfg.fit_spectrum, [input, dips, k]);
            fit_spectrum_report(&ctx, a)?.render()
        }
        Command::FitPower(mut a) => {
            overlay!(a, cfg.fit_power, [input, column]);
            fit_power_report(&ctx, a)?.render()
        }
        Command::InvertField(mut a) => {
            overlay!(a, cfg.invert_field, [input, class, dips, excited]);
            invert_field_report(&ctx, a)?.render()
        }
        Command::Calibration {
            action: CalibrationAction::Show,
        } => calibration_report(&ctx)?,
    };
    Ok((text, output))
}

/// Runs the CLI with explicit streams and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(cli) {
        Ok((text, None)) => match out.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        },
        Ok((text, Some(path))) => match std::fs::write(&path, text) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {}: {e}", path.display());
                1
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
