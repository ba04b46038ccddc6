use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nearfield::channel::{exact_response, read_scatterers, read_snapshots, write_scatterers, write_snapshots};
use nearfield::dictionaries::{
    adjacent_distance_coherence, build_ad_dictionary, build_pd_dictionary, energy_profile, mutual_coherence,
    Dictionary,
};
use nearfield::evaluation::metrics::{match_estimates, parameter_nmse, EvalRange};
use nearfield::evaluation::sweep::{format_summary_csv, setup_trial, trial_seed};
use nearfield::evaluation::{check_ordering, complexity_report, run_sweep, search_space, write_outputs, SweepConfig};
use nearfield::geometry::ArrayGeometry;
use nearfield::recovery::{Estimators, MethodConfig, MethodTag};
use nearfield::tpd::{decompose, format_sequences_csv, NoiseFloor};
use nearfield::{Error, Result};

#[derive(Parser)]
#[command(name = "nearfield", version, about = "Near-field ELAA channel estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Array geometry and near-field region boundaries.
    Info(GeometryArgs),
    /// Size, memory and coherence of a dictionary.
    DictInfo(DictInfoArgs),
    /// Draw one scene from a sweep config and write snapshots and truth.
    Simulate(SimulateArgs),
    /// Run estimators on saved snapshots.
    Estimate(EstimateArgs),
    /// Full Monte Carlo sweep.
    Sweep(SweepArgs),
    /// Search-space sizes of the AD, PD and TPD methods.
    Complexity(ComplexityArgs),
    /// Energy spread of one scatterer over AD and PD atoms.
    Leakage(LeakageArgs),
}

#[derive(Args, Clone)]
struct GeometryArgs {
    /// Sweep config supplying geometry and estimator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_h: Option<usize>,
    #[arg(long)]
    n_v: Option<usize>,
    /// Meters.
    #[arg(long)]
    wavelength: Option<f64>,
    /// Meters; half a wavelength by default.
    #[arg(long)]
    spacing: Option<f64>,
}

impl GeometryArgs {
    /// Geometry and estimator settings, from flags or the config file.
    fn resolve(&self) -> Result<(ArrayGeometry, MethodConfig)> {
        let (mut geom_cfg, settings) = match &self.config {
            Some(p) => {
                let c = SweepConfig::load(p)?;
                (Some(c.geometry), c.estimation.settings)
            }
            None => (None, MethodConfig::default()),
        };
        let n_h = self.n_h.or(geom_cfg.as_ref().map(|g| g.n_h));
        let n_v = self.n_v.or(geom_cfg.as_ref().map(|g| g.n_v));
        let wl = self.wavelength.or(geom_cfg.as_ref().map(|g| g.wavelength));
        let spacing = self.spacing.or(geom_cfg.as_mut().and_then(|g| g.spacing));
        let (Some(n_h), Some(n_v), Some(wl)) = (n_h, n_v, wl) else {
            return Err(Error::Config("geometry needs --config or --n-h, --n-v and --wavelength".into()));
        };
        let geom = ArrayGeometry::with_spacing(n_h, n_v, spacing.unwrap_or(wl / 2.0), wl)?;
        Ok((geom, settings))
    }
}

#[derive(Args)]
struct DictInfoArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// `ad` or `pd`.
    #[arg(long, default_value = "pd")]
    flavor: String,
    /// `O_h,O_v`.
    #[arg(long, value_parser = parse_pair)]
    oversampling: Option<(usize, usize)>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Skip the (quadratic-cost) mutual coherence computation.
    #[arg(long)]
    no_coherence: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Trial index used to derive the seed.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Sweep value to apply; the first configured value by default.
    #[arg(long)]
    value: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Snapshot file written by `simulate`.
    #[arg(long)]
    snapshots: PathBuf,
    /// Comma-separated method tags.
    #[arg(long, value_delimiter = ',', default_value = "TPD-OMP")]
    methods: Vec<String>,
    /// Number of paths; taken from `--truth` when omitted.
    #[arg(long)]
    paths: Option<usize>,
    /// Truth table for error reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the TPD sequences (magnitude and phase) to this CSV.
    #[arg(long)]
    dump_sequences: Option<PathBuf>,
    /// Report grid-level estimates without off-grid refinement.
    #[arg(long)]
    no_refine: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides the configured CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg_dir: Option<PathBuf>,
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// `O_h,O_v`; 1,1 by default.
    #[arg(long, value_parser = parse_pair)]
    oversampling: Option<(usize, usize)>,
    /// Finite PD distance levels; derived from the coherence factor when omitted.
    #[arg(long)]
    levels: Option<usize>,
    /// TPD distance levels; max(n_h, n_v) when omitted.
    #[arg(long)]
    tpd_points: Option<usize>,
    /// Square sizes `N` for the scaling table, with `N/2` TPD distance levels.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128,256")]
    sizes: Vec<usize>,
}

#[derive(Args)]
struct LeakageArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, allow_hyphen_values = true)]
    u: f64,
    #[arg(long, allow_hyphen_values = true)]
    v: f64,
    /// Meters.
    #[arg(long)]
    r: f64,
    /// Atoms listed per dictionary.
    #[arg(long, default_value_t = 8)]
    top: usize,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

/// Four significant digits.
fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..5).contains(&mag) {
        return format!("{x:.3e}");
    }
    format!("{x:.*}", (3 - mag).max(0) as usize)
}

fn info(args: &GeometryArgs) -> Result<()> {
    let (g, _) = args.resolve()?;
    let b = g.region_boundaries()?;
    println!("array             {} x {} ({} antennas)", g.n_h(), g.n_v(), g.len());
    println!("wavelength_m      {}", sig4(g.wavelength()));
    println!("spacing_m         {}", sig4(g.spacing()));
    println!("aperture_m        {}", sig4(b.aperture));
    println!("fresnel_m         {}", sig4(b.fresnel_distance));
    println!("rayleigh_m        {}", sig4(b.rayleigh_distance));
    Ok(())
}

fn dict_info(args: &DictInfoArgs) -> Result<()> {
    let (g, mut settings) = args.geometry.resolve()?;
    if args.oversampling.is_some() {
        settings.oversampling = args.oversampling;
    }
    if let Some(b) = args.beta {
        settings.pd_beta = b;
    }
    settings.r_min = args.r_min.or(settings.r_min);
    settings.r_max = args.r_max.or(settings.r_max);
    let r = settings.resolve(&g)?;
    let dict: Dictionary = match args.flavor.to_ascii_lowercase().as_str() {
        "ad" => build_ad_dictionary(&g, r.oversampling)?,
        "pd" => build_pd_dictionary(&g, r.oversampling, r.pd_beta, r.r_min, r.r_max)?,
        other => return Err(Error::Config(format!("unknown dictionary flavor `{other}`"))),
    };
    println!("flavor            {}", dict.flavor);
    println!("atoms_G           {}", dict.len());
    println!("grid              {} x {} x {}", dict.shape[0], dict.shape[1], dict.shape[2]);
    if let Some(s) = dict.distance_levels {
        println!("distance_levels_S {s}");
        println!("beta              {}", sig4(r.pd_beta));
        println!("r_range_m         [{}, {}]", sig4(r.r_min), sig4(r.r_max));
        let adj = adjacent_distance_coherence(&dict, 0.0, 0.0)?;
        if !adj.is_empty() {
            let mean = adj.iter().sum::<f64>() / adj.len() as f64;
            println!("adjacent_coh      {} (broadside mean)", sig4(mean));
        }
    }
    println!("memory_MiB        {}", sig4(dict.memory_bytes() as f64 / (1024.0 * 1024.0)));
    if !args.no_coherence {
        println!("mutual_coherence  {}", sig4(mutual_coherence(&dict)?));
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = SweepConfig::load(&args.config)?;
    let geom = cfg.geometry.build()?;
    let value = args.value.unwrap_or(cfg.sweep.values[0]);
    let seed = trial_seed(cfg.master_seed, args.trial);
    let setup = setup_trial(&cfg, &geom, value, seed)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let snap_path = args.out_dir.join("snapshots.csv");
    let truth_path = args.out_dir.join("truth.txt");
    write_snapshots(&snap_path, &setup.synthesis.observation)?;
    write_scatterers(&truth_path, &setup.scatterers)?;
    println!(
        "wrote {} ({} antennas x {} snapshots) and {} ({} scatterers), {} = {value}, seed {seed}",
        snap_path.display(),
        geom.len(),
        setup.synthesis.observation.len(),
        truth_path.display(),
        setup.scatterers.len(),
        cfg.sweep_label()
    );
    Ok(())
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let (geom, mut settings) = args.geometry.resolve()?;
    if args.no_refine {
        settings.refine = false;
    }
    let snap = read_snapshots(&args.snapshots)?;
    let truth = args.truth.as_deref().map(read_scatterers).transpose()?;
    let paths = match (args.paths, &truth) {
        (Some(p), _) => p,
        (None, Some(t)) => t.len(),
        (None, None) => return Err(Error::Config("give --paths or --truth".into())),
    };
    let tags: Vec<MethodTag> = args.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let est = Estimators::new(geom.clone(), settings)?;
    if let Some(path) = &args.dump_sequences {
        let seq = decompose(&snap, &geom, NoiseFloor::FromData { paths })?;
        std::fs::write(path, format_sequences_csv(&seq, &geom))?;
    }
    let range = EvalRange { r_min: est.resolved().r_min, r_max: est.resolved().r_max };
    for tag in tags {
        let set = est.run(tag, &snap, paths)?;
        println!("{tag}  search_space={}", set.search_space_size);
        println!("  {:>10} {:>10} {:>12} {:>12}", "u", "v", "r_m", "power");
        for e in &set.entries {
            println!("  {:>10.5} {:>10.5} {:>12} {:>12.5}", e.u, e.v, sig4(e.r), e.power);
        }
        for f in &set.flags {
            println!("  flag: {f}");
        }
        if let Some(t) = &truth {
            let m = match_estimates(t, &set.entries, range.r_min);
            let nm = parameter_nmse(t, &set.entries, &m, range);
            println!(
                "  nmse_u={} nmse_v={} nmse_inv_r={} misses={}",
                sig4(nm.nmse_u),
                sig4(nm.nmse_v),
                sig4(nm.nmse_inv_r),
                m.misses
            );
        }
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::load(&args.config)?;
    if let Some(t) = args.trials {
        cfg.sweep.trials = t;
    }
    if args.csv.is_some() {
        cfg.output.csv = args.csv.clone();
    }
    if args.svg_dir.is_some() {
        cfg.output.svg_dir = args.svg_dir.clone();
    }
    if args.records.is_some() {
        cfg.output.records = args.records.clone();
    }
    cfg.validate()?;
    let result = run_sweep(&cfg)?;
    write_outputs(&cfg, &result)?;
    if cfg.output.csv.is_none() {
        print!("{}", format_summary_csv(&result));
    } else {
        eprintln!("{} trial records", result.records.len());
    }
    Ok(())
}

fn complexity(args: &ComplexityArgs) -> Result<()> {
    let o = args.oversampling.unwrap_or((1, 1));
    let mut rows = Vec::new();
    if args.geometry.config.is_some() || args.geometry.n_h.is_some() {
        let (geom, mut settings) = args.geometry.resolve()?;
        settings.oversampling = Some(o);
        let est = Estimators::new(geom.clone(), settings)?;
        let levels = match args.levels {
            Some(s) => s,
            None => est.pd_levels()?,
        };
        let tpd = args.tpd_points.unwrap_or(geom.n_h().max(geom.n_v()));
        let s = search_space(geom.n_h(), geom.n_v(), o, levels, tpd);
        println!("geometry {}x{}: S = {levels}, S_tpd = {tpd}", geom.n_h(), geom.n_v());
        print!("{}", complexity_report(&[s]));
        if geom.n_h() >= 4 && geom.n_v() >= 4 {
            check_ordering(&s).map_err(|e| Error::InvalidParameter(format!("assertion failed: {e}")))?;
        }
        println!();
    }
    let levels = args.levels.unwrap_or(8);
    for &n in &args.sizes {
        let s = search_space(n, n, o, levels, n / 2);
        let expected = o.0 * n + o.1 * n + n / 2;
        if s.tpd != expected {
            return Err(Error::InvalidParameter(format!("assertion failed: TPD {} != {expected}", s.tpd)));
        }
        if n >= 4 {
            check_ordering(&s).map_err(|e| Error::InvalidParameter(format!("assertion failed: {e}")))?;
        }
        rows.push(s);
    }
    if !rows.is_empty() {
        println!("square arrays N x N, S = {levels}, S_tpd = N/2, O = {},{}", o.0, o.1);
        print!("{}", complexity_report(&rows));
        println!("ok: TPD = O_h N + O_v N + N/2 and TPD < AD < PD for all N >= 4");
    }
    Ok(())
}

fn leakage(args: &LeakageArgs) -> Result<()> {
    let (geom, settings) = args.geometry.resolve()?;
    let r = settings.resolve(&geom)?;
    let h = exact_response(&geom, args.u, args.v, args.r);
    let ad = build_ad_dictionary(&geom, r.oversampling)?;
    let pd = build_pd_dictionary(&geom, r.oversampling, r.pd_beta, r.r_min, r.r_max)?;
    for (name, dict) in [("AD", &ad), ("PD", &pd)] {
        let p = energy_profile(dict, &h)?;
        println!("{name}: {} atoms, best atom captures {:.1}% of the energy", dict.len(), 100.0 * p[0]);
        for (i, x) in p.iter().take(args.top).enumerate() {
            let bar = "#".repeat((x * 50.0).round() as usize);
            println!("  {:>3} {:>8.4} {bar}", i + 1, x);
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Info(a) => info(a),
        Command::DictInfo(a) => dict_info(a),
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Sweep(a) => sweep(a),
        Command::Complexity(a) => complexity(a),
        Command::Leakage(a) => leakage(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
