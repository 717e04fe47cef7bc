use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Subcommand};

use discrete_guidance::analysis::{
    build_toy_dataset_with, coefficient_curves, combined_panels, mechanism_compare, schedule_sweep, tilted_panels,
    Corner, ToyDataset, ToyLayout,
};
use discrete_guidance::closed_form::{
    corollary_2d_threepiece, theorem_1d_general, theorem_1d_piecewise_normalized, theorem_1d_piecewise_unnormalized,
    theorem_2d_constant, threepiece_coefficients, unmasking_curve, ThreePieceCoefficients,
};
use discrete_guidance::ctmc::{build_masked_base, build_uniform_base, forward_evolve};
use discrete_guidance::io::{distribution_to_csv, fmt_f64, read_distribution, Cell, Table};
use discrete_guidance::sampling::{empirical_to_distribution, simulate_reverse, SamplerConfig, SamplerKind};
use discrete_guidance::{DiscreteDistribution, GuidanceSchedule, Mechanism, Mode, NoiseSchedule, StateSpace};

use crate::run::{manifest_for, Run};
use crate::svg;
use crate::{NoiseArgs, PairArgs, SamplerArgs, SourceArgs, SpaceArgs};

fn space_hint(args: &SpaceArgs) -> Result<Option<StateSpace>> {
    let Some(v) = args.vocab else {
        ensure!(args.mode.is_none() && args.dims.is_none(), "--mode and --dims need --vocab");
        return Ok(None);
    };
    let mode = Mode::parse(args.mode.as_deref().unwrap_or("masked"))?;
    Ok(Some(StateSpace::new(v, args.dims.unwrap_or(1), mode)?))
}

fn load(path: &Path, space: Option<StateSpace>) -> Result<DiscreteDistribution> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_distribution(BufReader::new(file), space).with_context(|| format!("reading {}", path.display()))
}

fn load_pair(pair: &PairArgs, hint: Option<StateSpace>) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    let p = load(&pair.p, hint)?;
    let q = load(&pair.q, Some(*p.space()))?;
    Ok((p, q))
}

fn noise(args: &NoiseArgs) -> Result<NoiseSchedule> {
    Ok(NoiseSchedule::parse(&args.schedule, args.horizon)?)
}

fn sampler_config(args: &SamplerArgs) -> Result<SamplerConfig> {
    let kind = SamplerKind::parse(&args.sampler)?;
    Ok(SamplerConfig::new(kind, args.steps, args.trajectories, args.seed).with_t_end(args.t_end))
}

fn with_header(run: &Run, extra: Vec<String>) -> Vec<String> {
    let mut lines = run.header();
    lines.extend(extra);
    lines
}

pub fn forward(space: &SpaceArgs, noise_args: &NoiseArgs, t: f64, dist: &Path, out: &Path) -> Result<Run> {
    let mut run = Run::new("forward", manifest_for(out));
    let p = load(dist, space_hint(space)?)?;
    let sched = noise(noise_args)?;
    let evolved = if t == 0.0 {
        p
    } else {
        let base = match p.space().mode() {
            Mode::Masked => build_masked_base(p.space())?,
            Mode::Uniform => build_uniform_base(p.space())?,
        };
        forward_evolve(&p, &base, &sched, 0.0, t)?
    };
    let header = with_header(&run, vec![format!("schedule={}", sched.describe()), format!("t={}", fmt_f64(t))]);
    run.write(out, &distribution_to_csv(&evolved, &header))?;
    Ok(run)
}

pub struct SampleRequest<'a> {
    pub space: &'a SpaceArgs,
    pub noise: &'a NoiseArgs,
    pub pair: &'a PairArgs,
    pub sampler: &'a SamplerArgs,
    pub mechanism: &'a str,
    pub w_schedule: &'a str,
    pub snapshots: &'a [f64],
    pub keep_masked: bool,
    pub out: &'a Path,
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}.csv"))
}

pub fn sample(req: SampleRequest<'_>) -> Result<Run> {
    let mut run = Run::new("sample", manifest_for(req.out));
    run.set_seed(req.sampler.seed);
    let (p, q) = load_pair(req.pair, space_hint(req.space)?)?;
    let sched = noise(req.noise)?;
    let mechanism = Mechanism::parse(req.mechanism)?;
    let schedule = GuidanceSchedule::parse(req.w_schedule)?;
    let mut cfg = sampler_config(req.sampler)?.with_snapshots(req.snapshots.to_vec());
    cfg.keep_masked_at_end = req.keep_masked;
    let result = simulate_reverse(*p.space(), &p, &q, mechanism, &schedule, &sched, &cfg)?;
    run.counters.overflow_clips = result.overflow_clips;
    run.counters.degenerate_trajectories = result.degenerate_trajectories;
    let describe = vec![
        format!("mechanism={mechanism}"),
        format!("sampler={}", cfg.kind.name()),
        format!("steps={}", cfg.steps),
        format!("trajectories={}", cfg.trajectories),
        format!("seed={}", cfg.seed),
        format!("w_schedule={}", schedule.describe()),
        format!("schedule={}", sched.describe()),
        format!("overflow_clips={}", result.overflow_clips),
        format!("degenerate_trajectories={}", result.degenerate_trajectories),
        format!("resolved_at_end={}", result.resolved_at_end),
    ];
    for (t, counts) in &result.snapshots {
        let mut header = with_header(&run, describe.clone());
        header.push(format!("snapshot_t={}", fmt_f64(*t)));
        let path = sibling(req.out, &format!("_t{t}"));
        run.write(&path, &distribution_to_csv(&empirical_to_distribution(counts)?, &header))?;
    }
    let header = with_header(&run, describe);
    run.write(req.out, &distribution_to_csv(&empirical_to_distribution(&result.final_counts)?, &header))?;
    Ok(run)
}

#[derive(Args)]
pub struct PiecewiseArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Increasing times `t_0 < ... < t_k = T`.
    #[arg(long, value_delimiter = ',')]
    partition: Vec<f64>,
    /// Strength on each `(t_i, t_{i+1}]`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Vec<f64>,
    /// Piecewise-constant schedule in the progress coordinate, instead of
    /// `--partition`/`--weights`.
    #[arg(long, conflicts_with_all = ["partition", "weights"], allow_hyphen_values = true)]
    w_schedule: Option<String>,
    /// First partition time when `--w-schedule` is used.
    #[arg(long, default_value_t = 1e-3)]
    t_min: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
pub enum ClosedForm {
    /// One token, any guidance schedule, exact through quadrature.
    #[command(name = "thm1d-general")]
    Thm1dGeneral {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, allow_hyphen_values = true)]
        w_schedule: String,
        /// Evaluation time.
        #[arg(long)]
        t: f64,
        /// Law at the horizon; all-mask when omitted.
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        quad_tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// One token, piecewise-constant unlocking guidance.
    #[command(name = "thm1d-piecewise")]
    Thm1dPiecewise(PiecewiseArgs),
    /// One token, piecewise-constant normalized guidance.
    #[command(name = "thm1d-piecewise-norm")]
    Thm1dPiecewiseNorm(PiecewiseArgs),
    /// Two tokens, constant normalized guidance from `t` to `s`.
    #[command(name = "thm2d")]
    Thm2d {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, allow_hyphen_values = true)]
        w: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two tokens, three-piece schedule: coefficients, and the output law
    /// when `--p`/`--q` are given.
    #[command(name = "cor2d-3piece")]
    Cor2d3Piece {
        #[arg(long, requires = "q")]
        p: Option<PathBuf>,
        #[arg(long, requires = "p")]
        q: Option<PathBuf>,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        w0: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        w1: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        w2: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
        /// Coefficient table.
        #[arg(long)]
        out: PathBuf,
        /// Output law; needs `--p` and `--q`.
        #[arg(long, requires = "p")]
        dist_out: Option<PathBuf>,
    },
    /// Mask mass `(t/T)^Z` for several partition values.
    #[command(name = "unmask-curve")]
    UnmaskCurve {
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        zw: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn start_or_mask(start: Option<&PathBuf>, space: StateSpace) -> Result<DiscreteDistribution> {
    match start {
        Some(path) => load(path, Some(space)),
        None => Ok(DiscreteDistribution::all_mask(space)?),
    }
}

fn coefficient_table(c: &ThreePieceCoefficients) -> Table {
    let mut table = Table::new(["coefficient", "value"]);
    for (name, v) in ThreePieceCoefficients::NAMES.iter().zip(c.as_array()) {
        table.rows.push(vec![Cell::from(*name), v.into()]);
    }
    table
}

fn piecewise_cmd(args: PiecewiseArgs, normalized: bool) -> Result<Run> {
    let name = if normalized { "closed-form thm1d-piecewise-norm" } else { "closed-form thm1d-piecewise" };
    let mut run = Run::new(name, manifest_for(&args.out));
    let (p, q) = load_pair(&args.pair, None)?;
    let sched = noise(&args.noise)?;
    let (partition, weights) = match &args.w_schedule {
        Some(spec) => GuidanceSchedule::parse(spec)?
            .piecewise_segments(sched.horizon(), args.t_min)
            .with_context(|| format!("`{spec}` is not piecewise constant"))?,
        None => (args.partition.clone(), args.weights.clone()),
    };
    let result = if normalized {
        theorem_1d_piecewise_normalized(&p, &q, &partition, &weights, &sched)?
    } else {
        theorem_1d_piecewise_unnormalized(&p, &q, &partition, &weights, &sched)?
    };
    let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let header = with_header(
        &run,
        vec![
            format!("schedule={}", sched.describe()),
            format!("partition={}", join(&partition)),
            format!("weights={}", join(&weights)),
            format!("partition_values={}", join(&result.partitions)),
            format!("residual_mask_mass={}", fmt_f64(result.residual_mask_mass())),
        ],
    );
    run.write(&args.out, &distribution_to_csv(&result.distribution, &header))?;
    Ok(run)
}

pub fn closed_form(cmd: ClosedForm) -> Result<Run> {
    match cmd {
        ClosedForm::Thm1dGeneral { pair, noise: n, w_schedule, t, start, quad_tol, out } => {
            let mut run = Run::new("closed-form thm1d-general", manifest_for(&out));
            let (p, q) = load_pair(&pair, None)?;
            let sched = noise(&n)?;
            let schedule = GuidanceSchedule::parse(&w_schedule)?;
            let horizon = sched.horizon();
            let w_of_t = |s: f64| schedule.at_time(s, horizon);
            let start = start_or_mask(start.as_ref(), *p.space())?;
            let r = theorem_1d_general(&p, &q, &start, &w_of_t, &sched, t, quad_tol)?;
            let header = with_header(
                &run,
                vec![
                    format!("schedule={}", sched.describe()),
                    format!("w_schedule={}", schedule.describe()),
                    format!("t={}", fmt_f64(t)),
                    format!("exponent={}", fmt_f64(r.exponent)),
                ],
            );
            run.write(&out, &distribution_to_csv(&r.distribution, &header))?;
            Ok(run)
        }
        ClosedForm::Thm1dPiecewise(args) => piecewise_cmd(args, false),
        ClosedForm::Thm1dPiecewiseNorm(args) => piecewise_cmd(args, true),
        ClosedForm::Thm2d { pair, noise: n, w, t, s, start, out } => {
            let mut run = Run::new("closed-form thm2d", manifest_for(&out));
            let (p, q) = load_pair(&pair, None)?;
            let sched = noise(&n)?;
            let start = start_or_mask(start.as_ref(), *p.space())?;
            let r = theorem_2d_constant(&start, &p, &q, w, &sched, t, s)?;
            let header = with_header(
                &run,
                vec![format!("schedule={}", sched.describe()), format!("w={w}"), format!("t={t}"), format!("s={s}")],
            );
            run.write(&out, &distribution_to_csv(&r, &header))?;
            Ok(run)
        }
        ClosedForm::Cor2d3Piece { p, q, noise: n, w0, w1, w2, t1, t2, out, dist_out } => {
            let mut run = Run::new("closed-form cor2d-3piece", manifest_for(&out));
            let sched = noise(&n)?;
            let params = vec![
                format!("schedule={}", sched.describe()),
                format!("w0={w0}"),
                format!("w1={w1}"),
                format!("w2={w2}"),
                format!("t1={t1}"),
                format!("t2={t2}"),
            ];
            let coef = match (p, q) {
                (Some(p), Some(q)) => {
                    let (p, q) = load_pair(&PairArgs { p, q }, None)?;
                    let (dist, coef) = corollary_2d_threepiece(&p, &q, w0, w1, w2, t1, t2, &sched)?;
                    if let Some(path) = &dist_out {
                        let header = with_header(&run, params.clone());
                        run.write(path, &distribution_to_csv(&dist, &header))?;
                    }
                    coef
                }
                _ => threepiece_coefficients(&sched, t1, t2)?,
            };
            let header = with_header(&run, params);
            run.write(&out, &coefficient_table(&coef).to_csv(&header))?;
            Ok(run)
        }
        ClosedForm::UnmaskCurve { noise: n, zw, samples, out } => {
            let mut run = Run::new("closed-form unmask-curve", manifest_for(&out));
            let sched = noise(&n)?;
            let table = unmask_table(&zw, &sched, samples)?;
            let header = with_header(&run, vec![format!("schedule={}", sched.describe())]);
            run.write(&out, &table.to_csv(&header))?;
            Ok(run)
        }
    }
}

fn unmask_table(zw: &[f64], sched: &NoiseSchedule, samples: usize) -> Result<Table> {
    let curve = unmasking_curve(zw, sched, samples)?;
    let mut cols = vec!["t".to_string()];
    cols.extend(zw.iter().map(|z| format!("zw_{z}")));
    let mut table = Table::new(cols);
    for (k, &t) in curve.times.iter().enumerate() {
        let mut row = vec![Cell::from(t)];
        row.extend(curve.columns.iter().map(|c| Cell::from(c[k])));
        table.push(row)?;
    }
    Ok(table)
}

fn resolve_source(source: &SourceArgs, one_token: bool) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    match (&source.p, &source.q, source.toy_class) {
        (Some(p), Some(q), None) => load_pair(&PairArgs { p: p.clone(), q: q.clone() }, None),
        (None, None, Some(k)) => {
            ensure!(k < 2, "the toy dataset has classes 0 and 1");
            let toy = build_toy_dataset_with(ToyLayout::default())?;
            if one_token {
                Ok(toy.row_marginals(k)?)
            } else {
                Ok((toy.class_tables[k].clone(), toy.mixture.clone()))
            }
        }
        _ => bail!("give either --p and --q, or --toy-class"),
    }
}

pub fn compare(source: &SourceArgs, n: &NoiseArgs, sampler: &SamplerArgs, w_grid: &[f64], out: &Path) -> Result<Run> {
    let mut run = Run::new("compare", manifest_for(out));
    run.set_seed(sampler.seed);
    let (p, q) = resolve_source(source, true)?;
    let sched = noise(n)?;
    let cfg = sampler_config(sampler)?;
    let rows = mechanism_compare(*p.space(), &p, &q, w_grid, &sched, &cfg)?;
    let mut table = Table::new([
        "mechanism",
        "w",
        "partition",
        "reference",
        "tv_reference",
        "tv_tilt",
        "mask_mass_mid",
        "overflow_clips",
        "degenerate_trajectories",
    ]);
    for r in &rows {
        run.counters.overflow_clips += r.overflow_clips;
        run.counters.degenerate_trajectories += r.degenerate_trajectories;
        table.push(vec![
            r.mechanism.name().into(),
            r.w.into(),
            r.partition.into(),
            r.reference.into(),
            r.tv_reference.into(),
            r.tv_tilt.into(),
            r.mask_mass_mid.into(),
            r.overflow_clips.into(),
            r.degenerate_trajectories.into(),
        ])?;
    }
    let header = with_header(
        &run,
        vec![
            format!("schedule={}", sched.describe()),
            format!("sampler={}", cfg.kind.name()),
            format!("steps={}", cfg.steps),
            format!("trajectories={}", cfg.trajectories),
            format!("seed={}", cfg.seed),
        ],
    );
    run.write(out, &table.to_csv(&header))?;
    Ok(run)
}

pub fn sweep(
    source: &SourceArgs,
    n: &NoiseArgs,
    sampler: &SamplerArgs,
    mechanism: &str,
    specs: &[String],
    out: &Path,
) -> Result<Run> {
    let mut run = Run::new("sweep", manifest_for(out));
    run.set_seed(sampler.seed);
    let (p, q) = resolve_source(source, false)?;
    let sched = noise(n)?;
    let cfg = sampler_config(sampler)?;
    let mechanism = Mechanism::parse(mechanism)?;
    let schedules = specs.iter().map(|s| GuidanceSchedule::parse(s)).collect::<Result<Vec<_>, _>>()?;
    let rows = schedule_sweep(*p.space(), &p, &q, mechanism, &schedules, &sched, &cfg)?;
    let mut cols = vec!["schedule", "parameter", "mechanism", "tv_reference"];
    cols.extend(ThreePieceCoefficients::NAMES);
    cols.extend(["tv_corollary", "overflow_clips"]);
    let mut table = Table::new(cols);
    for r in &rows {
        run.counters.overflow_clips += r.overflow_clips;
        let mut row: Vec<Cell> =
            vec![r.schedule.clone().into(), r.parameter.into(), r.mechanism.name().into(), r.tv_reference.into()];
        let coef = r.coefficients.map_or([f64::NAN; 6], |c| c.as_array());
        row.extend(coef.iter().map(|&c| Cell::from(c)));
        row.push(r.tv_corollary.unwrap_or(f64::NAN).into());
        row.push(r.overflow_clips.into());
        table.push(row)?;
    }
    let header = with_header(
        &run,
        vec![
            format!("schedule={}", sched.describe()),
            format!("sampler={}", cfg.kind.name()),
            format!("steps={}", cfg.steps),
            format!("trajectories={}", cfg.trajectories),
            format!("seed={}", cfg.seed),
        ],
    );
    run.write(out, &table.to_csv(&header))?;
    Ok(run)
}

#[derive(Args)]
pub struct ToyArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Also render SVG plots next to the CSV tables.
    #[arg(long)]
    svg: bool,
    /// Class used as `p`; the mixture is `q`.
    #[arg(long, default_value_t = 0)]
    class: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8", allow_hyphen_values = true)]
    ws: Vec<f64>,
    /// `w:gamma` pairs for the combined panels.
    #[arg(long, value_delimiter = ',', default_value = "4:1,8:1,8:2")]
    pairs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    zw: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,1")]
    t2: Vec<f64>,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    #[arg(long, default_value_t = 27)]
    grid_side: usize,
    /// Corner tile of each class: two of `tl`, `tr`, `bl`, `br`.
    #[arg(long, value_delimiter = ',', default_value = "tl,br")]
    corners: Vec<String>,
    #[command(flatten)]
    noise: NoiseArgs,
}

fn parse_corner(s: &str) -> Result<Corner> {
    Ok(match s.trim() {
        "tl" => Corner::TopLeft,
        "tr" => Corner::TopRight,
        "bl" => Corner::BottomLeft,
        "br" => Corner::BottomRight,
        other => bail!("unknown corner `{other}`"),
    })
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (w, g) = s.split_once(':').with_context(|| format!("pair `{s}` must look like w:gamma"))?;
    Ok((w.trim().parse()?, g.trim().parse()?))
}

/// Clean cells of a two-token table as a `side x side` grid.
fn grid_cells(toy: &ToyDataset, values: &[f64]) -> Vec<Vec<f64>> {
    let v = toy.grid_side + 1;
    (0..toy.grid_side).map(|r| values[r * v..r * v + toy.grid_side].to_vec()).collect()
}

/// Mask mass must fall as `Z` grows at every interior time.
fn check_unmask_ordering(table: &Table, zw: &[f64]) -> Result<()> {
    let mut order: Vec<usize> = (0..zw.len()).collect();
    order.sort_by(|&a, &b| zw[a].total_cmp(&zw[b]));
    let last = table.rows.len().saturating_sub(1);
    for row in &table.rows[1..last] {
        let value = |k: usize| match row[k + 1] {
            Cell::Num(x) => x,
            _ => f64::NAN,
        };
        for pair in order.windows(2) {
            let (lo, hi) = (value(pair[0]), value(pair[1]));
            ensure!(
                zw[pair[0]] == zw[pair[1]] || hi < lo,
                "unmasking curve for Z={} is not below Z={}",
                zw[pair[1]],
                zw[pair[0]]
            );
        }
    }
    Ok(())
}

pub fn toy(args: &ToyArgs) -> Result<Run> {
    ensure!(args.corners.len() == 2, "--corners needs exactly two entries");
    ensure!(args.class < 2, "the toy dataset has classes 0 and 1");
    let dir = &args.out_dir;
    let mut run = Run::new("toy", dir.join("manifest.csv"));
    let layout = ToyLayout {
        grid_side: args.grid_side,
        corners: [parse_corner(&args.corners[0])?, parse_corner(&args.corners[1])?],
    };
    let toy = build_toy_dataset_with(layout)?;
    let sched = noise(&args.noise)?;
    let layout_note = format!("layout=side {} corners {}", args.grid_side, args.corners.join("/"));

    let mut tables: Vec<(String, String, DiscreteDistribution)> = vec![
        ("class0".into(), "class 0".into(), toy.class_tables[0].clone()),
        ("class1".into(), "class 1".into(), toy.class_tables[1].clone()),
        ("mixture".into(), "mixture".into(), toy.mixture.clone()),
    ];
    let p = &toy.class_tables[args.class];
    for (w, d) in tilted_panels(p, &toy.mixture, &args.ws)? {
        tables.push((format!("tilted_w{w}"), format!("tilted p^(w) at w={w}"), d));
    }
    let pairs = args.pairs.iter().map(|s| parse_pair(s)).collect::<Result<Vec<_>>>()?;
    for c in combined_panels(p, &toy.mixture, &pairs)? {
        let (w, g) = c.strengths();
        tables.push((format!("combined_w{w}_g{g}"), format!("combined p^(w,gamma) at w={w}, gamma={g}, normalized"), c.normalized()?));
    }
    for (stem, title, d) in &tables {
        let header = with_header(&run, vec![layout_note.clone(), format!("table={title}"), format!("p=class {}", args.class)]);
        let csv = distribution_to_csv(d, &header);
        run.write(&dir.join(format!("{stem}.csv")), &csv)?;
        if args.svg {
            let image = svg::heat_grid(title, &grid_cells(&toy, d.values()), &csv);
            run.write(&dir.join(format!("{stem}.svg")), &image)?;
        }
    }

    let curve = unmask_table(&args.zw, &sched, args.samples)?;
    check_unmask_ordering(&curve, &args.zw)?;
    let csv = curve.to_csv(&with_header(&run, vec![format!("schedule={}", sched.describe())]));
    run.write(&dir.join("unmask_curve.csv"), &csv)?;
    if args.svg {
        let xs: Vec<f64> = column(&curve, 0);
        let series: Vec<(String, Vec<f64>)> =
            args.zw.iter().enumerate().map(|(k, z)| (format!("Z={z}"), column(&curve, k + 1))).collect();
        run.write(&dir.join("unmask_curve.svg"), &svg::line_plot("mask probability p_t(M)", "t", &xs, &series, &csv))?;
    }

    let coef = coefficient_curves(&sched, &args.t2, args.samples)?;
    let csv = coef.to_csv(&with_header(&run, vec![format!("schedule={}", sched.describe())]));
    run.write(&dir.join("coefficients.csv"), &csv)?;
    if args.svg {
        for &t2 in &args.t2 {
            let rows: Vec<&Vec<Cell>> = coef.rows.iter().filter(|r| matches!(r[0], Cell::Num(x) if x == t2)).collect();
            let num = |r: &Vec<Cell>, k: usize| match r[k] {
                Cell::Num(x) => x,
                _ => f64::NAN,
            };
            let xs: Vec<f64> = rows.iter().map(|r| num(r, 1)).collect();
            let series: Vec<(String, Vec<f64>)> = ThreePieceCoefficients::NAMES
                .iter()
                .enumerate()
                .map(|(k, name)| (name.to_string(), rows.iter().map(|r| num(r, k + 2)).collect()))
                .collect();
            let title = format!("three-piece coefficients, t2={t2}");
            run.write(&dir.join(format!("coefficients_t2_{t2}.svg")), &svg::line_plot(&title, "t1", &xs, &series, &csv))?;
        }
    }
    Ok(run)
}

fn column(table: &Table, k: usize) -> Vec<f64> {
    table
        .rows
        .iter()
        .map(|r| match r[k] {
            Cell::Num(x) => x,
            _ => f64::NAN,
        })
        .collect()
}
