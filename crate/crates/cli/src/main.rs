use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use volint::curve::{circular_area_field, curvature_from_area, global_area_invariant};
use volint::features::{threshold_edges, Direction, Quantity, ThresholdOptions};
use volint::gamma::NormalMethod;
use volint::integrals::BisectionConfig;
use volint::invariants::{invariant_field, FieldOptions, FieldResult, InvariantConfig};
use volint::io::{self, ColorMap};
use volint::TriMesh;

/// Integral invariants of triangle meshes and planar curves.
#[derive(Debug, Parser)]
#[command(name = "volint", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spherical volume invariant at every vertex.
    Svi {
        #[command(flatten)]
        run: MeshRun,
    },
    /// Curvature from the volume invariant or from the ball covariance.
    Curvature {
        #[command(flatten)]
        run: MeshRun,
        #[arg(long, value_enum, default_value_t = QuantityArg::Mean)]
        quantity: QuantityArg,
        /// Principal directions as CSV (k1, k2, gauss only).
        #[arg(long)]
        directions: Option<PathBuf>,
    },
    /// Marks vertices whose field value is an outlier.
    Edges {
        #[command(flatten)]
        run: MeshRun,
        #[arg(long, value_enum, default_value_t = QuantityArg::Svi)]
        quantity: QuantityArg,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = DirectionArg::Below)]
        direction: DirectionArg,
        /// Leave flagged vertices out of the statistics.
        #[arg(long)]
        exclude_flagged: bool,
        /// Relative spread below which the field counts as constant.
        #[arg(long, default_value_t = 1e-3)]
        constant_tol: f64,
    },
    /// Circular area invariant of a closed polyline given as x,y CSV.
    Curve {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; defaults to the input path with a .area.csv suffix.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',', required = true)]
        radius: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct MeshRun {
    /// PLY or OBJ mesh.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; defaults to the input path with a .<quantity>.csv suffix.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Coloured PLY output.
    #[arg(long)]
    output_ply: Option<PathBuf>,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', required = true)]
    radius: Vec<f64>,
    /// Bisection tolerance for triangles crossing the sphere.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Display exponent for the coloured PLY.
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    #[arg(long, env = "VOLINT_WORKERS")]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = NormalArg::Average)]
    normal: NormalArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QuantityArg {
    Svi,
    Mean,
    Gauss,
    K1,
    K2,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Svi => Quantity::Svi,
            QuantityArg::Mean => Quantity::Mean,
            QuantityArg::Gauss => Quantity::Gauss,
            QuantityArg::K1 => Quantity::K1,
            QuantityArg::K2 => Quantity::K2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormalArg {
    Average,
    AreaWeighted,
    LsqPlane,
}

impl From<NormalArg> for NormalMethod {
    fn from(n: NormalArg) -> Self {
        match n {
            NormalArg::Average => NormalMethod::Average,
            NormalArg::AreaWeighted => NormalMethod::AreaWeighted,
            NormalArg::LsqPlane => NormalMethod::LsqPlane,
        }
    }
}

/// Failure category; the discriminant is the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Parse = 1,
    Validation = 2,
    Compute = 3,
}

struct Failure {
    kind: Kind,
    error: anyhow::Error,
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn or_fail(self, kind: Kind) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_fail(self, kind: Kind) -> Result<T, Failure> {
        self.map_err(|e| Failure { kind, error: e.into() })
    }
}

fn invalid(message: String) -> Failure {
    Failure {
        kind: Kind::Validation,
        error: anyhow!(message),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Kind::Validation as u8 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Svi { run } => cmd_mesh(&run, Quantity::Svi, None),
        Command::Curvature {
            run,
            quantity,
            directions,
        } => {
            let quantity = Quantity::from(quantity);
            if quantity == Quantity::Svi {
                Err(invalid("curvature needs --quantity mean, gauss, k1 or k2".into()))
            } else {
                cmd_mesh(&run, quantity, directions.as_deref())
            }
        }
        Command::Edges {
            run,
            quantity,
            sigma,
            direction,
            exclude_flagged,
            constant_tol,
        } => {
            let opts = ThresholdOptions {
                sigma,
                direction: match direction {
                    DirectionArg::Below => Direction::Below,
                    DirectionArg::Above => Direction::Above,
                },
                exclude_flagged,
                constant_tolerance: constant_tol,
            };
            cmd_edges(&run, quantity.into(), &opts)
        }
        Command::Curve { input, csv, radius } => cmd_curve(&input, csv.as_deref(), &radius),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.kind as u8)
        }
    }
}

fn check_radii(radii: &[f64]) -> Outcome {
    match radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        Some(r) => Err(invalid(format!("radius must be positive, got {r}"))),
        None => Ok(()),
    }
}

/// `out.csv` becomes `out_r0.5.csv` when several radii are requested.
fn output_path(base: &Path, r: f64, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_r{r}.{ext}"),
        None => format!("{stem}_r{r}"),
    };
    base.with_file_name(name)
}

fn default_csv(input: &Path, tag: &str) -> PathBuf {
    input.with_extension(format!("{tag}.csv"))
}

fn field_options(run: &MeshRun, quantity: Quantity) -> Result<FieldOptions, Failure> {
    check_radii(&run.radius)?;
    let bisection = BisectionConfig::new(run.eps).or_fail(Kind::Validation)?;
    if !(run.power > 0.0) {
        return Err(invalid(format!("power exponent must be positive, got {}", run.power)));
    }
    let workers = match run.workers {
        Some(0) => return Err(invalid("worker count must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(FieldOptions {
        quantity,
        config: InvariantConfig {
            bisection,
            normal: run.normal.into(),
        },
        workers,
    })
}

fn load_mesh(path: &Path) -> Result<TriMesh, Failure> {
    let data = io::read_mesh_data(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_fail(Kind::Parse)?;
    let mesh = data
        .into_mesh()
        .with_context(|| format!("validating {}", path.display()))
        .or_fail(Kind::Validation)?;
    let report = mesh.report();
    eprintln!(
        "{}: {} vertices, {} triangles",
        path.display(),
        mesh.vertex_count(),
        mesh.triangle_count()
    );
    if !report.flipped_faces.is_empty() {
        eprintln!("warning: reoriented {} faces", report.flipped_faces.len());
    }
    if !report.dropped_faces.is_empty() {
        eprintln!("warning: dropped {} degenerate faces", report.dropped_faces.len());
    }
    if !report.non_manifold_edges.is_empty() {
        eprintln!("warning: {} non-manifold edges", report.non_manifold_edges.len());
    }
    if report.boundary_edges > 0 {
        eprintln!(
            "warning: surface is not closed ({} boundary edges); nearby vertices are flagged",
            report.boundary_edges
        );
    }
    Ok(mesh)
}

fn compute_field(mesh: &TriMesh, r: f64, opts: &FieldOptions) -> Result<FieldResult, Failure> {
    let start = Instant::now();
    let result = invariant_field(mesh, r, opts).or_fail(Kind::Compute)?;
    let s = &result.stats;
    eprintln!(
        "r={r}: {} in {:.3} s with {} workers, {:.1} triangles per ball on average, global average {:.9e}",
        opts.quantity,
        start.elapsed().as_secs_f64(),
        opts.workers,
        s.mean_triangles_per_ball,
        result.global_average
    );
    if s.bizarre_vertices + s.boundary_vertices + s.failed_vertices > 0 {
        eprintln!(
            "r={r}: {} bizarre, {} boundary, {} failed vertices",
            s.bizarre_vertices, s.boundary_vertices, s.failed_vertices
        );
    }
    if s.failed_vertices == mesh.vertex_count() {
        return Err(Failure {
            kind: Kind::Compute,
            error: anyhow!("no vertex could be evaluated at r={r}"),
        });
    }
    Ok(result)
}

fn cmd_mesh(run: &MeshRun, quantity: Quantity, directions: Option<&Path>) -> Outcome {
    let opts = field_options(run, quantity)?;
    if directions.is_some() && !quantity.needs_moments() {
        return Err(invalid(format!("--directions needs gauss, k1 or k2, not {quantity}")));
    }
    let mesh = load_mesh(&run.input)?;
    let csv = run.csv.clone().unwrap_or_else(|| default_csv(&run.input, quantity.name()));
    let many = run.radius.len() > 1;
    for &r in &run.radius {
        let result = compute_field(&mesh, r, &opts)?;
        let path = output_path(&csv, r, many);
        io::write_field_csv(&result.field, &path).or_fail(Kind::Parse)?;
        eprintln!("wrote {}", path.display());
        if let Some(ply) = &run.output_ply {
            let path = output_path(ply, r, many);
            let clamped =
                io::write_field_ply(&mesh, &result.field, ColorMap::RedToBlue, run.power, &path).or_fail(Kind::Parse)?;
            if clamped > 0 {
                eprintln!("warning: {clamped} negative values clamped to zero for display");
            }
            eprintln!("wrote {}", path.display());
        }
        if let (Some(base), Some(dirs)) = (directions, &result.directions) {
            let path = output_path(base, r, many);
            write_directions(&path, dirs).or_fail(Kind::Parse)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn write_directions(path: &Path, dirs: &[[volint::Vec3; 2]]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "vertex_index,d1x,d1y,d1z,d2x,d2y,d2z")?;
    for (i, [a, b]) in dirs.iter().enumerate() {
        writeln!(
            out,
            "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            a.x, a.y, a.z, b.x, b.y, b.z
        )?;
    }
    out.flush()?;
    Ok(())
}

const EDGE_COLOR: [u8; 3] = [255, 0, 0];
const PLAIN_COLOR: [u8; 3] = [200, 200, 200];

fn cmd_edges(run: &MeshRun, quantity: Quantity, threshold: &ThresholdOptions) -> Outcome {
    let opts = field_options(run, quantity)?;
    if !(threshold.sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {}", threshold.sigma)));
    }
    if !(threshold.constant_tolerance >= 0.0) {
        return Err(invalid(format!(
            "constant tolerance must be non-negative, got {}",
            threshold.constant_tolerance
        )));
    }
    let mesh = load_mesh(&run.input)?;
    let csv = run.csv.clone().unwrap_or_else(|| default_csv(&run.input, "edges"));
    let many = run.radius.len() > 1;
    for &r in &run.radius {
        let result = compute_field(&mesh, r, &opts)?;
        let mask = threshold_edges(&result.field, threshold).or_fail(Kind::Compute)?;
        eprintln!(
            "r={r}: mean {:.9e}, std {:.9e}, threshold {:.9e}, {} of {} vertices marked",
            mask.mean,
            mask.std,
            mask.threshold,
            mask.count(),
            mesh.vertex_count()
        );
        if mask.constant_field {
            eprintln!("warning: field is constant; nothing marked");
        }
        let path = output_path(&csv, r, many);
        write_mask(&path, &result, &mask.mask).or_fail(Kind::Parse)?;
        eprintln!("wrote {}", path.display());
        if let Some(ply) = &run.output_ply {
            let path = output_path(ply, r, many);
            let colors: Vec<[u8; 3]> = mask
                .mask
                .iter()
                .map(|&m| if m { EDGE_COLOR } else { PLAIN_COLOR })
                .collect();
            io::write_colored_ply(&mesh, &colors, &path).or_fail(Kind::Parse)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn write_mask(path: &Path, result: &FieldResult, mask: &[bool]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "vertex_index,value,edge,flags")?;
    for (i, (v, f)) in result.field.values.iter().zip(&result.field.flags).enumerate() {
        writeln!(out, "{i},{v:.16e},{},{}", mask[i] as u8, f.to_text())?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_curve(input: &Path, csv: Option<&Path>, radii: &[f64]) -> Outcome {
    check_radii(radii)?;
    let curve = io::read_curve_csv(input)
        .with_context(|| format!("reading {}", input.display()))
        .map_err(|error| {
            // A readable file whose points do not form a valid curve is a
            // validation failure, not a parse failure.
            let kind = match error.downcast_ref::<io::IoError>() {
                Some(io::IoError::Curve(_)) => Kind::Validation,
                _ => Kind::Parse,
            };
            Failure { kind, error }
        })?;
    eprintln!("{}: {} vertices", input.display(), curve.len());
    let base = csv.map_or_else(|| default_csv(input, "area"), Path::to_path_buf);
    let many = radii.len() > 1;
    for &r in radii {
        let start = Instant::now();
        let values = circular_area_field(&curve, r).or_fail(Kind::Compute)?;
        let global = global_area_invariant(&curve, r).or_fail(Kind::Compute)?;
        eprintln!(
            "r={r}: {} vertices in {:.3} s, global average {global:.9e}",
            values.len(),
            start.elapsed().as_secs_f64()
        );
        let path = output_path(&base, r, many);
        let write = || -> anyhow::Result<()> {
            let mut out = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
            writeln!(out, "vertex_index,x,y,value,kappa")?;
            for (i, (p, v)) in curve.points().iter().zip(&values).enumerate() {
                writeln!(
                    out,
                    "{i},{:.16e},{:.16e},{:.16e},{:.16e}",
                    p.x,
                    p.y,
                    v.value,
                    curvature_from_area(v.value, r)
                )?;
            }
            out.flush()?;
            Ok(())
        };
        write().or_fail(Kind::Parse)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_suffixes() {
        assert_eq!(output_path(Path::new("out.csv"), 0.5, false), PathBuf::from("out.csv"));
        assert_eq!(output_path(Path::new("d/out.csv"), 0.5, true), PathBuf::from("d/out_r0.5.csv"));
        assert_eq!(output_path(Path::new("out"), 2.0, true), PathBuf::from("out_r2"));
        assert_eq!(default_csv(Path::new("m/ico.ply"), "svi"), PathBuf::from("m/ico.svi.csv"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
