//! Command-line front end: parse a binary image, detect and repair its
//! critical vertices, verify manifoldness and topology preservation, and
//! export grids, meshes and machine-readable reports.
//!
//! Exit codes: 0 success, 1 I/O or parse error, 2 internal invariant
//! violation (an inconsistency the pipeline is supposed to rule out).

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use wellcomposed::complex::{
    build_p_complex, build_q_complex, check_well_composed, derive_bp, PolyComplex,
};
use wellcomposed::criticality::{
    build_criticality_table, detect_critical, vertex_pattern, SymmetryGroup,
};
use wellcomposed::ecm_grid::{build_q_grid, dump_grid, GrayscaleGrid};
use wellcomposed::homology::{betti, euler};
use wellcomposed::image_io::{parse_coords, parse_voxgrid};
use wellcomposed::mesh_export::{triangulate_boundary, write_obj};
use wellcomposed::point::Point3;
use wellcomposed::repair::{repair_grid, RepairOutcome};
use wellcomposed::BinaryImage;

#[derive(Parser)]
#[command(
    name = "wellcomposed",
    about = "Repair 3D binary images into well-composed polyhedral complexes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Input format; inferred from the extension (.vox/.csv) when omitted.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Bound the worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record real stage timings in reports instead of zeros.
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Voxgrid,
    Coords,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Q,
    P,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize an image: voxels, bounding box, cells, critical vertices.
    Info { input: PathBuf },
    /// Print the critical vertex points, sorted, one per line.
    Detect { input: PathBuf },
    /// Repair the image and write the repaired grid.
    Repair { input: PathBuf, out_grid: PathBuf },
    /// Run the full pipeline and emit a JSON report.
    Verify {
        input: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print Betti numbers of the original and repaired complexes.
    Betti { input: PathBuf },
    /// Triangulate a boundary surface and write an OBJ mesh.
    Mesh {
        input: PathBuf,
        which: Which,
        out_obj: PathBuf,
    },
    /// Write the cell-color grid of the original or repaired complex.
    DumpGrid {
        input: PathBuf,
        which: Which,
        out: PathBuf,
    },
}

/// Report emitted by `verify`, one flat JSON object.
#[derive(Serialize)]
struct PipelineReport {
    input_path: String,
    voxels: usize,
    cells_q: [usize; 4],
    cells_p: [usize; 4],
    critical_count: usize,
    critical_classes_found: usize,
    betti_q: [usize; 3],
    betti_p: [usize; 3],
    euler_q: i64,
    euler_p: i64,
    e1_violations_q: usize,
    e2_violations_q: usize,
    well_composed_p: bool,
    bp_element_count: usize,
    timings_ms: BTreeMap<&'static str, u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<[i32; 3]>,
}

enum Failure {
    Usage(anyhow::Error),
    Invariant(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn invariant<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Invariant(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(e)) => {
            eprintln!("internal invariant violated: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(anyhow::Error::from)?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Info { input } => cmd_info(cli, input),
        Command::Detect { input } => cmd_detect(cli, input),
        Command::Repair { input, out_grid } => cmd_repair(cli, input, out_grid),
        Command::Verify { input, out } => cmd_verify(cli, input, out.as_deref()),
        Command::Betti { input } => cmd_betti(cli, input),
        Command::Mesh {
            input,
            which,
            out_obj,
        } => cmd_mesh(cli, input, *which, out_obj),
        Command::DumpGrid { input, which, out } => cmd_dump_grid(cli, input, *which, out),
    }
}

fn load_image(cli: &Cli, path: &Path) -> Result<BinaryImage, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    let format = match cli.format {
        Some(f) => f,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("vox") => Format::Voxgrid,
            Some("csv") => Format::Coords,
            other => {
                return Err(Failure::Usage(anyhow::anyhow!(
                    "cannot infer format from extension {other:?}; pass --format"
                )))
            }
        },
    };
    let img = match format {
        Format::Voxgrid => parse_voxgrid(&bytes)?,
        Format::Coords => parse_coords(&bytes)?,
    };
    if img.duplicates_collapsed > 0 {
        eprintln!(
            "warning: collapsed {} duplicate coordinate lines",
            img.duplicates_collapsed
        );
    }
    Ok(img)
}

struct Stages {
    grid: GrayscaleGrid,
    critical: Vec<Point3>,
    outcome: RepairOutcome,
}

fn detect_and_repair(img: &BinaryImage) -> Stages {
    let grid = build_q_grid(img);
    let table = build_criticality_table();
    let critical = detect_critical(&grid, &table);
    let outcome = repair_grid(&grid, &critical);
    Stages {
        grid,
        critical,
        outcome,
    }
}

fn cmd_info(cli: &Cli, input: &Path) -> Result<(), Failure> {
    let img = load_image(cli, input)?;
    let s = detect_and_repair(&img);
    println!("voxels: {}", img.len());
    match img.bbox() {
        Some((lo, hi)) => println!("bbox: {lo} .. {hi}"),
        None => println!("bbox: empty"),
    }
    let counts = |g: &GrayscaleGrid| -> [usize; 4] {
        let mut c = [0; 4];
        for p in g.cell_points() {
            c[g.get(p) as usize] += 1;
        }
        c
    };
    println!("cells_q: {:?}", counts(&s.grid));
    println!("critical: {}", s.critical.len());
    println!("cells_p: {:?}", counts(&s.outcome.g_p));
    Ok(())
}

fn cmd_detect(cli: &Cli, input: &Path) -> Result<(), Failure> {
    let img = load_image(cli, input)?;
    let grid = build_q_grid(&img);
    let table = build_criticality_table();
    for p in detect_critical(&grid, &table) {
        println!("{p}");
    }
    Ok(())
}

fn cmd_repair(cli: &Cli, input: &Path, out_grid: &Path) -> Result<(), Failure> {
    let img = load_image(cli, input)?;
    let s = detect_and_repair(&img);
    std::fs::write(out_grid, dump_grid(&s.outcome.g_p))
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", out_grid.display()))?;
    Ok(())
}

fn cmd_betti(cli: &Cli, input: &Path) -> Result<(), Failure> {
    let img = load_image(cli, input)?;
    let s = detect_and_repair(&img);
    let q = build_q_complex(&s.grid).map_err(invariant)?;
    let p = build_p_complex(&s.grid, &s.outcome).map_err(invariant)?;
    let (q0, q1, q2) = betti(&q);
    let (p0, p1, p2) = betti(&p);
    println!("betti_q: ({q0},{q1},{q2})");
    println!("betti_p: ({p0},{p1},{p2})");
    Ok(())
}

fn cmd_mesh(cli: &Cli, input: &Path, which: Which, out_obj: &Path) -> Result<(), Failure> {
    let img = load_image(cli, input)?;
    let s = detect_and_repair(&img);
    let complex = match which {
        Which::Q => build_q_complex(&s.grid).map_err(invariant)?,
        Which::P => build_p_complex(&s.grid, &s.outcome).map_err(invariant)?,
    };
    let mesh = triangulate_boundary(&complex);
    std::fs::write(out_obj, write_obj(&mesh))
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", out_obj.display()))?;
    Ok(())
}

fn cmd_dump_grid(cli: &Cli, input: &Path, which: Which, out: &Path) -> Result<(), Failure> {
    let img = load_image(cli, input)?;
    let s = detect_and_repair(&img);
    let grid = match which {
        Which::Q => &s.grid,
        Which::P => &s.outcome.g_p,
    };
    std::fs::write(out, dump_grid(grid))
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", out.display()))?;
    Ok(())
}

fn cmd_verify(cli: &Cli, input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let mut timings: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut clock = |name: &'static str, start: Instant| {
        timings.insert(
            name,
            if cli.timings {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
        );
    };

    let t = Instant::now();
    let img = load_image(cli, input)?;
    clock("parse", t);

    let t = Instant::now();
    let grid = build_q_grid(&img);
    clock("build_grid", t);

    let t = Instant::now();
    let table = build_criticality_table();
    let critical = detect_critical(&grid, &table);
    clock("detect", t);

    let t = Instant::now();
    let outcome = repair_grid(&grid, &critical);
    clock("repair", t);

    let t = Instant::now();
    let q = build_q_complex(&grid).map_err(invariant)?;
    let p = build_p_complex(&grid, &outcome).map_err(invariant)?;
    clock("complexes", t);

    let t = Instant::now();
    let report_q = check_well_composed(&q);
    let report_p = check_well_composed(&p);
    clock("well_composed", t);

    let t = Instant::now();
    let betti_q = betti(&q);
    let betti_p = betti(&p);
    clock("homology", t);

    let t = Instant::now();
    let bp = derive_bp(&outcome.g_p, &p).map_err(invariant)?;
    clock("elements", t);

    let group = SymmetryGroup::full();
    let classes: std::collections::BTreeSet<u8> = critical
        .iter()
        .map(|v| group.canonical_pattern(vertex_pattern(&grid, *v)))
        .collect();

    let counts = |k: &PolyComplex| k.counts();
    let mut violations: Vec<[i32; 3]> = report_p
        .e1_violations
        .iter()
        .map(|(k, _)| k.0)
        .chain(report_p.e2_violations.iter().map(|k| k.0))
        .collect();
    violations.sort_unstable();

    let report = PipelineReport {
        input_path: input.display().to_string(),
        voxels: img.len(),
        cells_q: counts(&q),
        cells_p: counts(&p),
        critical_count: critical.len(),
        critical_classes_found: classes.len(),
        betti_q: [betti_q.0, betti_q.1, betti_q.2],
        betti_p: [betti_p.0, betti_p.1, betti_p.2],
        euler_q: euler(&q),
        euler_p: euler(&p),
        e1_violations_q: report_q.e1_violations.len(),
        e2_violations_q: report_q.e2_violations.len(),
        well_composed_p: report_p.is_well_composed,
        bp_element_count: bp.len(),
        timings_ms: timings,
        violations,
    };

    // These hold for every valid run; a mismatch is a pipeline defect.
    if report.betti_q != report.betti_p || report.euler_q != report.euler_p {
        return Err(Failure::Invariant(anyhow::anyhow!(
            "topology changed: betti {:?} -> {:?}, euler {} -> {}",
            report.betti_q,
            report.betti_p,
            report.euler_q,
            report.euler_p
        )));
    }

    let json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    match out {
        Some(path) => std::fs::write(path, json + "\n")
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}
