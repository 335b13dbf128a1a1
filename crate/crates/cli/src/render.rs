use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;
use nopath_core::oracle::brute_force_scenario;
use nopath_core::{prove_infeasibility, segment, write_pgm, CSpaceBitmap, GridSpec, Scenario};

use crate::{create, export, CliError, RunArgs};

#[derive(Args)]
pub struct RenderArgs {
    /// Scenario (`.toml`) or bitmap dump written by `--export-bitmap`.
    input: PathBuf,
    /// Output prefix; writes `<out>_bitmap.pgm` and `<out>_labels.pgm`.
    #[arg(long)]
    out: PathBuf,
    /// Horizontal and vertical axis of the image.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1])]
    axes: Vec<usize>,
    /// Cell index on every axis; entries for the two image axes are ignored.
    /// Required for grids with more than two axes.
    #[arg(long, value_delimiter = ',')]
    fixed: Option<Vec<usize>>,
    /// For scenarios: render the exhaustive bitmap instead of a prover run.
    #[arg(long)]
    oracle: bool,
    /// Scenario whose start and goal are marked on a rendered dump.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

const MARK: u8 = 128;

fn cell_of(spec: &GridSpec, q: &[f64]) -> Option<Vec<usize>> {
    (q.len() == spec.ndim()).then(|| spec.config_to_cell(q).ok()).flatten()
}

fn load_dump(path: &Path) -> Result<CSpaceBitmap, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    CSpaceBitmap::read_dump(BufReader::new(f)).map_err(|e| CliError::Dump(e.to_string()))
}

pub fn run(args: &RenderArgs) -> Result<u8, CliError> {
    let is_scenario = args.input.extension().is_some_and(|e| e == "toml");
    let (bitmap, marks_from) = if is_scenario {
        let sc = args.run.scenario(&args.input)?;
        let eff = sc.effective()?;
        let bm = if args.oracle {
            brute_force_scenario(&eff).map_err(|e| CliError::Usage(e.to_string()))?
        } else {
            let run = prove_infeasibility(&sc, &args.run.params(), &mut args.run.rng(0))?;
            export(&run, &args.run)?;
            run.bitmap
        };
        (bm, Some(eff))
    } else {
        let bm = load_dump(&args.input)?;
        let marks = match &args.scenario {
            Some(p) => Some(Scenario::load(p)?.effective()?),
            None => None,
        };
        (bm, marks)
    };
    let spec = bitmap.spec().clone();
    let n = spec.ndim();

    let (ax, ay) = match args.axes.as_slice() {
        [x, y] if x != y && *x < n && *y < n => (*x, *y),
        _ => return Err(CliError::Usage(format!("--axes needs two distinct axes below {n}"))),
    };
    let fixed = match &args.fixed {
        Some(f) if f.len() == n && f.iter().zip(spec.dims()).all(|(&i, &d)| i < d) => f.clone(),
        Some(_) => return Err(CliError::Usage(format!("--fixed needs {n} in-range cell indices"))),
        None if n == 2 => vec![0, 0],
        None => return Err(CliError::UnsupportedDimension(n)),
    };

    let labels = segment(&bitmap, args.run.connectivity);
    let levels = labels.gray_levels();
    let (w, h) = (spec.dims()[ax], spec.dims()[ay]);
    let mut free_img = Vec::with_capacity(w * h);
    let mut label_img = Vec::with_capacity(w * h);
    let mut m = fixed.clone();
    for y in 0..h {
        for x in 0..w {
            m[ax] = x;
            m[ay] = y;
            let c = spec.multi_to_lin_unchecked(&m);
            free_img.push(if bitmap.is_free(c) { 255 } else { 0 });
            label_img.push(levels[c]);
        }
    }
    if let Some(sc) = marks_from {
        for q in [sc.start.values(), sc.goal.values()] {
            // Only mark endpoints that lie in the rendered slice.
            if let Some(cell) = cell_of(&spec, q) {
                let in_slice = (0..n).all(|a| a == ax || a == ay || cell[a] == fixed[a]);
                if in_slice {
                    let i = cell[ay] * w + cell[ax];
                    free_img[i] = MARK;
                    label_img[i] = if label_img[i] == 255 { 0 } else { 255 };
                }
            }
        }
    }

    for (suffix, img) in [("bitmap", &free_img), ("labels", &label_img)] {
        let path = PathBuf::from(format!("{}_{suffix}.pgm", args.out.display()));
        write_pgm(create(&path)?, w, h, img).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(0)
}
